"""Discrete calculus on the periodic box [0, 2pi)^d.

Fields are real numpy arrays whose trailing ``d`` axes are the grid; any
leading axes are component indices.  Vector fields have shape ``(d, n, ..)``
and matrix fields ``(d, d, n, ..)`` with ``G[i, k] = d_k u^i``.

Transforms are real FFTs over the trailing axes.  Odd-order derivatives
drop the Nyquist mode so that the result stays real and exact for the
trigonometric interpolant.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .errors import DomainError, UnsupportedError

# symbol values below this are set to exactly zero
_SYMBOL_FLOOR = np.finfo(float).eps


class SpectralGrid:
    """Uniform grid with n points per direction on the 2pi-periodic torus."""

    def __init__(self, d: int, n: int):
        if d not in (2, 3):
            raise UnsupportedError(f"dimension must be 2 or 3, got {d}")
        if n < 4 or n & (n - 1):
            raise UnsupportedError(f"n must be a power of two >= 4, got {n}")
        self.d = d
        self.n = n
        self.shape = (n,) * d
        self.h = 2 * np.pi / n
        self.cell = self.h**d
        self.volume = (2 * np.pi) ** d
        self.axes = tuple(range(-d, 0))

        x1 = self.h * np.arange(n)
        self.x = np.array(np.meshgrid(*([x1] * d), indexing="ij"))

        full = np.fft.fftfreq(n, 1.0 / n)
        half = np.fft.rfftfreq(n, 1.0 / n)
        ks = [full] * (d - 1) + [half]
        self.spec_shape = tuple(len(k) for k in ks)
        self.k = np.array(np.meshgrid(*ks, indexing="ij"))
        kd = []
        for k1 in ks:
            k1 = k1.copy()
            k1[np.abs(k1) == n // 2] = 0.0
            kd.append(k1)
        # derivative wavenumbers, Nyquist removed
        self.kd = np.array(np.meshgrid(*kd, indexing="ij"))
        self.k2 = np.sum(self.k**2, axis=0)
        self.kabs = np.sqrt(self.k2)
        self.dealias_mask = self.kabs < n / 3.0

        inv = np.zeros_like(self.k2)
        nz = self.k2 > 0
        inv[nz] = 1.0 / self.k2[nz]
        self.inv_k2 = inv

        # multiplicity of each rfft mode in a full spectrum (for Parseval)
        w = np.full(self.spec_shape, 2.0)
        w[..., 0] = 1.0
        if n % 2 == 0:
            w[..., -1] = 1.0
        self.rfft_weight = w
        self._symbols = {}

    def __repr__(self):
        return f"SpectralGrid(d={self.d}, n={self.n})"

    # transforms

    def forward(self, f):
        return sfft.rfftn(f, axes=self.axes)

    def inverse(self, fh):
        return sfft.irfftn(fh, s=self.shape, axes=self.axes)

    # derivatives

    def grad(self, f):
        """Gradient; output component axis is prepended."""
        fh = self.forward(f)
        return np.array([self.inverse(1j * self.kd[j] * fh) for j in range(self.d)])

    def jacobian(self, v):
        """J[i, k] = d_k v^i for a vector field v."""
        vh = self.forward(v)
        return np.array([[self.inverse(1j * self.kd[k] * vh[i]) for k in range(self.d)] for i in range(self.d)])

    def div(self, v):
        vh = self.forward(v)
        return self.inverse(sum(1j * self.kd[j] * vh[j] for j in range(self.d)))

    def div_matrix(self, s):
        """(div S)^i = d_j S_ij."""
        sh = self.forward(s)
        return np.array([self.inverse(sum(1j * self.kd[j] * sh[i, j] for j in range(self.d))) for i in range(self.d)])

    def curl(self, v):
        """Scalar vorticity in 2d, vector in 3d."""
        if self.d == 2:
            vh = self.forward(v)
            return self.inverse(1j * self.kd[0] * vh[1] - 1j * self.kd[1] * vh[0])
        vh = self.forward(v)
        kd = self.kd
        return np.array(
            [
                self.inverse(1j * (kd[1] * vh[2] - kd[2] * vh[1])),
                self.inverse(1j * (kd[2] * vh[0] - kd[0] * vh[2])),
                self.inverse(1j * (kd[0] * vh[1] - kd[1] * vh[0])),
            ]
        )

    def laplacian(self, f):
        return self.inverse(-self.k2 * self.forward(f))

    def inv_lap_div(self, v):
        """Delta^-1 div v, symbol -i k.v/|k|^2, mean-free output."""
        vh = self.forward(v)
        return self.inverse(-1j * self.inv_k2 * sum(self.kd[j] * vh[j] for j in range(self.d)))

    def inv_lap_curl(self, v):
        """Delta^-1 curl v (scalar in 2d, vector in 3d)."""
        c = self.curl(v)
        return self.inverse(-self.inv_k2 * self.forward(c))

    def inv_lap(self, f):
        """Mean-free solution of Delta g = f - mean(f)."""
        return self.inverse(-self.inv_k2 * self.forward(f))

    # filters

    def mollifier_symbol(self, delta: float):
        """Gaussian symbol exp(-(delta |k|)^2 / 2) on the rfft layout."""
        key = float(delta)
        sym = self._symbols.get(key)
        if sym is None:
            sym = np.exp(-0.5 * (key * self.kabs) ** 2)
            sym[sym < _SYMBOL_FLOOR] = 0.0
            self._symbols[key] = sym
        return sym

    def mollify(self, f, delta: float):
        if not delta > 0:
            raise DomainError(f"mollification width must be > 0, got {delta}")
        return self.inverse(self.mollifier_symbol(delta) * self.forward(f))

    def dealias(self, f):
        return self.inverse(self.dealias_mask * self.forward(f))

    def mul(self, a, b):
        """Dealiased pointwise product."""
        return self.dealias(a * b)

    # quadrature

    def integrate(self, f):
        """Rectangle rule over the trailing grid axes."""
        return np.sum(f, axis=self.axes) * self.cell

    def mean(self, f):
        return np.mean(f, axis=self.axes)

    def pointwise_norm(self, f):
        """Euclidean (Frobenius) norm over leading component axes."""
        extra = f.ndim - self.d
        if extra == 0:
            return np.abs(f)
        return np.sqrt(np.sum(f**2, axis=tuple(range(extra))))

    def lp_norm(self, f, p: float, normalized: bool = False):
        """L^p norm on the torus; ``normalized`` uses the probability measure."""
        g = self.pointwise_norm(f)
        if np.isinf(p):
            return float(np.max(g))
        val = np.sum(g**p) * (self.cell if not normalized else 1.0 / g.size)
        return float(val ** (1.0 / p))

    def inner(self, f, g):
        """Grid L^2 inner product, summed over component axes."""
        return float(np.sum(f * g) * self.cell)

    def spectral_inner(self, f, g):
        """The same inner product evaluated on the Fourier side."""
        fh = self.forward(f)
        gh = self.forward(g)
        s = np.sum(self.rfft_weight * np.real(fh * np.conj(gh)))
        return float(s * self.cell / self.n**self.d)

    # commutators and Calderon-Zygmund split

    def commutator_r(self, b, a, delta: float, i: int, kind: int = 1):
        """DiPerna-Lions commutators along direction i.

        kind 1: b d_i a_delta - (b d_i a)_delta
        kind 2: d_i(a_delta b) - d_i((a b)_delta)
        """
        if not 0 <= i < self.d:
            raise DomainError(f"direction {i} out of range for d={self.d}")
        a_d = self.mollify(a, delta)
        di = lambda f: self.inverse(1j * self.kd[i] * self.forward(f))  # noqa: E731
        if kind == 1:
            return b * di(a_d) - self.mollify(b * di(a), delta)
        if kind == 2:
            return di(a_d * b) - di(self.mollify(a * b, delta))
        raise UnsupportedError(f"commutator kind must be 1 or 2, got {kind}")

    def cz_split_norms(self, u, p: float = 2):
        """(||curl u||_p, ||div u||_p, ||grad u||_p) with Frobenius pointwise norms."""
        if p not in (2, 3, 4):
            raise UnsupportedError(f"p must be 2, 3 or 4, got {p}")
        return (
            self.lp_norm(self.curl(u), p),
            self.lp_norm(self.div(u), p),
            self.lp_norm(self.jacobian(u), p),
        )

    def random_field(self, rng, kmax: float, ncomp: int | None = None, amp: float = 1.0):
        """Random real band-limited field with modes 0 < |k| <= kmax."""
        shape = self.spec_shape if ncomp is None else (ncomp,) + self.spec_shape
        fh = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        if kmax >= self.n // 2:
            raise DomainError(f"kmax must be below the Nyquist wavenumber {self.n // 2}")
        f = self.inverse(fh * ((self.kabs <= kmax) & (self.kabs > 0)))
        scale = np.max(np.abs(f))
        return amp * f / scale if scale > 0 else f


@lru_cache(maxsize=16)
def get_grid(d: int, n: int) -> SpectralGrid:
    """Shared grid instance per (d, n)."""
    return SpectralGrid(d, n)
