"""Barotropic pressure law and the relative-entropy functionals of density.

All functions accept a scalar or a numpy array for ``rho`` and return the
same kind.  ``H1`` is the relative entropy of the pressure law; ``H2`` and
``H3`` are the higher pressure moments

    H_l(rho) = rho * int_M^rho |P(s) - P(M)|^(l-1) (P(s) - P(M)) / s^2 ds,

evaluated from term-by-term antiderivatives of the binomially expanded
integrand.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import mpmath
import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError, UnsupportedError

# below this relative distance to M the closed form cancels catastrophically
_NEAR_M = 0.25
_GL_NODES = 16


@dataclass(frozen=True)
class PressureLaw:
    """p(rho) = a * rho**gamma around the reference mean density M."""

    a: float = 1.0
    gamma: float = 2.0
    M: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError(f"pressure coefficient a must be > 0, got {self.a}")
        if not self.M > 0:
            raise DomainError(f"reference density M must be > 0, got {self.M}")
        if not self.gamma > 1:
            raise UnsupportedError(f"gamma must be > 1 (gamma = 1 is not supported), got {self.gamma}")

    def validate_dimension(self, d: int) -> None:
        """Enforce gamma >= d / (4 - d)."""
        if d not in (2, 3):
            raise UnsupportedError(f"dimension must be 2 or 3, got {d}")
        bound = d / (4 - d)
        if self.gamma < bound:
            raise UnsupportedError(f"gamma={self.gamma} violates gamma >= d/(4-d) = {bound:g} for d={d}")

    @property
    def p_ref(self):
        """P(M)."""
        return self.a * self.M**self.gamma

    def sound_speed(self, rho):
        return np.sqrt(self.a * self.gamma * np.asarray(rho, dtype=float) ** (self.gamma - 1))


def _check_rho(rho, strict=False):
    if isinstance(rho, np.ndarray):
        bad = np.any(rho <= 0) if strict else np.any(rho < 0)
        if bad or not np.all(np.isfinite(rho)):
            raise DomainError("density must be finite and " + ("> 0" if strict else ">= 0"))
    elif (rho <= 0) if strict else (rho < 0):
        raise DomainError(f"density must be {'> 0' if strict else '>= 0'}, got {rho}")


def _as_input(rho):
    if isinstance(rho, (mpmath.mpf, float, int)):
        return rho
    return np.asarray(rho, dtype=float)


def pressure(law: PressureLaw, rho):
    rho = _as_input(rho)
    _check_rho(rho)
    return law.a * rho**law.gamma


def h1_rel(law: PressureLaw, rho):
    """Relative entropy H1(rho) - H1(M) - H1'(M)(rho - M) with H1 = a rho^g/(g-1)."""
    rho = _as_input(rho)
    _check_rho(rho)
    a, g, M = law.a, law.gamma, law.M
    return a * (rho**g - M**g - g * M ** (g - 1) * (rho - M)) / (g - 1)


def _moment_closed(law: PressureLaw, rho, n: int):
    """rho * int_M^rho (P(s) - P(M))^n / s^2 ds from the expanded antiderivative.

    Written with plain arithmetic so it also runs on mpmath numbers.
    """
    a, g, M = law.a, law.gamma, law.M
    pm = -law.p_ref
    total = -(pm**n) + rho * pm**n / M  # j = 0 term, antiderivative -1/s
    for j in range(1, n + 1):
        c = comb(n, j) * a**j * pm ** (n - j) / (g * j - 1)
        total = total + c * (rho ** (g * j) - rho * M ** (g * j - 1))
    return total


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


def _moment_gauss(law: PressureLaw, rho, n: int):
    # integrand keeps one sign on [M, rho]; accurate to round-off when rho ~ M
    x, w = _gauss_legendre(_GL_NODES)
    half = 0.5 * (rho - law.M)
    s = law.M + half[..., None] * (1.0 + x)
    f = (law.a * s**law.gamma - law.p_ref) ** n / s**2
    return rho * half * (f @ w)


def h_ell(law: PressureLaw, rho, ell: int):
    """H_ell(rho/M) for ell in {2, 3}; continuous at rho = 0."""
    if ell not in (2, 3):
        raise UnsupportedError(f"ell must be 2 or 3, got {ell}")
    rho = _as_input(rho)
    _check_rho(rho)
    if isinstance(rho, mpmath.mpf):
        val = _moment_closed(law, rho, ell)
        return val if ell == 3 or rho >= law.M else -val
    arr = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.empty_like(arr)
    near = np.abs(arr - law.M) < _NEAR_M * law.M
    out[~near] = _moment_closed(law, arr[~near], ell)
    out[near] = _moment_gauss(law, arr[near], ell)
    if ell == 2:
        out = np.where(arr < law.M, -out, out)
    return out.reshape(np.shape(rho)) if np.ndim(rho) else float(out[0])


def h3_expanded(law: PressureLaw, rho):
    """The four-term H3 expansion, written out explicitly."""
    a, g, M = law.a, law.gamma, law.M
    pm = law.p_ref
    rho = _as_input(rho)
    return (
        a**3 * (rho ** (3 * g) - M ** (3 * g - 1) * rho) / (3 * g - 1)
        - 3 * a**2 * pm * (rho ** (2 * g) - M ** (2 * g - 1) * rho) / (2 * g - 1)
        + 3 * a * pm**2 * (rho**g - M ** (g - 1) * rho) / (g - 1)
        + pm**3 * (1 - rho / M)
    )


def h_ell_quad(law: PressureLaw, rho: float, ell: int, tol: float = 1e-12) -> float:
    """Adaptive-quadrature value of H_ell; independent of the closed form."""
    if ell not in (2, 3):
        raise UnsupportedError(f"ell must be 2 or 3, got {ell}")
    rho = float(rho)
    _check_rho(rho, strict=True)
    if rho == law.M:
        return 0.0
    pm = law.p_ref

    def f(s):
        x = law.a * s**law.gamma - pm
        return abs(x) ** (ell - 1) * x / s**2

    # the non-smooth point s = M is an endpoint of the interval
    val, err = integrate.quad(f, law.M, rho, epsabs=0.0, epsrel=tol, limit=200)
    if not np.isfinite(val) or err > 100 * tol * abs(val) + 1e-300:
        raise QuadratureError(f"H_{ell} quadrature did not converge at rho={rho} (err={err:g})")
    return rho * val


def h1_quad(law: PressureLaw, rho: float, tol: float = 1e-12) -> float:
    """H1 relative entropy from quadrature of rho * int_0^rho P(s)/s^2 ds."""
    rho = float(rho)
    _check_rho(rho)

    def inner(r):
        if r == 0.0:
            return 0.0
        val, err = integrate.quad(lambda s: law.a * s ** (law.gamma - 2), 0.0, r, epsabs=0.0, epsrel=tol, limit=200)
        if err > 100 * tol * abs(val) + 1e-300:
            raise QuadratureError(f"H1 quadrature did not converge at rho={r}")
        return val

    big_m = inner(law.M)
    dh1_m = big_m + law.p_ref / law.M
    return rho * inner(rho) - law.M * big_m - dh1_m * (rho - law.M)


def _ineg2_gap_scalar(law: PressureLaw, rho) -> float:
    if rho < 0:
        raise DomainError(f"density must be >= 0, got {rho}")
    with mpmath.workdps(50):
        mlaw = PressureLaw(mpmath.mpf(law.a), mpmath.mpf(law.gamma), mpmath.mpf(law.M))
        r = mpmath.mpf(rho)
        g = mlaw.gamma
        lhs = (pressure(mlaw, r) - mlaw.p_ref) ** 2
        rhs = 2 * g * mlaw.p_ref * h1_rel(mlaw, r) + (2 * g - 1) * h_ell(mlaw, r, 2)
        return float(rhs - lhs)


def ineg2_gap(law: PressureLaw, rho):
    """RHS - LHS of (P(rho)-P(M))^2 <= 2 g P(M) H1 + (2g-1) H2, in 50-digit arithmetic.

    With a = 1, 2 g P(M) is 2 g M^g.  The gap vanishes identically for
    rho >= M, so it is evaluated at high precision to keep that exact.
    """
    if np.ndim(rho):
        return np.vectorize(lambda r: _ineg2_gap_scalar(law, float(r)), otypes=[float])(rho)
    return _ineg2_gap_scalar(law, float(rho))


def power_convexity_gap(law: PressureLaw, rho, power: float | None = None):
    """rho^p - M^p - p M^(p-1) (rho - M) >= 0, default p = 3 gamma."""
    p = 3 * law.gamma if power is None else power
    rho = _as_input(rho)
    _check_rho(rho)
    M = law.M
    return rho**p - M**p - p * M ** (p - 1) * (rho - M)
