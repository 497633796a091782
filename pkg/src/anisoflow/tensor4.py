"""Fourth-order viscosity tensors eps_ijkl and their structural checks.

The contraction convention is ``E(G)_ij = eps_ijkl G_kl`` with
``G[k, l] = d_l u^k``.  A space-time dependent tensor is represented as a
constant core multiplied by a scalar modulation ``amp(t) * profile(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CoercivityError, ConfigError, HypothesisError, UnsupportedError

SYMMETRY_TOL = 1e-14


@dataclass(frozen=True)
class Modulation:
    """s(t, x) = amp(t) * profile(x).

    amp is ``amp_offset + sin(omega t)`` when omega is set, else 1.
    profile is ``profile_offset + cos(x_axis)`` when axis is set, else 1.
    """

    omega: float | None = None
    amp_offset: float = 0.0
    axis: int | None = None
    profile_offset: float = 0.0

    @property
    def is_const(self):
        return self.omega is None and self.axis is None

    def amp(self, t):
        return 1.0 if self.omega is None else self.amp_offset + np.sin(self.omega * t)

    def damp(self, t):
        return 0.0 if self.omega is None else self.omega * np.cos(self.omega * t)

    def profile(self, x):
        """x has the coordinate axis first."""
        if self.axis is None:
            return np.ones(np.shape(x)[1:])
        return self.profile_offset + np.cos(x[self.axis])

    def grad_profile(self, x):
        g = np.zeros(np.shape(x))
        if self.axis is not None:
            g[self.axis] = -np.sin(x[self.axis])
        return g

    def describe(self):
        parts = []
        if self.omega is not None:
            parts.append(f"sin {self.omega!r} {self.amp_offset!r}")
        if self.axis is not None:
            parts.append(f"cos_profile {self.axis} {self.profile_offset!r}")
        return "; ".join(parts) if parts else "const"


def parse_modulation(text: str) -> Modulation:
    """Parse "const", "sin omega [offset]", "cos_profile axis [offset]" or a ';'-joined pair."""
    kw = {}
    for part in (p.strip() for p in text.split(";")):
        if not part:
            continue
        tok = part.split()
        try:
            if tok[0] == "const" and len(tok) == 1:
                continue
            if tok[0] == "sin" and len(tok) in (2, 3):
                kw["omega"] = float(tok[1])
                kw["amp_offset"] = float(tok[2]) if len(tok) == 3 else 0.0
                continue
            if tok[0] == "cos_profile" and len(tok) in (2, 3):
                kw["axis"] = int(tok[1])
                kw["profile_offset"] = float(tok[2]) if len(tok) == 3 else 0.0
                continue
        except ValueError as exc:
            raise ConfigError(f"bad modulation term {part!r}: {exc}") from None
        raise ConfigError(f"unknown modulation term {part!r}")
    return Modulation(**kw)


@dataclass(frozen=True)
class CoercivitySpectrum:
    eps_upper: float
    eps_lower: float
    lambda_min: float
    lambda_max: float


@dataclass(frozen=True, eq=False)
class ViscosityTensor:
    mu: float
    lam: float
    core: np.ndarray
    modulation: Modulation = field(default_factory=Modulation)

    def __post_init__(self):
        core = np.asarray(self.core, dtype=float)
        d = core.shape[0]
        if d not in (2, 3) or core.shape != (d,) * 4:
            raise UnsupportedError(f"core must have shape (d,d,d,d) with d in (2,3), got {core.shape}")
        if self.modulation.axis is not None and not 0 <= self.modulation.axis < d:
            raise ConfigError(f"profile axis {self.modulation.axis} out of range for d={d}")
        core = core.copy()
        core.setflags(write=False)
        object.__setattr__(self, "core", core)

    @property
    def d(self):
        return self.core.shape[0]

    @property
    def is_zero(self):
        return not np.any(self.core)

    def scale(self, t, x):
        """s(t, x) on the points x (coordinate axis first)."""
        return self.modulation.amp(t) * self.modulation.profile(x)

    def scale_derivatives(self, t, x):
        """(s, d_t s, grad s)."""
        m = self.modulation
        prof = m.profile(x)
        return m.amp(t) * prof, m.damp(t) * prof, m.amp(t) * m.grad_profile(x)

    def apply(self, grad_u, t=0.0, x=None):
        """E(grad_u)_ij = s(t,x) eps_ijkl d_l u^k."""
        grad_u = np.asarray(grad_u)
        if grad_u.shape[:2] != (self.d, self.d):
            raise UnsupportedError(f"grad_u must have leading shape ({self.d},{self.d}), got {grad_u.shape[:2]}")
        out = np.einsum("ijkl,kl...->ij...", self.core, grad_u)
        if self.modulation.is_const:
            return out
        if x is None:
            raise UnsupportedError("modulated tensor needs grid coordinates")
        return self.scale(t, x) * out

    def quadratic(self, a, b=None, t=0.0, x=None):
        """Pointwise eps_ijkl a_ij b_kl (times s)."""
        b = a if b is None else b
        q = np.einsum("ij...,ijkl,kl...->...", a, self.core, b)
        if self.modulation.is_const:
            return q
        return self.scale(t, x) * q


def isotropic(mu: float, lam: float, d: int) -> np.ndarray:
    """Core of the isotropic stress mu grad u + (mu + lam) div u I."""
    e = np.eye(d)
    return mu * np.einsum("ik,jl->ijkl", e, e) + (mu + lam) * np.einsum("ij,kl->ijkl", e, e)


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.transpose(2, 3, 0, 1))


def preset(name: str, d: int) -> np.ndarray:
    """'zero', 'scaled_identity c' or 'random_symmetric seed amp'."""
    tok = name.split()
    try:
        if tok[0] == "zero" and len(tok) == 1:
            return np.zeros((d,) * 4)
        if tok[0] == "scaled_identity" and len(tok) == 2:
            e = np.eye(d)
            return float(tok[1]) * np.einsum("ik,jl->ijkl", e, e)
        if tok[0] == "random_symmetric" and len(tok) == 3:
            rng = np.random.default_rng(int(tok[1]))
            amp = float(tok[2])
            return symmetrize(rng.uniform(-amp, amp, size=(d,) * 4))
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad tensor preset {name!r}: {exc}") from None
    raise ConfigError(f"unknown tensor preset {name!r}")


def from_table(values, d: int) -> np.ndarray:
    """Row-major (i,j,k,l) table of d^4 numbers."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size != d**4:
        raise ConfigError(f"tensor table needs {d**4} entries for d={d}, got {arr.size}")
    return arr.reshape((d,) * 4)


def symmetry_violation(core):
    """(max |eps_ijkl - eps_klij|, worst index quadruple)."""
    diff = np.abs(core - core.transpose(2, 3, 0, 1))
    idx = np.unravel_index(np.argmax(diff), diff.shape)
    return float(diff[idx]), tuple(int(i) for i in idx)


def _core_eigs(core):
    d = core.shape[0]
    mat = symmetrize(core).reshape(d * d, d * d)
    w = np.linalg.eigvalsh(mat)
    return float(w[0]), float(w[-1])


def _scale_range(mod: Modulation, time_samples, space_samples):
    amps = np.array([mod.amp(t) for t in time_samples], dtype=float)
    prof = np.atleast_1d(mod.profile(space_samples)).ravel()
    vals = np.outer(amps, [prof.min(), prof.max()])
    return float(vals.min()), float(vals.max())


def default_samples(T: ViscosityTensor, t_end: float = 1.0, nt: int = 65, nx: int = 64):
    ts = np.linspace(0.0, max(t_end, 0.0), nt)
    xs = np.array(np.meshgrid(*([2 * np.pi * np.arange(nx) / nx] * T.d), indexing="ij"))
    return ts, xs


def coercivity_bounds(T: ViscosityTensor, time_samples=None, space_samples=None, check=True) -> CoercivitySpectrum:
    """Worst-case spectrum of s(t,x) * eps over the samples."""
    lmin, lmax = _core_eigs(T.core)
    if not T.modulation.is_const:
        if time_samples is None or space_samples is None:
            time_samples, space_samples = default_samples(T)
        s_lo, s_hi = _scale_range(T.modulation, time_samples, space_samples)
        cand = [s_lo * lmin, s_lo * lmax, s_hi * lmin, s_hi * lmax]
        lmin, lmax = min(cand), max(cand)
    spec = CoercivitySpectrum(max(lmax, 0.0), max(-lmin, 0.0), lmin, lmax)
    if check and T.mu - spec.eps_lower <= 0:
        raise CoercivityError(f"mu - eps_lower = {T.mu - spec.eps_lower:.6g} <= 0 (mu={T.mu}, eps_lower={spec.eps_lower:.6g})")
    return spec


@dataclass
class HypothesisReport:
    symmetry_violation: float
    symmetry_index: tuple
    spectrum: CoercivitySpectrum
    coercivity_margin: float
    sup_eps: float
    h4_bound: float
    h4_ratio: float
    sup_dt_eps: float
    sup_grad_eps: float
    positive_semidefinite: bool
    failures: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures

    def failed(self, name):
        return any(f[0] == name for f in self.failures)

    def to_dict(self):
        return {
            "passed": self.passed,
            "failures": [{"hypothesis": h, "message": m} for h, m in self.failures],
            "symmetry_violation": self.symmetry_violation,
            "symmetry_index": list(self.symmetry_index),
            "lambda_min": self.spectrum.lambda_min,
            "lambda_max": self.spectrum.lambda_max,
            "eps_upper": self.spectrum.eps_upper,
            "eps_lower": self.spectrum.eps_lower,
            "coercivity_margin": self.coercivity_margin,
            "sup_eps": self.sup_eps,
            "h4_bound": self.h4_bound,
            "h4_ratio": self.h4_ratio,
            "sup_dt_eps": self.sup_dt_eps,
            "sup_grad_eps": self.sup_grad_eps,
            "positive_semidefinite": self.positive_semidefinite,
        }


def check_hypotheses(T: ViscosityTensor, eta: float = 0.1, time_samples=None, space_samples=None) -> HypothesisReport:
    """Evaluate symmetry, coercivity, regularity and smallness; never raises on a failed check."""
    if not eta > 0:
        raise ConfigError(f"eta must be > 0, got {eta}")
    if time_samples is None or space_samples is None:
        time_samples, space_samples = default_samples(T)
    time_samples = np.atleast_1d(np.asarray(time_samples, dtype=float))
    if time_samples.size == 0 or np.size(space_samples) == 0:
        raise ConfigError("sample sets must be nonempty")
    failures = []
    if not T.mu > 0:
        failures.append(("viscosity", f"mu must be > 0, got {T.mu}"))
    if T.mu + T.lam < 0:
        failures.append(("viscosity", f"mu + lambda must be >= 0, got {T.mu + T.lam}"))

    viol, idx = symmetry_violation(T.core)
    if viol > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(T.core)))):
        i, j, k, l = idx
        failures.append(("H1", f"eps[{i},{j},{k},{l}] != eps[{k},{l},{i},{j}] (difference {viol:.6g})"))

    spec = coercivity_bounds(T, time_samples, space_samples, check=False)
    margin = T.mu - spec.eps_lower
    if margin <= 0:
        failures.append(("H2", f"mu - eps_lower = {margin:.6g} <= 0"))

    mod = T.modulation
    cmax = float(np.max(np.abs(T.core)))
    amps = np.array([abs(mod.amp(t)) for t in time_samples])
    damps = np.array([abs(mod.damp(t)) for t in time_samples])
    prof = np.abs(np.atleast_1d(mod.profile(space_samples)))
    gprof = np.atleast_1d(np.max(np.abs(mod.grad_profile(space_samples))))
    sup_eps = cmax * float(amps.max()) * float(prof.max())
    sup_dt = cmax * float(damps.max()) * float(prof.max())
    sup_grad = cmax * float(amps.max()) * float(gprof.max())
    if not (np.isfinite(sup_dt) and np.isfinite(sup_grad)):
        failures.append(("H3", "time or space derivative of eps is not bounded"))

    bound = eta * min(T.mu, 2 * T.mu + T.lam)
    ratio = sup_eps / bound if bound > 0 else np.inf
    if not ratio <= 1.0:
        failures.append(("H4", f"sup|eps| = {sup_eps:.6g} exceeds eta*min(mu, 2mu+lambda) = {bound:.6g} (ratio {ratio:.6g})"))

    return HypothesisReport(
        symmetry_violation=viol,
        symmetry_index=idx,
        spectrum=spec,
        coercivity_margin=margin,
        sup_eps=sup_eps,
        h4_bound=bound,
        h4_ratio=float(ratio),
        sup_dt_eps=sup_dt,
        sup_grad_eps=sup_grad,
        positive_semidefinite=spec.lambda_min >= 0,
        failures=failures,
    )


def require_hypotheses(report: HypothesisReport) -> None:
    """Raise the first failure as a HypothesisError."""
    for name, msg in report.failures:
        if name == "H2":
            raise CoercivityError(msg)
        raise HypothesisError(name, msg)


def tensor_derivatives(T: ViscosityTensor, t: float, x):
    """(d_t eps, grad eps) on points x; grad eps has the derivative axis first."""
    _, st, gs = T.scale_derivatives(t, x)
    dt_eps = np.multiply.outer(T.core, st)
    grad_eps = np.array([np.multiply.outer(T.core, g) for g in gs])
    return dt_eps, grad_eps
