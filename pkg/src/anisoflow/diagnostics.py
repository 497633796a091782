"""Energy and Hoff-type functionals, identity residuals and bound monitors.

Everything here is computed from the stored samples of a trajectory.  Time
integrals use the composite trapezoid rule on the sample times, so the
identity residuals converge at second order in the diagnostic cadence.

Notation for matrix fields (leading axes (i, k), grid axes trailing):
``Gu[i, k] = d_k u^i``, ``Gd`` the same for the mollified velocity,
``Ud`` / ``Udd`` for the material derivative and its mollification,
``W = Gu Gu`` the pointwise matrix product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CadenceError
from .scalar_laws import h1_rel, h_ell, pressure
from .solver import Model, Trajectory, energy  # noqa: F401
from .tensor4 import coercivity_bounds

COLUMNS = (
    "t", "sigma", "E", "A1", "A2", "B", "normF3", "normF4", "intP3", "intP4", "intGradU3", "intGradU4_sigma",
    "resA1", "resA2", "resFlux", "resRenorm", "meanU_slack", "bootstrap_ratio", "rho_min", "rho_max",
)


def sigma(t):
    return np.minimum(1.0, t)


def _mm(a, b):
    """Pointwise matrix product of two (d, d, ...) fields."""
    return np.einsum("iq...,qj...->ij...", a, b)


def _ddot(a, b):
    return np.sum(a * b, axis=(0, 1))


def _tr(a):
    return np.einsum("ii...->...", a)


def _advect(g, u, f):
    """(u . grad) f for a field f with arbitrary leading component axes."""
    gf = g.grad(f)  # derivative axis first
    extra = f.ndim - g.d
    uu = u.reshape((g.d,) + (1,) * extra + g.shape)
    return np.sum(uu * gf, axis=0)


def sample_terms(model: Model, rho, m, t: float, with_identities: bool = True):
    """Instantaneous integrands of every functional at one sample."""
    g = model.grid
    law = model.law
    T = model.tensor
    mu, lam = model.mu, model.lam
    core = T.core
    sym = model.sym
    mask = model.mask

    def moll(f):
        return g.inverse(sym * mask * g.forward(f))

    u = model.velocity(rho, m)
    udot = model.material_derivative(rho, m, t)
    gu = g.jacobian(u)
    divu = _tr(gu)
    ud_ = g.inverse(sym * g.forward(u))
    gd = g.jacobian(ud_)
    s, s_t, gs = T.scale_derivatives(t, g.x)
    s = np.broadcast_to(s, g.shape)
    cgd = np.einsum("ijkl,kl...->ij...", core, gd)
    S = s * cgd
    if T.modulation.axis is not None:
        S = model._trunc(S)
    p = pressure(law, rho)
    pm = law.p_ref
    dp = p - pm

    out = {}
    out["E"] = float(g.integrate(h1_rel(law, rho) + 0.5 * rho * np.sum(u**2, axis=0)))
    out["grad2"] = float(g.integrate(np.sum(gu**2, axis=(0, 1))))
    out["div2"] = float(g.integrate(divu**2))
    out["aniso_q"] = float(g.integrate(_ddot(S, gd)))
    out["rho_udot2"] = float(g.integrate(rho * np.sum(udot**2, axis=0)))
    out["K2"] = 0.5 * out["rho_udot2"]
    out["Pdiv"] = float(g.integrate(p * divu))
    out["H2"] = float(g.integrate(h_ell(law, rho, 2)))
    out["H3"] = float(g.integrate(h_ell(law, rho, 3)))
    out["P3"] = float(g.integrate(np.abs(dp) ** 3))
    out["P4"] = float(g.integrate(dp**4))
    out["P2"] = float(g.integrate(dp**2))
    gnorm = np.sqrt(np.sum(gu**2, axis=(0, 1)))
    out["gradU3"] = float(g.integrate(gnorm**3))
    out["gradU4"] = float(g.integrate(gnorm**4))
    F = (2 * mu + lam) * divu - dp
    out["normF3"] = g.lp_norm(F, 3)
    out["normF4"] = g.lp_norm(F, 4)
    out["rho_min"] = float(np.min(rho))
    out["rho_max"] = float(np.max(rho))
    out["rho_l2"] = g.lp_norm(rho, 2)
    out["mean_u"] = [float(v) for v in g.mean(u)]
    out["momentum"] = [float(v) for v in g.integrate(m)]
    out["mass_mean"] = float(g.mean(rho))
    out["u_l2sq"] = float(g.integrate(np.sum(u**2, axis=0)))
    out["res_flux"] = flux_residual(model, rho, u, udot, S, F)

    if not with_identities:
        return out

    # first identity: d/dt L1 + int rho |udot|^2 = R1
    w = _mm(gu, gu)
    w_m = moll(w)
    adv_s = s_t + np.einsum("q...,q...->...", u, gs) + s * divu
    K = _advect(g, u, gd) - moll(_advect(g, u, gu))
    qd = _ddot(cgd, gd)
    trw = _tr(w)
    r1 = (
        -mu * _ddot(gu, w)
        + 0.5 * mu * np.sum(gu**2, axis=(0, 1)) * divu
        - (mu + lam) * divu * trw
        + 0.5 * (mu + lam) * divu**3
        + 0.5 * adv_s * qd
        - _ddot(S, w_m)
        + _ddot(S, K)
        + (law.gamma - 1) * p * divu**2
        + p * trw
    )
    out["L1"] = 0.5 * mu * out["grad2"] + 0.5 * (mu + lam) * out["div2"] + 0.5 * out["aniso_q"] - out["Pdiv"]
    out["R1"] = float(g.integrate(r1))

    # second identity: d/dt K2 + D2 = R2
    ugd = g.jacobian(udot)
    divud = _tr(ugd)
    uddot = g.inverse(sym * g.forward(udot))
    udd = g.jacobian(uddot)
    cudd = np.einsum("ijkl,kl...->ij...", core, udd)
    ud_gu = _mm(ugd, gu)
    kd = _advect(g, u, udd) - moll(_advect(g, u, ugd))
    out["grad_udot2"] = float(g.integrate(np.sum(ugd**2, axis=(0, 1))))
    out["div_udot2"] = float(g.integrate(divud**2))
    out["aniso_udot"] = float(g.integrate(s * _ddot(cudd, udd)))
    out["D2"] = mu * out["grad_udot2"] + (mu + lam) * out["div_udot2"] + out["aniso_udot"]
    r2 = (
        mu * _ddot(ugd, w)
        + mu * _ddot(ugd, _mm(gu, np.swapaxes(gu, 0, 1)))
        - mu * divu * _ddot(gu, ugd)
        + (mu + lam) * trw * divud
        + (mu + lam) * divu * _tr(ud_gu)
        - (mu + lam) * divu**2 * divud
        - adv_s * _ddot(cgd, udd)
        + s * _ddot(np.einsum("ijkl,kl...->ij...", core, w_m), udd)
        + _ddot(S, moll(ud_gu))
        - s * _ddot(np.einsum("ijkl,kl...->ij...", core, K), udd)
        - _ddot(S, kd)
        - p * _tr(_mm(gu, ugd))
        - (law.gamma - 1) * p * divu * divud
    )
    out["R2"] = float(g.integrate(r2))
    return out


def flux_residual(model: Model, rho, u, udot, S, F):
    """|| F_meanfree - (inv_lap_div(rho udot) - inv_lap_div(w_d * div S)) || / (1 + ||F||)."""
    g = model.grid
    target = g.inv_lap_div(rho * udot)
    if not model.tensor.is_zero:
        target = target - g.inv_lap_div(g.inverse(model.sym * g.forward(g.div_matrix(S))))
    f_mf = F - g.mean(F)
    return g.lp_norm(f_mf - target, 2) / (1.0 + g.lp_norm(F, 2))


def cumtrapz(y, t):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


def _cum_until_one(y, t):
    """Trapezoid integral of y over [0, min(t, 1)]; t = 1 must be a sample if passed."""
    y = np.asarray(y, dtype=float)
    seg = 0.5 * np.diff(t) * (y[1:] + y[:-1])
    seg = np.where(np.asarray(t[1:]) <= 1.0 + 1e-12, seg, 0.0)
    out = np.zeros_like(y)
    out[1:] = np.cumsum(seg)
    return out


def _require_cadence(traj):
    if len(traj) < 2:
        raise CadenceError("at least two samples are needed for time-integrated quantities")


@dataclass
class DiagnosticsRecord:
    """Column-oriented per-sample diagnostics plus the raw instantaneous terms."""

    columns: dict
    terms: list
    E0: float
    c0: float
    C_tilde: float
    eps_lower: float
    extra: dict = field(default_factory=dict)

    def rows(self):
        n = len(self.columns["t"])
        return [[self.columns[c][i] for c in COLUMNS] for i in range(n)]

    def __getitem__(self, key):
        return self.columns[key]


def initial_size(traj: Trajectory, terms0=None):
    """E0 + int H2(rho0/M) + ||u0||_{H1}^2."""
    terms0 = terms0 or sample_terms(traj.model, traj.rho[0], traj.m[0], float(traj.times[0]), with_identities=False)
    return terms0["E"] + terms0["H2"] + terms0["u_l2sq"] + terms0["grad2"]


def compute(traj: Trajectory, c0: float | None = None, C_tilde: float = 10.0, alpha: float | None = None,
            with_identities: bool = True) -> DiagnosticsRecord:
    """Evaluate every functional, residual and monitor on the stored samples."""
    model = traj.model
    law = model.law
    mu, lam = model.mu, model.lam
    g = model.grid
    t = np.asarray(traj.times, dtype=float)
    terms = [sample_terms(model, traj.rho[i], traj.m[i], float(t[i]), with_identities) for i in range(len(t))]
    col = lambda k: np.array([tm[k] for tm in terms])  # noqa: E731
    sig = sigma(t)
    E0 = terms[0]["E"]
    if c0 is None:
        c0 = initial_size(traj, terms[0])
    alpha = law.gamma if alpha is None else alpha

    int_rud = cumtrapz(col("rho_udot2"), t)
    a1 = 0.5 * mu * col("grad2") + (mu + lam) * col("div2") + col("aniso_q") + int_rud
    two = 2 * (2 * mu + lam)
    int_p3 = cumtrapz(col("P3"), t)
    int_p4 = cumtrapz(sig * col("P4"), t)
    b = (1 + two) * col("H2") + sig * col("H3") + (int_p3 + int_p4) / two

    cols = {
        "t": t,
        "sigma": sig,
        "E": col("E"),
        "A1": a1,
        "B": b,
        "normF3": col("normF3"),
        "normF4": col("normF4"),
        "intP3": int_p3,
        "intP4": int_p4,
        "intGradU3": cumtrapz(col("gradU3"), t),
        "intGradU4_sigma": cumtrapz(sig * col("gradU4"), t),
        "resFlux": col("res_flux"),
        "resRenorm": renorm_residual(traj, alpha),
        "rho_min": col("rho_min"),
        "rho_max": col("rho_max"),
    }
    if with_identities:
        d2 = col("D2")
        cols["A2"] = sig * col("K2") + cumtrapz(sig * d2, t)
        lhs1 = col("L1") + int_rud
        cols["resA1"] = np.abs(lhs1 - lhs1[0] - cumtrapz(col("R1"), t)) / (1 + np.abs(lhs1))
        lhs2 = cols["A2"]
        rhs2 = _cum_until_one(col("K2"), t) + cumtrapz(sig * col("R2"), t)
        cols["resA2"] = np.abs(lhs2 - rhs2) / (1 + np.abs(lhs2))
    else:
        cols["A2"] = sig * col("K2")
        cols["resA1"] = np.full_like(t, np.nan)
        cols["resA2"] = np.full_like(t, np.nan)

    vol = g.volume
    M = law.M
    mean_u = np.max(np.abs(np.array([tm["mean_u"] for tm in terms])), axis=1)
    cols["meanU_slack"] = (
        np.sqrt(2 * M * E0 / vol) + col("rho_l2") * np.sqrt(col("grad2")) / vol - M * mean_u
    )
    running = np.maximum.accumulate(0.5 * a1 + cols["A2"] + b)
    cols["bootstrap_ratio"] = running / (2 * C_tilde * c0) if c0 > 0 else np.where(running > 0, np.inf, 0.0)

    eps_lower = coercivity_bounds(model.tensor, check=False).eps_lower
    rec = DiagnosticsRecord(cols, terms, E0, c0, C_tilde, eps_lower)
    rec.extra["monitor"] = theorem_monitor(traj, rec)
    return rec


def hoff_a1(rec: DiagnosticsRecord):
    return rec["A1"]


def hoff_a2(rec: DiagnosticsRecord):
    return rec["A2"]


def b_functional(rec: DiagnosticsRecord):
    return rec["B"]


def effective_flux(model: Model, rho, m, t: float = 0.0):
    """(F, consistency residual) at one state."""
    g = model.grid
    T = model.tensor
    u = model.velocity(rho, m)
    udot = model.material_derivative(rho, m, t)
    _, S = model.stress(g.forward(u), t)
    divu = g.div(u)
    F = (2 * model.mu + model.lam) * divu - (pressure(model.law, rho) - model.law.p_ref)
    if T.is_zero:
        S = np.zeros((g.d, g.d) + g.shape)
    return F, flux_residual(model, rho, u, udot, S, F)


def a1_identity_residual(traj: Trajectory, rec: DiagnosticsRecord | None = None):
    _require_cadence(traj)
    rec = rec or compute(traj)
    return rec["resA1"]


def a2_identity_residual(traj: Trajectory, rec: DiagnosticsRecord | None = None):
    _require_cadence(traj)
    rec = rec or compute(traj)
    return rec["resA2"]


def renorm_residual(traj: Trajectory, alpha: float):
    """|int rho^a(t) - int rho^a(0) + (a - 1) int_0^t int rho^a div u| / (1 + |int rho^a(t)|)."""
    model = traj.model
    g = model.grid
    t = np.asarray(traj.times, dtype=float)
    mass = np.empty(len(t))
    src = np.empty(len(t))
    for i in range(len(t)):
        rho = traj.rho[i]
        ra = rho**alpha
        mass[i] = g.integrate(ra)
        src[i] = g.integrate(ra * g.div(model.velocity(rho, traj.m[i])))
    return np.abs(mass - mass[0] + (alpha - 1) * cumtrapz(src, t)) / (1 + np.abs(mass))


def pressure_l2_chain(rec: DiagnosticsRecord, law):
    """sup ||P - P(M)||_2^2 against 2 g P(M) E0 + (2g - 1) sup int H2; returns the slack."""
    lhs = max(tm["P2"] for tm in rec.terms)
    rhs = 2 * law.gamma * law.p_ref * rec.E0 + (2 * law.gamma - 1) * max(tm["H2"] for tm in rec.terms)
    return rhs - lhs


def density_power_check(model: Model, rho):
    """(||rho||_{2d/(4-d)}^2, (||P||_2 / a)^(2/gamma)) in normalized norms."""
    g = model.grid
    law = model.law
    q = 2 * g.d / (4 - g.d)
    lhs = g.lp_norm(rho, q, normalized=True) ** 2
    rhs = (g.lp_norm(pressure(law, rho), 2, normalized=True) / law.a) ** (2 / law.gamma)
    return lhs, rhs


def theorem_monitor(traj: Trajectory, rec: DiagnosticsRecord):
    """Left sides of the four monitored bounds, ratios and bootstrap crossing."""
    model = traj.model
    mu, lam = model.mu, model.lam
    t = rec["t"]
    sig = rec["sigma"]
    terms = rec.terms
    col = lambda k: np.array([tm[k] for tm in terms])  # noqa: E731
    acc = np.asarray(traj.acc)
    lhs1 = rec["E"] + (mu - rec.eps_lower) * acc[:, 0] + (mu + lam) * acc[:, 1]
    lhs2 = 0.5 * (mu * col("grad2") + (mu + lam) * col("div2")) + cumtrapz(col("rho_udot2"), t)
    if "grad_udot2" in terms[0]:
        lhs3 = sig * col("K2") + cumtrapz(sig * (mu * col("grad_udot2") + (mu + lam) * col("div_udot2")), t)
    else:
        lhs3 = sig * col("K2")
    lhs4 = col("H2") + sig * col("H3") + rec["intP3"] + rec["intP4"]
    c0 = rec.c0
    ratios = [
        lhs1 / rec.E0 if rec.E0 > 0 else np.where(lhs1 > 0, np.inf, 0.0),
        lhs2 / c0 if c0 > 0 else np.where(lhs2 > 0, np.inf, 0.0),
        lhs3 / c0 if c0 > 0 else np.where(lhs3 > 0, np.inf, 0.0),
        lhs4 / c0 if c0 > 0 else np.where(lhs4 > 0, np.inf, 0.0),
    ]
    br = rec["bootstrap_ratio"]
    cross = np.nonzero(br > 1.0)[0]
    return {
        "lhs": [lhs1, lhs2, lhs3, lhs4],
        "ratios": ratios,
        "max_ratios": [float(np.max(r)) for r in ratios],
        "finite": bool(all(np.all(np.isfinite(r)) for r in ratios)),
        "energy_ok": bool(np.all(lhs1 <= rec.E0 * (1 + 1e-4) + 1e-300)),
        "crossing_time": float(t[cross[0]]) if len(cross) else None,
        "c0": c0,
        "C_tilde": rec.C_tilde,
        "meanU_slack_min": float(np.min(rec["meanU_slack"])),
    }


def summary(traj: Trajectory, rec: DiagnosticsRecord) -> dict:
    mon = rec.extra["monitor"]
    last = {c: float(rec[c][-1]) for c in COLUMNS}
    g = traj.model.grid
    return {
        "final": last,
        "samples": len(rec["t"]),
        "steps": traj.nsteps,
        "failure": traj.failure,
        "E0": rec.E0,
        "c0": rec.c0,
        "C_tilde": rec.C_tilde,
        "eps_lower": rec.eps_lower,
        "max_ratios": mon["max_ratios"],
        "ratios_finite": mon["finite"],
        "energy_inequality": mon["energy_ok"],
        "bootstrap_crossing": mon["crossing_time"],
        "max_resA1": _nanmax(rec["resA1"]),
        "max_resA2": _nanmax(rec["resA2"]),
        "max_resFlux": _nanmax(rec["resFlux"]),
        "max_resRenorm": _nanmax(rec["resRenorm"]),
        "mass_drift": float(np.max(np.abs(g.mean(traj.rho) - traj.model.law.M))),
        "momentum_drift": float(np.max(np.abs(np.array([tm["momentum"] for tm in rec.terms]) - rec.terms[0]["momentum"]))),
        "pressure_chain_slack": pressure_l2_chain(rec, traj.model.law),
    }


def _nanmax(a):
    a = np.asarray(a, dtype=float)
    return float(np.nanmax(a)) if np.any(np.isfinite(a)) else math.nan
