"""Batch of oracle and property checks run by ``anisoflow verify``.

Each check returns ``(passed, detail)``.  Module attributes are looked up
at call time so that injected faults (monkeypatched functions) are seen.
"""

from __future__ import annotations

import time

import numpy as np

from . import scalar_laws as sl
from . import spectral, tensor4
from . import diagnostics as diag
from . import solver as slv


def check_scalar_oracle():
    """h_ell against adaptive quadrature over a (gamma, M, rho) sweep."""
    worst = 0.0
    for gamma in (1.4, 5 / 3, 2.0, 3.0):
        for M in (0.5, 1.0, 2.0):
            law = sl.PressureLaw(1.0, gamma, M)
            for rho in np.geomspace(1e-2, 1e2, 9) * M:
                for ell in (2, 3):
                    a = sl.h_ell(law, rho, ell)
                    b = sl.h_ell_quad(law, rho, ell)
                    if abs(b) > 1e-12:
                        worst = max(worst, abs(a - b) / abs(b))
    return worst <= 1e-8, {"max_rel_err": worst}


def check_h1_oracle():
    worst = 0.0
    for gamma in (1.4, 2.0, 3.0):
        law = sl.PressureLaw(1.0, gamma, 1.0)
        for rho in (0.0, 0.3, 0.9, 1.7, 5.0):
            a = sl.h1_rel(law, rho)
            b = sl.h1_quad(law, rho)
            worst = max(worst, abs(a - b) / (1 + abs(b)))
    return worst <= 1e-8, {"max_err": worst}


def check_ineg2():
    """Gap >= 0 everywhere and = 0 for rho >= M."""
    lo = np.inf
    hi_abs = 0.0
    for gamma in (1.4, 5 / 3, 2.0, 3.0):
        for M in (0.5, 1.0, 2.0):
            law = sl.PressureLaw(1.0, gamma, M)
            rho = np.geomspace(1e-3, 1e3, 41)
            gap = sl.ineg2_gap(law, rho)
            lo = min(lo, float(np.min(gap)))
            above = gap[rho >= M]
            if above.size:
                hi_abs = max(hi_abs, float(np.max(np.abs(above))))
    exact = float(sl.ineg2_gap(sl.PressureLaw(1.0, 2.0, 1.0), 2.0))
    ok = lo >= -1e-12 and hi_abs <= 1e-10 and abs(exact) <= 1e-10
    return ok, {"min_gap": lo, "max_abs_gap_above_M": hi_abs, "gap_at_2": exact}


def check_spectral_identities():
    rng = np.random.default_rng(11)
    g = spectral.get_grid(2, 32)
    f = g.random_field(rng, 10)
    rt = float(np.max(np.abs(g.inverse(g.forward(f)) - f)))
    u = g.random_field(rng, 10, ncomp=2)
    c, dv, gr = g.cz_split_norms(u, 2)
    planch = abs(gr**2 - c**2 - dv**2) / gr**2
    x = g.x
    ild = float(np.max(np.abs(g.inv_lap_div(g.grad(np.sin(x[0]))) - np.sin(x[0]))))
    poinc = True
    for _ in range(100):
        h = g.random_field(rng, 8)
        poinc &= g.lp_norm(h - g.mean(h), 2) <= g.lp_norm(g.grad(h), 2) * (1 + 1e-12)
    ok = rt <= 1e-13 and planch <= 1e-11 and ild <= 1e-12 and poinc
    return ok, {"roundtrip": rt, "plancherel_rel": planch, "inv_lap_div": ild, "poincare": bool(poinc)}


def check_mollifier_convergence():
    """||w_d * g - g|| for g = sin 3x halves by about 4 when delta halves."""
    g = spectral.get_grid(2, 32)
    f = np.sin(3 * g.x[0])
    errs = [g.lp_norm(g.mollify(f, dl) - f, 2) for dl in (0.1, 0.05, 0.025)]
    ratios = [errs[i] / errs[i + 1] if errs[i + 1] > 0 else float("nan") for i in range(2)]
    ok = all(3.5 <= r <= 4.5 for r in ratios)
    return ok, {"errors": errs, "ratios": ratios}


def check_mollifier_adjoint():
    rng = np.random.default_rng(5)
    g = spectral.get_grid(2, 32)
    a, b = g.random_field(rng, 12), g.random_field(rng, 12)
    err = abs(g.inner(g.mollify(a, 0.2), b) - g.inner(a, g.mollify(b, 0.2)))
    mean_err = abs(g.mean(g.mollify(a, 0.2)) - g.mean(a))
    return err <= 1e-12 and mean_err <= 1e-14, {"adjoint_err": err, "mean_err": mean_err}


def check_commutator():
    g = spectral.get_grid(2, 64)
    x = g.x
    b, a = np.sin(x[0]), np.cos(2 * x[1])
    norms = [g.lp_norm(g.commutator_r(b, a, dl, 1), 2) for dl in (0.4, 0.2, 0.1, 0.05)]
    ratios = [norms[i + 1] / norms[i] for i in range(3)]
    gb = g.grad(b)
    const = max(
        g.lp_norm(g.commutator_r(b, a, dl, i), 2) / (g.lp_norm(gb, 4) * g.lp_norm(a, 4))
        for dl in (0.4, 0.2, 0.1, 0.05)
        for i in range(2)
    )
    ok = all(r <= 0.75 for r in ratios) and const <= 1 + 1e-6
    return ok, {"norms": norms, "ratios": ratios, "constant": const}


def check_tensor_spectrum():
    core = tensor4.preset("random_symmetric 3 0.05", 2)
    T = tensor4.ViscosityTensor(1.0, 0.0, core)
    spec = tensor4.coercivity_bounds(T)
    w = np.linalg.eigvalsh(core.reshape(4, 4))
    rng = np.random.default_rng(2)
    a = rng.standard_normal((10000, 2, 2))
    q = np.einsum("nij,ijkl,nkl->n", a, core, a)
    nrm = np.sum(a**2, axis=(1, 2))
    sandwich = bool(np.all(q <= spec.eps_upper * nrm + 1e-12) and np.all(q >= -spec.eps_lower * nrm - 1e-12))
    err = max(abs(w[0] - spec.lambda_min), abs(w[-1] - spec.lambda_max))
    return err <= 1e-12 and sandwich, {"eig_err": err, "sandwich": sandwich}


def check_flux_identity():
    law = sl.PressureLaw(1.0, 2.0, 1.0)
    T = tensor4.ViscosityTensor(1.0, 0.0, tensor4.preset("random_symmetric 0 0.05", 2))
    g = spectral.get_grid(2, 64)
    model = slv.Model(g, law, T, 0.2)
    rng = np.random.default_rng(4)
    rho = 1 + 0.05 * g.random_field(rng, 4)
    u = g.random_field(rng, 4, ncomp=2, amp=0.05)
    _, res = diag.effective_flux(model, rho, model._trunc(rho * u))
    return res <= 1e-8, {"residual": res}


def check_identity_derivatives():
    """d/dt of the first and second balances against their assembled right sides."""
    h = 0.002
    t_c = 0.1
    law = sl.PressureLaw(1.0, 1.6, 1.0)
    T = tensor4.ViscosityTensor(0.5, 0.2, tensor4.preset("random_symmetric 3 0.3", 2),
                                tensor4.parse_modulation("sin 3 0.5; cos_profile 0 0.5"))
    cfg = slv.SolverConfig(n=32, d=2, delta=0.3, t_end=t_c + 2 * h, cadence=h, regularize=False, cfl=0.3)
    g = spectral.get_grid(2, 32)
    x = g.x
    rho0 = 1 + 0.3 * np.cos(x[0]) * np.sin(x[1])
    u0 = np.array([0.4 * np.cos(x[0] + x[1]), 0.3 * np.sin(2 * x[0] - x[1])])
    times = np.array([0.0] + [t_c + k * h for k in (-2, -1, 0, 1, 2)])
    tr = slv.run(cfg, T, law, rho0, u0, times=times)
    if tr.failure:
        return False, {"failure": tr.failure}
    tm = [diag.sample_terms(tr.model, tr.rho[i], tr.m[i], float(tr.times[i])) for i in range(1, 6)]

    def d4(key):
        f = [t[key] for t in tm]
        return (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h)

    c = tm[2]
    e1 = abs(d4("L1") + c["rho_udot2"] - c["R1"]) / (1 + abs(c["R1"]))
    e2 = abs(d4("K2") + c["D2"] - c["R2"]) / (1 + abs(c["R2"]))
    return e1 <= 1e-6 and e2 <= 1e-6, {"first": e1, "second": e2}


CHECKS = {
    "scalar_h_ell_oracle": check_scalar_oracle,
    "scalar_h1_oracle": check_h1_oracle,
    "scalar_ineg2": check_ineg2,
    "spectral_identities": check_spectral_identities,
    "mollifier_convergence": check_mollifier_convergence,
    "mollifier_adjoint": check_mollifier_adjoint,
    "commutator_decay": check_commutator,
    "tensor_spectrum": check_tensor_spectrum,
    "flux_identity": check_flux_identity,
    "identity_derivatives": check_identity_derivatives,
}


def run_suite(names=None):
    """Run the named checks (all by default); returns a list of result dicts."""
    results = []
    for name in names or CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = CHECKS[name]()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
        results.append({"check": name, "passed": bool(ok), "detail": _plain(detail),
                        "seconds": round(time.perf_counter() - t0, 3)})
    return results


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj
