import math

import numpy as np
import pytest

from anisoflow import solver as slv
from anisoflow import tensor4 as t4
from anisoflow.errors import CadenceError, DomainError, RegularizationError
from anisoflow.scalar_laws import PressureLaw
from anisoflow.spectral import get_grid

LAW = PressureLaw(1.0, 2.0, 1.0)
ZERO = t4.ViscosityTensor(1.0, 0.0, np.zeros((2,) * 4))


def test_config_validation():
    for kw in ({"cfl": 0.0}, {"cfl": 1.5}, {"delta": 0.0}, {"cadence": 0.0}, {"t_end": -1.0}):
        with pytest.raises(DomainError):
            slv.SolverConfig(**kw)


def test_equilibrium_is_steady():
    g = get_grid(2, 16)
    cfg = slv.SolverConfig(n=16, t_end=0.2, cadence=0.1)
    T = t4.ViscosityTensor(1.0, 0.0, t4.preset("random_symmetric 1 0.05", 2), t4.parse_modulation("sin 2 0.5; cos_profile 0 1"))
    tr = slv.run(cfg, T, LAW, np.ones(g.shape), np.zeros((2,) + g.shape))
    assert tr.failure is None
    assert np.max(np.abs(tr.rho - 1)) < 1e-14
    assert np.max(np.abs(tr.m)) < 1e-14


def test_uniform_translation_is_exact():
    g = get_grid(2, 16)
    cfg = slv.SolverConfig(n=16, t_end=0.1, cadence=0.1, regularize=False)
    u0 = np.array([0.3 * np.ones(g.shape), -0.2 * np.ones(g.shape)])
    tr = slv.run(cfg, ZERO, LAW, np.ones(g.shape), u0)
    np.testing.assert_allclose(tr.velocity(-1), u0, atol=1e-13)


def test_linear_acoustic_mode():
    # small-amplitude mode against the damped wave equation
    # rho_tt = c^2 rho_xx + nu rho_xxt, nu = (2 mu + lam)/M
    mu, lam, eps = 0.2, 0.1, 1e-7
    g = get_grid(2, 16)
    x = g.x
    law = PressureLaw(1.0, 2.0, 1.0)
    T = t4.ViscosityTensor(mu, lam, np.zeros((2,) * 4))
    cfg = slv.SolverConfig(n=16, t_end=1.0, cadence=1.0, regularize=False, cfl=0.4)
    tr = slv.run(cfg, T, law, 1 + eps * np.cos(x[0]), np.zeros((2,) + g.shape))
    nu = 2 * mu + lam
    c2 = 2.0
    disc = complex(nu**2 - 4 * c2)
    s1, s2 = (-nu + np.sqrt(disc)) / 2, (-nu - np.sqrt(disc)) / 2
    # a + b = 1, a s1 + b s2 = 0
    b = s1 / (s1 - s2)
    a = 1 - b
    amp = (a * np.exp(s1) + b * np.exp(s2)).real
    got = 2 * g.mean((tr.rho[-1] - 1) * np.cos(x[0])) / eps
    assert got == pytest.approx(amp, rel=1e-5)


def test_linearized_symbol_of_rhs():
    # d_m for u = eps e_0 sin(x_1) matches -mu k^2 u
    g = get_grid(2, 16)
    mu = 0.7
    T = t4.ViscosityTensor(mu, 0.3, np.zeros((2,) * 4))
    model = slv.Model(g, LAW, T, 0.1)
    u = np.array([1e-8 * np.sin(g.x[1]), np.zeros(g.shape)])
    d_rho, d_m, _ = model.rhs(np.ones(g.shape), u, 0.0)
    np.testing.assert_allclose(d_m[0], -mu * u[0], atol=1e-20)
    assert np.max(np.abs(d_rho)) < 1e-20


def _smooth_state(g):
    x = g.x
    rho = 1 + 0.2 * np.cos(x[0]) * np.sin(x[1])
    u = np.array([0.3 * np.sin(x[0] + x[1]), 0.2 * np.cos(x[0])])
    return rho, u


def test_rk3_temporal_order():
    g = get_grid(2, 16)
    T = t4.ViscosityTensor(0.5, 0.0, t4.preset("random_symmetric 2 0.02", 2), t4.parse_modulation("sin 3 0.5"))
    model = slv.Model(g, LAW, T, 0.2)
    rho, u = _smooth_state(g)
    s0 = slv.FluidState(rho, model._trunc(rho * u), 0.0, np.zeros(3))

    def advance(k, t_end=0.02):
        s = s0
        for _ in range(k):
            s = model.step(s, t_end / k)
        return s

    ref = advance(64)
    errs = [float(np.max(np.abs(advance(k).m - ref.m))) for k in (2, 4, 8)]
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    assert 6.5 < r1 < 9.5 and 6.5 < r2 < 9.5


def _budget_run(cfl):
    g = get_grid(2, 32)
    T = t4.ViscosityTensor(1.0, 0.5, t4.preset("random_symmetric 5 0.05", 2), t4.parse_modulation("sin 2 0.5; cos_profile 1 1.5"))
    cfg = slv.SolverConfig(n=32, delta=0.2, t_end=0.3, cadence=0.1, regularize=False, cfl=cfl)
    rho, u = _smooth_state(g)
    tr = slv.run(cfg, T, LAW, rho, u)
    assert tr.failure is None
    E = np.array([slv.energy(tr.model, tr.rho[i], tr.m[i]) for i in range(len(tr))])
    bal = E + 1.0 * tr.acc[:, 0] + 1.5 * tr.acc[:, 1] + tr.acc[:, 2] - E[0]
    return g, tr, E, float(np.max(np.abs(bal)))


def test_energy_budget_defect_is_time_error_only():
    # the semi-discrete budget is exact, so the defect is the RK3 error
    defects = [_budget_run(cfl)[3] for cfl in (0.5, 0.25, 0.125)]
    assert defects[0] < 1e-7
    for d0, d1 in zip(defects, defects[1:]):
        assert 7.0 < d0 / d1 < 9.0


def test_conservation_and_dissipation():
    g, tr, E, _ = _budget_run(0.5)
    assert np.all(np.diff(E) < 0)
    assert np.max(np.abs(g.mean(tr.rho) - 1)) < 1e-13
    mom = np.array([g.integrate(m) for m in tr.m])
    assert np.max(np.abs(mom - mom[0])) < 1e-12


def test_regularization():
    g = get_grid(2, 32)
    rho0 = 1 + 0.9 * np.cos(g.x[0]) ** 3
    rho0 += 1 - g.mean(rho0)
    u0 = np.array([np.sign(np.sin(g.x[1])), np.zeros(g.shape)])
    rho, u, xi = slv.regularize_initial_data(g, rho0, u0, 0.2, 1.0)
    assert g.mean(rho) == pytest.approx(1.0, abs=1e-14)
    assert np.min(rho) > 0
    assert 0 < xi <= np.max(rho0) + 0.2
    assert np.max(np.abs(g.forward(rho)[~g.dealias_mask])) < 1e-10
    with pytest.raises(RegularizationError):
        slv.regularize_initial_data(g, rho0, u0, 1.5, 1.0)
    with pytest.raises(RegularizationError):
        slv.regularize_initial_data(g, rho0 + 0.5, u0, 0.2, 1.0)
    with pytest.raises(RegularizationError):
        slv.regularize_initial_data(g, -rho0, u0, 0.2, 1.0)


def test_small_perturbation_flattens_under_cap():
    # rho0 + delta exceeds every admissible cap level, so the capped field is constant
    g = get_grid(2, 16)
    rho0 = 1 + 0.01 * np.cos(g.x[0])
    rho, _, xi = slv.regularize_initial_data(g, rho0, np.zeros((2,) + g.shape), 0.1, 1.0)
    assert xi == pytest.approx(1.0, abs=1e-13)
    assert np.max(np.abs(rho - 1)) < 1e-14


def test_sample_times():
    np.testing.assert_allclose(slv.sample_times(1.0, 0.25), [0, 0.25, 0.5, 0.75, 1.0])
    ts = slv.sample_times(1.3, 0.4)
    assert ts[-1] == 1.3 and any(abs(t - 1.0) < 1e-12 for t in ts)
    assert list(slv.sample_times(0.0, 0.1)) == [0.0]
    np.testing.assert_allclose(slv.sample_times(0.25, 0.1), [0, 0.1, 0.2, 0.25])


def test_positivity_failure_is_recorded():
    g = get_grid(2, 16)
    cfg = slv.SolverConfig(n=16, t_end=0.1, regularize=False, rho_floor=0.5)
    rho0 = 1 + 0.6 * np.cos(g.x[0])
    tr = slv.run(cfg, ZERO, LAW, rho0, np.zeros((2,) + g.shape))
    assert tr.failure["kind"] == "PositivityError"
    assert len(tr) == 1


def test_subsample_and_cauchy():
    g = get_grid(2, 16)
    cfg = slv.SolverConfig(n=16, t_end=0.4, cadence=0.1, regularize=False)
    rho, u = _smooth_state(g)
    tr = slv.run(cfg, ZERO, LAW, rho, u)
    assert len(tr.subsample(2)) == 3
    with pytest.raises(CadenceError):
        tr.subsample(3)
    same = slv.cauchy_table([tr, tr], t0=0.1)
    assert same == [0.0]
    other = slv.run(cfg, ZERO, LAW, rho, 0.5 * u)
    diff = slv.cauchy_table([tr, other], t0=0.1)[0]
    assert diff > 0 and math.isfinite(diff)
    with pytest.raises(CadenceError):
        slv.cauchy_table([tr, tr.subsample(2)])


def test_module_level_helpers_match_model():
    g = get_grid(2, 16)
    rho, u = _smooth_state(g)
    model = slv.Model(g, LAW, ZERO, 0.1)
    s = slv.FluidState(rho, model._trunc(rho * u), 0.0, np.zeros(3))
    d_rho, d_m = slv.assemble_rhs(s, ZERO, LAW, 0.1, g)
    ref = model.rhs(s.rho, s.m, 0.0)
    np.testing.assert_array_equal(d_m, ref[1])
    np.testing.assert_array_equal(slv.material_derivative(s, ZERO, LAW, 0.1, g), model.material_derivative(s.rho, s.m, 0.0))
    cfg = slv.SolverConfig(n=16)
    np.testing.assert_array_equal(slv.step(s, cfg, ZERO, LAW, 1e-3).m, model.step(s, 1e-3).m)
