import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisoflow.errors import DomainError, UnsupportedError
from anisoflow.spectral import SpectralGrid, get_grid

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def test_grid_validation():
    for bad in (12, 2, 0):
        with pytest.raises(UnsupportedError):
            SpectralGrid(2, bad)
    with pytest.raises(UnsupportedError):
        SpectralGrid(4, 16)
    assert get_grid(2, 16) is get_grid(2, 16)


@pytest.mark.parametrize("d", [2, 3])
def test_derivatives_of_trig_modes(d):
    g = get_grid(d, 16)
    x = g.x
    f = np.sin(2 * x[0]) * np.cos(3 * x[1])
    gf = g.grad(f)
    np.testing.assert_allclose(gf[0], 2 * np.cos(2 * x[0]) * np.cos(3 * x[1]), atol=1e-12)
    np.testing.assert_allclose(gf[1], -3 * np.sin(2 * x[0]) * np.sin(3 * x[1]), atol=1e-12)
    np.testing.assert_allclose(g.laplacian(f), -13 * f, atol=1e-11)
    np.testing.assert_allclose(g.inv_lap(f), -f / 13, atol=1e-13)


def test_nyquist_mode_has_zero_derivative():
    g = get_grid(2, 8)
    f = np.cos(4 * g.x[0])
    assert np.max(np.abs(g.grad(f))) < 1e-13


def test_jacobian_layout():
    g = get_grid(2, 16)
    x = g.x
    u = np.array([np.sin(x[1]), np.zeros_like(x[0])])
    J = g.jacobian(u)
    # J[i, k] = d_k u^i
    np.testing.assert_allclose(J[0, 1], np.cos(x[1]), atol=1e-13)
    assert np.max(np.abs(J[0, 0])) < 1e-13


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_plancherel_split(seed):
    g = get_grid(2, 32)
    u = g.random_field(np.random.default_rng(seed), 10, ncomp=2)
    c, dv, gr = g.cz_split_norms(u, 2)
    assert gr**2 == pytest.approx(c**2 + dv**2, rel=1e-11)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_inner_products_agree(seed):
    g = get_grid(2, 16)
    rng = np.random.default_rng(seed)
    a, b = g.random_field(rng, 7), g.random_field(rng, 7)
    assert g.inner(a, b) == pytest.approx(g.spectral_inner(a, b), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(min_value=0.01, max_value=2.0))
def test_mollifier_properties(seed, delta):
    g = get_grid(2, 32)
    rng = np.random.default_rng(seed)
    a, b = g.random_field(rng, 12), g.random_field(rng, 12)
    ma = g.mollify(a, delta)
    assert g.mean(ma) == pytest.approx(g.mean(a), abs=1e-14)
    assert g.inner(ma, b) == pytest.approx(g.inner(a, g.mollify(b, delta)), abs=1e-12)
    assert g.lp_norm(ma, 2) <= g.lp_norm(a, 2) * (1 + 1e-12)
    assert np.max(ma) <= np.max(a) + 1e-12  # positive kernel


def test_mollifier_second_order():
    g = get_grid(2, 32)
    f = np.sin(3 * g.x[0])
    errs = [g.lp_norm(g.mollify(f, dl) - f, 2) for dl in (0.1, 0.05, 0.025)]
    for e0, e1 in zip(errs, errs[1:]):
        assert 3.5 <= e0 / e1 <= 4.5
    with pytest.raises(DomainError):
        g.mollify(f, 0.0)


def test_dealias_mask_and_product():
    g = get_grid(2, 16)
    assert g.dealias_mask[0, 0]
    assert not np.any(g.dealias_mask & (g.kabs >= 16 / 3))
    x = g.x
    # product of two resolved modes stays exact when the sum is resolved
    p = g.mul(np.cos(x[0]), np.cos(2 * x[0]))
    np.testing.assert_allclose(p, 0.5 * (np.cos(x[0]) + np.cos(3 * x[0])), atol=1e-13)


def test_integrals_and_norms():
    g = get_grid(3, 8)
    assert g.integrate(np.ones(g.shape)) == pytest.approx((2 * np.pi) ** 3)
    f = np.cos(g.x[0])
    assert g.lp_norm(f, 2) ** 2 == pytest.approx(0.5 * (2 * np.pi) ** 3)
    assert g.lp_norm(f, 2, normalized=True) ** 2 == pytest.approx(0.5)
    assert g.lp_norm(f, np.inf) == pytest.approx(1.0)


def test_helmholtz_inverses():
    g = get_grid(2, 32)
    x = g.x
    s = np.sin(x[0]) * np.cos(2 * x[1])
    np.testing.assert_allclose(g.inv_lap_div(g.grad(s)), s, atol=1e-12)
    psi = np.cos(x[0] + x[1])
    v = np.array([g.grad(psi)[1], -g.grad(psi)[0]])  # divergence free
    assert np.max(np.abs(g.div(v))) < 1e-12
    c, dv, _ = g.cz_split_norms(v, 4)
    assert dv < 1e-12 and c > 0


def test_curl_3d_of_gradient_vanishes():
    g = get_grid(3, 16)
    x = g.x
    f = np.sin(x[0]) * np.cos(x[1]) * np.sin(2 * x[2])
    assert np.max(np.abs(g.curl(g.grad(f)))) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_poincare(seed):
    g = get_grid(2, 16)
    h = g.random_field(np.random.default_rng(seed), 6)
    assert g.lp_norm(h - g.mean(h), 2) <= g.lp_norm(g.grad(h), 2) * (1 + 1e-12)


def test_commutator_decay_and_bound():
    g = get_grid(2, 64)
    x = g.x
    b, a = np.sin(x[0]), np.cos(2 * x[1])
    norms = [g.lp_norm(g.commutator_r(b, a, dl, 1), 2) for dl in (0.4, 0.2, 0.1, 0.05)]
    assert all(n1 < 0.75 * n0 for n0, n1 in zip(norms, norms[1:]))
    for kind in (1, 2):
        assert g.lp_norm(g.commutator_r(b, a, 0.1, 0, kind), 2) <= g.lp_norm(g.grad(b), 4) * g.lp_norm(a, 4)
    with pytest.raises(UnsupportedError):
        g.commutator_r(b, a, 0.1, 0, kind=3)


def test_random_field_band():
    g = get_grid(2, 16)
    f = g.random_field(np.random.default_rng(0), 3, amp=0.5)
    assert np.max(np.abs(f)) == pytest.approx(0.5)
    fh = g.forward(f)
    assert np.max(np.abs(fh[g.kabs > 3])) < 1e-10
    with pytest.raises(DomainError):
        g.random_field(np.random.default_rng(0), 8)
