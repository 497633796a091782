import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisoflow import scalar_laws as sl
from anisoflow.errors import DomainError, UnsupportedError

LAW = sl.PressureLaw(1.0, 2.0, 1.0)

gammas = st.sampled_from([1.2, 1.4, 5 / 3, 2.0, 2.5, 3.0])
masses = st.sampled_from([0.5, 1.0, 2.0])
ratios = st.floats(min_value=0.01, max_value=50.0, allow_nan=False)


# frozen values, computed by hand from the antiderivatives with gamma = 2, M = 1


def test_frozen_values_gamma2():
    assert sl.h1_rel(LAW, 2.0) == pytest.approx(1.0, rel=1e-15)
    assert sl.h_ell(LAW, 2.0, 2) == pytest.approx(5 / 3, rel=1e-14)
    assert sl.h_ell(LAW, 0.5, 2) == pytest.approx(7 / 48, rel=1e-14)
    assert sl.h_ell(LAW, 2.0, 3) == pytest.approx(3.4, rel=1e-14)
    # rho * int_rho^M P(M)^2 / s^2 ds tends to P(M)^2 as rho -> 0
    assert sl.h_ell(LAW, 0.0, 2) == pytest.approx(1.0, rel=1e-14)
    assert sl.pressure(LAW, 3.0) == 9.0


def test_exact_equality_case():
    # (P(2) - P(1))^2 = 9 = 2*2*1*H1(2) + 3*H2(2)
    lhs = (sl.pressure(LAW, 2.0) - LAW.p_ref) ** 2
    rhs = 2 * 2 * LAW.p_ref * sl.h1_rel(LAW, 2.0) + 3 * sl.h_ell(LAW, 2.0, 2)
    assert lhs == 9.0
    assert rhs == pytest.approx(9.0, rel=1e-14)
    assert abs(sl.ineg2_gap(LAW, 2.0)) < 1e-40


def test_gap_below_mean_density():
    assert sl.ineg2_gap(LAW, 0.5) == pytest.approx(0.875, rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(gammas, masses, ratios)
def test_h_ell_matches_quadrature(gamma, M, r):
    law = sl.PressureLaw(1.0, gamma, M)
    rho = r * M
    for ell in (2, 3):
        a = sl.h_ell(law, rho, ell)
        b = sl.h_ell_quad(law, rho, ell)
        assert a == pytest.approx(b, rel=1e-8, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(gammas, masses, ratios)
def test_moments_nonnegative_and_h1_oracle(gamma, M, r):
    law = sl.PressureLaw(1.0, gamma, M)
    rho = r * M
    assert sl.h_ell(law, rho, 2) >= -1e-14
    assert sl.h_ell(law, rho, 3) >= -1e-14
    assert sl.h1_rel(law, rho) >= -1e-14
    assert sl.h1_rel(law, rho) == pytest.approx(sl.h1_quad(law, rho), rel=1e-8, abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(gammas, masses, ratios)
def test_ineg2_gap_sign(gamma, M, r):
    law = sl.PressureLaw(1.0, gamma, M)
    gap = sl.ineg2_gap(law, r * M)
    assert gap >= -1e-12
    if r >= 1:
        assert abs(gap) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(gammas, masses, st.floats(min_value=0.0, max_value=30.0))
def test_power_convexity(gamma, M, r):
    law = sl.PressureLaw(1.0, gamma, M)
    assert sl.power_convexity_gap(law, r * M) >= -1e-9 * (1 + (r * M) ** (3 * gamma))


def test_expanded_h3_agrees_away_from_mean():
    for gamma in (1.4, 2.0, 3.0):
        law = sl.PressureLaw(1.0, gamma, 1.0)
        rho = np.array([0.1, 0.5, 1.5, 4.0])
        np.testing.assert_allclose(sl.h_ell(law, rho, 3), sl.h3_expanded(law, rho), rtol=1e-10)


def test_branch_switch_is_continuous():
    law = sl.PressureLaw(1.0, 1.4, 1.0)
    for edge in (0.75, 1.25):
        below = sl.h_ell(law, edge * (1 - 1e-12), 2)
        above = sl.h_ell(law, edge * (1 + 1e-12), 2)
        assert below == pytest.approx(above, rel=1e-9)


def test_array_and_scalar_agree():
    rho = np.array([0.0, 0.2, 0.99, 1.0, 1.01, 7.0])
    arr = sl.h_ell(LAW, rho, 2)
    assert arr.shape == rho.shape
    for r, v in zip(rho, arr):
        assert v == sl.h_ell(LAW, float(r), 2)


def test_domain_errors():
    with pytest.raises(DomainError):
        sl.h_ell(LAW, -0.1, 2)
    with pytest.raises(DomainError):
        sl.h1_rel(LAW, np.array([1.0, -1.0]))
    with pytest.raises(UnsupportedError):
        sl.h_ell(LAW, 1.0, 4)
    with pytest.raises(UnsupportedError):
        sl.PressureLaw(1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        sl.PressureLaw(0.0, 2.0, 1.0)
    with pytest.raises(UnsupportedError):
        sl.PressureLaw(1.0, 2.0, 1.0).validate_dimension(3)
    sl.PressureLaw(1.0, 3.0, 1.0).validate_dimension(3)


def test_gap_detects_broken_entropy(monkeypatch):
    # canary: halving H1 must make the inequality fail somewhere below M
    orig = sl.h1_rel
    monkeypatch.setattr(sl, "h1_rel", lambda law, rho: 0.5 * orig(law, rho))
    gaps = sl.ineg2_gap(LAW, np.geomspace(1e-3, 10, 30))
    assert np.min(gaps) < -1e-3


def test_sound_speed():
    assert sl.PressureLaw(2.0, 2.0, 1.0).sound_speed(1.0) == pytest.approx(2.0)
    assert math.isclose(float(LAW.sound_speed(4.0)), math.sqrt(8.0))
