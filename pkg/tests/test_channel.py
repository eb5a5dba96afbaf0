import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cv2x.channel import (NetworkParams, db_to_linear, dbm_to_watts, equivalent_densities,
                          lognormal_neg_moment, received_power, sample_nakagami_power_gain,
                          sample_shadowing)
from cv2x.errors import DomainError, ParameterError
from cv2x.rng import stream

from conftest import KM, fig5_params


def test_moment_degenerate():
    assert lognormal_neg_moment(0.0, 0.0, 0.7) == 1.0
    assert lognormal_neg_moment(3.0, 0.0, 1.0) == pytest.approx(10 ** -0.3, rel=1e-12)


def test_moment_sigma4():
    expected = math.exp(0.5 * (4 * math.log(10) / 20) ** 2)
    assert lognormal_neg_moment(0.0, 4.0, 0.5) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(1.11190, abs=1e-4)


def test_moment_matches_sampling():
    x = sample_shadowing(1.5, 4.0, stream(1), 2_000_000)
    assert np.mean(x ** -0.5) == pytest.approx(lognormal_neg_moment(1.5, 4.0, 0.5), rel=3e-3)


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(0, 8), st.floats(0.1, 2))
def test_moment_mean_sign_identity(omega, sigma, c):
    ratio = lognormal_neg_moment(omega, sigma, c) / lognormal_neg_moment(-omega, sigma, c)
    assert ratio == pytest.approx(math.exp(-2 * c * omega * math.log(10) / 10), rel=1e-10)


def test_moment_rejects_bad_arguments():
    with pytest.raises(ParameterError):
        lognormal_neg_moment(0, -1, 1)
    with pytest.raises(ParameterError):
        lognormal_neg_moment(0, 1, 0)


def test_equivalent_densities_without_shadowing():
    p = NetworkParams(mu_l=10 / KM, lambda_1=0.5 / KM ** 2, lambda_2=4 / KM)
    eq = equivalent_densities(p)
    assert eq.lambda1_e == p.lambda_1
    assert eq.lambda2_e == p.lambda_2
    assert eq.lambda2_a == pytest.approx(math.pi * p.lambda_l * p.lambda_2, rel=1e-15)
    assert eq.zeta21 == pytest.approx(p.P2 * p.B2 * p.G2 / (p.P1 * p.B1 * p.G1))


def test_fig5_equivalent_tier1_density(fig5_eq):
    expected = 0.5 * math.exp(0.5 * (4 * math.log(10) / 20) ** 2)
    assert fig5_eq.lambda1_e * KM ** 2 == pytest.approx(expected, rel=1e-12)
    assert fig5_eq.lambda1_e * KM ** 2 == pytest.approx(0.55595, abs=1e-4)


def test_zeta_cancels_when_powers_match():
    p = fig5_params(G2=dbm_to_watts(40) / dbm_to_watts(23), g2=0.01, B1=2.0, B2=5.0)
    assert equivalent_densities(p).zeta21 == pytest.approx(5.0 / 2.0, rel=1e-12)


def test_zeta_scale_invariance():
    p = fig5_params()
    q = p.replace(P1=p.P1 * 7, P2=p.P2 * 7, B1=p.B1 * 3, B2=p.B2 * 3)
    a, b = equivalent_densities(p), equivalent_densities(q)
    assert b.zeta21 == pytest.approx(a.zeta21, rel=1e-12)
    assert (b.lambda1_e, b.lambda2_e, b.lambda2_a) == (a.lambda1_e, a.lambda2_e, a.lambda2_a)


def test_tier1_density_increases_with_sigma():
    vals = [equivalent_densities(fig5_params(sigma_1=s)).lambda1_e for s in (0, 2, 4, 6, 8)]
    assert all(x < y for x, y in zip(vals, vals[1:]))


@pytest.mark.parametrize("bad", [dict(alpha=2.0), dict(m1=0), dict(m20=1.5), dict(q_c=1.2),
                                 dict(P1=0.0), dict(lambda_1=-1.0), dict(sigma_1=-1.0),
                                 dict(W=float("inf"))])
def test_params_validation(bad):
    with pytest.raises(ParameterError):
        fig5_params(**bad)


def test_nakagami_moments():
    rng = stream(3)
    h1 = sample_nakagami_power_gain(1, rng, 1_000_000)
    assert abs(h1.mean() - 1) < 0.01
    h3 = sample_nakagami_power_gain(3, rng, 200_000)
    se = math.sqrt(2 * (1 / 3) ** 2 / h3.size) * 1.5  # rough standard error of the variance
    assert abs(h3.var() - 1 / 3) < 3 * se + 1e-3
    assert np.all(h3 > 0)
    with pytest.raises(ParameterError):
        sample_nakagami_power_gain(0, rng, 3)


def test_received_power_branches():
    p = fig5_params()
    assert received_power([1.0, 0.0], 1, False, p) == pytest.approx(p.P1 * p.G1)
    assert received_power([1.0, 0.0], 1, False, p, main_lobe=False) == pytest.approx(p.P1 * p.g1)
    assert received_power([0.0, 2.0], 2, True, p) == pytest.approx(p.P2 * p.G2 / 16)
    # off the typical road the side lobe applies regardless of main_lobe
    assert received_power([0.0, 1.0], 2, False, p, main_lobe=True) == pytest.approx(p.P2 * p.g2)
    a = received_power([3.0, 4.0], 1, False, p)
    assert received_power([6.0, 8.0], 1, False, p) == pytest.approx(a / 16)
    with pytest.raises(DomainError):
        received_power([0.0, 0.0], 1, False, p)


def test_unit_conversions():
    assert db_to_linear(20) == pytest.approx(100.0)
    assert dbm_to_watts(30) == pytest.approx(1.0)
    assert np.allclose(db_to_linear(np.array([0.0, 10.0])), [1.0, 10.0])
