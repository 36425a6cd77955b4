from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from jsqtail.errors import InvalidParameterError
from jsqtail.model import QueueParams, check_stability, normalize


def test_already_normalized_instance(params2):
    assert params2.k == 2
    assert params2.lam == pytest.approx(0.4, abs=1e-15)
    assert params2.mu == pytest.approx((0.3, 0.3), abs=1e-15)
    assert params2.rho == pytest.approx(2 / 3, rel=1e-14)


def test_uniform_scaling():
    p = normalize(4, (3, 3))
    assert p.lam == 0.4
    assert p.mu == (0.3, 0.3)
    assert p.rho_exact == Fraction(2, 3)


def test_three_server_instance(params3):
    assert params3.rho == pytest.approx(2 / 3, rel=1e-14)
    # decay target for the acceptance checks
    assert params3.rho ** 3 == pytest.approx(8 / 27, rel=1e-13)


def test_exact_normalization_sums_to_one(params2, params3):
    for p in (params2, params3):
        assert p.lam_exact + sum(p.mu_exact) == 1


def test_float_normalization_within_one_ulp(params2):
    total = params2.lam + sum(params2.mu)
    import math
    assert abs(total - 1.0) <= math.ulp(1.0)


def test_idempotent():
    p = normalize(0.4, (0.3, 0.3))
    q = normalize(p.lam, p.mu)
    assert q.lam == p.lam and q.mu == p.mu and q.rho == p.rho


@given(scale=st.floats(min_value=1e-3, max_value=1e3),
       lam=st.floats(min_value=0.01, max_value=0.9),
       mu1=st.floats(min_value=0.01, max_value=1.0),
       mu2=st.floats(min_value=0.01, max_value=1.0))
def test_rho_scale_invariant(scale, lam, mu1, mu2):
    a = normalize(lam, (mu1, mu2), allow_unstable=True)
    b = normalize(lam * scale, (mu1 * scale, mu2 * scale), allow_unstable=True)
    assert b.rho == pytest.approx(a.rho, rel=1e-14)


@pytest.mark.parametrize("lam,mu", [
    (0.0, (0.3, 0.3)),
    (-1, (0.3, 0.3)),
    (0.4, (0.0, 0.3)),
    (0.4, (0.3, -0.1)),
])
def test_nonpositive_rates_rejected(lam, mu):
    with pytest.raises(InvalidParameterError):
        normalize(lam, mu)


def test_single_server_rejected():
    with pytest.raises(InvalidParameterError):
        normalize(0.4, (0.6,))


def test_unstable_needs_flag():
    with pytest.raises(InvalidParameterError):
        normalize(0.6, (0.2, 0.2))
    p = normalize(0.6, (0.2, 0.2), allow_unstable=True)
    assert not check_stability(p)


def test_stability_boundary_case():
    # rho == 1 exactly must classify as unstable
    p = normalize(0.5, (0.25, 0.25), allow_unstable=True)
    assert p.rho_exact == 1
    assert not check_stability(p)


def test_stable_instance(params2):
    assert check_stability(params2)
