import math

import mpmath

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stablelab import theory
from stablelab.errors import DomainError


mpmath.mp.dps = 40


def f_direct(x):
    x = mpmath.mpf(x)
    return float((mpmath.exp(x) - 1 - x) / (x * (mpmath.exp(x) - 1)))


def test_s_of():
    assert theory.s_of((1, 2)) == pytest.approx(math.log(2), rel=1e-15)
    assert theory.s_of((100, 200)) == pytest.approx(math.log(2), rel=1e-15)
    assert theory.s_of((1000, 1001)) == pytest.approx(6.908754779315221, rel=1e-14)
    with pytest.raises(DomainError):
        theory.s_of((5, 5))


@given(n1=st.integers(1, 10**6), extra=st.integers(1, 10**6))
def test_s_at_least_n1_over_n2(n1, extra):
    assert theory.s_of((n1, n1 + extra)) >= n1 / (n1 + extra)


def test_expected_stable_matchings_values():
    assert theory.expected_stable_matchings((1000, 1001)) == pytest.approx(53.61745230683944, rel=1e-12)
    assert theory.expected_stable_matchings((200, 201)) == pytest.approx(14.24639222275597, rel=1e-12)
    assert theory.expected_stable_matchings((1000, 1100)) == pytest.approx(1.949910038385565, rel=1e-12)
    assert theory.es_near_balanced((1000, 1001)) == pytest.approx(53.25600376880312, rel=1e-12)
    assert theory.es_near_balanced((200, 201)) == pytest.approx(13.88665176963997, rel=1e-12)
    with pytest.raises(DomainError):
        theory.expected_stable_matchings((7, 7))


def test_regime_limits():
    assert theory.lambda_c(2) == 2
    assert theory.es_fixed_ratio(2) == pytest.approx(1.061475690846086, rel=1e-12)
    assert theory.es_ratio_to_infinity() == 1
    assert theory.expected_stable_matchings((10, 10**7)) == pytest.approx(1, abs=1e-5)
    # fixed ratio c: main formula approaches the lambda(c) limit
    for c in (1.5, 2, 4):
        n1 = 10**6
        assert theory.expected_stable_matchings((n1, int(c * n1))) == pytest.approx(
            theory.es_fixed_ratio(c), rel=1e-4)


@pytest.mark.parametrize("c", [1.1, 1.5, 2, 3, 10])
def test_scale_consistency(c):
    n1 = 1000
    n2 = int(round(c * n1))
    s = theory.s_of((n1, n2))
    main = theory.expected_stable_matchings((n1, n2))
    scaled = main / (n1 / ((n2 - n1) * s))
    assert scaled == pytest.approx(math.exp(-(math.exp(s) - 1 - s) / (math.exp(s) - 1)), rel=1e-12)


def test_f_values():
    assert theory.f_of(math.log(21)) == pytest.approx(0.2784587387530511, rel=1e-12)
    assert theory.f_of(math.log(11)) == pytest.approx(0.3170323914242463, rel=1e-12)
    assert theory.f_of(1e-12) == pytest.approx(0.5, abs=1e-12)
    assert theory.F_AT_ZERO == 0.5
    assert theory.f_of(1e4) == pytest.approx(1e-4, rel=1e-12)
    for x in (1e-6, 1e-2, 0.0999, 0.1, 1, 5, 30):
        assert theory.f_of(x) == pytest.approx(f_direct(x), rel=1e-12)
    with pytest.raises(DomainError):
        theory.f_of(0)
    with pytest.raises(DomainError):
        theory.f_of(-1)


def test_f_series_branch_is_continuous():
    for x in (0.0999999, 0.1):
        assert theory.f_of(x) == pytest.approx(f_direct(x), rel=1e-14)


def test_f_decreasing():
    xs = np.concatenate([np.logspace(-8, -1, 200), np.linspace(0.11, 50, 2000)])
    vals = [theory.f_of(x) for x in xs]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_h():
    assert theory.h_of((1, 2)) == pytest.approx(2 - math.log(2), rel=1e-14)
    assert theory.h_of((1, 10**9)) == pytest.approx(1, abs=1e-8)
    assert theory.h_of((10**6, 10**6 + 1)) == pytest.approx(2, abs=1e-4)


def test_tolerances():
    n1, n2 = 10**4, 2 * 10**4  # s = ln 2, below the regime threshold
    d, ds = theory.tolerances((n1, n2), a=0.4)
    assert d == pytest.approx(10**-1.6, rel=1e-12)
    s = theory.s_of((n1, n2))
    assert ds * s * theory.f_of(s) == pytest.approx(d, rel=1e-14)
    n1, n2 = 53, 54  # s = ln 54 > 3
    d, _ = theory.tolerances((n1, n2), b=0.4)
    assert d == pytest.approx(math.log(54) ** -0.4, rel=1e-12)
    with pytest.raises(DomainError):
        theory.tolerances((1, 2), a=0.5)
    with pytest.raises(DomainError):
        theory.tolerances((1, 2), b=0)


def test_tolerance_at_s_equal_four():
    assert 4 ** -0.4 == pytest.approx(0.5743491774985175)
    n1, n2 = 54, 55  # s = ln 55, just above 4
    assert theory.s_of((n1, n2)) > 4
    d, _ = theory.tolerances((n1, n2))
    assert d == pytest.approx(theory.s_of((n1, n2)) ** -0.4)


def test_coupon_mean():
    assert theory.coupon_mean(1, 7) == pytest.approx(1.0, rel=1e-15)
    assert theory.coupon_mean(2, 3) == pytest.approx(2.5, rel=1e-15)
    assert theory.coupon_mean(200, 201) == pytest.approx(981.4842205724103, rel=1e-12)
    assert theory.coupon_mean(5, 10**8) == pytest.approx(5, rel=1e-6)


def test_coupon_mean_by_simulation():
    g = np.random.default_rng(1)
    n1, n2, trials = 8, 12, 20_000
    throws = np.zeros(trials)
    for j in range(n1):
        throws += g.geometric((n2 - j) / n2, size=trials)
    se = throws.std() / math.sqrt(trials)
    assert abs(throws.mean() - theory.coupon_mean(n1, n2)) <= 3 * se


@pytest.mark.parametrize("c", [1.5, 2, 5])
def test_coupon_mean_tracks_n2_s(c):
    n1 = 10**5
    n2 = int(c * n1)
    assert theory.coupon_mean(n1, n2) / (n2 * theory.s_of((n1, n2))) == pytest.approx(1, rel=0.01)


def test_predict_record():
    p = theory.predict((1000, 1001))
    assert p.s == pytest.approx(6.908754779315221)
    assert p.q_center == pytest.approx(1001 * p.s)
    assert p.r_center == pytest.approx(1000**2 * theory.f_of(p.s))
    assert all(math.isfinite(v) and v > 0 for v in p.to_json().values())


def test_spacings_n2_exact_mean():
    st_ = theory.spacings_stats(2, 40_000, 3)
    # T_2 = L^2 + (1-L)^2, E[2 T_2] = 4/3; Var[2 T_2] = 4 Var[T_2] = 4/45
    assert abs(st_.mean_nTn - 4 / 3) <= 3 * math.sqrt(4 / 45 / 40_000)


def test_spacings_large_n():
    st_ = theory.spacings_stats(10**4, 200, 11)
    assert 1.9 <= st_.mean_nTn <= 2.1
    assert st_.p_nTn_ge_3 <= 0.01
    assert 0.85 <= st_.mean_Lplus_scaled <= 1.15


def test_spacings_errors():
    with pytest.raises(DomainError):
        theory.spacings_stats(1, 10, 0)
    with pytest.raises(DomainError):
        theory.spacings_stats(5, 0, 0)
