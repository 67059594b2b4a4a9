"""Exact-oracle checks for the distribution layer.

Expected values are either trivial identities, closed forms verified by an
independent numerical integration in the test itself, or frozen constants
computed by direct series summation with an analytic remainder bound.
"""

import math

import numpy as np
import pytest
from scipy.special import exp1

from wllnlab.distributions import (
    FiniteDiscrete,
    HeavyLogLaw,
    Pareto1,
    UnsupportedOracleError,
    convolve,
    example41_constant_c,
    heavy_series_partial,
)
from wllnlab.verify import wilson_interval

# 2c * sum_{k>=2} 1/(k^2 log k) = 1; the sum was computed by direct
# summation to k = 5*10^4 plus the Euler-Maclaurin tail anchored at
# int_K^oo dx/(x^2 log x) = E1(log K), and cross-checked against raw
# partial sums to k = 10^7 (monotone from below).
C_NORMALIZER = 0.8257341175495516
SERIES_TOTAL = 0.6055217888826004


def riemann_survival_integral(dist, M, points=200_000):
    # brute midpoint rule for int_0^M t * P(|X|>t) dt, as an independent
    # cross-check of the exact piecewise integration
    t = (np.arange(points) + 0.5) * (M / points)
    s = np.array([dist.survival(float(x)) for x in t])
    return float(np.sum(t * s) * (M / points))


class TestFiniteDiscrete:
    def test_two_point_symmetric(self):
        d = FiniteDiscrete([(-2.0, 0.5), (2.0, 0.5)])
        assert d.trunc_moment(5.0, 1) == 0.0
        assert d.trunc_moment(5.0, 2) == 4.0
        assert d.trunc_moment(1.0, 2) == 0.0
        assert d.survival(1.9) == 1.0
        assert d.survival(2.0) == 0.0

    def test_point_mass_switch(self):
        d = FiniteDiscrete([(7.0, 1.0)])
        assert d.trunc_moment(6.9, 1) == 0.0
        assert d.trunc_moment(7.0, 1) == 7.0
        assert d.survival(7.0) == 0.0
        assert d.survival(6.0) == 1.0

    def test_tau_integral_two_point(self):
        # tau(t) = t for t < a, then 0: integral is a^2/2
        a = 3.0
        d = FiniteDiscrete([(-a, 0.5), (a, 0.5)])
        assert d.tau_integral(a) == pytest.approx(a * a / 2, abs=1e-12)
        assert d.tau_integral(10.0) == pytest.approx(a * a / 2, abs=1e-12)

    def test_tau_integral_matches_riemann(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            vals = rng.uniform(-8, 8, size=6)
            probs = rng.dirichlet(np.ones(6))
            d = FiniteDiscrete(list(zip(vals, probs)))
            M = float(rng.uniform(1, 10))
            assert d.tau_integral(M) == pytest.approx(
                riemann_survival_integral(d, M), abs=1e-3)

    def test_band_moment(self):
        d = FiniteDiscrete([(1.0, 0.25), (2.0, 0.25), (3.0, 0.5)])
        assert d.band_moment(1.0, 2.5, 1) == pytest.approx(0.5)
        assert d.band_moment(0.0, 3.0, 1) == pytest.approx(d.trunc_moment(3.0, 1))
        assert d.band_moment(3.0, 2.0, 2) == 0.0

    def test_rejects_bad_atoms(self):
        with pytest.raises(ValueError):
            FiniteDiscrete([(1.0, 0.7), (2.0, 0.7)])
        with pytest.raises(ValueError):
            FiniteDiscrete([(1.0, -0.5), (2.0, 1.5)])

    def test_quantile_roundtrip(self):
        d = FiniteDiscrete([(-1.0, 0.2), (0.0, 0.3), (4.0, 0.5)])
        rng = np.random.default_rng(0)
        samples = d.sample(rng, 50_000)
        for v, p in d.atoms:
            lo, hi = wilson_interval(int(np.sum(samples == v)), len(samples))
            assert lo <= p <= hi


class TestPareto1:
    def test_survival(self):
        g = Pareto1()
        assert g.survival(0.5) == 1.0
        assert g.survival(1.0) == 1.0
        assert g.survival(4.0) == 0.25

    def test_trunc_moments_closed_form(self):
        g = Pareto1()
        # E(X 1{X<=M}) = int_1^M dt/t = log M; E(X^2 1{X<=M}) = M - 1
        for M in (1.5, 2.0, 10.0, 123.0):
            assert g.trunc_moment(M, 1) == pytest.approx(math.log(M), rel=1e-12)
            assert g.trunc_moment(M, 2) == pytest.approx(M - 1.0, rel=1e-12)
        assert g.trunc_moment(0.5, 2) == 0.0

    def test_tau_integral(self):
        g = Pareto1(scale=1.0)
        # tau(t) = t below 1, then == 1
        assert g.tau_integral(1.0) == pytest.approx(0.5)
        assert g.tau_integral(5.0) == pytest.approx(4.5)
        assert g.tau_integral(5.0) == pytest.approx(
            riemann_survival_integral(g, 5.0), abs=1e-4)

    def test_scaled(self):
        g = Pareto1(scale=2.0)
        assert g.survival(8.0) == 0.25
        assert g.trunc_moment(8.0, 1) == pytest.approx(2.0 * math.log(4.0))

    def test_empirical_tail(self):
        # inverse-CDF sampling reproduces P(X > 10) = 0.1
        g = Pareto1()
        rng = np.random.default_rng(42)
        x = g.sample(rng, 10_000)
        lo, hi = wilson_interval(int(np.sum(x > 10.0)), len(x))
        assert lo <= 0.1 <= hi


class TestHeavyLogLaw:
    def test_normalizer_frozen(self):
        assert example41_constant_c() == pytest.approx(C_NORMALIZER, abs=1e-10)

    def test_normalizer_defining_identity(self):
        # 2c * sum_{k>=2} 1/(k^2 log k) = 1, with the sum recomputed here
        # independently: direct summation to 10^6 plus E1 remainder
        k = np.arange(2, 1_000_001, dtype=float)
        head = float(np.sum(1.0 / (k * k * np.log(k))))
        total = head + float(exp1(math.log(1_000_001.0)))
        assert 2.0 * example41_constant_c() * total == pytest.approx(1.0, abs=1e-9)
        assert total == pytest.approx(SERIES_TOTAL, abs=1e-10)

    def test_partial_sum_k10(self):
        want = math.fsum(1.0 / (k * k * math.log(k)) for k in range(2, 11))
        assert heavy_series_partial(10) == pytest.approx(want, abs=1e-14)
        assert want == pytest.approx(0.575, abs=5e-4)

    def test_survival_against_direct_sum(self):
        d = HeavyLogLaw(0.5)
        k = np.arange(3, 10_000_001, dtype=float)
        tail = float(np.sum(1.0 / (k * k * np.log(k))))
        # remainder past 10^7 is below int dx/(x^2 log x) ~ 6e-9
        want = 0.5 * 2.0 * example41_constant_c() * tail
        assert d.survival(2.0) == pytest.approx(want, abs=2e-8)

    def test_total_mass(self):
        for rho in (0.0, 0.3, 1.0):
            d = HeavyLogLaw(rho)
            assert d.survival(1.0) == pytest.approx(1.0 - rho, rel=1e-12)

    def test_symmetric_moments(self):
        d = HeavyLogLaw(0.5)
        assert d.trunc_moment(100.0, 1) == 0.0
        # E(X^2 1{|X|<=M}) = (1-rho) 2c sum_{2<=k<=M} 1/log k
        want = 0.5 * 2.0 * C_NORMALIZER * math.fsum(
            1.0 / math.log(k) for k in range(2, 8))
        assert d.trunc_moment(7.0, 2) == pytest.approx(want, rel=1e-10)

    def test_one_sided_first_moment(self):
        d = HeavyLogLaw(0.25, symmetric=False)
        want = 0.75 * 2.0 * C_NORMALIZER * math.fsum(
            1.0 / (k * math.log(k)) for k in range(2, 11))
        assert d.trunc_moment(10.0, 1) == pytest.approx(want, rel=1e-10)

    def test_tau_envelope_bound(self):
        d = HeavyLogLaw(0.5)
        desc, env = d.tau_envelope()
        for M in (2, 5, 17, 100, 4096):
            assert M * d.survival(M) <= env(M) + 1e-12

    def test_empirical_tail(self):
        d = HeavyLogLaw(0.5)
        rng = np.random.default_rng(3)
        x = d.sample(rng, 100_000)
        for M in (0.0, 2.0, 10.0):
            lo, hi = wilson_interval(int(np.sum(np.abs(x) > M)), len(x),
                                     z=3.2905267314919255)  # 99.9%
            assert lo <= d.survival(M) <= hi

    def test_degenerate_rho_one(self):
        d = HeavyLogLaw(1.0)
        rng = np.random.default_rng(0)
        assert np.all(d.sample(rng, 1000) == 0.0)

    def test_unsupported_order(self):
        with pytest.raises(UnsupportedOracleError):
            HeavyLogLaw(0.5).trunc_moment(10.0, 3)


def test_convolve():
    a = FiniteDiscrete([(-1.0, 0.5), (1.0, 0.5)])
    b = FiniteDiscrete([(-3.0, 0.5), (3.0, 0.5)])
    s = convolve(a, b)
    assert dict(s.atoms) == {-4.0: 0.25, -2.0: 0.25, 2.0: 0.25, 4.0: 0.25}
    assert s.trunc_moment(10.0, 2) == pytest.approx(10.0)
