"""Tail functionals, the exact survival-integral identity, and the
three-valued condition checkers."""

import math

import numpy as np
import pytest

from wllnlab.distributions import (
    FiniteDiscrete,
    Pareto1,
    example41_constant_c,
)
from wllnlab.models import (
    Example41Model,
    IIDModel,
    IndependentArrayModel,
    TailVanishingModel,
)
from wllnlab.tails import (
    build_tail_profile,
    check_energy_vanishing,
    check_feller_necessary,
    check_liminf_condition,
    check_limsup_condition,
    check_weak_l1,
    feller_identity_residual,
    sigma_n,
    tau_n,
    tau_sup_integral,
)

M_GRID = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0]


def ex41(rho=0.5, **kw):
    return Example41Model(lambda n: rho, **kw)


def ex41_log():
    return Example41Model(lambda n: 1.0 - 1.0 / math.log(n + 2),
                          rho_sup_is_one=True)


class TestFunctionals:
    def test_tail_vanishing_tau(self):
        # tau_n(M) = M / max(M, n) for the inverse-law g
        m = TailVanishingModel(Pareto1())
        assert tau_n(m, 4, 2.0) == pytest.approx(0.5)
        assert tau_n(m, 2, 8.0) == pytest.approx(1.0)
        assert tau_n(m, 10, 10.0) == pytest.approx(1.0)

    def test_bounded_tau_zero(self):
        m = IIDModel(FiniteDiscrete([(-5.0, 0.5), (5.0, 0.5)]))
        assert tau_n(m, 1, 10.0) == 0.0

    def test_two_point_sigma(self):
        a = 3.0
        m = IIDModel(FiniteDiscrete([(-a, 0.5), (a, 0.5)]))
        for M in (3.0, 7.0, 50.0):
            assert sigma_n(m, 1, M) == pytest.approx(a * a / M)

    def test_example41_sigma_at_4(self):
        c = example41_constant_c()
        want = 0.25 * c * (1 / math.log(2) + 1 / math.log(3) + 1 / math.log(4))
        assert sigma_n(ex41(0.5), 1, 4.0) == pytest.approx(want, rel=1e-10)

    def test_rejects_nonpositive_M(self):
        with pytest.raises(ValueError):
            tau_n(ex41(), 1, 0.0)
        with pytest.raises(ValueError):
            sigma_n(ex41(), 1, -1.0)


class TestFellerResidual:
    def test_two_point_hand_computed(self):
        # tau(t) = t below a then 0, so (2/M)(a^2/2) - 0 = a^2/M = sigma(M)
        m = IIDModel(FiniteDiscrete([(-2.0, 0.5), (2.0, 0.5)]))
        for M in (2.0, 5.0, 11.0):
            assert abs(feller_identity_residual(m, 1, M)) <= 1e-12

    def test_zero_law(self):
        m = IIDModel(FiniteDiscrete([(0.0, 1.0)]))
        for M in M_GRID:
            assert feller_identity_residual(m, 1, M) == 0.0

    @pytest.mark.parametrize("model", [
        IIDModel(Pareto1()),
        ex41(0.25),
        TailVanishingModel(Pareto1()),
    ])
    def test_residual_small_across_models(self, model):
        for n in (1, 3, 9):
            for M in M_GRID:
                assert abs(feller_identity_residual(model, n, M)) <= 1e-9


class TestProfile:
    def test_invariant_bounds(self):
        profile = build_tail_profile(ex41_log(), M_GRID, range(1, 17))
        for n in profile.n_range:
            for M in profile.m_grid:
                assert 0.0 <= profile.tau[(n, M)] <= profile.tau_sup[M] <= M
                assert 0.0 <= profile.sigma[(n, M)] <= profile.sigma_sup[M] <= M

    def test_sigma_sup_integral_bound(self):
        # sigma_sup(M) <= (2/M) * int_0^M tau_sup(t) dt
        model = ex41_log()
        profile = build_tail_profile(model, M_GRID, range(1, 17))
        for M in profile.m_grid:
            assert profile.sigma_sup[M] <= \
                (2.0 / M) * profile.tau_sup_int[M] + 1e-9

    def test_rows_format(self):
        profile = build_tail_profile(ex41(), [2.0, 4.0], range(1, 3))
        rows = list(profile.rows())
        assert len(rows) == 4
        assert rows[0][:2] == (1, 2.0)

    def test_empty_inputs(self):
        with pytest.raises(ValueError):
            build_tail_profile(ex41(), [], range(1, 3))
        with pytest.raises(ValueError):
            build_tail_profile(ex41(), [2.0], [])


def test_tau_sup_integral_union_of_breakpoints():
    # family not pointwise ordered: brute-force the sup integral instead
    dists = [FiniteDiscrete([(-1.0, 0.5), (1.0, 0.5)]),
             FiniteDiscrete([(-3.0, 0.2), (0.0, 0.8)])]
    m = IndependentArrayModel(dists)
    M = 5.0
    got = tau_sup_integral(m, [1, 2], M)
    t = (np.arange(400_000) + 0.5) * (M / 400_000)
    sup = np.maximum(np.array([dists[0].survival(x) for x in t]),
                     np.array([dists[1].survival(x) for x in t]))
    brute = float(np.sum(t * sup) * (M / 400_000))
    assert got == pytest.approx(brute, abs=1e-3)


class TestConditionChecks:
    def test_weak_l1_fails_with_witness(self):
        m = TailVanishingModel(Pareto1())
        profile = build_tail_profile(m, M_GRID, range(1, 17))
        v = check_weak_l1(profile, m)
        assert v.status == "fails"
        assert v.data["limsup_lower_bound"] == 1.0

    def test_weak_l1_holds_on_grid_with_envelope(self):
        m = ex41_log()
        profile = build_tail_profile(m, M_GRID, range(1, 17))
        v = check_weak_l1(profile, m)
        assert v.status == "holds-on-grid"
        assert "log M" in v.witness

    def test_limsup_holds_for_tail_vanishing(self):
        # lim_n tau_n(M) = M * P(|g| > n) -> 0 for every fixed M
        m = TailVanishingModel(Pareto1())
        profile = build_tail_profile(m, M_GRID, range(1, 17))
        assert check_limsup_condition(profile, m).status == "holds"
        assert check_liminf_condition(profile, m).status == "holds"

    def test_iid_liminf_equals_weak_l1(self):
        m = IIDModel(FiniteDiscrete([(-5.0, 0.5), (5.0, 0.5)]))
        profile = build_tail_profile(m, [8.0, 16.0], range(1, 9))
        w = check_weak_l1(profile, m)
        li = check_liminf_condition(profile, m)
        # bounded law: sup and liminf verdicts agree (tau identically 0
        # beyond the support)
        assert w.status in ("holds", "holds-on-grid")
        assert li.status in ("holds", "holds-on-grid", "inconclusive")
        assert profile.tau_sup[8.0] == 0.0

    def test_energy_vanishing_tail_model(self):
        m = TailVanishingModel(Pareto1())
        v = check_energy_vanishing(m, [2.0, 8.0], range(1, 17))
        assert v.status == "holds"

    def test_energy_vanishing_example41(self):
        v = check_energy_vanishing(ex41_log(), [2.0, 8.0], range(1, 33))
        assert v.status == "holds"
        assert "rho_n -> 1" in v.data["per_M"][2.0]["witness"]

    def test_energy_fails_iid_nondegenerate(self):
        m = IIDModel(FiniteDiscrete([(-1.0, 0.5), (1.0, 0.5)]))
        v = check_energy_vanishing(m, [2.0, 4.0], range(1, 9))
        assert v.status == "fails"


class TestFellerNecessary:
    def test_constant_tail_sum_fails(self):
        # P(|f| > N) = 1/N makes the first sum exactly 1 on every N
        m = IIDModel(Pareto1())
        first, second = check_feller_necessary(m, [4, 16, 64])
        assert first.status == "fails"

    def test_finite_variance_iid(self):
        m = IIDModel(FiniteDiscrete([(-2.0, 0.5), (2.0, 0.5)]))
        first, second = check_feller_necessary(m, [4, 16, 64, 256])
        assert first.status == "holds-on-grid"
        assert second.status == "holds-on-grid"
        vals = [second.data["values"][N] for N in (4, 16, 64, 256)]
        assert vals == sorted(vals, reverse=True)

    def test_example41_both_decay(self):
        # the decay is only logarithmic, so the grid must span a few decades
        first, second = check_feller_necessary(ex41(0.5), [64, 1024, 16384])
        assert first.status == "holds-on-grid"
        assert second.status == "holds-on-grid"
