import numpy as np
import pytest

import nashalloc as na
from nashalloc.aggregation import (
    Affine,
    AggregationSystem,
    EisenbergNoe,
    MeanField,
    ShiftedLog,
    UtilitySum,
    WeightedAffine,
)
from nashalloc.errors import MaxIterations, NegativeAssets, NonCoherentRiskMeasure

from oracles import random_network, random_scenarios

EXP = na.expectation()


def _en_system(net, gamma=0.95):
    return AggregationSystem(base=EisenbergNoe(net=net, gamma=gamma), lift="sensitive")


def _ex_314_system():
    a = np.array([[1.0, 0.0, 0.75], [0.0, 1.0, 0.75], [0.5, 0.5, 0.75]])
    return AggregationSystem(
        base=WeightedAffine(a=a, c=np.ones(3)), lift="sensitive"
    )


def test_best_response_en_hand_solved(two_bank_net):
    scen = na.ScenarioSet.deterministic([0.0, 0.0])
    sys = _en_system(two_bank_net)
    # bank 1 must reach payments of 1.9; incoming is a third of bank 2's 1.425
    br = na.best_response(0, np.array([5.0, 0.475]), scen, sys, EXP)
    assert br == pytest.approx(1.425, abs=1e-9)


def test_best_response_insensitive_ignores_others(rng, two_bank_net):
    scen = random_scenarios(rng, 2, 6)
    sys = AggregationSystem(base=EisenbergNoe(net=two_bank_net, gamma=0.95),
                            lift="insensitive")
    base_vals = sys.base.components(scen.values.T).T
    expected = na.rho(EXP, base_vals[0], scen.probs)
    for _ in range(3):
        m = rng.uniform(-1.0, 1.0, 2)
        assert na.best_response(0, m, scen, sys, EXP) == pytest.approx(expected, abs=1e-12)


def test_best_response_affine_constant_shock():
    base = UtilitySum((Affine(1.0, 0.0), Affine(1.0, 0.0)))
    sys = AggregationSystem(base=base, lift="sensitive")
    c = 0.8
    scen = na.ScenarioSet.deterministic([c, c])
    br = na.best_response(0, np.array([0.0, 0.0]), scen, sys, EXP)
    assert br == pytest.approx(-c, abs=1e-9)


def test_nash_fixed_point_en_deterministic(two_bank_net):
    scen = na.ScenarioSet.deterministic([0.0, 0.0])
    rep = na.nash_fixed_point(scen, _en_system(two_bank_net), EXP)
    np.testing.assert_allclose(rep.m, [1.425, 0.475], atol=1e-7)
    assert rep.total == pytest.approx(1.9, abs=1e-7)
    assert rep.system_acceptable
    assert np.max(rep.residuals) <= 1e-8


@pytest.mark.parametrize("eps", [0.1, 0.5])
def test_nash_fixed_point_mean_field(eps):
    base = MeanField(utilities=(ShiftedLog(eps), ShiftedLog(eps)), ubar=ShiftedLog(eps, 1.0))
    sys = AggregationSystem(base=base, lift="sensitive")
    rep = na.nash_fixed_point(na.ScenarioSet.deterministic([0.0, 0.0]), sys, EXP)
    np.testing.assert_allclose(rep.m, [1.0 - eps, 1.0 - eps], atol=1e-6)


@pytest.mark.parametrize("t", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_nonunique_family_members_are_fixed_points(t):
    scen = na.ScenarioSet.deterministic([0.0, 0.0, 0.0])
    m = np.array([1.0 - t, 1.0 - t, 4.0 * t / 3.0])
    rep = na.verify_nash(m, scen, _ex_314_system(), EXP)
    assert np.max(rep.residuals) <= 1e-8
    assert rep.system_acceptable


def test_nash_fixed_point_lands_in_nonunique_family():
    scen = na.ScenarioSet.deterministic([0.0, 0.0, 0.0])
    rep = na.nash_fixed_point(scen, _ex_314_system(), EXP)
    # every family member satisfies m1 = m2 = 1 - t and m3 = 4t/3
    t = 1.0 - rep.m[0]
    assert rep.m[1] == pytest.approx(rep.m[0], abs=1e-6)
    assert rep.m[2] == pytest.approx(4.0 * t / 3.0, abs=1e-6)
    assert -1e-9 <= t <= 1.0 + 1e-9


def test_nash_insensitive_examples(rng, two_bank_net):
    # identity utilities: the allocation is the negated expectation per bank
    base = UtilitySum((Affine(1.0, 0.0, domain="real"), Affine(1.0, 0.0, domain="real")))
    scen = na.ScenarioSet(values=np.array([[0.1, 0.5], [-0.4, 0.0]]),
                          probs=np.array([0.5, 0.5]))
    rep = na.nash_insensitive(scen, base, EXP)
    np.testing.assert_allclose(rep.m, [-0.3, 0.2], atol=1e-12)
    assert np.all(rep.residuals == 0.0)

    # clearing base with a deterministic shock: r_i = gamma*soc_i - pi_i0 p_i(x)
    x = np.array([1.0, 0.2])
    p = na.clearing_vector(two_bank_net, x).payments
    base_en = EisenbergNoe(net=two_bank_net, gamma=0.95)
    rep = na.nash_insensitive(na.ScenarioSet.deterministic(x), base_en, EXP)
    expected = 0.95 * two_bank_net.society_obligations - two_bank_net.pi_society * p
    np.testing.assert_allclose(rep.m, expected, atol=1e-10)

    # zero shock: r_i = -component_i(0)
    zero = na.ScenarioSet.deterministic([0.0, 0.0])
    rep = na.nash_insensitive(zero, base_en, EXP)
    np.testing.assert_allclose(
        rep.m, -base_en.components(np.zeros(2)), atol=1e-12
    )


def test_nash_deterministic_en_examples(two_bank_net, one_bank_net):
    rep = na.nash_deterministic_en(two_bank_net, [0.0, 0.0], 0.95, EXP)
    np.testing.assert_allclose(rep.m, [1.425, 0.475], atol=1e-10)
    assert np.max(rep.residuals) <= 1e-8

    rep = na.nash_deterministic_en(two_bank_net, [2.0, 2.0], 0.95, EXP)
    np.testing.assert_allclose(rep.m, [-0.575, -1.525], atol=1e-10)

    rep = na.nash_deterministic_en(one_bank_net, [0.0], 0.95, EXP)
    np.testing.assert_allclose(rep.m, [0.95], atol=1e-12)

    with pytest.raises(NegativeAssets):
        na.nash_deterministic_en(two_bank_net, [-1.0, 0.0], 0.95, EXP)


def test_verify_nash_examples(two_bank_net):
    scen = na.ScenarioSet.deterministic([0.0, 0.0])
    sys = _en_system(two_bank_net)
    fixed = na.nash_fixed_point(scen, sys, EXP)
    rep = na.verify_nash(fixed.m, scen, sys, EXP)
    assert np.max(rep.residuals) <= 1e-8

    # at the anchor (2, 1.5) bank 2 pays in full, so bank 1 receives 0.5 and
    # needs only 1.4; its residual is 2 - 1.4 = 0.6 > 0
    rbar = sys.self_feasible_upper(scen)
    rep = na.verify_nash(rbar, scen, sys, EXP)
    assert rep.residuals[0] == pytest.approx(rbar[0] - 1.4, abs=1e-7)
    assert rep.residuals[0] > 0.0


def test_best_response_monotone_decreasing(rng, two_bank_net):
    scen = random_scenarios(rng, 2, 5, scale=1.0)
    sys = _en_system(two_bank_net)
    cfg = na.SolverConfig()
    for _ in range(8):
        m = rng.uniform(0.0, 1.5, 2)
        bump = rng.uniform(0.0, 1.0, 2)
        lo = na.best_response_all(m, scen, sys, EXP, cfg)
        hi = na.best_response_all(m + bump, scen, sys, EXP, cfg)
        assert np.all(hi <= lo + 1e-8)


def test_iterates_stay_in_hyperrectangle(rng):
    for _ in range(5):
        net = random_network(rng, int(rng.integers(2, 5)), min_society=0.35)
        scen = random_scenarios(rng, net.n_banks, 4, scale=1.0)
        sys = _en_system(net, gamma=0.9)
        cfg = na.SolverConfig()
        rbar = sys.self_feasible_upper(scen)
        floor = na.best_response_all(rbar, scen, sys, EXP, cfg)
        m = rbar.copy()
        for _ in range(12):
            m = na.best_response_all(m, scen, sys, EXP, cfg)
            assert np.all(m <= rbar + 1e-9)
            assert np.all(m >= floor - 1e-9)


def test_acceptability_at_fixed_points(rng):
    for spec in (EXP, na.avar(0.3), na.oce(0.2, 2.0)):
        net = random_network(rng, 3, min_society=0.55)
        scen = random_scenarios(rng, 3, 6, scale=1.0)
        rep = na.nash_fixed_point(scen, _en_system(net, 0.9), spec)
        assert np.max(rep.residuals) <= 1e-8
        assert rep.system_rho <= 10.0 * 1e-8
        assert rep.system_acceptable


def test_restarts_agree_under_uniqueness(rng):
    cfg = na.SolverConfig(outer_tol=1e-9)
    for _ in range(5):
        n = int(rng.integers(2, 4))
        floor = (n - 2) / (n - 1)
        net = random_network(rng, n, min_society=floor + 0.15)
        scen = random_scenarios(rng, n, 4, scale=1.0)
        sys = _en_system(net, gamma=0.9)
        lower = sys.domain_lower_bound(scen)
        rbar = sys.self_feasible_upper(scen)
        sols = []
        for _ in range(4):
            m0 = lower + rng.random(n) * (rbar - lower)
            sols.append(na.nash_fixed_point(scen, sys, EXP, cfg, m0=m0).m)
        for sol in sols[1:]:
            np.testing.assert_allclose(sol, sols[0], atol=1e-7)


def test_deterministic_agreement_small(rng):
    for _ in range(10):
        n = int(rng.integers(1, 5))
        net = random_network(rng, n)
        x = rng.uniform(0.0, 1.2, n) * net.total_obligations
        exact = na.nash_deterministic_en(net, x, 0.95, EXP)
        fixed = na.nash_fixed_point(
            na.ScenarioSet.deterministic(x), _en_system(net), EXP
        )
        np.testing.assert_allclose(exact.m, fixed.m, atol=1e-7)


def test_entropic_rejected_fast(two_bank_net):
    scen = na.ScenarioSet.deterministic([0.0, 0.0])
    sys = _en_system(two_bank_net)
    with pytest.raises(NonCoherentRiskMeasure):
        na.nash_fixed_point(scen, sys, na.entropic(1.0))
    with pytest.raises(NonCoherentRiskMeasure):
        na.best_response(0, np.zeros(2), scen, sys, na.entropic(1.0))
    with pytest.raises(NonCoherentRiskMeasure):
        na.nash_insensitive(scen, sys.base, na.entropic(1.0))
    with pytest.raises(NonCoherentRiskMeasure):
        na.nash_deterministic_en(two_bank_net, [0.0, 0.0], 0.95, na.entropic(1.0))


def test_max_iterations_carries_best_iterate(two_bank_net):
    scen = na.ScenarioSet.deterministic([0.0, 0.0])
    sys = _en_system(two_bank_net)
    cfg = na.SolverConfig(outer_tol=1e-14, max_outer=3)
    with pytest.raises(MaxIterations) as err:
        na.nash_fixed_point(scen, sys, EXP, cfg)
    assert err.value.report is not None
    assert err.value.report.m.shape == (2,)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        na.SolverConfig(damping=0.0)
    with pytest.raises(ValueError):
        na.SolverConfig(damping=1.5)
    with pytest.raises(ValueError):
        na.SolverConfig(outer_tol=-1.0)
