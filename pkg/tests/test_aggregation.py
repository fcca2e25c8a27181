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
    aggregator_from_json,
)
from nashalloc.errors import EmptyDomain, OutOfDomain, ParseError

from oracles import random_network


def _en_system(net, gamma=0.95, lift="sensitive"):
    return AggregationSystem(base=EisenbergNoe(net=net, gamma=gamma), lift=lift)


def test_sensitive_en_component_example(two_bank_net):
    sys = _en_system(two_bank_net)
    scen = na.ScenarioSet.deterministic([0.0, 0.0])
    vals = sys.eval_component(0, scen, np.array([1.425, 0.475]))
    np.testing.assert_allclose(vals, [0.0], atol=1e-12)
    np.testing.assert_allclose(
        vals, na.society_payment_components(two_bank_net, [1.425, 0.475], 0.95)[:1],
        atol=1e-12,
    )


def test_insensitive_utility_sum_definitional(rng):
    base = UtilitySum((Affine(1.0, 0.0), Affine(2.0, -0.5)))
    sys = AggregationSystem(base=base, lift="insensitive")
    scen = na.ScenarioSet(values=rng.uniform(0.0, 2.0, (2, 5)), probs=np.full(5, 0.2))
    m = np.array([0.3, -0.7])
    np.testing.assert_allclose(
        sys.eval_component(0, scen, m), scen.values[0] + 0.3, atol=1e-12
    )
    np.testing.assert_allclose(
        sys.eval_component(1, scen, m), 2.0 * scen.values[1] - 0.5 - 0.7, atol=1e-12
    )


def test_sensitive_mean_field_fixed_point_value():
    eps = 0.3
    base = MeanField(utilities=(ShiftedLog(eps), ShiftedLog(eps)), ubar=ShiftedLog(eps, 2.0))
    sys = AggregationSystem(base=base, lift="sensitive")
    scen = na.ScenarioSet.deterministic([0.0, 0.0])
    m = np.array([1.0 - eps, 1.0 - eps])
    for i in range(2):
        np.testing.assert_allclose(sys.eval_component(i, scen, m), [0.0], atol=1e-12)


def test_domain_lower_bound_sensitive(two_bank_net):
    sys = _en_system(two_bank_net)
    scen = na.ScenarioSet(values=np.array([[1.0, 2.0], [0.0, 1.0]]), probs=np.array([0.5, 0.5]))
    np.testing.assert_allclose(sys.domain_lower_bound(scen), [-1.0, 0.0])


def test_domain_lower_bound_insensitive_unbounded():
    base = UtilitySum((Affine(1.0, 0.0), Affine(1.0, 0.0)))
    sys = AggregationSystem(base=base, lift="insensitive")
    scen = na.ScenarioSet.deterministic([0.5, 0.2])
    assert np.all(np.isneginf(sys.domain_lower_bound(scen)))


def test_domain_lower_bound_insensitive_empty():
    base = UtilitySum((Affine(1.0, 0.0), Affine(1.0, 0.0)))
    sys = AggregationSystem(base=base, lift="insensitive")
    scen = na.ScenarioSet.deterministic([-1.0, 0.0])
    with pytest.raises(EmptyDomain):
        sys.domain_lower_bound(scen)
    with pytest.raises(EmptyDomain):
        sys.eval_components(scen, np.zeros(2))


def test_out_of_domain_raises(two_bank_net):
    sys = _en_system(two_bank_net)
    scen = na.ScenarioSet.deterministic([1.0, 1.0])
    with pytest.raises(OutOfDomain):
        sys.eval_components(scen, np.array([-2.0, 0.0]))


def test_check_decomposition_en(two_bank_net):
    sys = _en_system(two_bank_net)
    probes = np.array([[0.2, 0.1], [1.0, 0.4], [2.5, 2.0], [0.0, 0.0]])
    report = na.check_decomposition(sys, probes)
    assert report.monotone_ok
    assert report.max_sum_gap <= 1e-10
    assert report.estimated_L <= na.self_preferential_bound(two_bank_net) + 1e-6


def test_check_decomposition_utility_sum():
    base = UtilitySum((ShiftedLog(0.2), Affine(1.5, -0.3)))
    sys = AggregationSystem(base=base, lift="sensitive")
    report = na.check_decomposition(sys, np.array([[0.5, 0.5], [2.0, 0.1]]))
    assert report.estimated_L == 0.0


def test_check_decomposition_mean_field_pure_externality():
    # flat individual utilities leave only the shared term: every probe
    # with a strictly increasing externality pins the factor at exactly 1
    base = MeanField(utilities=(Affine(0.0, 0.0), Affine(0.0, 0.0)), ubar=ShiftedLog(0.5, 1.0))
    sys = AggregationSystem(base=base, lift="sensitive")
    report = na.check_decomposition(sys, np.array([[0.3, 0.8], [1.5, 0.2]]))
    assert 1.0 - 1e-6 <= report.estimated_L <= 1.0 + 1e-6


def test_check_decomposition_mean_field_log_utilities():
    base = MeanField(utilities=(ShiftedLog(0.1), ShiftedLog(0.1)), ubar=ShiftedLog(0.1, 1.0))
    sys = AggregationSystem(base=base, lift="sensitive")
    report = na.check_decomposition(sys, np.array([[0.5, 0.5], [3.0, 0.0], [50.0, 1.0]]))
    assert report.estimated_L <= 1.0 + 1e-9


def _catalog(rng, net):
    return [
        UtilitySum((ShiftedLog(0.3), Affine(2.0, -1.0))),
        MeanField(utilities=(ShiftedLog(0.2), ShiftedLog(0.4, 0.7)), ubar=ShiftedLog(0.3, 1.3)),
        EisenbergNoe(net=net, gamma=0.9),
        WeightedAffine(a=np.array([[1.0, 0.3], [0.2, 0.8]]), c=np.array([0.5, 1.0])),
    ]


def test_decomposition_identity_random_points(rng, two_bank_net):
    for base in _catalog(rng, two_bank_net):
        for lift in ("sensitive", "insensitive"):
            sys = AggregationSystem(base=base, lift=lift)
            for _ in range(10):
                x = rng.uniform(0.0, 2.5, 2)
                m = rng.uniform(0.0, 1.5, 2)
                scen = na.ScenarioSet.deterministic(x)
                comps = sys.eval_components(scen, m)[:, 0]
                total = sys.eval_total(scen, m)[0]
                assert abs(comps.sum() - total) <= 1e-10 * max(1.0, abs(total))


def test_monotonicity_both_arguments(rng, two_bank_net):
    for base in _catalog(rng, two_bank_net):
        sys = AggregationSystem(base=base, lift="sensitive")
        for _ in range(8):
            x = rng.uniform(0.0, 2.0, 2)
            m = rng.uniform(0.0, 1.0, 2)
            scen = na.ScenarioSet.deterministic(x)
            base_vals = sys.eval_components(scen, m)[:, 0]
            j = int(rng.integers(2))
            step = float(rng.uniform(0.1, 1.0))
            up_m = sys.eval_components(scen, m + step * np.eye(2)[j])[:, 0]
            assert np.all(up_m >= base_vals - 1e-12)
            scen_up = na.ScenarioSet.deterministic(x + step * np.eye(2)[j])
            up_x = sys.eval_components(scen_up, m)[:, 0]
            assert np.all(up_x >= base_vals - 1e-12)


def test_concavity_probe_along_segments(rng, two_bank_net):
    for base in _catalog(rng, two_bank_net):
        sys = AggregationSystem(base=base, lift="sensitive")
        for _ in range(8):
            x1 = rng.uniform(0.0, 2.0, 2)
            x2 = rng.uniform(0.0, 2.0, 2)
            m = rng.uniform(0.0, 1.0, 2)
            v1 = sys.eval_components(na.ScenarioSet.deterministic(x1), m)[:, 0]
            v2 = sys.eval_components(na.ScenarioSet.deterministic(x2), m)[:, 0]
            mid = sys.eval_components(
                na.ScenarioSet.deterministic(0.5 * (x1 + x2)), m
            )[:, 0]
            assert np.all(mid >= 0.5 * (v1 + v2) - 1e-10)


def test_sensitive_translativity(rng, two_bank_net):
    for base in _catalog(rng, two_bank_net):
        sys = AggregationSystem(base=base, lift="sensitive")
        for _ in range(8):
            x = rng.uniform(0.5, 2.0, 2)
            m = rng.uniform(0.5, 1.5, 2)
            c = rng.uniform(-0.4, 0.4, 2)
            a = sys.eval_components(na.ScenarioSet.deterministic(x + c), m - c)[:, 0]
            b = sys.eval_components(na.ScenarioSet.deterministic(x), m)[:, 0]
            np.testing.assert_allclose(a, b, atol=1e-10)


def test_weighted_affine_validation():
    with pytest.raises(ValueError):
        WeightedAffine(a=np.array([[0.0, 1.0], [1.0, 1.0]]), c=np.zeros(2))
    with pytest.raises(ValueError):
        WeightedAffine(a=np.array([[1.0, -0.1], [0.0, 1.0]]), c=np.zeros(2))
    with pytest.raises(ValueError):
        Affine(-1.0, 0.0)
    with pytest.raises(ValueError):
        ShiftedLog(1.5)


def test_aggregator_from_json(two_bank_net):
    en = aggregator_from_json({"kind": "eisenberg_noe", "gamma": 0.9}, net=two_bank_net)
    assert isinstance(en, EisenbergNoe) and en.gamma == 0.9
    us = aggregator_from_json(
        {"kind": "utility_sum",
         "utilities": [{"kind": "affine", "a": 1.0}, {"kind": "shifted_log", "eps": 0.2}]}
    )
    assert isinstance(us, UtilitySum)
    mf = aggregator_from_json({"kind": "mean_field", "n": 3, "eps": 0.2})
    assert isinstance(mf, MeanField) and mf.n_banks == 3
    ident = aggregator_from_json({"kind": "identity_sum", "n": 2})
    assert ident.utilities[0].domain == "real"
    wa = aggregator_from_json(
        {"kind": "weighted_affine", "a": [[1.0, 0.0], [0.0, 1.0]], "c": [1.0, 1.0]}
    )
    assert isinstance(wa, WeightedAffine)
    with pytest.raises(ParseError):
        aggregator_from_json({"kind": "eisenberg_noe"})
    with pytest.raises(ParseError):
        aggregator_from_json({"kind": "nope"})
    with pytest.raises(ParseError):
        aggregator_from_json({"kind": "utility_sum", "utilities": [{"kind": "huh"}]})


def test_self_feasible_points_are_feasible(rng, two_bank_net):
    for base in _catalog(rng, two_bank_net):
        xbar = base.self_feasible_point()
        for i in range(base.n_banks):
            probe = np.zeros(base.n_banks)
            probe[i] = xbar[i]
            vals = base.components(probe)
            assert vals[i] > 0.0
