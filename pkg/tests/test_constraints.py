import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from datesso.constraints import (
    global_observe,
    is_feasible,
    local_latency,
    local_utilization,
    observe_local,
    observe_plan_series,
    violation_magnitude,
)
from datesso.model import ComponentService, CompositionPlan, SlaConstraints

from conftest import make_repo


def svc(t, lat, x=0):
    return ComponentService("s", x, t, lat)


def test_latency_examples():
    assert local_latency(svc(50, 0.5), 50)[0] == pytest.approx(0.5)
    assert local_latency(svc(50, 0.19), 25)[0] == pytest.approx(0.095)
    assert local_latency(svc(50, 0.19), 0)[0] == 0.0
    raw, norm = local_latency(svc(50, 0.19), 0, 0.09)
    assert raw == 0.0 and norm == 0.0


def test_normalized_latency_is_capped():
    raw, norm = local_latency(svc(50, 0.09), 100, 0.09)
    assert raw == pytest.approx(0.18)
    assert norm == 1.0


def test_utilization_examples(sla1):
    assert local_utilization(svc(50, 0.09), 0, sla1) == 0.0
    assert local_utilization(svc(50, 0.09), 40, sla1) == pytest.approx(0.8)
    assert local_utilization(svc(50, 0.09), 100, sla1) == 1.0


def test_feasibility_examples(sla1):
    assert is_feasible(svc(50, 0.09), 45, sla1)
    assert not is_feasible(svc(50, 0.09), 0, sla1)
    assert not is_feasible(svc(50, 0.09), 51, sla1)


def test_feasibility_boundaries_are_inclusive():
    # L=1, T=1, w=1: raw latency equals CL and utilization equals CU exactly
    sla = SlaConstraints.uniform(1, local_latency=1.0, local_utilization=1.0)
    obs = observe_local(svc(1, 1.0), 1, sla)
    assert obs.latency_raw == 1.0 and obs.utilization == 1.0
    assert obs.feasible
    sla = SlaConstraints.uniform(1, local_latency=0.5, local_utilization=0.5)
    assert is_feasible(svc(4, 1.0), 1, sla)


def test_violation_magnitude(sla1):
    assert violation_magnitude(svc(50, 0.09), 45, sla1) == 0.0
    # 10% latency excess, utilization clamped at 1
    assert violation_magnitude(svc(50, 0.09), 55, sla1) == pytest.approx(0.1)
    # utilization 0.5 against 0.8
    assert violation_magnitude(svc(50, 0.09), 25, sla1) == pytest.approx(0.3)


def test_global_sum_at_local_bounds():
    repo = make_repo([[(100, 0.09)]] * 10)
    plan = repo.initial_plan()
    sla = SlaConstraints.uniform(10)
    obs = global_observe(plan, [100] * 10, sla, repo)
    assert obs.latency == pytest.approx(0.9)
    assert not obs.latency_violated
    assert obs.utilization == pytest.approx(1.0)
    assert obs.violations == 0


def test_global_mean_of_identical_utilizations():
    repo = make_repo([[(100, 0.09)]] * 4)
    obs = global_observe(repo.initial_plan(), [70] * 4, SlaConstraints.uniform(4), repo)
    assert obs.utilization == pytest.approx(0.7)
    assert obs.utilization_violated


def test_single_service_global_equals_local(sla1):
    repo = make_repo([[(50, 0.19)]])
    s = repo.candidates[0][0]
    obs = global_observe(repo.initial_plan(), [30], sla1, repo)
    assert obs.latency == local_latency(s, 30)[0]
    assert obs.utilization == local_utilization(s, 30, sla1)


def test_global_row_length_checked(sla1):
    repo = make_repo([[(50, 0.19)]])
    with pytest.raises(ValueError):
        global_observe(repo.initial_plan(), [1, 2], sla1, repo)


def test_negative_workload_rejected(sla1):
    with pytest.raises(ValueError):
        local_latency(svc(1, 1.0), -1)
    with pytest.raises(ValueError):
        local_utilization(svc(1, 1.0), -1, sla1)


capacity = st.tuples(st.integers(1, 1000), st.floats(1e-4, 5.0))
load = st.integers(0, 5000)


@given(capacity, load, load)
def test_monotone_in_workload(cap, w1, w2):
    sla = SlaConstraints.uniform(1)
    s = svc(*cap)
    lo, hi = sorted((w1, w2))
    assert local_latency(s, lo)[0] <= local_latency(s, hi)[0]
    assert local_utilization(s, lo, sla) <= local_utilization(s, hi, sla)


@given(capacity, load)
def test_scale_invariance(cap, w):
    sla = SlaConstraints.uniform(1)
    a = svc(*cap)
    b = svc(cap[0] * 2, cap[1] * 2)
    assert local_latency(a, w)[0] == pytest.approx(local_latency(b, w)[0], rel=1e-12)
    assert local_utilization(a, w, sla) == pytest.approx(local_utilization(b, w, sla), rel=1e-12)


@given(capacity, load)
def test_local_ranges_and_feasibility_definition(cap, w):
    sla = SlaConstraints.uniform(1)
    obs = observe_local(svc(*cap), w, sla)
    assert obs.latency_raw >= 0
    assert 0 <= obs.latency_norm <= 1
    assert 0 <= obs.utilization <= 1
    assert obs.feasible == (obs.latency_raw <= 0.09 and obs.utilization >= 0.8)


@given(st.lists(st.tuples(capacity, load), min_size=1, max_size=6))
def test_global_aggregation(items):
    groups = [[c] for c, _ in items]
    w = [w for _, w in items]
    repo = make_repo(groups)
    sla = SlaConstraints.uniform(len(items))
    plan = repo.initial_plan()
    obs = global_observe(plan, w, sla, repo)
    raws = [local_latency(repo.candidates[x][0], w[x])[0] for x in range(len(items))]
    assert obs.latency == pytest.approx(sum(raws), rel=1e-12, abs=1e-15)
    assert 0 <= obs.utilization <= 1
    series = observe_plan_series(plan, np.array([w]), sla, repo)
    assert series["global_latency"][0] == pytest.approx(obs.latency, rel=1e-12, abs=1e-15)
    assert series["global_utilization"][0] == pytest.approx(obs.utilization, rel=1e-12)


def test_plan_series_matches_pointwise():
    repo = make_repo([[(50, 0.09)], [(80, 0.05)]])
    sla = SlaConstraints.uniform(2)
    plan = CompositionPlan(("c0_0", "c1_0"))
    w = np.array([[10, 100], [45, 200], [0, 0]])
    s = observe_plan_series(plan, w, sla, repo)
    for t, row in enumerate(w):
        g = global_observe(plan, row, sla, repo)
        assert s["global_latency_violated"][t] == g.latency_violated
        assert s["global_utilization_violated"][t] == g.utilization_violated
        for x in range(2):
            o = observe_local(repo.candidates[x][0], row[x], sla)
            assert s["util"][t, x] == pytest.approx(o.utilization)
            assert (s["latency_ok"][t, x] and s["utilization_ok"][t, x]) == o.feasible
