import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from datesso.debt import (
    LEDGER_HEADER,
    ConfigError,
    DebtLedger,
    accumulated_debt,
    component_debts,
    debt,
    default_cost_bounds,
    interest,
    principal,
    principal_raw,
    principal_table,
    utility_score,
)
from datesso.model import ComponentService, SlaConstraints

from conftest import make_repo


def test_principal_raw_cost():
    s = ComponentService("a", 0, 10, 0.1, overhead=5.0)
    assert principal_raw(s, SlaConstraints.uniform(1, compute_cost=0.005)) == pytest.approx(0.025, abs=1e-15)


def test_principal_normalized():
    sla = SlaConstraints.uniform(1)
    s = ComponentService("a", 0, 10, 0.1, overhead=5.0)
    assert principal(s, sla, (0.0, 0.05)) == pytest.approx(0.25)
    zero = ComponentService("z", 0, 10, 0.1, overhead=0.0)
    assert principal(zero, sla, (0.0, 0.05)) == 0.0


def test_principal_bounds_checked():
    s = ComponentService("a", 0, 10, 0.1, overhead=5.0)
    with pytest.raises(ConfigError):
        principal(s, SlaConstraints.uniform(1), (0.05, 0.05))


def test_principal_table_defaults():
    repo = make_repo([[(10, 0.1, 2.0), (10, 0.1, 8.0)], [(10, 0.1, 4.0)]])
    sla = SlaConstraints.uniform(2)
    assert default_cost_bounds(repo, sla) == (0.0, 8.0 * 0.0025)
    table = principal_table(repo, sla)
    assert table == pytest.approx({"c0_0": 0.25, "c0_1": 1.0, "c1_0": 0.5})
    free = make_repo([[(10, 0.1)], [(10, 0.1)]])
    assert set(principal_table(free, sla).values()) == {0.0}


def test_interest_anchor():
    a, b = interest([0.7], [0.85], 0.9, 0.7)
    assert a + b == pytest.approx(0.35, abs=1e-12)


def test_interest_no_contribution():
    assert interest([0.95, 0.99], [0.3, 0.6], 0.9, 0.7) == (0.0, 0.0)


def test_interest_partial_window():
    a, b = interest([0.8, 0.95], [0.0, 0.0], 0.9, 0.7)
    assert a == pytest.approx(0.1)
    assert b == 0.0


def test_interest_inclusive_boundary():
    # exactly at the bounds: contributes zero but is counted
    assert interest([0.9], [0.7], 0.9, 0.7) == (0.0, 0.0)


def test_interest_length_mismatch():
    with pytest.raises(ValueError):
        interest([0.1, 0.2], [0.1], 0.9, 0.7)


def test_debt_examples():
    a, b = interest([0.7], [0.85], 0.9, 0.7)
    assert debt(0.25, a, b) == pytest.approx(0.60)
    assert debt(0.0, 0.0, 0.0) == 0.0
    assert debt(0.0, 0.2, 0.3) == pytest.approx(0.5)


def test_utility_examples():
    assert utility_score([1.0] * 4, [0.0] * 4, 0.0) == 4.0
    assert utility_score([0.3, 0.6], [0.3, 0.6], 0.0) == 0.0
    assert utility_score([0.9, 0.8], [0.2, 0.3], 0.6) == pytest.approx(0.6)


def test_ledger_single_adaptation():
    ledger = DebtLedger()
    assert accumulated_debt(ledger, 0) == 0.0
    ledger.open(0, "a")
    ledger.end_step(0)
    assert accumulated_debt(ledger, 0) == 0.0
    ledger.open(1, "b", 0.25)
    ledger.close(1, "a")
    for t in range(1, 5):
        ledger.accrue(t, "b", 0.0, 0.0)
        ledger.end_step(t)
    assert [accumulated_debt(ledger, t) for t in range(5)] == [0.0, 0.25, 0.25, 0.25, 0.25]
    assert accumulated_debt(ledger, 100) == 0.25
    assert accumulated_debt(ledger, -1) == 0.0


def test_ledger_accounting_and_csv(tmp_path):
    ledger = DebtLedger()
    ledger.open(0, "a", 0.5)
    ledger.accrue(0, "a", 0.1, 0.0)
    ledger.end_step(0)
    ledger.accrue(1, "a", 0.2, 0.05)
    ledger.end_step(1)
    ledger.close(2, "a")
    ledger.open(2, "b", 0.3)
    ledger.accrue(2, "b", 0.0, 0.0)
    ledger.end_step(2)
    assert ledger.total == pytest.approx(0.5 + 0.1 + 0.25 + 0.3)
    assert ledger.total == pytest.approx(ledger.principal_total() + ledger.interest_total())
    assert component_debts(ledger) == pytest.approx({"a": 0.85, "b": 0.3})
    assert ledger.records[0].window == (0, 2)
    assert not ledger.records[1].closed
    with pytest.raises(ValueError):
        ledger.end_step(2)
    path = tmp_path / "ledger.csv"
    ledger.write_csv(path)
    rows = list(csv.reader(path.open()))
    assert tuple(rows[0]) == LEDGER_HEADER
    assert float(rows[-1][-1]) == pytest.approx(ledger.total)


def test_swapped_out_component_stops_accruing():
    ledger = DebtLedger()
    ledger.open(0, "a")
    ledger.close(1, "a")
    with pytest.raises(KeyError):
        ledger.accrue(1, "a", 0.1, 0.0)


unit = st.floats(0, 1, allow_nan=False)
series = st.lists(st.tuples(unit, unit), min_size=1, max_size=30)


@given(series, unit, unit)
def test_interest_non_negative(pairs, cu, cl):
    u, ln = zip(*pairs)
    a, b = interest(u, ln, cu, cl)
    assert a >= 0 and b >= 0


@given(series, series, unit, unit)
def test_interest_additive(p1, p2, cu, cl):
    u1, l1 = zip(*p1)
    u2, l2 = zip(*p2)
    a1, b1 = interest(u1, l1, cu, cl)
    a2, b2 = interest(u2, l2, cu, cl)
    a, b = interest(u1 + u2, l1 + l2, cu, cl)
    assert a == pytest.approx(a1 + a2, abs=1e-12)
    assert b == pytest.approx(b1 + b2, abs=1e-12)


@given(series, st.floats(0, 10), st.floats(0.001, 10))
def test_utility_strictly_decreasing_in_debt(pairs, d, delta):
    u, ln = zip(*pairs)
    assert utility_score(u, ln, d + delta) < utility_score(u, ln, d)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.booleans()), max_size=40))
def test_accumulated_debt_monotone(events):
    ledger = DebtLedger()
    ledger.open(0, "c0")
    current = "c0"
    for t, (p, a, b, swap) in enumerate(events):
        if swap:
            ledger.close(t, current)
            current = f"c{t + 1}"
            ledger.open(t, current, p)
        ledger.accrue(t, current, a, b)
        ledger.end_step(t)
    values = [accumulated_debt(ledger, t) for t in range(-1, len(events) + 1)]
    assert all(x <= y for x, y in zip(values, values[1:]))
    assert ledger.total == pytest.approx(ledger.principal_total() + ledger.interest_total())
    assert np.all(np.diff(ledger.series()) >= 0)
