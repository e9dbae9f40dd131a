import random

import pytest
from hypothesis import given, strategies as st

from ecofence.optimizer import (
    Assignment,
    GeofenceProblem,
    ProblemEntry,
    brute_force_solve,
    budget_spend,
    objective,
    solve,
)


def problem(entries, limit):
    return GeofenceProblem(
        entries=tuple(ProblemEntry(vid, d, e) for vid, d, e in entries), limit=limit
    )


def test_single_vehicle_exact_budget():
    assignment = solve(problem([("A", 1.0, 1.0)], 1.0))
    assert assignment.values == {"A": 1.0}
    assert assignment.objective_value == 1.0


def test_zero_limit_forces_all_electric():
    assignment = solve(problem([("A", 1.0, 1.0), ("B", 2.0, 2.0)], 0.0))
    assert assignment.values == {"A": 0.0, "B": 0.0}
    assert assignment.objective_value == 0.0


def test_negative_limit_forces_all_electric():
    assignment = solve(problem([("A", 1.0, 0.5)], -0.5))
    assert assignment.values == {"A": 0.0}


def test_two_vehicle_split_matches_grid_oracle():
    # Optimum confirmed by 0.01-grid brute force over [0,1]^2 before the
    # build: x=(1.0, 0.5), objective 1.25.
    assignment = solve(problem([("A", 1.0, 1.0), ("B", 2.0, 2.0)], 2.0))
    assert assignment.values["A"] == pytest.approx(1.0)
    assert assignment.values["B"] == pytest.approx(0.5)
    assert assignment.objective_value == pytest.approx(1.25)


def test_grid_oracle_agrees():
    # keep the independent grid check alive in-tree
    best = -1.0
    for i in range(101):
        for j in range(101):
            xa, xb = i / 100.0, j / 100.0
            if xa + 2.0 * xb <= 2.0 + 1e-12:
                best = max(best, xa + xb / 2.0)
    assert best == pytest.approx(1.25)


def test_slack_budget_everyone_polluting():
    assignment = solve(problem([("A", 1.0, 0.3), ("B", 1.0, 0.3), ("C", 1.0, 0.3)], 1.0))
    assert all(x == 1.0 for x in assignment.values.values())
    assert assignment.objective_value == pytest.approx(3.0)


def test_zero_rate_vehicles_get_one():
    assignment = solve(problem([("ev", 4.0, 0.0), ("hv", 1.0, 2.0)], 1.0))
    assert assignment.values["ev"] == 1.0
    assert assignment.values["hv"] == pytest.approx(0.5)


def test_tie_break_prefers_lower_density():
    # equal d*e products: lower d (higher individual probability weight) first
    assignment = solve(problem([("hi_d", 4.0, 1.0), ("lo_d", 2.0, 2.0)], 2.0)
    )
    assert assignment.values["lo_d"] == 1.0
    assert assignment.values["hi_d"] == 0.0


def test_validation_errors():
    with pytest.raises(ValueError, match="density"):
        problem([("A", 0.5, 1.0)], 1.0)
    with pytest.raises(ValueError, match="emission_rate"):
        problem([("A", 1.0, -0.1)], 1.0)
    with pytest.raises(ValueError, match="duplicate"):
        problem([("A", 1.0, 1.0), ("A", 1.0, 1.0)], 1.0)
    with pytest.raises(ValueError, match="finite"):
        problem([("A", 1.0, 1.0)], float("nan"))


def test_brute_force_matches_on_spec_instances():
    instances = [
        problem([("A", 1.0, 1.0)], 1.0),
        problem([("A", 1.0, 1.0), ("B", 2.0, 2.0)], 0.0),
        problem([("A", 1.0, 1.0), ("B", 2.0, 2.0)], 2.0),
        problem([("A", 1.0, 0.3), ("B", 1.0, 0.3), ("C", 1.0, 0.3)], 1.0),
    ]
    for p in instances:
        assert abs(solve(p).objective_value - brute_force_solve(p).objective_value) <= 1e-9


def test_brute_force_single_entry_and_size_limit():
    p = problem([("A", 1.0, 0.5)], 1.0)
    assert brute_force_solve(p).values == {"A": 1.0}
    too_big = problem([(f"v{i}", 1.0, 1.0) for i in range(9)], 1.0)
    with pytest.raises(ValueError, match="at most"):
        brute_force_solve(too_big)


def test_brute_force_zero_limit():
    p = problem([("A", 1.0, 1.0), ("B", 1.0, 0.0)], 0.0)
    assert brute_force_solve(p).values == {"A": 0.0, "B": 0.0}


def test_objective_examples():
    p = problem([("A", 1.0, 1.0), ("B", 2.0, 1.0)], 5.0)
    assert objective(Assignment(values={"A": 1.0, "B": 0.5}), p) == pytest.approx(1.25)
    assert objective(Assignment(values={"A": 0.0, "B": 0.0}), p) == 0.0
    p3 = problem([("A", 1.0, 1.0), ("B", 1.0, 1.0), ("C", 1.0, 1.0)], 5.0)
    assert objective(Assignment(values={"A": 1.0, "B": 1.0, "C": 1.0}), p3) == pytest.approx(3.0)


def test_objective_missing_id():
    p = problem([("A", 1.0, 1.0)], 1.0)
    with pytest.raises(ValueError, match="missing"):
        objective(Assignment(values={}), p)


# -- properties ---------------------------------------------------------------

entry_lists = st.lists(
    st.tuples(
        st.floats(min_value=1.0, max_value=10.0, allow_nan=False),
        st.floats(min_value=0.0, max_value=5.0, allow_nan=False),
    ),
    min_size=1,
    max_size=6,
)


def build(entries_raw, limit):
    return problem([(f"v{i}", d, e) for i, (d, e) in enumerate(entries_raw)], limit)


@given(entry_lists, st.floats(min_value=-1.0, max_value=31.0, allow_nan=False))
def test_property_oracle_equivalence(entries_raw, limit):
    p = build(entries_raw, limit)
    greedy = solve(p)
    oracle = brute_force_solve(p)
    assert abs(greedy.objective_value - oracle.objective_value) <= 1e-9
    if p.limit > 0:
        assert budget_spend(greedy, p) <= p.limit + 1e-9
        assert budget_spend(oracle, p) <= p.limit + 1e-9


@given(entry_lists, st.floats(min_value=-1.0, max_value=31.0, allow_nan=False))
def test_property_box_and_fractional_structure(entries_raw, limit):
    p = build(entries_raw, limit)
    assignment = solve(p)
    fractional = 0
    for entry in p.entries:
        x = assignment.values[entry.vehicle_id]
        assert 0.0 <= x <= 1.0
        if entry.emission_rate > 0 and 1e-12 < x < 1.0 - 1e-12:
            fractional += 1
    assert fractional <= 1


@given(entry_lists, st.floats(min_value=0.1, max_value=31.0, allow_nan=False))
def test_property_monotone_in_weighted_cost(entries_raw, limit):
    p = build(entries_raw, limit)
    assignment = solve(p)
    positive = [e for e in p.entries if e.emission_rate > 0]
    for a in positive:
        for b in positive:
            if a.density * a.emission_rate > b.density * b.emission_rate:
                assert assignment.values[a.vehicle_id] <= assignment.values[b.vehicle_id] + 1e-12


@given(entry_lists, st.floats(min_value=0.1, max_value=31.0, allow_nan=False),
       st.sampled_from([0.25, 0.5, 2.0, 4.0, 8.0]))
def test_property_scale_invariance(entries_raw, limit, scale):
    p = build(entries_raw, limit)
    scaled = GeofenceProblem(
        entries=tuple(
            ProblemEntry(e.vehicle_id, e.density, e.emission_rate * scale) for e in p.entries
        ),
        limit=p.limit * scale,
    )
    x0 = solve(p).values
    x1 = solve(scaled).values
    # power-of-two scaling is exact in binary floating point
    assert x0 == x1


def test_thousand_seeded_instances_agree():
    rng = random.Random(20240817)
    for _ in range(1000):
        n = rng.randint(1, 6)
        entries = [
            (f"v{i}", 1.0 + rng.random() * 9.0, rng.random() * 5.0) for i in range(n)
        ]
        total = sum(e for _, _, e in entries)
        limit = -1.0 + rng.random() * (total + 2.0)
        p = problem(entries, limit)
        greedy = solve(p)
        oracle = brute_force_solve(p)
        assert abs(greedy.objective_value - oracle.objective_value) <= 1e-9
