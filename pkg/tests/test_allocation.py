import json

import pytest
from hypothesis import given, strategies as st

from hostel_ops.allocation import (
    AllocationInstance, AllocationResult, Room, Student, allocate, allocate_baseline, build_network,
    check_result, compute_metrics, instance_from_dict, instance_to_dict, jain_index, partition_by_block,
    result_to_dict, satisfaction_scores, summary_csv,
)
from hostel_ops.errors import StructuralError, ValidationError
from hostel_ops.flow import max_flow

from oracles import all_assignments, max_matching


def make(prefs, caps, blocks=None, groups=None, policy="all_or_nothing", student_blocks=None):
    """prefs: list of room-id lists in seniority order; caps: dict room -> capacity."""
    blocks = blocks or {}
    groups = groups or {}
    student_blocks = student_blocks or {}
    students = [
        Student(f"s{i + 1}", i + 1, student_blocks.get(f"s{i + 1}", "X"), "d", tuple(p), groups.get(f"s{i + 1}"))
        for i, p in enumerate(prefs)
    ]
    rooms = [Room(r, blocks.get(r, "X"), c) for r, c in caps.items()]
    return AllocationInstance(students, rooms, policy)


@st.composite
def instances(draw, max_students=6, max_rooms=6):
    n_rooms = draw(st.integers(1, max_rooms))
    room_ids = [f"r{i}" for i in range(n_rooms)]
    caps = {r: draw(st.integers(1, 2)) for r in room_ids}
    n = draw(st.integers(1, max_students))
    prefs = [draw(st.lists(st.sampled_from(room_ids), min_size=1, max_size=3, unique=True)) for _ in range(n)]
    return make(prefs, caps)


# --- metrics ---------------------------------------------------------------------

def test_jain_index_values():
    assert jain_index([4, 2, 2]) == pytest.approx(8 / 9, abs=1e-12)
    assert jain_index([3, 3, 3]) == 1.0
    assert jain_index([0, 0]) == 1.0
    assert jain_index([5, 0, 0, 0]) == pytest.approx(0.25)
    with pytest.raises(StructuralError):
        jain_index([])


@given(st.lists(st.integers(0, 20), min_size=1, max_size=30))
def test_jain_index_bounds(xs):
    j = jain_index(xs)
    assert 1 / len(xs) - 1e-12 <= j <= 1 + 1e-12


def test_metrics_fixture():
    inst = make(
        [["A", "B", "C"], ["A", "B", "C"], ["A", "B", "C"], ["B", "A"], ["C"]],
        {"A": 1, "B": 1, "C": 2},
        groups={"s1": "g1", "s2": "g1", "s3": "g2", "s4": "g2"},
    )
    assignments = {"s1": "A", "s2": "B", "s3": "C", "s5": "C"}
    assert satisfaction_scores(inst, assignments) == [3, 2, 1, 0, 1]
    m = compute_metrics(inst, assignments)
    assert m.top_two_rate == pytest.approx(0.6)
    assert m.jain_index == pytest.approx(49 / 75, abs=1e-12)
    assert m.group_satisfaction_rate == pytest.approx(0.5)
    assert m.unassigned_count == 1


def test_group_rate_vacuous_without_groups():
    inst = make([["A"]], {"A": 1}, groups={"s1": "solo"})
    assert compute_metrics(inst, {"s1": "A"}).group_satisfaction_rate == 1.0


# --- solver ---------------------------------------------------------------------

def test_senior_student_wins_contested_room():
    inst = make([["A"], ["A"]], {"A": 1})
    assert allocate(inst).assignments == {"s1": "A"}


def test_rerouting_keeps_matching_maximum():
    # s1 would take A in tier 1, but s2 only accepts A; s1 is rerouted to B.
    inst = make([["A", "B"], ["A"]], {"A": 1, "B": 1})
    res = allocate(inst)
    assert res.assignments == {"s1": "B", "s2": "A"}


def test_first_choices_preferred_when_free():
    inst = make([["A", "B"], ["B", "A"]], {"A": 1, "B": 1})
    assert allocate(inst).assignments == {"s1": "A", "s2": "B"}


def test_all_or_nothing_group_excluded_when_it_cannot_fit():
    inst = make([["A"], ["A"], ["B"]], {"A": 1, "B": 1}, groups={"s1": "g", "s2": "g"})
    res = allocate(inst)
    assert res.assignments == {"s3": "B"}
    best_effort = make([["A"], ["A"], ["B"]], {"A": 1, "B": 1}, groups={"s1": "g", "s2": "g"},
                       policy="best_effort")
    assert allocate(best_effort).assignments == {"s1": "A", "s3": "B"}


def test_all_or_nothing_group_placed_together():
    inst = make([["A", "B"], ["A", "B"], ["A"]], {"A": 2, "B": 1}, groups={"s2": "g", "s3": "g"})
    res = allocate(inst)
    assert res.assignments["s2"] and res.assignments["s3"]
    assert res.metrics.group_satisfaction_rate == 1.0


def test_build_network_tiers():
    inst = make([["A", "B"], ["B"]], {"A": 1, "B": 1})
    assert max_flow(build_network(inst, 1)).max_flow_value == 2
    with pytest.raises(StructuralError):
        build_network(inst, 3)


def test_empty_instance_rejected():
    with pytest.raises(StructuralError):
        allocate(AllocationInstance([], [Room("A", "X", 1)]))


@pytest.mark.parametrize(
    "build",
    [
        lambda: Student("s", 1, "X", "d", ()),
        lambda: Student("s", 1, "X", "d", ("A", "A")),
        lambda: Student("s", 0, "X", "d", ("A",)),
        lambda: Room("A", "X", 0),
        lambda: make([["Z"]], {"A": 1}),
        lambda: make([["A"]], {"A": 1}, policy="random"),
        lambda: AllocationInstance([Student("s", 1, "X", "d", ("A",)), Student("t", 1, "X", "d", ("A",))],
                                   [Room("A", "X", 1)]),
    ],
)
def test_validation_errors(build):
    with pytest.raises(ValidationError):
        build()


def test_check_result_catches_violations():
    inst = make([["A"], ["A"]], {"A": 1, "B": 1})
    with pytest.raises(StructuralError):
        check_result(inst, AllocationResult({"s1": "A", "s2": "A"}, compute_metrics(inst, {})))
    with pytest.raises(StructuralError):
        check_result(inst, AllocationResult({"s1": "B"}, compute_metrics(inst, {})))
    check_result(inst, AllocationResult({"s1": "B"}, compute_metrics(inst, {}), frozenset({"s1"})))


def test_partition_merges_blocks_linked_by_preferences():
    inst = make([["A"], ["B"], ["C"]], {"A": 1, "B": 1, "C": 1}, blocks={"A": "P", "B": "Q", "C": "R"},
                student_blocks={"s1": "P", "s2": "P", "s3": "R"})
    parts = partition_by_block(inst)
    assert sorted(len(s) for s, _ in parts) == [1, 2]
    assert sum(len(r) for _, r in parts) == 3


def test_parallel_matches_serial():
    from hostel_ops.workload import capacity_rich, gen_allocation

    inst = gen_allocation(capacity_rich(seed=5, student_count=120))
    assert allocate(inst, jobs=2).assignments == allocate(inst).assignments


def test_dominance_counterexample():
    """Greedy can beat a maximum matching on top-two rate, so dominance is not universal."""
    inst = make([["A", "D", "C"], ["X", "Z", "A"], ["X"], ["Z"], ["D"]],
                {r: 1 for r in "ADCXZ"})
    engine, greedy = allocate(inst), allocate_baseline(inst)
    assert len(engine.assignments) == 5 > len(greedy.assignments)
    assert engine.metrics.top_two_rate < greedy.metrics.top_two_rate


@given(instances())
def test_allocate_is_maximum_and_feasible(inst):
    res = allocate(inst)
    prefs = [list(s.preferences) for s in inst.students]
    caps = {r.id: r.capacity for r in inst.rooms}
    assert len(res.assignments) == max_matching(prefs, caps)
    check_result(inst, res)


@given(instances(max_students=4, max_rooms=4))
def test_allocate_matches_exhaustive_assignment(inst):
    # No capacity-respecting assignment places more students.
    prefs = [list(s.preferences) for s in inst.students]
    caps = {r.id: r.capacity for r in inst.rooms}
    best = max(sum(r is not None for r in a) for a in all_assignments(prefs, caps))
    assert len(allocate(inst).assignments) == best


@given(instances())
def test_baseline_feasible(inst):
    check_result(inst, allocate_baseline(inst))


@given(instances())
def test_allocate_deterministic(inst):
    assert allocate(inst).assignments == allocate(inst).assignments


def test_serialization_round_trip():
    inst = make([["A", "B"], ["B"]], {"A": 1, "B": 2}, groups={"s1": "g", "s2": "g"})
    doc = json.loads(json.dumps(instance_to_dict(inst)))
    assert instance_from_dict(doc) == inst
    res = allocate(inst)
    out = result_to_dict(inst, res)
    assert "solve_time" not in out["metrics"]
    assert summary_csv(inst, res).splitlines()[0] == "student_id,room_id,rank_received"
    with pytest.raises(StructuralError):
        instance_from_dict({"students": [{"id": "s"}], "rooms": []})
