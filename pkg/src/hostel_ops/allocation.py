"""Preference-based room allocation on top of the max-flow core.

Network layout for one solve (node ids in this order):

    source -> [group gate] -> student -> room -> sink

Students are numbered by ascending ``seniority_rank`` (then id), and all
source-side edges are inserted in that order, so when two students compete
for the same room the more senior one is augmented first.

Preference ranks are admitted in tiers. Tier ``k`` adds every student's
rank-``k`` edge to the residual graph of tier ``k - 1`` and augments again.
Students matched in an earlier tier are never unmatched (their source edge
stays saturated) but may be re-routed to another room they listed, which is
what keeps the final assignment a maximum matching.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import StructuralError, ValidationError
from .flow import FlowNetwork, ResidualGraph

SCHEMA_VERSION = 1
GROUP_POLICIES = ("all_or_nothing", "best_effort")


@dataclass(frozen=True)
class Student:
    id: str
    seniority_rank: int
    block: str
    department: str
    preferences: tuple[str, ...]
    group_id: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "preferences", tuple(self.preferences))
        if not self.preferences:
            raise ValidationError(f"student {self.id} has no preferences")
        if len(set(self.preferences)) != len(self.preferences):
            raise ValidationError(f"student {self.id} lists a room twice")
        if self.seniority_rank < 1:
            raise ValidationError(f"student {self.id} has non-positive seniority_rank")

    def rank_of(self, room_id: str) -> int | None:
        try:
            return self.preferences.index(room_id) + 1
        except ValueError:
            return None


@dataclass(frozen=True)
class Room:
    id: str
    block: str
    capacity: int

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValidationError(f"room {self.id} has capacity < 1")


@dataclass
class AllocationInstance:
    students: list[Student]
    rooms: list[Room]
    group_policy: str = "all_or_nothing"

    def __post_init__(self) -> None:
        if self.group_policy not in GROUP_POLICIES:
            raise ValidationError(f"unknown group_policy {self.group_policy!r}")
        room_ids = [r.id for r in self.rooms]
        if len(set(room_ids)) != len(room_ids):
            raise ValidationError("duplicate room ids")
        ids = [s.id for s in self.students]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate student ids")
        ranks = [s.seniority_rank for s in self.students]
        if len(set(ranks)) != len(ranks):
            raise ValidationError("seniority_rank must be unique")
        known = set(room_ids)
        for s in self.students:
            missing = [r for r in s.preferences if r not in known]
            if missing:
                raise ValidationError(f"student {s.id} prefers unknown rooms {missing}")

    @property
    def room_map(self) -> dict[str, Room]:
        return {r.id: r for r in self.rooms}

    @property
    def max_preferences(self) -> int:
        return max((len(s.preferences) for s in self.students), default=0)

    def groups(self) -> dict[str, list[Student]]:
        out: dict[str, list[Student]] = {}
        for s in self.students:
            if s.group_id is not None:
                out.setdefault(s.group_id, []).append(s)
        return out


@dataclass(frozen=True)
class AllocationMetrics:
    top_two_rate: float
    group_satisfaction_rate: float
    jain_index: float
    unassigned_count: int
    solve_time: float = 0.0


@dataclass
class AllocationResult:
    assignments: dict[str, str]
    metrics: AllocationMetrics
    overflow: frozenset[str] = field(default_factory=frozenset)


def jain_index(scores: Sequence[float]) -> float:
    """Jain's fairness index ``(sum x)^2 / (n * sum x^2)``; all-zero input gives 1.0."""
    if len(scores) == 0:
        raise StructuralError("jain_index needs at least one score")
    total = float(sum(scores))
    squares = float(sum(x * x for x in scores))
    if squares == 0.0:
        return 1.0
    return total * total / (len(scores) * squares)


def satisfaction_scores(inst: AllocationInstance, assignments: Mapping[str, str]) -> list[int]:
    """Per-student score ``L + 1 - rank`` (0 when unassigned)."""
    out = []
    for s in inst.students:
        room = assignments.get(s.id)
        rank = s.rank_of(room) if room is not None else None
        out.append(0 if rank is None else len(s.preferences) + 1 - rank)
    return out


def compute_metrics(
    inst: AllocationInstance, assignments: Mapping[str, str], solve_time: float = 0.0
) -> AllocationMetrics:
    n = len(inst.students)
    top_two = 0
    for s in inst.students:
        room = assignments.get(s.id)
        rank = s.rank_of(room) if room is not None else None
        if rank is not None and rank <= 2:
            top_two += 1
    rooms = inst.room_map
    groups = [g for g in inst.groups().values() if len(g) >= 2]
    satisfied = 0
    for members in groups:
        got = [assignments.get(m.id) for m in members]
        if all(r is not None for r in got) and len({rooms[r].block for r in got}) == 1:
            satisfied += 1
    return AllocationMetrics(
        top_two_rate=top_two / n if n else 1.0,
        group_satisfaction_rate=satisfied / len(groups) if groups else 1.0,
        jain_index=jain_index(satisfaction_scores(inst, assignments)) if n else 1.0,
        unassigned_count=sum(1 for s in inst.students if s.id not in assignments),
        solve_time=solve_time,
    )


class _Layout:
    """Residual graph for a set of students and rooms, plus edge bookkeeping."""

    def __init__(self, students: Sequence[Student], rooms: Sequence[Room], policy: str,
                 excluded_groups: Iterable[str] = ()):
        self.students = sorted(students, key=lambda s: (s.seniority_rank, s.id))
        self.rooms = list(rooms)
        excluded = set(excluded_groups)
        gated: dict[str, list[Student]] = {}
        if policy == "all_or_nothing":
            for s in self.students:
                if s.group_id is not None:
                    gated.setdefault(s.group_id, []).append(s)
        self.gated = gated

        n_s, n_g, n_r = len(self.students), len(gated), len(self.rooms)
        self.source = 0
        self.student_node = {s.id: 1 + i for i, s in enumerate(self.students)}
        self.group_node = {g: 1 + n_s + i for i, g in enumerate(gated)}
        self.room_node = {r.id: 1 + n_s + n_g + i for i, r in enumerate(self.rooms)}
        self.sink = 1 + n_s + n_g + n_r
        self.graph = ResidualGraph(self.sink + 1, self.source, self.sink)
        self.gate_edge: dict[str, int] = {}
        # (student id, room id) -> edge index, in insertion order
        self.pref_edges: dict[tuple[str, str], int] = {}

        add = self.graph.add_edge
        for s in self.students:
            if s.group_id in gated:
                g = s.group_id
                if g not in self.gate_edge:
                    members = gated[g]
                    cap = 0 if g in excluded else len(members)
                    self.gate_edge[g] = add(self.source, self.group_node[g], cap)
                    for m in members:
                        add(self.group_node[g], self.student_node[m.id], 1)
            else:
                add(self.source, self.student_node[s.id], 1)
        for r in self.rooms:
            add(self.room_node[r.id], self.sink, r.capacity)

    def add_tier(self, tier: int) -> None:
        for s in self.students:
            if len(s.preferences) >= tier:
                room = s.preferences[tier - 1]
                if room in self.room_node:
                    idx = self.graph.add_edge(self.student_node[s.id], self.room_node[room], 1)
                    self.pref_edges[(s.id, room)] = idx

    def assignments(self) -> dict[str, str]:
        out = {}
        for (sid, rid), idx in self.pref_edges.items():
            if self.graph.flow_on(idx) > 0:
                out[sid] = rid
        return out

    def network(self) -> FlowNetwork:
        g = self.graph
        edges = tuple((g.head[2 * i + 1], g.head[2 * i], c) for i, c in enumerate(g.original))
        return FlowNetwork(g.node_count, edges, g.source, g.sink)


def build_network(inst: AllocationInstance, tier: int) -> FlowNetwork:
    """Flow network admitting preference edges of rank ``<= tier``."""
    if not inst.students or not inst.rooms:
        raise StructuralError("allocation instance has no students or no rooms")
    if not 1 <= tier <= inst.max_preferences:
        raise StructuralError(f"tier {tier} outside 1..{inst.max_preferences}")
    layout = _Layout(inst.students, inst.rooms, inst.group_policy)
    for k in range(1, tier + 1):
        layout.add_tier(k)
    return layout.network()


def _partial_groups(layout: _Layout, assigned: Mapping[str, str]) -> list[str]:
    out = []
    for g, members in layout.gated.items():
        got = sum(1 for m in members if m.id in assigned)
        if 0 < got < len(members):
            out.append(g)
    return out


def _solve_tiers(students, rooms, policy, excluded) -> _Layout:
    layout = _Layout(students, rooms, policy, excluded)
    depth = max((len(s.preferences) for s in students), default=0)
    for tier in range(1, depth + 1):
        layout.add_tier(tier)
        layout.graph.augment()
    return layout


def _solve_component(args) -> dict[str, str]:
    students, rooms, policy = args
    excluded: set[str] = set()
    while True:
        layout = _solve_tiers(students, rooms, policy, excluded)
        partial = _partial_groups(layout, layout.assignments())
        if not partial:
            break
        excluded.update(partial)

    # Re-admit excluded groups one at a time if they now fit whole.
    g = layout.graph
    for gid in sorted(excluded, key=lambda x: min(m.seniority_rank for m in layout.gated[x])):
        saved_cap, saved_flow, saved_aug = g.cap[:], g.flow_value, g.augmentations
        edge = layout.gate_edge[gid]
        g.set_capacity(edge, len(layout.gated[gid]))
        g.augment()
        assigned = layout.assignments()
        if any(m.id not in assigned for m in layout.gated[gid]) or _partial_groups(layout, assigned):
            g.cap, g.flow_value, g.augmentations = saved_cap, saved_flow, saved_aug
            g.original[edge] = 0
    return layout.assignments()


def partition_by_block(inst: AllocationInstance) -> list[tuple[list[Student], list[Room]]]:
    """Split the instance into independent sub-problems.

    Blocks are merged whenever a student (or a group) links them, so a
    preference that crosses blocks is never dropped.
    """
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    rooms = inst.room_map
    for r in inst.rooms:
        find(r.block)
    for s in inst.students:
        find(s.block)
        for rid in s.preferences:
            union(s.block, rooms[rid].block)
    for members in inst.groups().values():
        for m in members[1:]:
            union(members[0].block, m.block)

    parts: dict[str, tuple[list[Student], list[Room]]] = {}
    for s in inst.students:
        parts.setdefault(find(s.block), ([], []))[0].append(s)
    for r in inst.rooms:
        parts.setdefault(find(r.block), ([], []))[1].append(r)
    return [parts[k] for k in sorted(parts)]


def allocate(inst: AllocationInstance, jobs: int = 1) -> AllocationResult:
    """Tiered max-flow allocation, solved block by block."""
    if not inst.students or not inst.rooms:
        raise StructuralError("allocation instance has no students or no rooms")
    start = time.perf_counter()
    tasks = [(s, r, inst.group_policy) for s, r in partition_by_block(inst) if s and r]
    assignments: dict[str, str] = {}
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_solve_component, tasks))
    else:
        parts = [_solve_component(t) for t in tasks]
    for part in parts:
        assignments.update(part)
    assignments = {s.id: assignments[s.id] for s in inst.students if s.id in assignments}
    elapsed = time.perf_counter() - start
    result = AllocationResult(assignments, compute_metrics(inst, assignments, elapsed))
    check_result(inst, result)
    return result


def allocate_baseline(inst: AllocationInstance) -> AllocationResult:
    """Seniority-ordered greedy: each student takes their best room with space left."""
    start = time.perf_counter()
    remaining = {r.id: r.capacity for r in inst.rooms}
    assignments: dict[str, str] = {}
    for s in sorted(inst.students, key=lambda s: (s.seniority_rank, s.id)):
        for rid in s.preferences:
            if remaining[rid] > 0:
                remaining[rid] -= 1
                assignments[s.id] = rid
                break
    assignments = {s.id: assignments[s.id] for s in inst.students if s.id in assignments}
    elapsed = time.perf_counter() - start
    return AllocationResult(assignments, compute_metrics(inst, assignments, elapsed))


def check_result(inst: AllocationInstance, result: AllocationResult) -> None:
    """Raise StructuralError if capacity or preference invariants are broken."""
    students = {s.id: s for s in inst.students}
    rooms = inst.room_map
    load: dict[str, int] = {}
    for sid, rid in result.assignments.items():
        if sid not in students or rid not in rooms:
            raise StructuralError(f"assignment {sid} -> {rid} names an unknown id")
        if students[sid].rank_of(rid) is None and sid not in result.overflow:
            raise StructuralError(f"{sid} assigned unlisted room {rid} without overflow flag")
        load[rid] = load.get(rid, 0) + 1
    for rid, used in load.items():
        if used > rooms[rid].capacity:
            raise StructuralError(f"room {rid} over capacity ({used} > {rooms[rid].capacity})")


# --- serialization -----------------------------------------------------------

def instance_to_dict(inst: AllocationInstance) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "group_policy": inst.group_policy,
        "students": [
            {
                "id": s.id,
                "seniority_rank": s.seniority_rank,
                "block": s.block,
                "department": s.department,
                "preferences": list(s.preferences),
                "group_id": s.group_id,
            }
            for s in inst.students
        ],
        "rooms": [{"id": r.id, "block": r.block, "capacity": r.capacity} for r in inst.rooms],
    }


def instance_from_dict(doc: Mapping) -> AllocationInstance:
    try:
        students = [
            Student(
                id=str(d["id"]),
                seniority_rank=int(d["seniority_rank"]),
                block=str(d["block"]),
                department=str(d.get("department", "")),
                preferences=tuple(str(p) for p in d["preferences"]),
                group_id=d.get("group_id"),
            )
            for d in doc["students"]
        ]
        rooms = [Room(str(d["id"]), str(d["block"]), int(d["capacity"])) for d in doc["rooms"]]
    except (KeyError, TypeError) as exc:
        raise StructuralError(f"malformed allocation instance: missing or bad field {exc}") from exc
    return AllocationInstance(students, rooms, doc.get("group_policy", "all_or_nothing"))


def result_to_dict(inst: AllocationInstance, result: AllocationResult) -> dict:
    """JSON-ready result. ``solve_time`` is left out so files are reproducible."""
    m = result.metrics
    return {
        "schema_version": SCHEMA_VERSION,
        "assignments": dict(sorted(result.assignments.items())),
        "unassigned": sorted(s.id for s in inst.students if s.id not in result.assignments),
        "overflow": sorted(result.overflow),
        "metrics": {
            "top_two_rate": m.top_two_rate,
            "group_satisfaction_rate": m.group_satisfaction_rate,
            "jain_index": m.jain_index,
            "unassigned_count": m.unassigned_count,
        },
    }


def summary_csv(inst: AllocationInstance, result: AllocationResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["student_id", "room_id", "rank_received"])
    for s in inst.students:
        rid = result.assignments.get(s.id)
        rank = s.rank_of(rid) if rid is not None else None
        w.writerow([s.id, rid or "", rank if rank is not None else ""])
    return buf.getvalue()
