"""Seeded synthetic workloads for allocation and complaint analytics.

All randomness comes from numpy's PCG64 bit generator driven by a
``SeedSequence(seed)``; independent streams (rooms, students, complaints,
anomalies) are child sequences spawned from it, so adding draws to one
stream never shifts another.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timedelta
from typing import Mapping

import numpy as np

from .allocation import AllocationInstance, Room, Student
from .errors import SpecError
from .triage import CATEGORIES, Complaint, Lifecycle, transition

DEFAULT_RATES = {
    "electrical": 1.2,
    "water": 0.8,
    "plumbing": 1.0,
    "sanitation": 0.7,
    "civil": 0.5,
    "general": 0.9,
    "other": 0.3,
}
# (amplitude, peak week): electrical peaks in summer, plumbing/water in the monsoon.
DEFAULT_SEASONALITY = {
    "electrical": (0.5, 20),
    "water": (0.4, 30),
    "plumbing": (0.6, 30),
    "sanitation": (0.2, 32),
    "civil": (0.1, 10),
    "general": (0.0, 0),
    "other": (0.0, 0),
}

_TEMPLATES = {
    "electrical": ["fan not working", "light flickering in the corridor", "power socket is broken",
                   "tube light fused", "switch board loose"],
    "water": ["no water in the taps since morning", "water cooler not cold", "low water pressure",
              "drinking water tastes bad"],
    "plumbing": ["tap leaking in washroom", "flush is broken", "drain clogged near sink",
                 "pipe dripping under basin"],
    "sanitation": ["washroom is dirty", "garbage not collected", "corridor not cleaned today",
                   "dustbin overflowing"],
    "civil": ["window glass cracked", "door lock jammed", "ceiling plaster damaged", "cupboard hinge broken"],
    "general": ["need extra mattress", "wifi slow in evening", "mess timing issue", "notice board outdated"],
    "other": ["request for room inspection", "lost key", "parcel not delivered"],
}
_FILLER = ["please check", "kindly fix soon", "since yesterday", "again this week", "on second floor",
           "near the stairs", "it is inconvenient", "thanks"]
_ALARM = ["urgent", "fire", "sparks", "smoke", "flood", "emergency", "shock", "gas"]
_ANGRY = ["terrible", "dangerous", "unacceptable", "horrible", "unsafe", "awful"]


@dataclass
class WorkloadSpec:
    seed: int = 0
    student_count: int = 100
    room_count: int = 40
    room_capacities: tuple[int, ...] = (2, 3)
    blocks: tuple[str, ...] = ("A", "B", "C", "D")
    departments: tuple[str, ...] = ("CSE", "ECE", "ME", "CE", "EE")
    preference_model: str = "uniform"
    zipf_s: float = 1.1
    preference_length: int = 5
    group_fraction: float = 0.1
    group_sizes: tuple[int, ...] = (2, 3)
    complaint_rates: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_RATES))
    seasonal_amplitudes: Mapping[str, tuple[float, int]] = field(default_factory=lambda: dict(DEFAULT_SEASONALITY))
    rooms_per_block_for_complaints: int = 20
    anomaly_contamination: float = 0.0
    duration_weeks: int = 52
    start_date: date = date(2024, 1, 1)
    mean_resolution_hours: float = 18.0

    def __post_init__(self) -> None:
        self.room_capacities = tuple(self.room_capacities)
        self.blocks = tuple(self.blocks)
        self.departments = tuple(self.departments)
        self.group_sizes = tuple(self.group_sizes)
        if isinstance(self.start_date, str):
            self.start_date = date.fromisoformat(self.start_date)
        self.seasonal_amplitudes = {k: tuple(v) for k, v in self.seasonal_amplitudes.items()}
        if not 0.0 <= self.anomaly_contamination <= 0.2:
            raise SpecError("anomaly_contamination must lie in [0, 0.2]")
        if any(r < 0 for r in self.complaint_rates.values()):
            raise SpecError("complaint rates must be non-negative")
        if self.preference_model not in ("uniform", "zipf"):
            raise SpecError(f"unknown preference_model {self.preference_model!r}")
        if self.student_count < 0 or self.room_count < 0 or self.preference_length < 1:
            raise SpecError("counts must be non-negative and preference_length >= 1")
        if not self.blocks:
            raise SpecError("at least one block is required")
        if not 0.0 <= self.group_fraction <= 1.0:
            raise SpecError("group_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start_date"] = self.start_date.isoformat()
        d["schema_version"] = 1
        return d

    @classmethod
    def from_dict(cls, doc: Mapping) -> "WorkloadSpec":
        doc = dict(doc)
        doc.pop("schema_version", None)
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise SpecError(f"unknown workload spec keys: {sorted(unknown)}")
        return cls(**doc)


def capacity_rich(seed: int = 42, student_count: int = 500) -> WorkloadSpec:
    """Reference workload with ~1.5x seats per student and uniform preferences."""
    return WorkloadSpec(seed=seed, student_count=student_count, room_count=student_count * 3 // 5,
                        room_capacities=(2, 3), blocks=("A", "B", "C", "D", "E"), preference_model="uniform")


def contended(seed: int, student_count: int = 100) -> WorkloadSpec:
    """Over-subscribed workload (~0.8 seats per student) with Zipf-skewed preferences."""
    return WorkloadSpec(seed=seed, student_count=student_count, room_count=student_count * 8 // 25,
                        room_capacities=(2, 3), blocks=("A", "B"), preference_model="zipf", zipf_s=1.1)


def _streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def gen_allocation(spec: WorkloadSpec) -> AllocationInstance:
    room_rng, student_rng, group_rng = _streams(spec.seed, 3)
    rooms: list[Room] = []
    for i in range(spec.room_count):
        block = spec.blocks[i % len(spec.blocks)]
        cap = int(room_rng.choice(spec.room_capacities))
        rooms.append(Room(f"{block}-{100 + i // len(spec.blocks)}", block, cap))
    if sum(r.capacity for r in rooms) == 0:
        raise SpecError("workload has zero total room capacity")
    by_block = {b: [r.id for r in rooms if r.block == b] for b in spec.blocks}

    seniority = student_rng.permutation(spec.student_count) + 1
    prefs_of: list[tuple[str, ...]] = []
    blocks_of: list[str] = []
    for i in range(spec.student_count):
        block = spec.blocks[i % len(spec.blocks)]
        choices = by_block[block] or [r.id for r in rooms]
        k = min(spec.preference_length, len(choices))
        if spec.preference_model == "uniform":
            p = None
        else:
            w = 1.0 / np.arange(1, len(choices) + 1) ** spec.zipf_s
            p = w / w.sum()
        picks = student_rng.choice(len(choices), size=k, replace=False, p=p)
        prefs_of.append(tuple(choices[j] for j in picks))
        blocks_of.append(block)

    group_of: list[str | None] = [None] * spec.student_count
    target = int(round(spec.group_fraction * spec.student_count))
    for block in spec.blocks:
        members = [i for i in range(spec.student_count) if blocks_of[i] == block]
        members = [members[j] for j in group_rng.permutation(len(members))]
        quota = int(round(target * len(members) / max(spec.student_count, 1)))
        gi = 0
        while quota >= 2 and len(members) >= 2:
            size = int(group_rng.choice(spec.group_sizes))
            size = min(size, quota, len(members))
            if size < 2:
                break
            chosen, members = members[:size], members[size:]
            gid = f"G-{block}-{gi}"
            for m in chosen:
                group_of[m] = gid
                prefs_of[m] = prefs_of[chosen[0]]
            quota -= size
            gi += 1

    students = [
        Student(
            id=f"S{i:04d}",
            seniority_rank=int(seniority[i]),
            block=blocks_of[i],
            department=spec.departments[i % len(spec.departments)],
            preferences=prefs_of[i],
            group_id=group_of[i],
        )
        for i in range(spec.student_count)
    ]
    return AllocationInstance(students, rooms, "all_or_nothing")


def _weekly_rate(spec: WorkloadSpec, category: str, week: int) -> float:
    base = spec.complaint_rates.get(category, 0.0)
    amp, peak = spec.seasonal_amplitudes.get(category, (0.0, 0))
    return max(base * (1.0 + amp * math.cos(2 * math.pi * (week - peak) / 52.0)), 0.0)


def _normal_hour(rng: np.random.Generator) -> int:
    return int(np.clip(round(rng.normal(14.5, 3.5)), 7, 23))


def _lifecycle(c: Complaint, rng: np.random.Generator, spec: WorkloadSpec, end: datetime) -> Complaint:
    pickup = c.created_at + timedelta(hours=float(rng.exponential(spec.mean_resolution_hours / 3)))
    done = pickup + timedelta(hours=float(rng.exponential(spec.mean_resolution_hours * 2 / 3)))
    if pickup <= end:
        c = transition(c, Lifecycle.IN_PROGRESS, "assigned", pickup.replace(microsecond=0))
    if done <= end:
        c = transition(c, Lifecycle.RESOLVED, "fixed", done.replace(microsecond=0))
    return c


def gen_complaints(spec: WorkloadSpec) -> tuple[list[Complaint], dict[str, bool]]:
    """Seasonal Poisson complaint stream plus ground-truth anomaly labels.

    Planted anomalies arrive in short bursts (same room and category within
    a few hours), at night, with alarm keywords and hostile wording.
    """
    count_rng, detail_rng, life_rng, anom_rng = _streams(spec.seed + 1_000_003, 4)
    start = datetime.combine(spec.start_date, datetime.min.time())
    end = start + timedelta(weeks=spec.duration_weeks)
    rooms = {b: [f"{b}-{100 + i}" for i in range(spec.rooms_per_block_for_complaints)] for b in spec.blocks}

    raw: list[tuple[datetime, str, str, str, str, int, bool]] = []
    for week in range(spec.duration_weeks):
        week_start = start + timedelta(weeks=week)
        for block in spec.blocks:
            for cat in CATEGORIES:
                n = int(count_rng.poisson(_weekly_rate(spec, cat, week)))
                for _ in range(n):
                    at = week_start + timedelta(days=int(detail_rng.integers(7)), hours=_normal_hour(detail_rng),
                                                minutes=int(detail_rng.integers(60)))
                    words = [str(detail_rng.choice(_TEMPLATES[cat]))]
                    words += list(detail_rng.choice(_FILLER, size=int(detail_rng.integers(0, 3)), replace=False))
                    if detail_rng.random() < 0.03:
                        words.append("urgent")
                    room = str(detail_rng.choice(rooms[block]))
                    affected = int(detail_rng.geometric(0.6))
                    raw.append((at, cat, ", ".join(words), room, block, affected, False))

    normal = len(raw)
    c = spec.anomaly_contamination
    n_anom = int(round(c * normal / (1.0 - c))) if c > 0 else 0
    while n_anom > 0:
        burst = min(n_anom, int(anom_rng.integers(1, 4)))
        block = str(anom_rng.choice(spec.blocks))
        room = str(anom_rng.choice(rooms[block]))
        cat = str(anom_rng.choice(["electrical", "water", "plumbing", "civil"]))
        t0 = start + timedelta(days=int(anom_rng.integers(spec.duration_weeks * 7)),
                               hours=int(anom_rng.integers(0, 5)), minutes=int(anom_rng.integers(60)))
        for j in range(burst):
            at = t0 + timedelta(minutes=int(anom_rng.integers(5, 50)) * j)
            alarm = list(anom_rng.choice(_ALARM, size=int(anom_rng.integers(2, 5)), replace=False))
            angry = list(anom_rng.choice(_ANGRY, size=2, replace=False))
            text = " ".join(alarm + angry + [str(anom_rng.choice(_TEMPLATES[cat]))] + alarm)
            affected = int(anom_rng.integers(5, 40))
            raw.append((at, cat, text + "!!", room, block, affected, True))
        n_anom -= burst

    raw.sort(key=lambda r: (r[0], r[3], r[1], r[2]))
    complaints: list[Complaint] = []
    labels: dict[str, bool] = {}
    for i, (at, cat, text, room, block, affected, is_anom) in enumerate(raw):
        cid = f"C{i:06d}"
        comp = Complaint(cid, cat, text, f"S{int(life_rng.integers(10_000)):04d}", room, block, at,
                         affected_count=affected)
        complaints.append(_lifecycle(comp, life_rng, spec, end))
        labels[cid] = is_anom
    return complaints, labels


def labels_to_json(labels: Mapping[str, bool]) -> str:
    return json.dumps({"schema_version": 1, "labels": dict(sorted(labels.items()))}, indent=1) + "\n"
