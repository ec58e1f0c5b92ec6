"""Complaint records, lifecycle state machine, priority scoring and KPIs."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import StructuralError, TransitionError, ValidationError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

CATEGORIES = ("electrical", "water", "plumbing", "sanitation", "civil", "general", "other")

# electrical, water and general are the anchors; the other categories sit between them.
DEFAULT_TYPE_WEIGHTS = {
    "electrical": 1.0,
    "water": 0.8,
    "plumbing": 0.8,
    "sanitation": 0.7,
    "civil": 0.7,
    "general": 0.6,
    "other": 0.6,
}

DEFAULT_ROUTING = {
    "electrical": "electrical maintenance",
    "water": "civil maintenance",
    "plumbing": "civil maintenance",
    "civil": "civil maintenance",
    "sanitation": "housekeeping",
    "general": "hostel office",
    "other": "hostel office",
}


class Lifecycle(str, Enum):
    PENDING = "Pending"
    IN_PROGRESS = "InProgress"
    RESOLVED = "Resolved"
    VERIFIED = "Verified"

    @property
    def is_open(self) -> bool:
        return self in (Lifecycle.PENDING, Lifecycle.IN_PROGRESS)


LEGAL_TRANSITIONS = frozenset(
    {
        (Lifecycle.PENDING, Lifecycle.IN_PROGRESS),
        (Lifecycle.IN_PROGRESS, Lifecycle.RESOLVED),
        (Lifecycle.RESOLVED, Lifecycle.VERIFIED),
        (Lifecycle.IN_PROGRESS, Lifecycle.PENDING),
    }
)

HistoryEntry = tuple[datetime, Lifecycle, str]


@dataclass(frozen=True)
class Complaint:
    id: str
    category: str
    description: str
    student_id: str
    room_id: str
    block: str
    created_at: datetime
    status: Lifecycle = Lifecycle.PENDING
    affected_count: int = 1
    history: tuple[HistoryEntry, ...] = ()
    resolved_at: datetime | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "status", Lifecycle(self.status))
        if not self.history:
            object.__setattr__(self, "history", ((self.created_at, Lifecycle.PENDING, "created"),))
        else:
            object.__setattr__(self, "history", tuple(self.history))
        if self.affected_count < 1:
            raise ValidationError(f"complaint {self.id}: affected_count must be >= 1")
        stamps = [h[0] for h in self.history]
        if any(b < a for a, b in zip(stamps, stamps[1:])):
            raise ValidationError(f"complaint {self.id}: history is not chronological")
        closed = self.status in (Lifecycle.RESOLVED, Lifecycle.VERIFIED)
        if closed != (self.resolved_at is not None):
            raise ValidationError(f"complaint {self.id}: resolved_at inconsistent with status {self.status.value}")

    @property
    def department(self) -> str:
        return DEFAULT_ROUTING.get(self.category, DEFAULT_ROUTING["other"])


@dataclass(frozen=True)
class PriorityWeights:
    type_weights: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_TYPE_WEIGHTS))
    coefficient_t: float = 0.4
    coefficient_i: float = 0.3
    coefficient_a: float = 0.3
    age_saturation: timedelta = timedelta(hours=72)
    impact_saturation: int = 50

    def __post_init__(self) -> None:
        total = self.coefficient_t + self.coefficient_i + self.coefficient_a
        if not math.isclose(total, 1.0, abs_tol=1e-12):
            raise ValidationError(f"priority coefficients sum to {total}, expected 1.0")
        for cat, w in self.type_weights.items():
            if not 0.0 <= w <= 1.0:
                raise ValidationError(f"type weight for {cat} outside [0, 1]")
        if "general" not in self.type_weights:
            raise ValidationError("type_weights must define 'general' (the fallback)")
        if self.impact_saturation < 1 or self.age_saturation <= timedelta(0):
            raise ValidationError("saturation values must be positive")


def priority_score(c: Complaint, w: PriorityWeights, now: datetime) -> float:
    """Weighted urgency ``0.4*T + 0.3*I + 0.3*A`` in [0, 1].

    ``I`` and ``A`` grow linearly and saturate at ``w.impact_saturation``
    affected students and ``w.age_saturation`` of age respectively.
    """
    if now < c.created_at:
        raise ValidationError(f"complaint {c.id} created after 'now'")
    t = w.type_weights.get(c.category)
    if t is None:
        logger.warning("unknown category %r on %s; using 'general' weight", c.category, c.id)
        t = w.type_weights["general"]
    impact = min(c.affected_count / w.impact_saturation, 1.0)
    age = min((now - c.created_at) / w.age_saturation, 1.0)
    return w.coefficient_t * t + w.coefficient_i * impact + w.coefficient_a * age


def transition(c: Complaint, next_status: Lifecycle | str, note: str, at: datetime) -> Complaint:
    next_status = Lifecycle(next_status)
    if (c.status, next_status) not in LEGAL_TRANSITIONS:
        raise TransitionError(c.status.value, next_status.value, "complaint")
    if at < c.history[-1][0]:
        raise ValidationError(f"transition at {at} precedes last history entry")
    resolved_at = c.resolved_at
    if next_status is Lifecycle.RESOLVED:
        resolved_at = at
    elif next_status is Lifecycle.PENDING:
        resolved_at = None
    return replace(c, status=next_status, history=c.history + ((at, next_status, note),), resolved_at=resolved_at)


def triage_queue(complaints: Iterable[Complaint], w: PriorityWeights, now: datetime) -> list[Complaint]:
    """Open complaints, most urgent first; ties go to the older complaint, then id."""
    scored = [(priority_score(c, w, now), c) for c in complaints if c.status.is_open]
    scored.sort(key=lambda sc: (-sc[0], sc[1].created_at, sc[1].id))
    return [c for _, c in scored]


@dataclass(frozen=True)
class KPIReport:
    empty: bool
    total: int
    mean_resolution_hours: float
    pending_over_24h_fraction: float
    by_category: dict[str, int]
    by_status: dict[str, int]


def kpi_report(complaints: Iterable[Complaint], window: tuple[datetime, datetime]) -> KPIReport:
    """KPIs over complaints created inside ``[start, end)``, evaluated at ``end``."""
    start, end = window
    if end < start:
        raise StructuralError("window end precedes start")
    inside = [c for c in complaints if start <= c.created_at < end]
    if not inside:
        return KPIReport(True, 0, 0.0, 0.0, {}, {})
    durations = [
        (c.resolved_at - c.created_at).total_seconds() / 3600.0
        for c in inside
        if c.resolved_at is not None and c.resolved_at <= end
    ]
    stale = sum(
        1
        for c in inside
        if (c.resolved_at is None or c.resolved_at > end) and end - c.created_at > timedelta(hours=24)
    )
    by_cat: dict[str, int] = {}
    by_status: dict[str, int] = {}
    for c in inside:
        by_cat[c.category] = by_cat.get(c.category, 0) + 1
        by_status[c.status.value] = by_status.get(c.status.value, 0) + 1
    return KPIReport(
        empty=False,
        total=len(inside),
        mean_resolution_hours=sum(durations) / len(durations) if durations else 0.0,
        pending_over_24h_fraction=stale / len(inside),
        by_category=dict(sorted(by_cat.items())),
        by_status=dict(sorted(by_status.items())),
    )


def kpi_csv(report: KPIReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "key", "value"])
    w.writerow(["empty", "", int(report.empty)])
    w.writerow(["total", "", report.total])
    w.writerow(["mean_resolution_hours", "", f"{report.mean_resolution_hours:.6f}"])
    w.writerow(["pending_over_24h_fraction", "", f"{report.pending_over_24h_fraction:.6f}"])
    for k, v in report.by_category.items():
        w.writerow(["by_category", k, v])
    for k, v in report.by_status.items():
        w.writerow(["by_status", k, v])
    return buf.getvalue()


# --- JSON-lines event log -------------------------------------------------------
#
# One event per line: {"id": ..., "at": ISO-8601, "diff": {...}}.
# The first event for an id carries every field ("created"); later events
# carry {"status", "note"} and are replayed through ``transition``.

def _iso(t: datetime | None) -> str | None:
    return None if t is None else t.isoformat()


def creation_event(c: Complaint) -> dict:
    return {
        "id": c.id,
        "at": _iso(c.created_at),
        "diff": {
            "schema_version": SCHEMA_VERSION,
            "category": c.category,
            "description": c.description,
            "student_id": c.student_id,
            "room_id": c.room_id,
            "block": c.block,
            "affected_count": c.affected_count,
            "status": Lifecycle.PENDING.value,
        },
    }


def events_for(c: Complaint) -> list[dict]:
    """Events that rebuild ``c`` when replayed."""
    out = [creation_event(c)]
    for at, status, note in c.history[1:]:
        out.append({"id": c.id, "at": _iso(at), "diff": {"status": status.value, "note": note}})
    return out


def dump_log(complaints: Sequence[Complaint]) -> str:
    events = [e for c in complaints for e in events_for(c)]
    return "".join(json.dumps(e, sort_keys=True) + "\n" for e in events)


def replay_log(lines: Iterable[str]) -> list[Complaint]:
    """Rebuild complaints from a JSON-lines event log (order of first appearance)."""
    store: dict[str, Complaint] = {}
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            event = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StructuralError(f"complaint log line {lineno}, column {exc.colno}: {exc.msg}") from exc
        try:
            cid, at, diff = event["id"], datetime.fromisoformat(event["at"]), event["diff"]
            if cid not in store:
                store[cid] = Complaint(
                    id=cid,
                    category=diff["category"],
                    description=diff.get("description", ""),
                    student_id=diff.get("student_id", ""),
                    room_id=diff["room_id"],
                    block=diff["block"],
                    created_at=at,
                    affected_count=int(diff.get("affected_count", 1)),
                    history=((at, Lifecycle.PENDING, diff.get("note", "created")),),
                )
            else:
                store[cid] = transition(store[cid], diff["status"], diff.get("note", ""), at)
        except (KeyError, TypeError, ValueError) as exc:
            raise StructuralError(f"complaint log line {lineno}: malformed event ({exc})") from exc
    return list(store.values())
