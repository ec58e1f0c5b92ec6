"""Gate pass lifecycle with HMAC-signed single-use tokens.

Token wire format (the QR payload is its base64 text)::

    token   = base64( payload || signature )
    payload = version:u8 || field(pass_id) || field(student_id)
              || field(exit_at) || field(return_by) || field(nonce)
    field   = length:u32 big-endian || UTF-8 bytes
    signature = HMAC-SHA256(key, payload)            (32 bytes)

``exit_at`` and ``return_by`` are ISO-8601 strings; ``nonce`` is 32 hex
characters drawn from :mod:`secrets`.
"""

from __future__ import annotations

import base64
import binascii
import csv
import hashlib
import hmac
import io
import json
import secrets
import statistics
import struct
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from enum import Enum
from typing import Iterable, Mapping

from .errors import StructuralError, TransitionError, ValidationError

SCHEMA_VERSION = 1
TOKEN_VERSION = 1
SIG_LEN = 32
DEFAULT_GRACE = timedelta(minutes=30)
KEY_ENV = "HOSTEL_OPS_GATEPASS_KEY"


class PassStatus(str, Enum):
    REQUESTED = "Requested"
    APPROVED = "Approved"
    REJECTED = "Rejected"
    EXITED = "Exited"
    RETURNED = "Returned"
    EXPIRED = "Expired"


PASS_TRANSITIONS = {
    PassStatus.REQUESTED: {PassStatus.APPROVED, PassStatus.REJECTED},
    PassStatus.APPROVED: {PassStatus.EXITED, PassStatus.EXPIRED},
    PassStatus.EXITED: {PassStatus.RETURNED, PassStatus.EXPIRED},
    PassStatus.REJECTED: set(),
    PassStatus.RETURNED: set(),
    PassStatus.EXPIRED: set(),
}
TOKEN_STATES = {PassStatus.APPROVED, PassStatus.EXITED, PassStatus.RETURNED, PassStatus.EXPIRED}


class ScanResult(str, Enum):
    ACCEPTED = "Accepted"
    REJECTED_TAMPERED = "RejectedTampered"
    REJECTED_REUSED = "RejectedReused"
    REJECTED_EXPIRED = "RejectedExpired"
    REJECTED_UNKNOWN = "RejectedUnknown"


INCIDENT_RESULTS = (ScanResult.REJECTED_TAMPERED, ScanResult.REJECTED_REUSED)


@dataclass(frozen=True)
class TokenPayload:
    pass_id: str
    student_id: str
    exit_at: datetime
    return_by: datetime
    nonce: str

    def to_bytes(self) -> bytes:
        out = bytearray([TOKEN_VERSION])
        for value in (self.pass_id, self.student_id, self.exit_at.isoformat(),
                      self.return_by.isoformat(), self.nonce):
            raw = value.encode("utf-8")
            out += struct.pack(">I", len(raw)) + raw
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "TokenPayload":
        if not data or data[0] != TOKEN_VERSION:
            raise ValueError("unknown token version")
        pos, fields = 1, []
        for _ in range(5):
            if pos + 4 > len(data):
                raise ValueError("truncated token")
            (n,) = struct.unpack_from(">I", data, pos)
            pos += 4
            if pos + n > len(data):
                raise ValueError("truncated token field")
            fields.append(data[pos:pos + n].decode("utf-8"))
            pos += n
        if pos != len(data):
            raise ValueError("trailing bytes in token")
        return cls(fields[0], fields[1], datetime.fromisoformat(fields[2]),
                   datetime.fromisoformat(fields[3]), fields[4])


@dataclass(frozen=True)
class SignedToken:
    payload: TokenPayload
    signature: bytes

    def to_bytes(self) -> bytes:
        return self.payload.to_bytes() + self.signature

    def encode(self) -> str:
        return base64.b64encode(self.to_bytes()).decode("ascii")


def sign(payload: TokenPayload, key: bytes) -> SignedToken:
    return SignedToken(payload, hmac.new(key, payload.to_bytes(), hashlib.sha256).digest())


def verify(raw: bytes, key: bytes) -> TokenPayload | None:
    """Return the payload if ``raw`` (decoded token bytes) carries a valid signature."""
    if len(raw) <= SIG_LEN:
        return None
    body, sig = raw[:-SIG_LEN], raw[-SIG_LEN:]
    if not hmac.compare_digest(hmac.new(key, body, hashlib.sha256).digest(), sig):
        return None
    try:
        return TokenPayload.from_bytes(body)
    except (ValueError, UnicodeDecodeError):
        return None


@dataclass(frozen=True)
class ScanEvent:
    at: datetime
    direction: str
    result: ScanResult
    pass_id: str | None = None


@dataclass(frozen=True)
class GatePass:
    id: str
    student_id: str
    reason: str
    destination: str
    exit_at: datetime
    return_by: datetime
    emergency_contact: str
    requested_at: datetime
    status: PassStatus = PassStatus.REQUESTED
    remarks: str = ""
    decided_at: datetime | None = None
    token: SignedToken | None = None
    scans: tuple[ScanEvent, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "status", PassStatus(self.status))
        if self.exit_at >= self.return_by:
            raise ValidationError(f"pass {self.id}: exit_at must precede return_by")
        if (self.token is not None) != (self.status in TOKEN_STATES):
            raise ValidationError(f"pass {self.id}: token presence inconsistent with status {self.status.value}")


def _advance(p: GatePass, status: PassStatus, **changes) -> GatePass:
    if status not in PASS_TRANSITIONS[p.status]:
        raise TransitionError(p.status.value, status.value, "gate pass")
    return replace(p, status=status, **changes)


def request_pass(
    pass_id: str,
    student_id: str,
    reason: str,
    destination: str,
    exit_at: datetime,
    return_by: datetime,
    emergency_contact: str,
    requested_at: datetime,
) -> GatePass:
    if not reason.strip():
        raise ValidationError("reason must not be empty")
    if exit_at >= return_by:
        raise ValidationError("exit_at must precede return_by")
    return GatePass(pass_id, student_id, reason, destination, exit_at, return_by, emergency_contact, requested_at)


def decide(p: GatePass, approve: bool, remarks: str, key: bytes, at: datetime, nonce: str | None = None) -> GatePass:
    """Approve (minting a fresh token) or reject a Requested pass."""
    if p.status is not PassStatus.REQUESTED:
        raise TransitionError(p.status.value, "Approved" if approve else "Rejected", "gate pass")
    if approve:
        payload = TokenPayload(p.id, p.student_id, p.exit_at, p.return_by, nonce or secrets.token_hex(16))
        return _advance(p, PassStatus.APPROVED, remarks=remarks, decided_at=at, token=sign(payload, key))
    if not remarks.strip():
        raise ValidationError("rejection requires remarks")
    return _advance(p, PassStatus.REJECTED, remarks=remarks, decided_at=at)


class PassStore:
    """In-memory pass store with per-pass scan serialization."""

    def __init__(self, key: bytes, grace: timedelta = DEFAULT_GRACE):
        self.key = key
        self.grace = grace
        self.passes: dict[str, GatePass] = {}
        self.unattributed: list[ScanEvent] = []
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def put(self, p: GatePass) -> GatePass:
        with self._guard:
            self.passes[p.id] = p
            self._locks.setdefault(p.id, threading.Lock())
        return p

    def get(self, pass_id: str) -> GatePass:
        try:
            return self.passes[pass_id]
        except KeyError:
            raise ValidationError(f"unknown pass {pass_id}") from None

    def _lock(self, pass_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(pass_id, threading.Lock())

    def all_scans(self) -> list[ScanEvent]:
        return [e for p in self.passes.values() for e in p.scans] + list(self.unattributed)

    # --- persistence: one pass per JSON line; unattributed scans on a trailing line
    def dumps(self) -> str:
        lines = [json.dumps(pass_to_dict(p), sort_keys=True) for p in self.passes.values()]
        if self.unattributed:
            lines.append(json.dumps({"unattributed_scans": [_scan_to_dict(e) for e in self.unattributed]},
                                    sort_keys=True))
        return "".join(ln + "\n" for ln in lines)

    def loads(self, text: str) -> None:
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StructuralError(f"pass store line {lineno}, column {exc.colno}: {exc.msg}") from exc
            if "unattributed_scans" in d:
                self.unattributed.extend(_scan_from_dict(e) for e in d["unattributed_scans"])
            else:
                self.put(pass_from_dict(d))


def _decode(token: str | bytes) -> bytes | None:
    try:
        return base64.b64decode(token, validate=True)
    except (binascii.Error, ValueError):
        return None


def scan(token: str | bytes, direction: str, at: datetime, store: PassStore) -> ScanEvent:
    """Verify a scanned token and record the outcome; never raises on bad input."""
    if direction not in ("exit", "entry"):
        raise StructuralError(f"direction must be 'exit' or 'entry', got {direction!r}")
    raw = _decode(token)
    payload = verify(raw, store.key) if raw is not None else None
    if payload is None:
        event = ScanEvent(at, direction, ScanResult.REJECTED_TAMPERED)
        with store._guard:
            store.unattributed.append(event)
        return event
    if payload.pass_id not in store.passes:
        event = ScanEvent(at, direction, ScanResult.REJECTED_UNKNOWN, payload.pass_id)
        with store._guard:
            store.unattributed.append(event)
        return event

    with store._lock(payload.pass_id):
        p = store.passes[payload.pass_id]
        result, status = _judge(p, payload, direction, at, store.grace)
        event = ScanEvent(at, direction, result, p.id)
        changes = {"scans": p.scans + (event,)}
        if status is not None and status is not p.status:
            p = _advance(p, status, **changes)
        else:
            p = replace(p, **changes)
        store.passes[p.id] = p
    return event


def _judge(p: GatePass, payload: TokenPayload, direction: str, at: datetime, grace: timedelta):
    """Return (scan result, new status or None)."""
    if p.token is None or p.token.payload != payload:
        return ScanResult.REJECTED_UNKNOWN, None
    if p.status is PassStatus.EXPIRED:
        return ScanResult.REJECTED_EXPIRED, None
    late = at > p.return_by
    early = direction == "exit" and at < p.exit_at - grace
    if late or early:
        expire = late and PassStatus.EXPIRED in PASS_TRANSITIONS[p.status]
        return ScanResult.REJECTED_EXPIRED, PassStatus.EXPIRED if expire else None
    accepted = {e.direction for e in p.scans if e.result is ScanResult.ACCEPTED}
    if direction in accepted:
        return ScanResult.REJECTED_REUSED, None
    if direction == "exit":
        return ScanResult.ACCEPTED, PassStatus.EXITED
    if p.status is not PassStatus.EXITED:
        # entry without a recorded exit
        return ScanResult.REJECTED_UNKNOWN, None
    return ScanResult.ACCEPTED, PassStatus.RETURNED


@dataclass(frozen=True)
class PassStats:
    empty: bool
    total: int
    rejected: int
    rejection_rate: float
    reuse_incidents: int
    tamper_incidents: int
    median_decision_minutes: float

    @property
    def incidents(self) -> int:
        return self.reuse_incidents + self.tamper_incidents


def pass_stats(passes: Iterable[GatePass], extra_scans: Iterable[ScanEvent] = ()) -> PassStats:
    passes = list(passes)
    scans = [e for p in passes for e in p.scans] + list(extra_scans)
    if not passes and not scans:
        return PassStats(True, 0, 0, 0.0, 0, 0, 0.0)
    rejected = sum(1 for p in passes if p.status is PassStatus.REJECTED)
    waits = [(p.decided_at - p.requested_at).total_seconds() / 60.0 for p in passes if p.decided_at]
    return PassStats(
        empty=False,
        total=len(passes),
        rejected=rejected,
        rejection_rate=rejected / len(passes) if passes else 0.0,
        reuse_incidents=sum(1 for e in scans if e.result is ScanResult.REJECTED_REUSED),
        tamper_incidents=sum(1 for e in scans if e.result is ScanResult.REJECTED_TAMPERED),
        median_decision_minutes=statistics.median(waits) if waits else 0.0,
    )


def stats_csv(s: PassStats) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    w.writerow(["empty", int(s.empty)])
    w.writerow(["total", s.total])
    w.writerow(["rejected", s.rejected])
    w.writerow(["rejection_rate", f"{s.rejection_rate:.6f}"])
    w.writerow(["reuse_incidents", s.reuse_incidents])
    w.writerow(["tamper_incidents", s.tamper_incidents])
    w.writerow(["median_decision_minutes", f"{s.median_decision_minutes:.3f}"])
    return buf.getvalue()


# --- JSON ------------------------------------------------------------------------

def _scan_to_dict(e: ScanEvent) -> dict:
    return {"at": e.at.isoformat(), "direction": e.direction, "result": e.result.value, "pass_id": e.pass_id}


def _scan_from_dict(d: Mapping) -> ScanEvent:
    return ScanEvent(datetime.fromisoformat(d["at"]), d["direction"], ScanResult(d["result"]), d.get("pass_id"))


def pass_to_dict(p: GatePass) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "id": p.id,
        "student_id": p.student_id,
        "reason": p.reason,
        "destination": p.destination,
        "exit_at": p.exit_at.isoformat(),
        "return_by": p.return_by.isoformat(),
        "emergency_contact": p.emergency_contact,
        "requested_at": p.requested_at.isoformat(),
        "status": p.status.value,
        "remarks": p.remarks,
        "decided_at": p.decided_at.isoformat() if p.decided_at else None,
        "token": p.token.encode() if p.token else None,
        "scans": [_scan_to_dict(e) for e in p.scans],
    }


def pass_from_dict(d: Mapping) -> GatePass:
    try:
        token = None
        if d.get("token"):
            raw = base64.b64decode(d["token"], validate=True)
            token = SignedToken(TokenPayload.from_bytes(raw[:-SIG_LEN]), raw[-SIG_LEN:])
        return GatePass(
            id=d["id"],
            student_id=d["student_id"],
            reason=d["reason"],
            destination=d.get("destination", ""),
            exit_at=datetime.fromisoformat(d["exit_at"]),
            return_by=datetime.fromisoformat(d["return_by"]),
            emergency_contact=d.get("emergency_contact", ""),
            requested_at=datetime.fromisoformat(d["requested_at"]),
            status=PassStatus(d["status"]),
            remarks=d.get("remarks", ""),
            decided_at=datetime.fromisoformat(d["decided_at"]) if d.get("decided_at") else None,
            token=token,
            scans=tuple(_scan_from_dict(e) for e in d.get("scans", ())),
        )
    except (KeyError, TypeError, ValueError, binascii.Error) as exc:
        raise StructuralError(f"malformed gate pass record: {exc}") from exc
