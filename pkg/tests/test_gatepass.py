import base64
from datetime import datetime, timedelta

import pytest
from hypothesis import given, strategies as st

from hostel_ops.errors import StructuralError, TransitionError, ValidationError
from hostel_ops.gatepass import (
    PassStatus, PassStore, ScanResult, TokenPayload, decide, pass_from_dict, pass_stats, pass_to_dict, request_pass,
    scan, sign, stats_csv, verify,
)

from fixtures import KEY, gate_pass_fixture, mutate

T0 = datetime(2024, 2, 1, 8)
EXIT, RETURN = T0 + timedelta(hours=2), T0 + timedelta(hours=20)


def approved(pid="p1", nonce="ab" * 16):
    p = request_pass(pid, "s1", "visit", "town", EXIT, RETURN, "555", T0)
    return decide(p, True, "", KEY, T0 + timedelta(minutes=5), nonce=nonce)


def store_with(*passes):
    s = PassStore(KEY)
    for p in passes:
        s.put(p)
    return s


def test_wire_format_layout():
    p = approved()
    raw = base64.b64decode(p.token.encode())
    assert raw[0] == 1
    assert int.from_bytes(raw[1:5], "big") == 2 and raw[5:7] == b"p1"
    assert len(raw) == len(p.token.payload.to_bytes()) + 32
    assert verify(raw, KEY) == p.token.payload
    assert verify(raw, b"other key") is None


@given(st.text(max_size=20), st.text(max_size=20), st.text(max_size=40))
def test_payload_round_trip(pid, sid, nonce):
    payload = TokenPayload(pid, sid, EXIT, RETURN, nonce)
    assert TokenPayload.from_bytes(payload.to_bytes()) == payload
    assert verify(sign(payload, KEY).to_bytes(), KEY) == payload


def test_full_round_trip_scans():
    p = approved()
    s = store_with(p)
    tok = p.token.encode()
    assert scan(tok, "exit", EXIT, s).result is ScanResult.ACCEPTED
    assert s.get("p1").status is PassStatus.EXITED
    assert scan(tok, "entry", EXIT + timedelta(hours=3), s).result is ScanResult.ACCEPTED
    assert s.get("p1").status is PassStatus.RETURNED
    assert scan(tok, "entry", EXIT + timedelta(hours=4), s).result is ScanResult.REJECTED_REUSED
    assert scan(tok, "exit", EXIT + timedelta(hours=4), s).result is ScanResult.REJECTED_REUSED
    assert len(s.get("p1").scans) == 4


def test_exit_window_with_grace():
    p = approved()
    s = store_with(p)
    tok = p.token.encode()
    assert scan(tok, "exit", EXIT - timedelta(minutes=31), s).result is ScanResult.REJECTED_EXPIRED
    assert s.get("p1").status is PassStatus.APPROVED
    assert scan(tok, "exit", EXIT - timedelta(minutes=30), s).result is ScanResult.ACCEPTED


def test_late_scan_expires_pass():
    p = approved()
    s = store_with(p)
    tok = p.token.encode()
    assert scan(tok, "exit", RETURN + timedelta(seconds=1), s).result is ScanResult.REJECTED_EXPIRED
    assert s.get("p1").status is PassStatus.EXPIRED
    assert scan(tok, "exit", EXIT, s).result is ScanResult.REJECTED_EXPIRED


def test_entry_without_exit_and_unknown_pass():
    p = approved()
    s = store_with(p)
    assert scan(p.token.encode(), "entry", EXIT, s).result is ScanResult.REJECTED_UNKNOWN
    stranger = approved("p9")
    event = scan(stranger.token.encode(), "exit", EXIT, s)
    assert event.result is ScanResult.REJECTED_UNKNOWN
    assert s.unattributed == [event]


def test_stale_token_after_reissue_is_unknown():
    old = approved(nonce="00" * 16)
    s = store_with(approved(nonce="11" * 16))
    assert scan(old.token.encode(), "exit", EXIT, s).result is ScanResult.REJECTED_UNKNOWN


def test_garbage_tokens_are_tampered():
    s = store_with(approved())
    for junk in ("", "not base64!!", base64.b64encode(b"short").decode()):
        assert scan(junk, "exit", EXIT, s).result is ScanResult.REJECTED_TAMPERED
    with pytest.raises(StructuralError):
        scan("x", "sideways", EXIT, s)


def test_every_single_byte_mutation_is_tampered():
    p = approved()
    tok = p.token.encode()
    n = len(base64.b64decode(tok))
    for pos in range(n):
        for xor in (0x01, 0x80, 0xFF):
            s = store_with(p)
            assert scan(mutate(tok, pos, xor), "exit", EXIT, s).result is ScanResult.REJECTED_TAMPERED
            assert s.get("p1").status is PassStatus.APPROVED


def test_decide_rules():
    p = request_pass("p1", "s1", "visit", "town", EXIT, RETURN, "555", T0)
    with pytest.raises(ValidationError):
        decide(p, False, "  ", KEY, T0)
    r = decide(p, False, "no", KEY, T0)
    assert r.status is PassStatus.REJECTED and r.token is None
    with pytest.raises(TransitionError):
        decide(r, True, "", KEY, T0)
    with pytest.raises(ValidationError):
        request_pass("p2", "s1", "", "town", EXIT, RETURN, "555", T0)
    with pytest.raises(ValidationError):
        request_pass("p2", "s1", "visit", "town", RETURN, EXIT, "555", T0)


def test_random_nonces_differ():
    p = request_pass("p1", "s1", "visit", "town", EXIT, RETURN, "555", T0)
    a, b = decide(p, True, "", KEY, T0), decide(p, True, "", KEY, T0)
    assert a.token.payload.nonce != b.token.payload.nonce


def test_store_round_trip():
    store = gate_pass_fixture()
    again = PassStore(KEY)
    again.loads(store.dumps())
    assert again.passes == store.passes
    assert again.unattributed == store.unattributed
    assert pass_from_dict(pass_to_dict(store.get("p000"))) == store.get("p000")
    with pytest.raises(StructuralError):
        PassStore(KEY).loads("{broken")


def test_fixture_statistics():
    store = gate_pass_fixture()
    stats = pass_stats(store.passes.values(), store.unattributed)
    assert (stats.total, stats.rejected) == (200, 9)
    assert stats.rejection_rate == pytest.approx(0.045)
    assert (stats.reuse_incidents, stats.tamper_incidents, stats.incidents) == (7, 5, 12)
    assert stats.median_decision_minutes == pytest.approx(13.0)
    assert "rejection_rate,0.045000" in stats_csv(stats)


def test_empty_stats():
    assert pass_stats([]).empty
