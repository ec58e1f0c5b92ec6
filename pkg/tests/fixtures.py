"""Hand-built fixtures shared by unit and acceptance tests."""

from __future__ import annotations

import base64
from datetime import datetime, timedelta

from hostel_ops.gatepass import PassStore, decide, request_pass, scan

KEY = b"fixture-signing-key"
T0 = datetime(2024, 2, 1, 8)


def mutate(token: str, pos: int, xor: int = 0x01) -> str:
    raw = bytearray(base64.b64decode(token))
    raw[pos] ^= xor
    return base64.b64encode(bytes(raw)).decode("ascii")


def gate_pass_fixture(total=200, rejected_every=22, reuse=7, tamper=5):
    """Passes for one term: every ``rejected_every``-th request is rejected.

    Every approved pass exits and returns once. ``reuse`` of them then have
    their exit token scanned a second time and ``tamper`` have a token with
    one byte flipped presented at the gate. A late scan and an entry without
    exit are added too; neither counts as an incident.
    """
    store = PassStore(KEY)
    approved = []
    for i in range(total):
        t = T0 + timedelta(hours=i)
        p = request_pass(f"p{i:03d}", f"s{i % 60:02d}", "home visit", "city", t + timedelta(hours=2),
                         t + timedelta(hours=30), "999", t)
        if i % rejected_every == rejected_every - 1:
            p = decide(p, False, "exams week", KEY, t + timedelta(minutes=20))
        else:
            p = decide(p, True, "", KEY, t + timedelta(minutes=10 + i % 7), nonce=f"{i:032x}")
            approved.append(p)
        store.put(p)

    for p in approved[:-2]:
        tok = p.token.encode()
        scan(tok, "exit", p.exit_at, store)
        scan(tok, "entry", p.exit_at + timedelta(hours=5), store)
    for p in approved[:reuse]:
        scan(p.token.encode(), "exit", p.exit_at + timedelta(hours=6), store)
    for k, p in enumerate(approved[reuse:reuse + tamper]):
        scan(mutate(p.token.encode(), 5 + k), "exit", p.exit_at, store)
    late, no_exit = approved[-2], approved[-1]
    scan(late.token.encode(), "exit", late.return_by + timedelta(minutes=1), store)
    scan(no_exit.token.encode(), "entry", no_exit.exit_at + timedelta(hours=1), store)
    return store


def run_cli(argv):
    """Run the CLI in-process; return (exit code, stdout text)."""
    import contextlib
    import io

    from hostel_ops.cli import main

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        try:
            code = main([str(a) for a in argv])
        except SystemExit as exc:
            code = exc.code
    return code, buf.getvalue()


def cli_pipeline(data_dir, seed=7):
    """Exercise every subcommand once, writing all outputs under ``data_dir``."""
    d = ["--data-dir", data_dir, "--seed", seed]
    steps = [
        ["gen", "spec", "--preset", "contended", "--out", "spec.json"],
        ["gen", "allocation", "--spec", f"{data_dir}/spec.json", "--out", "inst.json"],
        ["allocate", "--in", f"{data_dir}/inst.json", "--out", "alloc.json", "--csv", "alloc.csv",
         "--baseline", "--baseline-out", "baseline.json"],
        ["gen", "complaints", "--weeks", 30, "--contamination", 0.05, "--out", "complaints.jsonl",
         "--labels-out", "labels.json"],
        ["triage", "score", "--in", f"{data_dir}/complaints.jsonl", "--out", "scores.csv"],
        ["triage", "queue", "--in", f"{data_dir}/complaints.jsonl", "--out", "queue.csv",
         "--now", "2024-12-31T00:00:00"],
        ["triage", "kpi", "--in", f"{data_dir}/complaints.jsonl", "--out", "kpi.csv"],
        ["detect", "fit", "--in", f"{data_dir}/complaints.jsonl", "--out", "forest.json"],
        ["detect", "score", "--in", f"{data_dir}/complaints.jsonl", "--model", f"{data_dir}/forest.json",
         "--out", "anomaly_scores.csv"],
        ["detect", "flag", "--in", f"{data_dir}/complaints.jsonl", "--model", f"{data_dir}/forest.json",
         "--out", "cases.jsonl"],
        ["detect", "evaluate", "--cases", f"{data_dir}/cases.jsonl", "--labels", f"{data_dir}/labels.json",
         "--out", "eval.json"],
        ["forecast", "fit", "--in", f"{data_dir}/complaints.jsonl", "--out", "models.json",
         "--today", "2024-08-01"],
        ["forecast", "predict", "--models", f"{data_dir}/models.json", "--out", "forecast.csv"],
        ["forecast", "heatmap", "--models", f"{data_dir}/models.json", "--out", "heatmap.csv"],
        ["pass", "request", "--store", f"{data_dir}/passes.jsonl", "--id", "p1", "--student", "s1",
         "--reason", "home", "--exit-at", "2024-02-01T10:00:00", "--return-by", "2024-02-02T10:00:00",
         "--at", "2024-02-01T08:00:00"],
        ["pass", "request", "--store", f"{data_dir}/passes.jsonl", "--id", "p2", "--student", "s2",
         "--reason", "trip", "--exit-at", "2024-02-01T10:00:00", "--return-by", "2024-02-02T10:00:00",
         "--at", "2024-02-01T08:05:00"],
        ["pass", "decide", "--store", f"{data_dir}/passes.jsonl", "--id", "p1", "--approve",
         "--at", "2024-02-01T08:30:00"],
        ["pass", "decide", "--store", f"{data_dir}/passes.jsonl", "--id", "p2", "--reject",
         "--remarks", "exams", "--at", "2024-02-01T08:40:00"],
    ]
    outputs = []
    for argv in steps:
        code, out = run_cli(argv + d)
        if code != 0:
            raise AssertionError(f"{argv[:2]} exited {code}")
        outputs.append(out)
    _, token = run_cli(["pass", "token", "--store", f"{data_dir}/passes.jsonl", "--id", "p1"] + d)
    token = token.strip()
    for direction, at in (("exit", "2024-02-01T10:05:00"), ("entry", "2024-02-01T18:00:00"),
                          ("entry", "2024-02-01T18:01:00")):
        code, out = run_cli(["pass", "scan", "--store", f"{data_dir}/passes.jsonl", "--token", token,
                             "--direction", direction, "--at", at] + d)
        outputs.append(out)
    tail = [
        ["pass", "stats", "--store", f"{data_dir}/passes.jsonl", "--out", "pass_stats.csv"],
        ["report", "--allocation", f"{data_dir}/alloc.json", "--complaints", f"{data_dir}/complaints.jsonl",
         "--passes", f"{data_dir}/passes.jsonl", "--cases", f"{data_dir}/cases.jsonl", "--out", "report.json"],
        ["report", "--allocation", f"{data_dir}/alloc.json", "--format", "csv", "--out", "report.csv"],
    ]
    for argv in tail:
        code, out = run_cli(argv + d)
        if code != 0:
            raise AssertionError(f"{argv[:2]} exited {code}")
        outputs.append(out)
    return outputs
