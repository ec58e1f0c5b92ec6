"""Command-line entry point: ``hostel-ops <command> <action> [options]``.

Exit status: 0 on success, 1 on validation errors, 2 on structural errors
(malformed files, bad ids) and usage errors. Every output path is resolved
inside the data directory (``--data-dir`` or ``[io] data_dir``).
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import secrets
import sys
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Sequence

from . import allocation as alloc
from . import anomaly, forecast, gatepass, triage, workload
from .config import Config, load_config
from .errors import HostelOpsError, StructuralError, ValidationError
from .sentiment import SentimentScorer

log = logging.getLogger("hostel_ops")


# --- helpers ---------------------------------------------------------------------

def _parse_time(text: str) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO-8601 timestamp: {text!r}") from None


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text!r}") from None


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StructuralError(f"cannot read {path}: {exc.strerror}") from exc


def _read_json(path: str):
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


class Context:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config: Config = load_config(args.config)
        self.data_dir = Path(args.data_dir or self.config.io.data_dir).resolve()

    def output_path(self, path: str) -> Path:
        p = Path(path)
        target = (p if p.is_absolute() else self.data_dir / p).resolve()
        if target != self.data_dir and self.data_dir not in target.parents:
            raise ValidationError(f"refusing to write {path}: outside data directory {self.data_dir}")
        return target

    def write(self, path: str, text: str) -> Path:
        target = self.output_path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
        return target

    def input_path(self, path: str) -> str:
        p = Path(path)
        if p.is_absolute() or p.exists():
            return str(p)
        return str(self.data_dir / p)

    def signing_key(self) -> bytes:
        key = self.config.gatepass.key()
        if key is None:
            raise ValidationError(f"gate pass signing key not set; export {self.config.gatepass.key_env}")
        return key


def _load_complaints(ctx: Context, path: str) -> list[triage.Complaint]:
    return triage.replay_log(_read_text(ctx.input_path(path)).splitlines())


# --- gen -------------------------------------------------------------------------

def _workload_spec(ctx: Context) -> workload.WorkloadSpec:
    a = ctx.args
    if a.spec:
        spec = workload.WorkloadSpec.from_dict(_read_json(ctx.input_path(a.spec)))
    elif a.preset == "rich":
        spec = workload.capacity_rich(a.seed if a.seed is not None else 42)
    elif a.preset == "contended":
        spec = workload.contended(a.seed if a.seed is not None else 0)
    else:
        spec = workload.WorkloadSpec()
    overrides = {
        "seed": a.seed,
        "student_count": a.students,
        "room_count": a.rooms,
        "duration_weeks": a.weeks,
        "anomaly_contamination": a.contamination,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(spec, key, value)
    return workload.WorkloadSpec.from_dict({k: v for k, v in spec.to_dict().items()})


def cmd_gen(ctx: Context) -> int:
    a = ctx.args
    spec = _workload_spec(ctx)
    if a.action == "spec":
        ctx.write(a.out, _dump_json(spec.to_dict()))
    elif a.action == "allocation":
        inst = workload.gen_allocation(spec)
        ctx.write(a.out, _dump_json(alloc.instance_to_dict(inst)))
        print(f"wrote {len(inst.students)} students, {len(inst.rooms)} rooms")
    else:
        complaints, labels = workload.gen_complaints(spec)
        ctx.write(a.out, triage.dump_log(complaints))
        if a.labels_out:
            ctx.write(a.labels_out, workload.labels_to_json(labels))
        print(f"wrote {len(complaints)} complaints ({sum(labels.values())} planted anomalies)")
    return 0


# --- allocate --------------------------------------------------------------------

def _metrics_row(name: str, m: alloc.AllocationMetrics) -> str:
    return (f"{name:<10} {m.top_two_rate:>9.3f} {m.group_satisfaction_rate:>9.3f} "
            f"{m.jain_index:>7.3f} {m.unassigned_count:>10d} {m.solve_time:>10.4f}")


def cmd_allocate(ctx: Context) -> int:
    a = ctx.args
    inst = alloc.instance_from_dict(_read_json(ctx.input_path(a.inp)))
    result = alloc.allocate(inst, jobs=a.jobs)
    if a.out:
        ctx.write(a.out, _dump_json(alloc.result_to_dict(inst, result)))
    if a.csv:
        ctx.write(a.csv, alloc.summary_csv(inst, result))
    print(f"{'engine':<10} {'top_two':>9} {'groups':>9} {'jain':>7} {'unassigned':>10} {'seconds':>10}")
    print(_metrics_row("flow", result.metrics))
    if a.baseline:
        base = alloc.allocate_baseline(inst)
        print(_metrics_row("seniority", base.metrics))
        if a.baseline_out:
            ctx.write(a.baseline_out, _dump_json(alloc.result_to_dict(inst, base)))
    return 0


# --- triage ----------------------------------------------------------------------

def _now(complaints, given: datetime | None) -> datetime:
    if given is not None:
        return given
    return max((c.history[-1][0] for c in complaints), default=datetime(1970, 1, 1))


def cmd_triage(ctx: Context) -> int:
    a = ctx.args
    complaints = _load_complaints(ctx, a.inp)
    weights = ctx.config.triage.weights()
    if a.action == "update":
        target = next((c for c in complaints if c.id == a.id), None)
        if target is None:
            raise ValidationError(f"unknown complaint {a.id}")
        updated = triage.transition(target, a.to, a.note, a.at)
        event = {"id": a.id, "at": a.at.isoformat(), "diff": {"status": updated.status.value, "note": a.note}}
        path = ctx.output_path(a.inp)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
        print(f"{a.id}: {target.status.value} -> {updated.status.value}")
        return 0
    if a.action == "kpi":
        start = a.start or min((c.created_at for c in complaints), default=datetime(1970, 1, 1))
        end = a.end or _now(complaints, None) + timedelta(seconds=1)
        report = triage.kpi_report(complaints, (start, end))
        text = triage.kpi_csv(report)
    else:
        now = _now(complaints, a.now)
        rows = ["id,category,block,status,created_at,priority"]
        chosen = triage.triage_queue(complaints, weights, now) if a.action == "queue" else complaints
        for c in chosen:
            s = triage.priority_score(c, weights, now)
            rows.append(f"{c.id},{c.category},{c.block},{c.status.value},{c.created_at.isoformat()},{s:.6f}")
        text = "\n".join(rows) + "\n"
    if a.out:
        ctx.write(a.out, text)
    else:
        sys.stdout.write(text)
    return 0


# --- detect ----------------------------------------------------------------------

def _features(ctx: Context, complaints):
    cfg = ctx.config.anomaly
    return anomaly.featurize_stream(complaints, SentimentScorer(), cfg.keywords, timedelta(days=cfg.window_days))


def cmd_detect(ctx: Context) -> int:
    a = ctx.args
    cfg = ctx.config.anomaly
    if a.action == "review":
        path = ctx.input_path(a.cases)
        cases = anomaly.cases_from_jsonl(_read_text(path).splitlines())
        idx = next((i for i, c in enumerate(cases) if c.complaint_id == a.id), None)
        if idx is None:
            raise ValidationError(f"no review case for complaint {a.id}")
        cases[idx] = anomaly.review(cases[idx], a.decision, a.note)
        ctx.write(a.cases, anomaly.cases_to_jsonl(cases))
        print(f"{a.id}: {cases[idx].state}")
        return 0
    if a.action == "evaluate":
        cases = anomaly.cases_from_jsonl(_read_text(ctx.input_path(a.cases)).splitlines())
        labels = _read_json(ctx.input_path(a.labels))["labels"]
        flagged = {c.complaint_id for c in cases}
        pos = {k for k, v in labels.items() if v}
        tp = len(flagged & pos)
        neg = len(labels) - len(pos)
        out = {
            "flagged": len(flagged),
            "precision": tp / len(flagged) if flagged else 0.0,
            "recall": tp / len(pos) if pos else 0.0,
            "false_positive_rate": (len(flagged) - tp) / neg if neg else 0.0,
        }
        text = _dump_json(out)
        if a.out:
            ctx.write(a.out, text)
        sys.stdout.write(text)
        return 0

    complaints = _load_complaints(ctx, a.inp)
    feats = _features(ctx, complaints)
    if a.action == "fit":
        seed = a.seed if a.seed is not None else 0
        forest = anomaly.fit(feats, cfg.subsample_size, cfg.tree_count, seed, cfg.threshold_percentile, a.jobs)
        ctx.write(a.out, json.dumps(forest.to_dict(), sort_keys=True) + "\n")
        print(f"fitted {forest.tree_count} trees on {len(feats)} complaints; threshold {forest.threshold:.6f}")
        return 0
    forest = anomaly.IsolationForest.from_dict(_read_json(ctx.input_path(a.model)))
    if a.action == "score":
        scores = anomaly.score_many(forest, feats)
        rows = ["id," + ",".join(anomaly.FEATURE_NAMES) + ",score"]
        for c, fv, s in zip(complaints, feats, scores):
            vals = ",".join(f"{v:g}" for v in fv.as_array())
            rows.append(f"{c.id},{vals},{s:.6f}")
        ctx.write(a.out, "\n".join(rows) + "\n")
    else:
        cases = anomaly.flag(forest, [(c.id, f) for c, f in zip(complaints, feats)], a.threshold)
        ctx.write(a.out, anomaly.cases_to_jsonl(cases))
        print(f"flagged {len(cases)} of {len(complaints)} complaints")
    return 0


# --- forecast --------------------------------------------------------------------

def _load_models(ctx: Context, path: str) -> list[forecast.ForecastModel]:
    doc = _read_json(ctx.input_path(path))
    if doc.get("schema_version") != forecast.SCHEMA_VERSION:
        raise StructuralError(f"{path}: unsupported schema_version")
    return [forecast.model_from_dict(m) for m in doc["models"]]


def _fit_all(ctx: Context, complaints, today: date | None) -> dict:
    cfg = ctx.config.forecast
    models, skipped = [], []
    blocks = sorted({c.block for c in complaints})
    for block in blocks:
        for cat in triage.CATEGORIES:
            series = forecast.aggregate_weekly(complaints, cat, block)
            try:
                models.append(forecast.fit_model(series, cfg.harmonics, cfg.period, fitted_on=today))
            except HostelOpsError as exc:
                skipped.append({"block": block, "category": cat, "reason": str(exc)})
    return {
        "schema_version": forecast.SCHEMA_VERSION,
        "models": [forecast.model_to_dict(m) for m in models],
        "skipped": skipped,
    }


def cmd_forecast(ctx: Context) -> int:
    a = ctx.args
    cfg = ctx.config.forecast
    if a.action == "fit":
        doc = _fit_all(ctx, _load_complaints(ctx, a.inp), a.today)
        ctx.write(a.out, _dump_json(doc))
        print(f"fitted {len(doc['models'])} models, skipped {len(doc['skipped'])}")
        return 0
    if a.action == "retrain":
        stale = True
        if Path(ctx.input_path(a.models)).exists() and not a.force:
            models = _load_models(ctx, a.models)
            stale = not models or any(m.is_stale(a.today) for m in models)
        if not stale:
            print("models are fresh; nothing to do")
            return 0
        doc = _fit_all(ctx, _load_complaints(ctx, a.inp), a.today)
        ctx.write(a.models, _dump_json(doc))
        print(f"retrained {len(doc['models'])} models")
        return 0
    models = _load_models(ctx, a.models)
    if a.today:
        for m in models:
            if m.is_stale(a.today):
                log.warning("model %s/%s is older than 35 days; run 'forecast retrain'", m.block, m.category)
    steps = a.steps or cfg.steps
    fcs = [forecast.predict(m, steps, cfg.z) for m in models]
    if a.action == "predict":
        ctx.write(a.out, forecast.forecast_csv(fcs))
    else:
        grid = forecast.risk_heatmap(fcs, cfg.medium_threshold, cfg.high_threshold)
        ctx.write(a.out, forecast.heatmap_csv(grid))
    return 0


# --- pass ------------------------------------------------------------------------

def _load_store(ctx: Context, path: str) -> gatepass.PassStore:
    store = gatepass.PassStore(ctx.signing_key(), timedelta(minutes=ctx.config.gatepass.grace_minutes))
    p = Path(ctx.input_path(path))
    if p.exists():
        store.loads(_read_text(str(p)))
    return store


def cmd_pass(ctx: Context) -> int:
    a = ctx.args
    if a.action == "stats":
        store = _load_store(ctx, a.store)
        stats = gatepass.pass_stats(store.passes.values(), store.unattributed)
        text = gatepass.stats_csv(stats)
        if a.out:
            ctx.write(a.out, text)
        else:
            sys.stdout.write(text)
        return 0
    store = _load_store(ctx, a.store)
    if a.action == "request":
        if a.id in store.passes:
            raise ValidationError(f"pass {a.id} already exists")
        store.put(gatepass.request_pass(a.id, a.student, a.reason, a.destination, a.exit_at,
                                        a.return_by, a.contact, a.at))
        print(f"{a.id}: Requested")
    elif a.action == "decide":
        if a.seed is not None:
            nonce = f"{random.Random(f'{a.seed}:{a.id}').getrandbits(128):032x}"
        else:
            nonce = secrets.token_hex(16)
        p = gatepass.decide(store.get(a.id), a.approve, a.remarks or "", store.key, a.at, nonce)
        store.put(p)
        print(f"{a.id}: {p.status.value}")
        if p.token:
            print(p.token.encode())
    elif a.action == "token":
        p = store.get(a.id)
        if p.token is None:
            raise ValidationError(f"pass {a.id} has no token (status {p.status.value})")
        print(p.token.encode())
        return 0
    else:
        event = gatepass.scan(a.token, a.direction, a.at, store)
        print(f"{event.pass_id or '-'} {event.direction} {event.result.value}")
    ctx.write(a.store, store.dumps())
    return 0


# --- report ----------------------------------------------------------------------

def cmd_report(ctx: Context) -> int:
    a = ctx.args
    doc: dict = {"schema_version": 1}
    if a.allocation:
        doc["allocation"] = _read_json(ctx.input_path(a.allocation)).get("metrics", {})
    if a.complaints:
        complaints = _load_complaints(ctx, a.complaints)
        end = _now(complaints, a.now)
        start = min((c.created_at for c in complaints), default=end)
        k = triage.kpi_report(complaints, (start, end + timedelta(seconds=1)))
        doc["complaints"] = {
            "total": k.total,
            "mean_resolution_hours": k.mean_resolution_hours,
            "pending_over_24h_fraction": k.pending_over_24h_fraction,
            "by_category": k.by_category,
            "by_status": k.by_status,
        }
    if a.passes:
        store = _load_store(ctx, a.passes)
        s = gatepass.pass_stats(store.passes.values(), store.unattributed)
        doc["gate_passes"] = {
            "total": s.total,
            "rejection_rate": s.rejection_rate,
            "reuse_incidents": s.reuse_incidents,
            "tamper_incidents": s.tamper_incidents,
            "median_decision_minutes": s.median_decision_minutes,
        }
    if a.cases:
        cases = anomaly.cases_from_jsonl(_read_text(ctx.input_path(a.cases)).splitlines())
        states: dict[str, int] = {}
        for c in cases:
            states[c.state] = states.get(c.state, 0) + 1
        doc["anomaly_reviews"] = dict(sorted(states.items()))
    if a.format == "csv":
        rows = ["section,metric,value"]
        for section, body in doc.items():
            if not isinstance(body, dict):
                continue
            for key, value in body.items():
                if isinstance(value, dict):
                    rows += [f"{section},{key}.{k},{v}" for k, v in value.items()]
                else:
                    rows.append(f"{section},{key},{value}")
        text = "\n".join(rows) + "\n"
    else:
        text = _dump_json(doc)
    ctx.write(a.out, text)
    return 0


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--data-dir", help="directory all outputs are written under")
    common.add_argument("--seed", type=int, default=None, help="seed for every random choice")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers for per-block/per-tree work")
    common.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")

    parser = argparse.ArgumentParser(prog="hostel-ops", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate synthetic workloads")
    gsub = gen.add_subparsers(dest="action", required=True)
    for name in ("allocation", "complaints", "spec"):
        p = gsub.add_parser(name, parents=[common], help=f"generate a {name} file")
        p.add_argument("--spec", help="workload spec JSON")
        p.add_argument("--preset", choices=["default", "rich", "contended"], default="default")
        p.add_argument("--students", type=int)
        p.add_argument("--rooms", type=int)
        p.add_argument("--weeks", type=int)
        p.add_argument("--contamination", type=float)
        p.add_argument("--out", required=True)
        p.add_argument("--labels-out", help="ground-truth anomaly labels (complaints only)")
    gen.set_defaults(func=cmd_gen)

    p = sub.add_parser("allocate", parents=[common], help="allocate rooms by tiered max-flow")
    p.add_argument("--in", dest="inp", required=True, help="allocation instance JSON")
    p.add_argument("--out", help="result JSON")
    p.add_argument("--csv", help="summary CSV (student_id, room_id, rank_received)")
    p.add_argument("--baseline", action="store_true", help="also run the seniority baseline")
    p.add_argument("--baseline-out", help="baseline result JSON")
    p.set_defaults(func=cmd_allocate)

    tri = sub.add_parser("triage", help="complaint priority and KPIs")
    tsub = tri.add_subparsers(dest="action", required=True)
    for name in ("score", "queue", "kpi", "update"):
        p = tsub.add_parser(name, parents=[common])
        p.add_argument("--in", dest="inp", required=True, help="complaint JSON-lines log")
        p.add_argument("--out")
        p.add_argument("--now", type=_parse_time, help="evaluation time (default: latest event)")
        if name == "kpi":
            p.add_argument("--start", type=_parse_time)
            p.add_argument("--end", type=_parse_time)
        if name == "update":
            p.add_argument("--id", required=True)
            p.add_argument("--to", required=True, choices=[s.value for s in triage.Lifecycle])
            p.add_argument("--note", default="")
            p.add_argument("--at", type=_parse_time, required=True)
    tri.set_defaults(func=cmd_triage)

    det = sub.add_parser("detect", help="isolation-forest anomaly detection")
    dsub = det.add_subparsers(dest="action", required=True)
    p = dsub.add_parser("fit", parents=[common])
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="forest JSON")
    for name in ("score", "flag"):
        p = dsub.add_parser(name, parents=[common])
        p.add_argument("--in", dest="inp", required=True)
        p.add_argument("--model", required=True)
        p.add_argument("--out", required=True)
        if name == "flag":
            p.add_argument("--threshold", type=float, help="override the fitted threshold")
    p = dsub.add_parser("review", parents=[common])
    p.add_argument("--cases", required=True, help="review-case JSON-lines log (rewritten in place)")
    p.add_argument("--id", required=True)
    p.add_argument("--decision", required=True, choices=["Confirmed", "Dismissed"])
    p.add_argument("--note", default="")
    p = dsub.add_parser("evaluate", parents=[common])
    p.add_argument("--cases", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out")
    det.set_defaults(func=cmd_detect)

    fc = sub.add_parser("forecast", help="weekly complaint forecasting")
    fsub = fc.add_subparsers(dest="action", required=True)
    p = fsub.add_parser("fit", parents=[common])
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--today", type=_parse_date)
    for name in ("predict", "heatmap"):
        p = fsub.add_parser(name, parents=[common])
        p.add_argument("--models", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--steps", type=int)
        p.add_argument("--today", type=_parse_date, help="warn if models are stale relative to this date")
    p = fsub.add_parser("retrain", parents=[common])
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--today", type=_parse_date, required=True)
    p.add_argument("--force", action="store_true")
    fc.set_defaults(func=cmd_forecast)

    gp = sub.add_parser("pass", help="gate pass workflow")
    psub = gp.add_subparsers(dest="action", required=True)
    p = psub.add_parser("request", parents=[common])
    p.add_argument("--store", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--student", required=True)
    p.add_argument("--reason", required=True)
    p.add_argument("--destination", default="")
    p.add_argument("--exit-at", type=_parse_time, required=True)
    p.add_argument("--return-by", type=_parse_time, required=True)
    p.add_argument("--contact", default="")
    p.add_argument("--at", type=_parse_time, required=True)
    p = psub.add_parser("decide", parents=[common])
    p.add_argument("--store", required=True)
    p.add_argument("--id", required=True)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--approve", dest="approve", action="store_true")
    grp.add_argument("--reject", dest="approve", action="store_false")
    p.add_argument("--remarks", default="")
    p.add_argument("--at", type=_parse_time, required=True)
    p = psub.add_parser("token", parents=[common])
    p.add_argument("--store", required=True)
    p.add_argument("--id", required=True)
    p = psub.add_parser("scan", parents=[common])
    p.add_argument("--store", required=True)
    p.add_argument("--token", required=True, help="base64 token text read from the QR code")
    p.add_argument("--direction", required=True, choices=["exit", "entry"])
    p.add_argument("--at", type=_parse_time, required=True)
    p = psub.add_parser("stats", parents=[common])
    p.add_argument("--store", required=True)
    p.add_argument("--out")
    gp.set_defaults(func=cmd_pass)

    p = sub.add_parser("report", parents=[common], help="aggregate metrics across modules")
    p.add_argument("--allocation", help="allocation result JSON")
    p.add_argument("--complaints", help="complaint log")
    p.add_argument("--passes", help="gate pass store")
    p.add_argument("--cases", help="anomaly review cases")
    p.add_argument("--now", type=_parse_time)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        ctx = Context(args)
        return args.func(ctx)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StructuralError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
