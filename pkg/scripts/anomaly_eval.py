"""Precision/recall/FPR of the isolation forest on planted-anomaly streams.

    python3 scripts/anomaly_eval.py --seeds 1-8 --contamination 0.05
"""

import argparse
import time

from hostel_ops.anomaly import featurize_stream, fit, flag
from hostel_ops.sentiment import SentimentScorer
from hostel_ops.workload import WorkloadSpec, gen_complaints


def seed_range(text):
    lo, _, hi = text.partition("-")
    return range(int(lo), int(hi or lo) + 1)


def evaluate(seed, contamination, trees, psi, percentile):
    complaints, labels = gen_complaints(WorkloadSpec(seed=seed, anomaly_contamination=contamination))
    start = time.perf_counter()
    feats = featurize_stream(complaints, SentimentScorer())
    forest = fit(feats, psi, trees, seed=0, threshold_percentile=percentile)
    flagged = {c.complaint_id for c in flag(forest, [(c.id, f) for c, f in zip(complaints, feats)])}
    elapsed = time.perf_counter() - start
    pos = {k for k, v in labels.items() if v}
    tp = len(flagged & pos)
    neg = len(labels) - len(pos)
    return (len(complaints), len(pos), tp / max(len(flagged), 1), tp / max(len(pos), 1),
            (len(flagged) - tp) / max(neg, 1), elapsed)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=seed_range, default=seed_range("1-8"))
    ap.add_argument("--contamination", type=float, default=0.05)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--psi", type=int, default=256)
    ap.add_argument("--percentile", type=float, default=95.0)
    args = ap.parse_args()
    print(f"{'seed':>4}{'n':>7}{'planted':>9}{'prec':>8}{'recall':>8}{'fpr':>8}{'sec':>7}")
    for seed in args.seeds:
        n, p, prec, rec, fpr, sec = evaluate(seed, args.contamination, args.trees, args.psi, args.percentile)
        print(f"{seed:>4}{n:>7}{p:>9}{prec:>8.3f}{rec:>8.3f}{fpr:>8.4f}{sec:>7.2f}")


if __name__ == "__main__":
    main()
