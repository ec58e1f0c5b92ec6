"""Monte-Carlo coverage of forecast intervals on noisy trend + seasonal series.

    python3 scripts/forecast_coverage.py --reps 200 --seed 11 --sigma 2
"""

import argparse
from datetime import date, timedelta

import numpy as np

from hostel_ops.forecast import WeeklySeries, fit_model, predict


def truth(t):
    return 30 + 0.05 * t + 4 * np.sin(2 * np.pi * t / 52) + 2 * np.cos(6 * np.pi * t / 52)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--sigma", type=float, default=2.0)
    ap.add_argument("--weeks", type=int, default=104)
    ap.add_argument("--steps", type=int, default=8)
    ap.add_argument("--z", type=float, default=1.282)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    t = np.arange(args.weeks, dtype=float)
    weeks = tuple(date(2023, 1, 2) + timedelta(weeks=i) for i in range(args.weeks))
    future = truth(np.arange(args.weeks, args.weeks + args.steps))
    hits = np.zeros(args.steps)
    for _ in range(args.reps):
        y = truth(t) + rng.normal(0, args.sigma, args.weeks)
        f = predict(fit_model(WeeklySeries("x", None, weeks, tuple(y))), args.steps, args.z)
        actual = future + rng.normal(0, args.sigma, args.steps)
        hits += [p.lower <= a <= p.upper for p, a in zip(f.horizon, actual)]
    for h, rate in enumerate(hits / args.reps, 1):
        print(f"step {h}: coverage {rate:.3f}")
    print(f"overall: {hits.sum() / (args.reps * args.steps):.3f}")


if __name__ == "__main__":
    main()
