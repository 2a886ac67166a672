"""Train every catalog activity from scratch and tabulate the best of N seeds.

Usage: python scripts/run_scratch.py [--episodes 512] [--seeds 3] [--out runs/scratch]
"""
import argparse
import time
from pathlib import Path

import numpy as np

from hearthlab.activity import load_catalog
from hearthlab.rl import TrainConfig, train
from hearthlab.transfer import best_of


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=512)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--only", help="comma-separated aliases")
    ap.add_argument("--out", default="runs/scratch")
    args = ap.parse_args()

    only = set(args.only.split(",")) if args.only else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = TrainConfig(episodes=args.episodes)
    rows = []
    for activity in load_catalog():
        if only and activity.alias not in only:
            continue
        start = time.perf_counter()
        results = [train(activity, config, seed) for seed in range(args.seeds)]
        for curve, _ in results:
            curve.write(out / f"{activity.alias}__seed{curve.seed}.csv")
        best, _ = best_of(results)
        finals = [c.final_mean() for c, _ in results]
        rows.append((activity.name, best.final_mean(), float(np.mean(best.successes[-64:])),
                     finals, activity.reference_mean, time.perf_counter() - start))

    print(f"{'activity':<38} {'best':>8} {'success':>8} {'reference':>10}  per-seed final-64 means")
    for name, best, rate, finals, ref, secs in rows:
        ref_text = f"{ref:.1f}" if ref is not None else "-"
        seeds = ", ".join(f"{f:.1f}" for f in finals)
        print(f"{name:<38} {best:>8.1f} {rate:>8.0%} {ref_text:>10}  [{seeds}] ({secs:.0f}s)")


if __name__ == "__main__":
    main()
