"""Run the source x target transfer grid over the whole catalog and write the report.

Equivalent to ``hearthlab grid`` with every catalog activity as a source and the
non-source-only ones as targets; also prints the per-target rank correlations.

Usage: python scripts/run_transfer_grid.py [--episodes 512] [--seeds 3] [--jobs 4] [--out runs/grid]
"""
import argparse
import math
import time
from pathlib import Path

from hearthlab.activity import load_catalog
from hearthlab.embed import HashedProvider
from hearthlab.heatmap import heatmap_svg
from hearthlab.rl import TrainConfig
from hearthlab.transfer import TransferConfig, matrix_csv, run_grid, write_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=512)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--checkpoints", default="80,160")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="runs/grid")
    args = ap.parse_args()

    catalog = load_catalog()
    sources = [a.alias for a in catalog]
    targets = [a.alias for a in catalog if not a.source_only]
    checkpoints = tuple(int(c) for c in args.checkpoints.split(","))
    start = time.perf_counter()
    report = run_grid(catalog, sources, targets, TrainConfig(episodes=args.episodes),
                      TransferConfig(checkpoints=checkpoints, seeds=args.seeds), HashedProvider(), args.jobs)
    out = Path(args.out)
    write_report(report, out)
    (out / "heatmap_sim.svg").write_text(heatmap_svg(sources, targets, report.sim_block(), 0.0, "similarity"))
    for cp in checkpoints:
        (out / f"heatmap_ratio_ep{cp}.svg").write_text(
            heatmap_svg(sources, targets, report.ratios[cp], 1.0, f"transfer ratio, first {cp} episodes"))

    print(f"grid finished in {time.perf_counter() - start:.0f}s -> {out}")
    print("similarity")
    print(matrix_csv(sources, targets, report.sim_block()), end="")
    for cp in checkpoints:
        print(f"transfer ratio, first {cp} episodes")
        print(matrix_csv(sources, targets, report.ratios[cp]), end="")
    print("spearman(similarity, ratio) per target")
    for t in targets:
        cells = [report.correlations[t, cp] for cp in checkpoints]
        print(f"  {t:<10} " + "  ".join("nan" if math.isnan(c) else f"{c:+.3f}" for c in cells))
    for failure in report.failures:
        print(f"FAILED {failure}")


if __name__ == "__main__":
    main()
