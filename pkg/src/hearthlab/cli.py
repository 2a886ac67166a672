"""hearthlab command line: train, grid, render, similarity, ground, eval.

Exit codes: 0 success, 1 runtime failure, 2 usage or load error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfg
from .activity import Activity, ActivityError, load_catalog, resolve
from .embed import EmbeddingError, make_provider, similarity_matrix
from .heatmap import heatmap_svg
from .nn import NumericError, PolicyParams
from .render import render_activity, render_goal, render_state
from .rl import ActivityEnv, run_episode, train
from .transfer import GridError, best_of, matrix_csv, run_grid, write_report

log = logging.getLogger("hearthlab")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _csv_list(text: str | None) -> list | None:
    return None if text is None else [x.strip() for x in text.split(",") if x.strip()]


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--seeds", type=int, help="number of seeds (default 3)")
    p.add_argument("--episodes", type=int, help="training episodes (default 512)")
    p.add_argument("--jobs", type=int, help="worker processes (default: logical cores)")
    p.add_argument("--out", help="output directory (default runs)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--mask-invalid", action="store_true", default=None, help="mask non-executable actions")
    p.add_argument("--lr", type=float)
    p.add_argument("--n-steps", type=int, help="rollout length per update")


def _run_config(args) -> cfg.RunConfig:
    names = ("seed", "seeds", "episodes", "jobs", "out", "mask_invalid", "lr", "n_steps",
             "checkpoints", "embedding_provider", "keep_primitive_head")
    overrides = {n: getattr(args, n, None) for n in names}
    try:
        return cfg.load(getattr(args, "config", None), overrides)
    except (ValueError, OSError) as e:
        raise UsageError(f"bad configuration: {e}") from None


def _activity(ref: str) -> Activity:
    try:
        return resolve(ref)
    except ActivityError as e:
        raise UsageError(str(e)) from None


def _catalog(directory) -> list:
    try:
        return load_catalog(directory)
    except ActivityError as e:
        raise UsageError(str(e)) from None


def _slug(activity: Activity) -> str:
    return activity.alias.replace(" ", "_")


def cmd_train(args) -> int:
    run = _run_config(args)
    activity = _activity(args.activity)
    out = Path(run.out) / _slug(activity)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for k in range(run.seed, run.seed + run.seeds):
        curve, params = train(activity, run.train_config(), k)
        curve.write(out / f"curve_seed{k}.csv")
        results.append((curve, params))
    best_curve, best_params = best_of(results)
    best_params.save(out / "params.npz")
    (out / "config.json").write_text(run.to_json(), encoding="utf-8")

    ref = activity.reference_mean
    print(f"{activity.name}: {len(results)} run(s) x {run.episodes} episodes")
    print(f"{'seed':>6} {'final64':>9} {'success%':>9}")
    for curve, _ in results:
        rate = 100.0 * np.mean(curve.successes[-64:])
        mark = "  *" if curve is best_curve else ""
        print(f"{curve.seed:>6} {curve.final_mean():>9.1f} {rate:>9.1f}{mark}")
    if ref is not None:
        print(f"reference mean reward: {ref:.1f}")
    print(f"best policy (seed {best_curve.seed}) -> {out / 'params.npz'}")
    return EXIT_OK


def cmd_grid(args) -> int:
    run = _run_config(args)
    catalog = _catalog(args.catalog)
    sources = _csv_list(args.sources) or [a.alias for a in catalog]
    targets = _csv_list(args.targets) or [a.alias for a in catalog if not a.source_only]
    try:
        provider = make_provider(run.embedding_provider, run.embed_dim)
        tc = run.transfer_config()
        tc.validate(run.train_config())
    except (ValueError, EmbeddingError) as e:
        raise UsageError(str(e)) from None
    try:
        report = run_grid(catalog, sources, targets, run.train_config(), tc, provider, run.workers)
    except GridError as e:
        raise UsageError(str(e)) from None
    out = Path(run.out)
    write_report(report, out)
    (out / "heatmap_sim.svg").write_text(
        heatmap_svg(sources, targets, report.sim_block(), 0.0, "similarity (rows: source, columns: target)"),
        encoding="utf-8")
    for cp in report.checkpoints:
        (out / f"heatmap_ratio_ep{cp}.svg").write_text(
            heatmap_svg(sources, targets, report.ratios[cp], 1.0, f"transfer ratio, first {cp} episodes"),
            encoding="utf-8")
    (out / "config.json").write_text(run.to_json(), encoding="utf-8")

    for cp in report.checkpoints:
        print(f"transfer ratio, first {cp} episodes")
        print(matrix_csv(sources, targets, report.ratios[cp]), end="")
    print("per-target change in mean ratio:")
    for row in report.forgetting_table():
        print(f"  {row['target']}: {row['change']:+.3f}")
    for failure in report.failures:
        print(f"FAILED {failure}", file=sys.stderr)
    return EXIT_RUNTIME if report.failures else EXIT_OK


def cmd_render(args) -> int:
    a = _activity(args.activity)
    print(render_state(a.initial, a.scene))
    print(render_goal(a.goal))
    if args.groundings:
        _print_groundings(a)
    return EXIT_OK


def _print_groundings(a: Activity) -> None:
    print(f"{len(a.grounded)} grounding(s)")
    for i, g in enumerate(a.grounded.groundings):
        witness = ", ".join(f"{k}={v}" for k, v in g.witness.items())
        print(f"grounding {i}: {len(g)} literal(s)" + (f" [{witness}]" if witness else ""))
        for lit in g.literals:
            print(f"  {lit}")


def cmd_ground(args) -> int:
    _print_groundings(_activity(args.activity))
    return EXIT_OK


def cmd_similarity(args) -> int:
    run = _run_config(args)
    catalog = _catalog(args.catalog)
    try:
        provider = make_provider(run.embedding_provider, run.embed_dim)
    except (ValueError, EmbeddingError) as e:
        raise UsageError(str(e)) from None
    descriptions = {a.alias: render_activity(a.initial, a.goal, a.scene) for a in catalog}
    sim = similarity_matrix(descriptions, provider)
    text = matrix_csv(sim.labels, sim.labels, sim.values)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_eval(args) -> int:
    run = _run_config(args)
    activity = _activity(args.activity)
    try:
        params = PolicyParams.load(args.params)
    except (OSError, KeyError, ValueError) as e:
        raise UsageError(f"cannot load parameters {args.params}: {e}") from None
    if params.n_objects != activity.n_objects or params.feature_dim != run.feature_dim:
        raise UsageError("parameters do not match this activity's action space or feature size")
    env = ActivityEnv(activity, run.train_config().reward, run.feature_dim)
    rng = np.random.default_rng(run.seed)
    totals, wins = [], 0
    for _ in range(args.n):
        _, total, success = run_episode(env, params, rng, mask_invalid=run.mask_invalid)
        totals.append(total)
        wins += success
    print(f"{activity.name}: mean reward {np.mean(totals):.2f} over {args.n} episode(s), "
          f"success rate {wins / args.n:.2%}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hearthlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an activity from scratch over several seeds")
    p.add_argument("activity", help="activity file, catalog file name, or alias")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="run the source x target transfer grid")
    p.add_argument("catalog", nargs="?", help="directory of .act files (default: bundled catalog)")
    p.add_argument("--sources", help="comma-separated aliases")
    p.add_argument("--targets", help="comma-separated aliases")
    p.add_argument("--checkpoints", help="comma-separated episode counts (default 80,160)")
    p.add_argument("--embedding-provider", help="hashed | file:<path> | http:<url>")
    p.add_argument("--keep-primitive-head", action="store_true", default=None,
                   help="transplant the primitive head too; only the object head is re-initialised")
    _add_run_flags(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("render", help="print the state and goal text of an activity")
    p.add_argument("activity")
    p.add_argument("--groundings", action="store_true", help="also list every goal grounding")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("ground", help="list the goal groundings of an activity")
    p.add_argument("activity")
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("similarity", help="print the description similarity matrix")
    p.add_argument("catalog", nargs="?")
    p.add_argument("--embedding-provider", help="hashed | file:<path> | http:<url>")
    p.add_argument("--config")
    p.add_argument("-o", "--output", help="also write the matrix CSV here")
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("eval", help="evaluate saved parameters on an activity")
    p.add_argument("activity")
    p.add_argument("--params", required=True, help=".npz file written by train")
    p.add_argument("-n", type=int, default=100, help="episodes (default 100)")
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--mask-invalid", action="store_true", default=None)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"hearthlab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, EmbeddingError, OSError, RuntimeError, ValueError) as e:
        print(f"hearthlab: failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
