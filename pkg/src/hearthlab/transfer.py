"""Weight transplant, transfer ratios and the source x target experiment grid."""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .activity import Activity
from .embed import SimilarityMatrix, similarity_matrix
from .nn import PolicyParams, init_head
from .render import render_activity
from .rl import TrainConfig, train
from .world import N_PRIMITIVES

log = logging.getLogger(__name__)


class GridError(RuntimeError):
    pass


def transplant(source: PolicyParams, target_k: int, rng, keep_primitive_head: bool = False) -> PolicyParams:
    """Copy trunk and value head; re-initialise the actor output layer sized for ``target_k`` objects."""
    if target_k < 1:
        raise ValueError("target activity needs at least one object")
    if not source.is_finite():
        raise ValueError("source parameters are not finite")
    out = source.copy()
    h = source.hidden
    if keep_primitive_head:
        out.wo, out.bo = init_head(h, target_k, rng)
    else:
        out.wp, out.bp = init_head(h, N_PRIMITIVES, rng)
        out.wo, out.bo = init_head(h, target_k, rng)
    return out


def transfer_ratio(transfer_curve, baseline_curve, n_episodes: int, offset: float = 64.0) -> float:
    """Area under the offset transfer curve over the area under the offset baseline, first ``n_episodes``."""
    t = np.asarray(getattr(transfer_curve, "totals", transfer_curve), dtype=float)
    b = np.asarray(getattr(baseline_curve, "totals", baseline_curve), dtype=float)
    if len(t) < n_episodes or len(b) < n_episodes:
        raise ValueError(f"curves shorter than {n_episodes} episodes")
    t, b = t[:n_episodes] + offset, b[:n_episodes] + offset
    if (t < 0).any() or (b < 0).any():
        raise ValueError(f"offset {offset} leaves negative rewards")
    area = b.sum()
    if area == 0:
        raise ZeroDivisionError("baseline area is zero")
    return float(t.sum() / area)


def _ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def rank_correlation(similarity, ratios) -> float:
    """Spearman's rho with average ranks for ties; NaN when either column is constant."""
    x, y = np.asarray(similarity, dtype=float), np.asarray(ratios, dtype=float)
    if len(x) != len(y) or len(x) < 3:
        raise ValueError("need two columns of equal length >= 3")
    rx, ry = _ranks(x), _ranks(y)
    rx, ry = rx - rx.mean(), ry - ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        return float("nan")
    return float(np.clip(rx @ ry / denom, -1.0, 1.0))


@dataclass(frozen=True)
class TransferConfig:
    checkpoints: tuple = (80, 160)
    seeds: int = 3
    offset: float = 64.0
    base_seed: int = 0
    keep_primitive_head: bool = False
    aggregate: str = "median"
    include_diagonal: bool = False

    def validate(self, train_config: TrainConfig) -> None:
        if not self.checkpoints or min(self.checkpoints) < 1:
            raise ValueError("checkpoints must be positive")
        if max(self.checkpoints) > train_config.episodes:
            raise ValueError(f"checkpoint {max(self.checkpoints)} exceeds {train_config.episodes} episodes")
        floor = train_config.reward.max_steps * abs(train_config.reward.invalid_penalty)
        if self.offset < floor:
            raise ValueError(f"offset {self.offset} below the worst episode magnitude {floor}")
        if self.seeds < 1:
            raise ValueError("need at least one seed")
        if self.aggregate not in ("median", "top"):
            raise ValueError("aggregate must be 'median' or 'top'")


@dataclass
class TransferReport:
    sources: list
    targets: list
    checkpoints: tuple
    similarity: SimilarityMatrix
    ratios: dict = field(default_factory=dict)          # checkpoint -> (sources x targets) array
    correlations: dict = field(default_factory=dict)    # (target, checkpoint) -> rho
    pretrain: dict = field(default_factory=dict)        # (source, seed) -> curve
    baselines: dict = field(default_factory=dict)       # (target, seed) -> curve
    transfers: dict = field(default_factory=dict)       # (source, target, seed) -> curve
    failures: list = field(default_factory=list)

    def sim_block(self) -> np.ndarray:
        return self.similarity.submatrix(self.sources, self.targets)

    def forgetting_table(self) -> list[dict]:
        """Per-target comparison of ratios across checkpoints."""
        rows = []
        for j, t in enumerate(self.targets):
            row = {"target": t}
            for cp in self.checkpoints:
                col = self.ratios[cp][:, j]
                col = col[np.isfinite(col)]
                row[f"mean_ratio_ep{cp}"] = float(col.mean()) if len(col) else float("nan")
                row[f"positive_ep{cp}"] = int((col > 1.0).sum())
            first, last = self.checkpoints[0], self.checkpoints[-1]
            row["change"] = row[f"mean_ratio_ep{last}"] - row[f"mean_ratio_ep{first}"]
            rows.append(row)
        return rows


def aggregate_curves(curves: list, how: str = "median", window: int = 64) -> np.ndarray:
    totals = np.array([c.totals for c in curves], dtype=float)
    if how == "top":
        return totals[int(np.argmax([c.final_mean(window) for c in curves]))]
    return np.median(totals, axis=0)


def best_of(results: list) -> tuple:
    """(curve, params) with the highest final-64-episode mean; earliest seed wins ties."""
    return max(results, key=lambda cp: (cp[0].final_mean(64), -cp[0].seed))


def _job(activity: Activity, config: TrainConfig, seed: int, init):
    return train(activity, config, seed, init)


class _Runner:
    def __init__(self, jobs: int):
        self.pool = ProcessPoolExecutor(jobs) if jobs > 1 else None

    def submit(self, *args):
        if self.pool is None:
            return _Immediate(*args)
        return self.pool.submit(_job, *args)

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


class _Immediate:
    def __init__(self, *args):
        try:
            self._value, self._error = _job(*args), None
        except Exception as e:  # noqa: BLE001 - surfaced per cell by the grid
            self._value, self._error = None, e

    def result(self):
        if self._error is not None:
            raise self._error
        return self._value


def run_grid(catalog: list, sources: list, targets: list, train_config: TrainConfig = TrainConfig(),
             config: TransferConfig = TransferConfig(), provider=None, jobs: int = 1) -> TransferReport:
    """Pretrain sources, train every target from scratch and from each transplanted source.

    ``sources`` and ``targets`` are aliases of activities in ``catalog``.
    Failed training runs are recorded in ``report.failures`` and leave NaN cells.
    """
    config.validate(train_config)
    by_alias = {a.alias: a for a in catalog}
    for name in list(sources) + list(targets):
        if name not in by_alias:
            raise GridError(f"unknown activity {name!r}")
    for t in targets:
        if by_alias[t].source_only:
            raise GridError(f"activity {t!r} is source-only and cannot be a target")

    seeds = [config.base_seed + k for k in range(config.seeds)]
    horizon = max(config.checkpoints)
    target_config = replace(train_config, episodes=horizon)
    descriptions = {
        name: render_activity(by_alias[name].initial, by_alias[name].goal, by_alias[name].scene)
        for name in dict.fromkeys(list(sources) + list(targets))
    }
    if len(descriptions) > 1:
        sim = similarity_matrix(descriptions, provider)
    else:
        # a lone activity (diagonal sanity run) is trivially self-similar
        sim = SimilarityMatrix(list(descriptions), np.ones((1, 1)))
    report = TransferReport(list(sources), list(targets), tuple(config.checkpoints), sim)
    runner = _Runner(jobs)
    try:
        pre = {(s, k): runner.submit(by_alias[s], train_config, k, None) for s in sources for k in seeds}
        base = {(t, k): runner.submit(by_alias[t], target_config, k, None) for t in targets for k in seeds}
        source_params = {}
        for s in sources:
            results = []
            for k in seeds:
                try:
                    curve, params = pre[s, k].result()
                except Exception as e:  # noqa: BLE001
                    report.failures.append(f"pretrain source={s} seed={k}: {e}")
                    continue
                report.pretrain[s, k] = curve
                results.append((curve, params))
            if results:
                source_params[s] = best_of(results)[1]

        cells = {}
        for s in sources:
            if s not in source_params:
                continue
            for t in targets:
                if s == t and not config.include_diagonal:
                    continue
                for k in seeds:
                    if s == t:
                        init = None
                    else:
                        rng = np.random.default_rng([k, 7919])
                        init = transplant(source_params[s], by_alias[t].n_objects, rng, config.keep_primitive_head)
                    cells[s, t, k] = runner.submit(by_alias[t], target_config, k, init)
        for (t, k), fut in base.items():
            try:
                report.baselines[t, k] = fut.result()[0]
            except Exception as e:  # noqa: BLE001
                report.failures.append(f"baseline target={t} seed={k}: {e}")
        for (s, t, k), fut in cells.items():
            try:
                report.transfers[s, t, k] = fut.result()[0]
            except Exception as e:  # noqa: BLE001
                report.failures.append(f"transfer source={s} target={t} seed={k}: {e}")
    finally:
        runner.close()

    for cp in config.checkpoints:
        m = np.full((len(sources), len(targets)), np.nan)
        for j, t in enumerate(targets):
            base_curves = [report.baselines[t, k] for k in seeds if (t, k) in report.baselines]
            if len(base_curves) < len(seeds):
                continue
            baseline = aggregate_curves(base_curves, config.aggregate)
            for i, s in enumerate(sources):
                curves = [report.transfers[s, t, k] for k in seeds if (s, t, k) in report.transfers]
                if len(curves) < len(seeds):
                    continue
                m[i, j] = transfer_ratio(aggregate_curves(curves, config.aggregate), baseline, cp, config.offset)
        report.ratios[cp] = m

    sim = report.sim_block()
    for j, t in enumerate(targets):
        rows = [i for i, s in enumerate(sources) if s != t]
        for cp in config.checkpoints:
            sim_col, ratio_col = sim[rows, j], report.ratios[cp][rows, j]
            ok = np.isfinite(ratio_col)
            if ok.sum() >= 3:
                report.correlations[t, cp] = rank_correlation(sim_col[ok], ratio_col[ok])
            else:
                report.correlations[t, cp] = float("nan")
    return report


def _fmt(v: float, digits: int) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.{digits}f}"


def matrix_csv(rows: list, cols: list, values: np.ndarray, digits: int = 3) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["source\\target", *cols])
    for r, vals in zip(rows, values):
        w.writerow([r, *(_fmt(v, digits) for v in vals)])
    return buf.getvalue()


def read_matrix_csv(path) -> tuple:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "source\\target":
        raise ValueError(f"{path}: not a matrix file")
    cols = rows[0][1:]
    labels = [r[0] for r in rows[1:]]
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return labels, cols, values


def write_report(report: TransferReport, out) -> list[Path]:
    """Write curves, matrices, correlations and the forgetting table under ``out``."""
    out = Path(out)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    written = []

    def put(rel: str, text: str):
        p = out / rel
        p.write_text(text, encoding="utf-8", newline="")
        written.append(p)

    for (s, k), c in sorted(report.pretrain.items()):
        put(f"curves/{s}__pretrain__seed{k}.csv", c.to_csv())
    for (t, k), c in sorted(report.baselines.items()):
        put(f"curves/{t}__from__scratch__seed{k}.csv", c.to_csv())
    for (s, t, k), c in sorted(report.transfers.items()):
        put(f"curves/{t}__from__{s}__seed{k}.csv", c.to_csv())
    put("matrix_sim.csv", matrix_csv(report.sources, report.targets, report.sim_block()))
    for cp in report.checkpoints:
        put(f"matrix_ratio_ep{cp}.csv", matrix_csv(report.sources, report.targets, report.ratios[cp]))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["target", *(f"spearman_ep{cp}" for cp in report.checkpoints)])
    for t in report.targets:
        w.writerow([t, *(_fmt(report.correlations[t, cp], 3) for cp in report.checkpoints)])
    put("correlations.csv", buf.getvalue())

    table = report.forgetting_table()
    buf = io.StringIO()
    if table:
        w = csv.writer(buf, lineterminator="\n")
        keys = list(table[0])
        w.writerow(keys)
        for row in table:
            w.writerow([row["target"], *(v if isinstance(v, int) else _fmt(v, 3) for v in list(row.values())[1:])])
    put("forgetting.csv", buf.getvalue())
    return written
