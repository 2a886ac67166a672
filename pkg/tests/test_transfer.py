import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from hearthlab.nn import forward, init_params
from hearthlab.rl import LearningCurve, PPOConfig, TrainConfig
from hearthlab.transfer import (
    GridError, TransferConfig, aggregate_curves, best_of, matrix_csv, rank_correlation, read_matrix_csv,
    run_grid, transfer_ratio, transplant, write_report,
)

TINY = TrainConfig(episodes=8, feature_dim=64, hidden=8, ppo=PPOConfig(n_steps=64))
TINY_GRID = TransferConfig(checkpoints=(4, 8), seeds=1)


# --- transplant -----------------------------------------------------------------

def test_transplant_copies_trunk_and_value(rng):
    src = init_params(32, 8, 5, rng)
    src.wv[:] = rng.normal(size=src.wv.shape)
    out = transplant(src, 3, np.random.default_rng(1))
    for name in ("w1", "b1", "w2", "b2", "wv", "bv"):
        assert np.array_equal(getattr(out, name), getattr(src, name))
    assert out.wo.shape == (8, 3) and out.bo.shape == (3,)
    assert not np.array_equal(out.wp, src.wp)
    x = rng.normal(size=(10, 32))
    assert np.array_equal(forward(out, x)[2], forward(src, x)[2])


def test_transplant_keep_primitive_head(rng):
    src = init_params(16, 4, 2, rng)
    out = transplant(src, 6, np.random.default_rng(1), keep_primitive_head=True)
    assert np.array_equal(out.wp, src.wp) and np.array_equal(out.bp, src.bp)
    assert out.n_objects == 6


def test_transplant_seeded_heads(rng):
    src = init_params(16, 4, 2, rng)
    a = transplant(src, 3, np.random.default_rng(9))
    b = transplant(src, 3, np.random.default_rng(9))
    assert np.array_equal(a.flat(), b.flat())


def test_transplant_errors(rng):
    src = init_params(16, 4, 2, rng)
    with pytest.raises(ValueError):
        transplant(src, 0, rng)
    src.w1[0, 0] = np.inf
    with pytest.raises(ValueError):
        transplant(src, 2, rng)


# --- ratio -----------------------------------------------------------------------

def test_ratio_examples():
    base = np.array([-64.0, -10.0, 20.0, 100.0])
    assert transfer_ratio(base, base, 4) == 1.0
    doubled = 2 * (base + 64) - 64
    assert transfer_ratio(doubled, base, 4) == pytest.approx(2.0, abs=1e-9)
    assert transfer_ratio(base + 5, base, 4) > 1
    assert transfer_ratio(base[1:] - 5, base[1:], 2) < 1
    curve = LearningCurve("x", 0, list(base))
    assert transfer_ratio(curve, curve, 3) == 1.0


def test_ratio_errors():
    with pytest.raises(ValueError):
        transfer_ratio([1.0], [1.0, 2.0], 2)
    with pytest.raises(ValueError):
        transfer_ratio([-80.0], [0.0], 1)
    with pytest.raises(ZeroDivisionError):
        transfer_ratio([0.0], [-64.0], 1)


totals = st.lists(st.floats(-64, 200), min_size=5, max_size=30)


@given(totals, totals, st.floats(0.01, 100))
def test_ratio_scale_invariant(t, b, scale):
    n = min(len(t), len(b))
    t, b = np.array(t[:n]), np.array(b[:n])
    if (b + 64).sum() < 1e-6:
        return
    r = transfer_ratio(t, b, n)
    scaled = transfer_ratio(scale * (t + 64) - 64, scale * (b + 64) - 64, n)
    assert scaled == pytest.approx(r, rel=1e-9)
    assert (r > 1) == ((t + 64).sum() > (b + 64).sum())


# --- rank correlation ------------------------------------------------------------

def test_spearman_examples():
    assert rank_correlation([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert rank_correlation([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    assert rank_correlation([1, 1, 2], [1, 2, 3]) == pytest.approx(0.866, abs=1e-3)
    assert math.isnan(rank_correlation([1, 1, 1], [1, 2, 3]))
    with pytest.raises(ValueError):
        rank_correlation([1, 2], [1, 2])


def brute_force_spearman(x, y):
    def ranks(v):
        return [sum(w < a for w in v) + (sum(w == a for w in v) + 1) / 2 for a in v]
    rx, ry = ranks(x), ranks(y)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))
    return num / den


@settings(max_examples=150)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=3, max_size=12))
def test_spearman_matches_oracles(pairs):
    x, y = [p[0] for p in pairs], [p[1] for p in pairs]
    rho = rank_correlation(x, y)
    if len(set(x)) == 1 or len(set(y)) == 1:
        assert math.isnan(rho)
        return
    assert rho == pytest.approx(brute_force_spearman(x, y), abs=1e-12)
    assert rho == pytest.approx(spearmanr(x, y).statistic, abs=1e-12)
    assert -1 <= rho <= 1


# --- aggregation -----------------------------------------------------------------

def test_aggregate_median_and_top():
    curves = [LearningCurve("a", k, list(v)) for k, v in enumerate([[0, 1, 9], [2, 3, 4], [4, 5, 5]])]
    np.testing.assert_array_equal(aggregate_curves(curves), [2, 3, 5])
    np.testing.assert_array_equal(aggregate_curves(curves, "top", window=1), [0, 1, 9])


def test_best_of_prefers_earliest_on_tie():
    a = LearningCurve("a", 0, [5.0])
    b = LearningCurve("a", 1, [5.0])
    c = LearningCurve("a", 2, [1.0])
    assert best_of([(c, "c"), (b, "b"), (a, "a")])[1] == "a"


def test_config_validation():
    with pytest.raises(ValueError):
        TransferConfig(checkpoints=(80, 1000)).validate(TrainConfig())
    with pytest.raises(ValueError):
        TransferConfig(offset=10).validate(TrainConfig())
    with pytest.raises(ValueError):
        TransferConfig(aggregate="mean").validate(TrainConfig())
    TransferConfig().validate(TrainConfig())


# --- grid -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_report():
    from hearthlab.activity import load_catalog
    cat = load_catalog()
    return run_grid(cat, ["window", "cupboard", "food"], ["dishes", "food"], TINY, TINY_GRID)


def test_grid_orientation(small_report):
    r = small_report
    assert r.sources == ["window", "cupboard", "food"] and r.targets == ["dishes", "food"]
    for cp in (4, 8):
        assert r.ratios[cp].shape == (3, 2)
    # the diagonal cell (food, food) is skipped by default
    assert np.isnan(r.ratios[4][2, 1])
    assert np.isfinite(r.ratios[4][:, 0]).all()
    assert r.sim_block().shape == (3, 2)
    assert r.sim_block()[1, 0] == pytest.approx(r.similarity["cupboard", "dishes"])
    assert not r.failures


def test_grid_ratio_matches_curves(small_report):
    r = small_report
    t = r.transfers["cupboard", "dishes", 0]
    b = r.baselines["dishes", 0]
    assert r.ratios[8][1, 0] == pytest.approx(transfer_ratio(t, b, 8))


def test_grid_correlations(small_report):
    r = small_report
    # dishes has three non-diagonal sources, food only two
    assert -1 <= r.correlations["dishes", 4] <= 1 or math.isnan(r.correlations["dishes", 4])
    assert math.isnan(r.correlations["food", 4])


def test_grid_iteration_order(small_report, catalog):
    flipped = run_grid(list(catalog.values()), ["food", "cupboard", "window"], ["food", "dishes"], TINY, TINY_GRID)
    for cp in (4, 8):
        np.testing.assert_array_equal(flipped.ratios[cp][::-1, ::-1], small_report.ratios[cp])


def test_grid_diagonal_sanity(catalog):
    cfg = TransferConfig(checkpoints=(8,), seeds=1, include_diagonal=True)
    r = run_grid(list(catalog.values()), ["dishes"], ["dishes"], TINY, cfg)
    assert r.ratios[8][0, 0] == 1.0


def test_grid_errors(catalog):
    cat = list(catalog.values())
    with pytest.raises(GridError):
        run_grid(cat, ["nope"], ["food"], TINY, TINY_GRID)
    with pytest.raises(GridError, match="source-only"):
        run_grid(cat, ["food"], ["window"], TINY, TINY_GRID)


def test_write_report(small_report, tmp_path):
    written = write_report(small_report, tmp_path)
    names = {p.relative_to(tmp_path).as_posix() for p in written}
    assert {"matrix_sim.csv", "matrix_ratio_ep4.csv", "matrix_ratio_ep8.csv", "correlations.csv",
            "forgetting.csv"} <= names
    assert "curves/dishes__from__cupboard__seed0.csv" in names
    assert "curves/dishes__from__scratch__seed0.csv" in names
    assert "curves/window__pretrain__seed0.csv" in names
    rows, cols, values = read_matrix_csv(tmp_path / "matrix_ratio_ep8.csv")
    assert rows == small_report.sources and cols == small_report.targets
    np.testing.assert_allclose(values, np.round(small_report.ratios[8], 3), equal_nan=True)
    header = (tmp_path / "matrix_sim.csv").read_text().splitlines()[0]
    assert header == "source\\target,dishes,food"
    forgetting = (tmp_path / "forgetting.csv").read_text().splitlines()
    assert forgetting[0].startswith("target,mean_ratio_ep4,positive_ep4,mean_ratio_ep8")


def test_matrix_csv_format():
    text = matrix_csv(["a"], ["b", "c"], np.array([[1.23456, np.nan]]))
    assert text == "source\\target,b,c\na,1.235,nan\n"
