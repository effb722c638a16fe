"""Ablation harness over loss-weight settings, Welch significance tests,
sample-grid rendering, and CSV summaries.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image

from .data import Dataset
from .losses import LossWeights
from .models import ClassifierModel
from .training import (EvalMetrics, TrainConfig, TrainingDiverged,
                       evaluate_coach, train_coach)

BASELINE_WEIGHTS = (32.0, 0.0, 0.0, 0.0)
GRID_SEPARATOR = 2
GRID_SEPARATOR_VALUE = 128  # mid-gray between tiles


# ---------------------------------------------------------------------------
# Welch's t-test (two-sample, two-tailed, unequal variances)

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz)."""
    max_iter, eps, fpmin = 300, 3e-14, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _t_two_tailed_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with df degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return _betainc_reg(df / 2.0, 0.5, df / (df + t * t))


def welch_t_test(a, b) -> tuple[float, float]:
    """Welch's two-sample t statistic and two-tailed p-value.

    Degrees of freedom via Welch-Satterthwaite. Degenerate inputs: two
    zero-variance samples give p=1 when their means agree and p=0 otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("welch_t_test needs at least two values per sample")
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1), b.var(ddof=1)
    na, nb = a.size, b.size
    se2 = va / na + vb / nb
    if se2 == 0.0:
        if ma == mb:
            return 0.0, 1.0
        return (math.inf if ma > mb else -math.inf), 0.0
    t = (ma - mb) / math.sqrt(se2)
    df = se2 * se2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return float(t), float(_t_two_tailed_p(t, df))


# ---------------------------------------------------------------------------
# ablation harness

@dataclass(frozen=True)
class AblationResult:
    """Per-setting outcome: per-run metrics, aggregates, p-values vs baseline."""

    weights: LossWeights
    metrics: tuple[EvalMetrics, ...]
    failures: tuple[str, ...]
    accuracy_mean: float
    l_re_mean: float
    l_ef_mean: float
    p_accuracy: float
    p_l_re: float
    p_l_ef: float


def _aggregate(values: list[float]) -> float:
    return float(np.mean(values)) if values else float("nan")


def _p_vs_baseline(values: list[float], baseline: list[float]) -> float:
    if len(values) < 2 or len(baseline) < 2:
        return float("nan")
    return welch_t_test(values, baseline)[1]


def significance_vs_baseline(metrics: list[EvalMetrics],
                             baseline: list[EvalMetrics]) -> dict[str, float]:
    """p-values (accuracy, l_re, l_ef) of a setting's runs against baseline runs."""
    out = {}
    for key, attr in (("p_accuracy", "pipeline_accuracy"),
                      ("p_l_re", "mean_l_re"), ("p_l_ef", "mean_l_ef")):
        out[key] = _p_vs_baseline([getattr(m, attr) for m in metrics],
                                  [getattr(m, attr) for m in baseline])
    return out


def build_result(weights: LossWeights, metrics: list[EvalMetrics],
                 failures: list[str], baseline: list[EvalMetrics]) -> AblationResult:
    p = significance_vs_baseline(metrics, baseline)
    return AblationResult(
        weights=weights,
        metrics=tuple(metrics),
        failures=tuple(failures),
        accuracy_mean=_aggregate([m.pipeline_accuracy for m in metrics]),
        l_re_mean=_aggregate([m.mean_l_re for m in metrics]),
        l_ef_mean=_aggregate([m.mean_l_ef for m in metrics]),
        p_accuracy=p["p_accuracy"], p_l_re=p["p_l_re"], p_l_ef=p["p_l_ef"],
    )


def train_setting(weights: LossWeights, config: TrainConfig, classifier: ClassifierModel,
                  train: Dataset, test: Dataset, log=None
                  ) -> tuple[list[EvalMetrics], list[str]]:
    """Train `config.runs` coaches (seeds seed..seed+runs-1) for one weight
    setting; diverged runs are recorded, not raised."""
    metrics: list[EvalMetrics] = []
    failures: list[str] = []
    for i in range(config.runs):
        run_cfg = replace(config, seed=config.seed + i, weights=weights)
        try:
            coach, _, _ = train_coach(train, classifier, run_cfg, log=log)
            metrics.append(evaluate_coach(coach, classifier, test))
        except TrainingDiverged as e:
            failures.append(f"seed {run_cfg.seed}: {e}")
    return metrics, failures


def run_ablation(grid: list[LossWeights], config: TrainConfig,
                 classifier: ClassifierModel, train: Dataset, test: Dataset,
                 log=None) -> list[AblationResult]:
    """Train and evaluate every grid setting, then test each against the
    baseline (32,0,0,0) runs. The baseline is taken from the grid when
    present, otherwise trained implicitly as the reference."""
    if not grid:
        raise ValueError("empty ablation grid")
    per_setting: dict[int, tuple[list[EvalMetrics], list[str]]] = {}
    baseline_metrics: list[EvalMetrics] | None = None
    for idx, weights in enumerate(grid):
        per_setting[idx] = train_setting(weights, config, classifier, train, test, log=log)
        if weights.as_tuple() == BASELINE_WEIGHTS and baseline_metrics is None:
            baseline_metrics = per_setting[idx][0]
    if baseline_metrics is None:
        baseline_metrics, _ = train_setting(LossWeights(), config, classifier, train, test,
                                            log=log)
    return [
        build_result(grid[idx], per_setting[idx][0], per_setting[idx][1], baseline_metrics)
        for idx in range(len(grid))
    ]


# ---------------------------------------------------------------------------
# rendering and summaries

def render_grid(images, columns: int, path) -> None:
    """Tile images row-major into a grayscale PNG with 2px separators."""
    if len(images) == 0:
        raise ValueError("no images to render")
    if columns < 1:
        raise ValueError("columns must be positive")
    tiles = [np.asarray(im, dtype=np.float64).reshape(28, 28) for im in images]
    for t in tiles:
        if t.min() < 0 or t.max() > 1:
            raise ValueError("pixels must lie in [0,1]")
    rows = (len(tiles) + columns - 1) // columns
    height = rows * 28 + (rows - 1) * GRID_SEPARATOR
    width = columns * 28 + (columns - 1) * GRID_SEPARATOR
    canvas = np.full((height, width), GRID_SEPARATOR_VALUE, dtype=np.uint8)
    for n, tile in enumerate(tiles):
        r, c = divmod(n, columns)
        top = r * (28 + GRID_SEPARATOR)
        left = c * (28 + GRID_SEPARATOR)
        canvas[top:top + 28, left:left + 28] = np.round(tile * 255.0).astype(np.uint8)
    Image.fromarray(canvas, mode="L").save(path, format="PNG")


def figure_panel_indices(test: Dataset, per_class: int = 2) -> list[int]:
    """Fixed demo panel: the lowest-index test samples, per_class per digit."""
    picked = []
    for digit in range(10):
        idxs = np.nonzero(test.labels == digit)[0][:per_class]
        picked.extend(int(i) for i in idxs)
    return picked


SUMMARY_COLUMNS = ["alpha_cl", "alpha_ef", "alpha_d", "accuracy_mean",
                   "l_re_mean", "l_ef_mean", "p_acc", "p_lre", "p_lef"]


def summarize(results: list[AblationResult], path) -> None:
    """Write one CSV row per setting with full-precision values."""
    if not results:
        raise ValueError("no results to summarize")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SUMMARY_COLUMNS)
        for r in results:
            writer.writerow([repr(float(v)) for v in (
                r.weights.alpha_cl, r.weights.alpha_ef, r.weights.alpha_d,
                r.accuracy_mean, r.l_re_mean, r.l_ef_mean,
                r.p_accuracy, r.p_l_re, r.p_l_ef)])


def read_summary(path) -> list[dict[str, float]]:
    """Parse a summarize() CSV back into per-setting dicts."""
    with open(path, newline="") as f:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(f)]
