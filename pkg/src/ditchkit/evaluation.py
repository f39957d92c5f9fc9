"""Error metrics and cross-seed aggregation for rollout predictions.

The unit everywhere is the per-step RMSE normalised by the true peak of
the case, so different impact severities are comparable.  Aggregation
over seeds is pointwise in time; best/worst seeds are picked by the
time-averaged error.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IncompleteGridError

PEAK_MASK_THRESHOLD = 5000.0


def rmse_series(pred: np.ndarray, truth: np.ndarray,
                case_max: float) -> np.ndarray:
    """Per-step spatial RMSE divided by the case peak, shape (T,)."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ConfigError(f"shape mismatch {p.shape} vs {t.shape}")
    if case_max <= 0:
        raise ConfigError("case_max must be positive")
    d = p - t
    return np.sqrt(np.mean(d * d, axis=(1, 2))) / case_max


@dataclass(frozen=True)
class SeedAggregate:
    mean: np.ndarray
    best_seed: int
    worst_seed: int
    best: np.ndarray
    worst: np.ndarray


def aggregate_seeds(series_by_seed: dict) -> SeedAggregate:
    """Pointwise mean plus the best/worst whole-series seeds.

    Best and worst are decided by the time-averaged error of the whole
    series; ties go to the smaller seed id.
    """
    if not series_by_seed:
        raise ConfigError("no seeds to aggregate")
    seeds = sorted(series_by_seed)
    stack = np.stack([np.asarray(series_by_seed[s], dtype=np.float64)
                      for s in seeds])
    means = stack.mean(axis=1)
    best = seeds[int(np.argmin(means))]
    worst = seeds[int(np.argmax(means))]
    return SeedAggregate(mean=stack.mean(axis=0), best_seed=best,
                         worst_seed=worst, best=series_by_seed[best],
                         worst=series_by_seed[worst])


def _check_grid(results: dict) -> tuple:
    """Every model must cover the same (seed, case) grid."""
    keys = {}
    for model, by_seed in results.items():
        keys[model] = {(s, c) for s, by_case in by_seed.items()
                       for c in by_case}
    union = set().union(*keys.values())
    missing = []
    for model in sorted(results):
        for pair in sorted(union - keys[model]):
            missing.append((model,) + pair)
    if missing:
        raise IncompleteGridError(
            f"missing {len(missing)} (model, seed, case) results",
            missing=missing)
    seeds = sorted({s for s, _ in union})
    cases = sorted({c for _, c in union})
    return seeds, cases


def total_average_error(results: dict) -> dict:
    """One scalar per model: seeds -> time -> cases averaging order.

    ``results[model][seed][case]`` is an rmse series.  Seed curves are
    averaged pointwise, then over time, then over cases.
    """
    seeds, cases = _check_grid(results)
    out = {}
    for model, by_seed in results.items():
        per_case = []
        for case in cases:
            agg = aggregate_seeds({s: by_seed[s][case] for s in seeds})
            per_case.append(float(agg.mean.mean()))
        out[model] = float(np.mean(per_case))
    return out


def peak_time_map(frames: np.ndarray,
                  threshold: float = PEAK_MASK_THRESHOLD) -> np.ndarray:
    """Per-cell index of the earliest peak; cells never above threshold
    get -1."""
    f = np.asarray(frames, dtype=np.float64)
    arg = np.argmax(f, axis=0)
    peak = np.max(f, axis=0)
    arg = arg.astype(np.int64)
    arg[peak < threshold] = -1
    return arg


def winner_table(results: dict) -> list:
    """Per-case winner rows: best seed per model, then lowest model wins.

    Returns rows ``(case, winner, {model: best_time_avg})`` sorted by
    case id.  Ties go to the alphabetically first model.
    """
    seeds, cases = _check_grid(results)
    rows = []
    for case in cases:
        scores = {}
        for model in sorted(results):
            per_seed = [float(np.mean(results[model][s][case]))
                        for s in seeds]
            scores[model] = min(per_seed)
        winner = min(sorted(scores), key=lambda m: scores[m])
        rows.append((case, winner, scores))
    return rows


def write_series_csv(path, series_by_name: dict, dt: float = 1.0,
                     x_label: str = "step") -> None:
    """Columns: x, then one column per named series (row-padded with '')."""
    names = sorted(series_by_name)
    n = max(len(series_by_name[k]) for k in names)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([x_label] + names)
        for i in range(n):
            row = [f"{i * dt:.9g}"]
            for k in names:
                s = series_by_name[k]
                row.append(f"{s[i]:.9g}" if i < len(s) else "")
            w.writerow(row)


def write_totals_csv(path, totals: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "total_average_error"])
        for model in sorted(totals):
            w.writerow([model, f"{totals[model]:.9g}"])


def write_winners_csv(path, rows: list) -> None:
    if not rows:
        raise ConfigError("empty winner table")
    models = sorted(rows[0][2])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "winner"] + models)
        for case, winner, scores in rows:
            w.writerow([case, winner] + [f"{scores[m]:.9g}"
                                         for m in models])


def write_grid_csv(path, grid: np.ndarray) -> None:
    """Plain numeric dump of a 2-D array, one row per line."""
    g = np.asarray(grid)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in g:
            w.writerow([f"{v:.9g}" for v in row])
