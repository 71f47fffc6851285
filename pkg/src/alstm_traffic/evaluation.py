"""Time-series cross-validation, error metrics, reporting, data analysis."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import FusedSeries
from .dataset import series_contexts
from .features import HOLIDAY_CLASSES, WEATHER_LEVELS, HolidayCalendar
from .network import ModelParams, ModelVariant, WindowSet, mse_loss, predict

SETS = ("train", "valid", "test")


@dataclass(frozen=True)
class Split:
    train: tuple[int, int]
    valid: tuple[int, int]
    test: tuple[int, int]

    def sizes(self) -> tuple[int, int, int]:
        return tuple(b - a for a, b in (self.train, self.valid, self.test))


@dataclass(frozen=True)
class SplitPlan:
    n: int
    k: int
    unit: int
    remainder: int
    splits: tuple[Split, ...]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "unit": self.unit,
            "remainder": self.remainder,
            "splits": [{"train": list(s.train), "valid": list(s.valid), "test": list(s.test)} for s in self.splits],
        }


def split_timeseries(n: int, k: int = 3) -> SplitPlan:
    """Expanding-window splits with fixed-size validation and test blocks.

    The series is cut into ``2k + 2`` units of ``n // (2k + 2)`` samples; the
    leftover samples are prepended to every training range. Split ``i`` trains
    on ``[0, 2iu + r)`` and validates/tests on the next two units.
    """
    if k < 1:
        raise ValueError("need at least one split")
    if n < 2 * k + 2:
        raise ValueError(f"{n} samples are too few for {k} splits (need >= {2 * k + 2})")
    unit = n // (2 * k + 2)
    rem = n - (2 * k + 2) * unit
    splits = []
    for i in range(1, k + 1):
        tr = 2 * i * unit + rem
        splits.append(Split((0, tr), (tr, tr + unit), (tr + unit, tr + 2 * unit)))
    return SplitPlan(n, k, unit, rem, tuple(splits))


def evaluate(p: ModelParams, v: ModelVariant, windows: WindowSet) -> float:
    """MSE x 1000 over both normalized outputs."""
    if len(windows) == 0:
        raise ValueError("cannot evaluate on an empty window set")
    return 1000.0 * mse_loss(predict(windows.lags, windows.exo, p, v), windows.target)


def persistence_predictions(windows: WindowSet) -> np.ndarray:
    return windows.lags[:, -1, :].copy()


def persistence_baseline(windows: WindowSet) -> float:
    """MSE x 1000 of predicting the last observed (V, S)."""
    if len(windows) == 0:
        raise ValueError("cannot evaluate on an empty window set")
    return 1000.0 * mse_loss(persistence_predictions(windows), windows.target)


@dataclass
class MetricsReport:
    """MSE x 1000 per (model, split, set); one interval and encoding per report."""

    interval: int
    encoding: str
    entries: dict[tuple[str, int, str], float] = field(default_factory=dict)

    def add(self, model: str, split: int, set_name: str, value: float) -> None:
        if set_name not in SETS:
            raise ValueError(f"unknown set {set_name!r}")
        self.entries[(model, split, set_name)] = float(value)

    def models(self) -> list[str]:
        return list(dict.fromkeys(m for m, _, _ in self.entries))

    def splits(self, model: str) -> list[int]:
        return sorted({s for m, s, _ in self.entries if m == model})

    def average(self, model: str, set_name: str) -> float:
        vals = [v for (m, _, s), v in self.entries.items() if m == model and s == set_name]
        return float(np.mean(vals)) if vals else float("nan")

    def to_csv(self, path: str | Path) -> None:
        """Rows are model x split (plus an average row), columns horizon x set."""
        cols = [f"{self.interval}min_{s}" for s in SETS]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "encoding", "split", *cols])
            for m in self.models():
                for sp in self.splits(m):
                    vals = [self.entries.get((m, sp, s)) for s in SETS]
                    w.writerow([m, self.encoding, sp, *("" if x is None else round(x) for x in vals)])
                avgs = [self.average(m, s) for s in SETS]
                w.writerow([m, self.encoding, "average", *("" if np.isnan(a) else round(a) for a in avgs)])

    def to_dict(self) -> dict:
        grouped = defaultdict(lambda: defaultdict(dict))
        for (m, sp, s), val in self.entries.items():
            grouped[m][str(sp)][s] = val
        return {
            "interval": self.interval,
            "encoding": self.encoding,
            "unit": "mse_x1000",
            "models": {
                m: {"splits": dict(grouped[m]), "average": {s: self.average(m, s) for s in SETS if not np.isnan(self.average(m, s))}}
                for m in self.models()
            },
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


# -- analysis ----------------------------------------------------------------

CORR_CHANNELS = ("volume", "speed", "reverse_volume", "reverse_speed")


def correlations(series: FusedSeries) -> np.ndarray:
    """Pearson correlations over rows where all four channels are present.

    A zero-variance channel gets NaN off-diagonal entries; the diagonal is 1.
    """
    data = np.column_stack([series.channel(c) for c in CORR_CHANNELS])
    data = data[np.isfinite(data).all(axis=1)]
    if len(data) < 3:
        raise ValueError(f"need at least 3 complete rows for correlations, got {len(data)}")
    centred = data - data.mean(axis=0)
    norms = np.sqrt((centred**2).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = (centred.T @ centred) / np.outer(norms, norms)
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


BOX_VARIABLES = ("month", "day", "season", "day_of_week", "hour", "is_7_21", "is_day", "holiday", "weather")


def _levels(variable: str) -> list:
    return {
        "month": list(range(1, 13)),
        "day": list(range(1, 32)),
        "season": list(range(1, 5)),
        "day_of_week": list(range(1, 8)),
        "hour": list(range(1, 25)),
        "is_7_21": [False, True],
        "is_day": [False, True],
        "holiday": list(HOLIDAY_CLASSES),
        "weather": list(WEATHER_LEVELS),
    }[variable]


def boxplot_stats(
    values: np.ndarray, categories: list, variable: str = ""
) -> tuple[list[dict], list[str]]:
    """Five-number summaries of ``values`` per category level.

    Quartiles interpolate linearly between order statistics. Levels follow the
    variable's canonical order when ``variable`` is known, else sorted order;
    levels without data are skipped and noted.
    """
    values = np.asarray(values, dtype=np.float64)
    if len(values) != len(categories):
        raise ValueError("values and categories differ in length")
    keep = np.isfinite(values) & np.array([c is not None for c in categories], dtype=bool)
    by_level = defaultdict(list)
    for x, c, ok in zip(values, categories, keep):
        if ok:
            by_level[c].append(x)
    order = _levels(variable) if variable in BOX_VARIABLES else sorted(by_level)
    stats, notes = [], []
    for level in order:
        xs = np.array(by_level.get(level, []))
        if xs.size == 0:
            notes.append(f"{variable or 'category'}={level}: no observations, skipped")
            continue
        q = np.percentile(xs, [0, 25, 50, 75, 100], method="linear")
        stats.append(
            {"level": level, "min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4], "count": int(xs.size)}
        )
    if not stats:
        raise ValueError(f"no level of {variable or 'the category'} has data")
    return stats, notes


def series_boxplots(series: FusedSeries, holidays: HolidayCalendar, variable: str) -> tuple[list[dict], list[str]]:
    """Box-plot statistics of target volume grouped by a calendar variable."""
    if variable not in BOX_VARIABLES:
        raise ValueError(f"unknown category variable {variable!r}; choose from {BOX_VARIABLES}")
    ctxs = series_contexts(series, holidays)
    cats = [getattr(c, variable) for c in ctxs]
    return boxplot_stats(series.volume, cats, variable)
