"""Window construction from a fused series and the on-disk dataset format.

A window ending at row ``t`` holds the target-direction (V, S) of rows
``t-5 .. t-1`` as lags, the calendar/flag features of row ``t``, the latest
observed reverse-direction (V, S) (row ``t-1``) and the target (V, S) of
row ``t``. Rows ``t-5 .. t`` must all be free of gaps.

Windows are kept in physical units; ``RawWindows.normalize`` applies a
split's ``Normalizer`` to produce model inputs.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import FusedSeries
from .features import (
    HolidayCalendar,
    Normalizer,
    build_calendar_features,
    calendar_context,
    exo_dim,
    feature_names,
)
from .network import N_LAGS, WindowSet

DATASET_FORMAT = "alstm-traffic-dataset"
DATASET_VERSION = 1


def series_contexts(series: FusedSeries, holidays: HolidayCalendar) -> list:
    weather = series.weather_names()
    return [
        calendar_context(ts, holidays, weather[k], bool(series.one_way[k]), bool(series.double_capacity[k]))
        for k, ts in enumerate(series.datetimes())
    ]


@dataclass
class RawWindows:
    timestamps: np.ndarray  # datetime64[m] of the predicted interval
    lags: np.ndarray  # (N, L, 2) veh/h and km/h
    target: np.ndarray  # (N, 2)
    reverse: np.ndarray  # (N, 2) latest observed reverse (V, S)
    calendar: np.ndarray  # (N, exo_dim - 2)
    encoding: str
    interval: int

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def window_input_dim(self) -> int:
        return self.lags.shape[1] * 2 + self.calendar.shape[1] + 2

    def subset(self, start: int, stop: int) -> "RawWindows":
        sl = slice(start, stop)
        return RawWindows(
            self.timestamps[sl], self.lags[sl], self.target[sl], self.reverse[sl], self.calendar[sl],
            self.encoding, self.interval,
        )

    def fit_normalizer(self, start: int = 0, stop: int | None = None) -> Normalizer:
        """Min-max statistics from the windows in ``[start, stop)`` only."""
        part = self.subset(start, len(self) if stop is None else stop)
        if len(part) == 0:
            raise ValueError("cannot fit a normalizer on zero windows")
        return Normalizer.fit(
            {
                "volume": np.concatenate([part.lags[..., 0].ravel(), part.target[:, 0]]),
                "speed": np.concatenate([part.lags[..., 1].ravel(), part.target[:, 1]]),
                "reverse_volume": part.reverse[:, 0],
                "reverse_speed": part.reverse[:, 1],
            }
        )

    def normalize(self, norm: Normalizer, start: int = 0, stop: int | None = None) -> WindowSet:
        part = self.subset(start, len(self) if stop is None else stop)
        lags = np.stack([norm.apply("volume", part.lags[..., 0]), norm.apply("speed", part.lags[..., 1])], axis=-1)
        target = np.column_stack([norm.apply("volume", part.target[:, 0]), norm.apply("speed", part.target[:, 1])])
        rev = np.column_stack(
            [norm.apply("reverse_volume", part.reverse[:, 0]), norm.apply("reverse_speed", part.reverse[:, 1])]
        )
        return WindowSet(lags, np.concatenate([part.calendar, rev], axis=1), target, part.timestamps)


def build_windows(
    series: FusedSeries, holidays: HolidayCalendar, encoding: str, n_lags: int = N_LAGS
) -> RawWindows:
    """All gap-free windows of ``series`` in time order."""
    width = exo_dim(encoding) - 2
    n = len(series)
    ok = ~series.gap
    ends = [t for t in range(n_lags, n) if ok[t - n_lags : t + 1].all()]
    contexts = series_contexts(series, holidays) if ends else []
    idx = np.array(ends, dtype=np.int64)
    tv = np.column_stack([series.volume, series.speed]) if n else np.zeros((0, 2))
    rv = np.column_stack([series.reverse_volume, series.reverse_speed]) if n else np.zeros((0, 2))
    if len(idx):
        lag_idx = idx[:, None] + np.arange(-n_lags, 0)[None, :]
        lags = tv[lag_idx]
        calendar = np.stack([build_calendar_features(contexts[t], encoding) for t in ends])
    else:
        lags = np.zeros((0, n_lags, 2))
        calendar = np.zeros((0, width))
    return RawWindows(
        series.timestamps[idx] if len(idx) else np.array([], dtype="datetime64[m]"),
        lags,
        tv[idx] if len(idx) else np.zeros((0, 2)),
        rv[idx - 1] if len(idx) else np.zeros((0, 2)),
        calendar,
        encoding,
        series.interval,
    )


def _window_header(n_lags: int, encoding: str) -> list[str]:
    cols = ["timestamp"]
    for k in range(n_lags, 0, -1):
        cols += [f"lag{k}_volume", f"lag{k}_speed"]
    cols += ["target_volume", "target_speed", "reverse_volume", "reverse_speed"]
    return cols + feature_names(encoding)[:-2]


def write_windows_csv(w: RawWindows, path: str | Path) -> None:
    n_lags = w.lags.shape[1]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(_window_header(n_lags, w.encoding))
        for k in range(len(w)):
            row = [str(w.timestamps[k])]
            row += [repr(float(x)) for x in w.lags[k].ravel()]
            row += [repr(float(x)) for x in (*w.target[k], *w.reverse[k])]
            row += [repr(float(x)) for x in w.calendar[k]]
            out.writerow(row)


def read_windows_csv(path: str | Path, encoding: str, interval: int, n_lags: int = N_LAGS) -> RawWindows:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _window_header(n_lags, encoding):
            raise ValueError(f"{path}: window columns do not match encoding {encoding!r}")
        rows = list(reader)
    ts = np.array([np.datetime64(r[0], "m") for r in rows], dtype="datetime64[m]")
    vals = np.array([[float(x) for x in r[1:]] for r in rows], dtype=np.float64).reshape(len(rows), len(header) - 1)
    nl = 2 * n_lags
    return RawWindows(
        ts, vals[:, :nl].reshape(-1, n_lags, 2), vals[:, nl : nl + 2], vals[:, nl + 2 : nl + 4], vals[:, nl + 4 :],
        encoding, interval,
    )


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class Dataset:
    """A prepared dataset directory: ``windows.csv`` + ``manifest.json``."""

    root: Path
    manifest: dict
    windows: RawWindows

    @property
    def manifest_hash(self) -> str:
        return sha256_file(self.root / "manifest.json")

    def normalizer(self, split: int) -> Normalizer:
        return Normalizer.from_dict(self.manifest["splits"][split - 1]["normalizer"])

    def split_sets(self, split: int) -> dict[str, WindowSet]:
        s = self.manifest["splits"][split - 1]
        norm = self.normalizer(split)
        return {name: self.windows.normalize(norm, *s[name]) for name in ("train", "valid", "test")}

    @classmethod
    def load(cls, root: str | Path) -> "Dataset":
        root = Path(root)
        mpath = root / "manifest.json"
        if not mpath.exists():
            raise FileNotFoundError(f"no dataset manifest in {root}")
        manifest = json.loads(mpath.read_text())
        if manifest.get("format") != DATASET_FORMAT:
            raise ValueError(f"{mpath} is not a dataset manifest")
        if sha256_file(root / "windows.csv") != manifest["windows_sha256"]:
            raise ValueError(f"{root / 'windows.csv'} does not match its manifest hash")
        windows = read_windows_csv(root / "windows.csv", manifest["encoding"], manifest["interval"], manifest["n_lags"])
        return cls(root, manifest, windows)
