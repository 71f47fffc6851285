"""Detector CSV ingestion, cleaning, interval aggregation and synthetic data.

Input CSV schema (header required)::

    timestamp,station_id,direction,volume_vph,speed_kmh,weather,one_way,double_capacity

``direction`` is ``target`` or ``reverse``; ``weather`` is one of
``rainy``/``sunny``/``snowy``; flags are ``0``/``1``. Timestamps are local
ISO-8601 times aligned to a 5-minute grid.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .features import WEATHER_LEVELS, HolidayCalendar, season_of

CSV_HEADER = ["timestamp", "station_id", "direction", "volume_vph", "speed_kmh", "weather", "one_way", "double_capacity"]
DIRECTIONS = ("target", "reverse")
BASE_INTERVAL = 5
CHANNELS = ("volume", "speed", "reverse_volume", "reverse_speed")

MAX_SPEED_KMH = 200.0
MAX_VOLUME_VPH = 10_000.0
MAX_INTERP_GAP = 2


class DataError(ValueError):
    """Input data that cannot be used as given."""


@dataclass(frozen=True)
class TrafficRecord:
    timestamp: dt.datetime
    station_id: str
    direction: str
    volume: float
    speed: float
    weather: str = "sunny"
    one_way: bool = False
    double_capacity: bool = False
    row: int = 0  # source line number, 0 if synthetic


@dataclass
class Reject:
    row: int
    reason: str
    raw: str


@dataclass
class IngestResult:
    records: list[TrafficRecord]
    rejects: list[Reject]

    def write_rejects(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "reason", "raw"])
            for r in self.rejects:
                w.writerow([r.row, r.reason, r.raw])


def _parse_flag(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no", ""):
        return False
    raise ValueError(text)


def ingest(path: str | Path) -> IngestResult:
    """Parse a detector CSV. Malformed rows go to ``rejects`` with a reason."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    records: list[TrafficRecord] = []
    rejects: list[Reject] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise DataError(f"{path}: header must be {','.join(CSV_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            raw = ",".join(row)
            if len(row) != len(CSV_HEADER):
                rejects.append(Reject(lineno, f"expected {len(CSV_HEADER)} fields, got {len(row)}", raw))
                continue
            ts_s, station, direction, vol_s, spd_s, weather, one_way, double = (c.strip() for c in row)
            try:
                ts = dt.datetime.fromisoformat(ts_s)
            except ValueError:
                rejects.append(Reject(lineno, "unparseable timestamp", raw))
                continue
            if ts.tzinfo is not None:
                rejects.append(Reject(lineno, "timestamp must not carry a UTC offset", raw))
                continue
            if ts.minute % BASE_INTERVAL or ts.second or ts.microsecond:
                rejects.append(Reject(lineno, "timestamp not on the 5-minute grid", raw))
                continue
            if direction not in DIRECTIONS:
                rejects.append(Reject(lineno, f"unknown direction {direction!r}", raw))
                continue
            reason = None
            values = []
            for label, text in (("volume", vol_s), ("speed", spd_s)):
                try:
                    x = float(text)
                except ValueError:
                    reason = f"non-numeric {label}"
                    break
                if not math.isfinite(x) or x < 0:
                    reason = f"negative or non-finite {label}"
                    break
                values.append(x)
            if reason is None and weather not in WEATHER_LEVELS:
                reason = f"unknown weather {weather!r}"
            if reason is None:
                try:
                    flags = (_parse_flag(one_way), _parse_flag(double))
                except ValueError:
                    reason = "bad flag value"
            if reason is not None:
                rejects.append(Reject(lineno, reason, raw))
                continue
            records.append(TrafficRecord(ts, station, direction, values[0], values[1], weather, *flags, lineno))
    return IngestResult(records, rejects)


@dataclass
class CleaningSummary:
    implausible: dict[str, int] = field(default_factory=lambda: {c: 0 for c in CHANNELS})
    interpolated: dict[str, int] = field(default_factory=lambda: {c: 0 for c in CHANNELS})
    duplicates: int = 0
    missing_rows: int = 0
    gap_rows: int = 0
    gap_runs: int = 0

    @property
    def edits(self) -> int:
        return sum(self.implausible.values()) + sum(self.interpolated.values()) + self.duplicates

    def rows(self) -> list[tuple[str, str, int]]:
        out = [("implausible", c, n) for c, n in self.implausible.items()]
        out += [("interpolated", c, n) for c, n in self.interpolated.items()]
        out += [("duplicates", "all", self.duplicates), ("missing_rows", "all", self.missing_rows)]
        out += [("gap_rows", "all", self.gap_rows), ("gap_runs", "all", self.gap_runs)]
        return out

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["item", "channel", "count"])
            w.writerows(self.rows())

    def to_dict(self) -> dict:
        return {
            "implausible": dict(self.implausible),
            "interpolated": dict(self.interpolated),
            "duplicates": self.duplicates,
            "missing_rows": self.missing_rows,
            "gap_rows": self.gap_rows,
            "gap_runs": self.gap_runs,
            "edits": self.edits,
        }


@dataclass
class FusedSeries:
    """Both directions of one station on a fixed interval grid.

    Gap rows carry NaN values and ``gap=True``; windows never span them.
    ``interpolated`` is an ``(n, 4)`` mask over ``CHANNELS``.
    """

    timestamps: np.ndarray  # datetime64[m]
    interval: int
    volume: np.ndarray
    speed: np.ndarray
    reverse_volume: np.ndarray
    reverse_speed: np.ndarray
    weather: np.ndarray  # int codes into WEATHER_LEVELS
    one_way: np.ndarray
    double_capacity: np.ndarray
    gap: np.ndarray
    interpolated: np.ndarray
    station_id: str = ""
    summary: CleaningSummary | None = None

    def __post_init__(self):
        n = len(self.timestamps)
        for name in ("volume", "speed", "reverse_volume", "reverse_speed", "weather", "one_way", "double_capacity", "gap"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {n}")
        if self.interpolated.shape != (n, 4):
            raise ValueError("interpolated mask must be (n, 4)")
        if n > 1:
            steps = np.diff(self.timestamps).astype(np.int64)
            if np.any(steps != self.interval):
                raise ValueError(f"timestamps are not strictly spaced at {self.interval} minutes")

    def __len__(self) -> int:
        return len(self.timestamps)

    def channel(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def datetimes(self) -> list[dt.datetime]:
        return self.timestamps.astype("datetime64[m]").astype(dt.datetime).tolist()

    def weather_names(self) -> list[str]:
        return [WEATHER_LEVELS[k] for k in self.weather]

    def copy(self) -> "FusedSeries":
        return replace(
            self,
            **{
                name: getattr(self, name).copy()
                for name in (
                    "timestamps", "volume", "speed", "reverse_volume", "reverse_speed",
                    "weather", "one_way", "double_capacity", "gap", "interpolated",
                )
            },
        )

    def to_records(self) -> list[TrafficRecord]:
        """Expand to per-direction records (gap rows are omitted).

        Reverse-direction flags mirror the target's: a closed target lane
        (``one_way``) means the reverse direction has double capacity and
        vice versa.
        """
        out = []
        for k, ts in enumerate(self.datetimes()):
            if self.gap[k]:
                continue
            w = WEATHER_LEVELS[self.weather[k]]
            ow, dc = bool(self.one_way[k]), bool(self.double_capacity[k])
            out.append(TrafficRecord(ts, self.station_id, "target", float(self.volume[k]), float(self.speed[k]), w, ow, dc))
            out.append(
                TrafficRecord(ts, self.station_id, "reverse", float(self.reverse_volume[k]), float(self.reverse_speed[k]), w, dc, ow)
            )
        return out

    def write_records_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in self.to_records():
                w.writerow([
                    r.timestamp.isoformat(timespec="minutes"), r.station_id, r.direction,
                    repr(r.volume), repr(r.speed), r.weather, int(r.one_way), int(r.double_capacity),
                ])

    def write_csv(self, path: str | Path) -> None:
        """Write the fused series itself (one row per interval)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", *CHANNELS, "weather", "one_way", "double_capacity", "gap",
                        *(f"interp_{c}" for c in CHANNELS)])
            for k, ts in enumerate(self.datetimes()):
                w.writerow([
                    ts.isoformat(timespec="minutes"),
                    *(repr(float(getattr(self, c)[k])) for c in CHANNELS),
                    WEATHER_LEVELS[self.weather[k]], int(self.one_way[k]), int(self.double_capacity[k]),
                    int(self.gap[k]), *(int(x) for x in self.interpolated[k]),
                ])

    @classmethod
    def read_csv(cls, path: str | Path, interval: int, station_id: str = "") -> "FusedSeries":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        ts = np.array([np.datetime64(r["timestamp"], "m") for r in rows], dtype="datetime64[m]")
        arr = lambda key, typ=float: np.array([typ(r[key]) for r in rows])  # noqa: E731
        return cls(
            ts, interval,
            *(arr(c) for c in CHANNELS),
            np.array([WEATHER_LEVELS.index(r["weather"]) for r in rows], dtype=np.int64),
            arr("one_way", int).astype(bool), arr("double_capacity", int).astype(bool), arr("gap", int).astype(bool),
            np.array([[int(r[f"interp_{c}"]) for c in CHANNELS] for r in rows], dtype=bool).reshape(len(rows), 4),
            station_id,
        )


def fuse(records: list[TrafficRecord], interval: int = BASE_INTERVAL) -> tuple[FusedSeries, int]:
    """Place records of both directions on a complete interval grid.

    Returns the raw fused series (missing values NaN) and the number of
    duplicate (timestamp, direction) records that were ignored.
    """
    stations = {r.station_id for r in records}
    if len(stations) > 1:
        raise DataError(f"records from several stations: {sorted(stations)}")
    if not records:
        empty = np.array([], dtype="datetime64[m]")
        z = np.zeros(0)
        return FusedSeries(empty, interval, z, z, z, z, np.zeros(0, np.int64), z.astype(bool), z.astype(bool),
                           z.astype(bool), np.zeros((0, 4), bool)), 0
    t0 = min(r.timestamp for r in records)
    t1 = max(r.timestamp for r in records)
    n = int((t1 - t0).total_seconds() // 60 // interval) + 1
    ts = np.datetime64(t0, "m") + np.arange(n) * np.timedelta64(interval, "m")
    vals = np.full((n, 4), np.nan)
    weather = np.full(n, -1, dtype=np.int64)
    one_way = np.zeros(n, bool)
    double = np.zeros(n, bool)
    seen = set()
    dups = 0
    for r in records:
        k = int((r.timestamp - t0).total_seconds() // 60 // interval)
        key = (k, r.direction)
        if key in seen:
            dups += 1
            continue
        seen.add(key)
        col = 0 if r.direction == "target" else 2
        vals[k, col], vals[k, col + 1] = r.volume, r.speed
        if r.direction == "target" or weather[k] < 0:
            weather[k] = WEATHER_LEVELS.index(r.weather)
        if r.direction == "target":
            one_way[k], double[k] = r.one_way, r.double_capacity
        elif (k, "target") not in seen:
            one_way[k], double[k] = r.double_capacity, r.one_way
    # carry weather into rows that had no record at all
    last = WEATHER_LEVELS.index("sunny")
    for k in range(n):
        if weather[k] < 0:
            weather[k] = last
        last = weather[k]
    series = FusedSeries(
        ts, interval, vals[:, 0], vals[:, 1], vals[:, 2], vals[:, 3], weather, one_way, double,
        np.isnan(vals).any(axis=1), np.zeros((n, 4), bool), next(iter(stations)),
    )
    return series, dups


def _nan_runs(x: np.ndarray) -> list[tuple[int, int]]:
    """Half-open index ranges of consecutive NaNs."""
    isn = np.isnan(x)
    runs, k, n = [], 0, len(x)
    while k < n:
        if isn[k]:
            j = k
            while j < n and isn[j]:
                j += 1
            runs.append((k, j))
            k = j
        else:
            k += 1
    return runs


def clean(
    data: list[TrafficRecord] | FusedSeries,
    max_speed: float = MAX_SPEED_KMH,
    max_volume: float = MAX_VOLUME_VPH,
    max_gap: int = MAX_INTERP_GAP,
) -> FusedSeries:
    """Remove implausible readings, bridge short gaps, mark long ones.

    Runs of at most ``max_gap`` missing intervals with valid neighbours on
    both sides are linearly interpolated per channel; anything else becomes a
    gap row. Accepts raw records or an already fused series (idempotent).
    """
    summary = CleaningSummary()
    if isinstance(data, FusedSeries):
        series = data.copy()
    else:
        series, summary.duplicates = fuse(list(data))
        summary.missing_rows = int(np.isnan(np.column_stack([series.volume, series.reverse_volume])).all(axis=1).sum())
    limits = {"volume": max_volume, "speed": max_speed, "reverse_volume": max_volume, "reverse_speed": max_speed}
    for j, ch in enumerate(CHANNELS):
        x = series.channel(ch)
        bad = np.isfinite(x) & ((x > limits[ch]) | (x < 0))
        summary.implausible[ch] = int(bad.sum())
        x[bad] = np.nan
        for a, b in _nan_runs(x):
            if b - a <= max_gap and a > 0 and b < len(x):
                left, right = x[a - 1], x[b]
                frac = np.arange(1, b - a + 1) / (b - a + 1)
                x[a:b] = left + (right - left) * frac
                series.interpolated[a:b, j] = True
                summary.interpolated[ch] += b - a
    vals = np.column_stack([series.channel(c) for c in CHANNELS])
    series.gap = np.isnan(vals).any(axis=1)
    summary.gap_rows = int(series.gap.sum())
    summary.gap_runs = len(_nan_runs(np.where(series.gap, np.nan, 0.0)))
    series.summary = summary
    return series


def aggregate(series: FusedSeries, factor: int) -> FusedSeries:
    """Aggregate consecutive blocks of ``factor`` intervals.

    Volume is the block mean of equivalent hourly volumes; speed is the
    volume-weighted mean (plain mean when the block carries no vehicles).
    Flags are OR-ed, weather takes the block majority (earliest wins ties).
    A block with any gap row becomes a gap. A trailing partial block is
    dropped.
    """
    if factor < 1:
        raise ValueError("aggregation factor must be positive")
    width = series.interval * factor
    if 1440 % width:
        raise ValueError(f"a {width}-minute interval does not divide the day")
    if len(series) and (series.timestamps[0].astype("datetime64[m]").astype(np.int64) % width):
        raise DataError(f"series starts at {series.timestamps[0]}, not aligned to the {width}-minute grid")
    nb = len(series) // factor
    n = nb * factor
    shape = (nb, factor)
    out = {}
    for vol_name, spd_name in (("volume", "speed"), ("reverse_volume", "reverse_speed")):
        vol = series.channel(vol_name)[:n].reshape(shape)
        spd = series.channel(spd_name)[:n].reshape(shape)
        vsum = vol.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            weighted = (vol * spd).sum(axis=1) / vsum
        out[vol_name] = vol.mean(axis=1)
        out[spd_name] = np.where(vsum > 0, weighted, spd.mean(axis=1))
    gap = series.gap[:n].reshape(shape).any(axis=1)
    for c in CHANNELS:
        out[c][gap] = np.nan
    wblocks = series.weather[:n].reshape(shape)
    weather = np.empty(nb, dtype=np.int64)
    for b in range(nb):
        counts = np.bincount(wblocks[b], minlength=len(WEATHER_LEVELS))
        best = counts.max()
        weather[b] = next(w for w in wblocks[b] if counts[w] == best)
    return FusedSeries(
        series.timestamps[:n:factor].copy(), width,
        out["volume"], out["speed"], out["reverse_volume"], out["reverse_speed"], weather,
        series.one_way[:n].reshape(shape).any(axis=1), series.double_capacity[:n].reshape(shape).any(axis=1),
        gap, series.interpolated[:n].reshape(nb, factor, 4).any(axis=1), series.station_id,
    )


# -- synthetic data ---------------------------------------------------------

SYNTHETIC_KEYS = ("days", "base_volume", "capacity", "noise", "holiday_file", "seed", "start")


@dataclass
class SyntheticConfig:
    days: int = 180
    base_volume: float = 900.0
    capacity: float = 2200.0
    noise: float = 0.5
    holidays: HolidayCalendar | None = None
    start: dt.date = dt.date(2018, 3, 1)
    station_id: str = "SYN-1"
    free_flow_speed: float = 90.0

    def __post_init__(self):
        if self.days <= 0:
            raise DataError("days must be positive")
        if self.base_volume <= 0 or self.capacity <= 0:
            raise DataError("base_volume and capacity must be positive")
        if self.noise < 0:
            raise DataError("noise must be non-negative")

    @classmethod
    def from_file(cls, path: str | Path) -> tuple["SyntheticConfig", int]:
        """Read a ``key = value`` file; returns the config and its seed.

        Keys: days, base_volume, capacity, noise, holiday_file, seed, start.
        Blank lines and ``#`` comments are ignored.
        """
        kv = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in SYNTHETIC_KEYS:
                raise DataError(f"{path}:{lineno}: unknown key {key!r}")
            kv[key] = val
        seed = int(kv.pop("seed", 0))
        args = {}
        if "days" in kv:
            args["days"] = int(kv["days"])
        for key in ("base_volume", "capacity", "noise"):
            if key in kv:
                args[key] = float(kv[key])
        if "start" in kv:
            args["start"] = dt.date.fromisoformat(kv["start"])
        if "holiday_file" in kv:
            hf = Path(kv["holiday_file"])
            if not hf.is_absolute():
                hf = Path(path).parent / hf
            args["holidays"] = HolidayCalendar.from_csv(hf)
        return cls(**args), seed


def default_holidays(start: dt.date, days: int) -> HolidayCalendar:
    """A deterministic stand-in calendar.

    Contains a 13-day new-year block from March 21, a handful of fixed
    single-day holidays, and a Saturday holiday every fourth ISO week so that
    holidays directly after the Thursday/Friday weekend recur often.
    """
    entries = {}
    fixed = ((2, 11), (6, 4), (6, 5), (9, 20), (10, 30), (12, 25))
    for k in range(days + 1):
        d = start + dt.timedelta(days=k)
        in_new_year = dt.date(d.year, 3, 21) <= d <= dt.date(d.year, 4, 2)
        if in_new_year or (d.month, d.day) in fixed:
            entries[d] = "calendar"
        elif d.isoweekday() == 6 and d.isocalendar()[1] % 4 == 0:
            entries[d] = "calendar"
    return HolidayCalendar(entries)


def _target_daily(hour: np.ndarray) -> np.ndarray:
    # return traffic: broad afternoon peak at 16:00, quiet before dawn
    return 0.15 + 0.95 * np.exp(-0.5 * ((hour - 16.0) / 3.2) ** 2) + 0.35 * np.exp(-0.5 * ((hour - 10.0) / 1.8) ** 2)


def _reverse_daily(hour: np.ndarray) -> np.ndarray:
    # outbound traffic leads: morning peak
    return 0.15 + 0.95 * np.exp(-0.5 * ((hour - 10.0) / 3.0) ** 2) + 0.3 * np.exp(-0.5 * ((hour - 18.0) / 2.5) ** 2)


# Monday..Sunday; return flow peaks Friday/Saturday, outbound Wednesday/Thursday
_TARGET_WEEKLY = np.array([0.95, 0.85, 0.9, 1.0, 1.4, 1.3, 1.0])
_REVERSE_WEEKLY = np.array([0.9, 0.95, 1.3, 1.4, 0.95, 0.85, 0.9])


def _day_multipliers(days: list[dt.date], holidays: HolidayCalendar) -> tuple[np.ndarray, np.ndarray]:
    tgt = np.ones(len(days))
    rev = np.ones(len(days))
    for k, d in enumerate(days):
        cls = holidays.classify(d)
        prev = holidays.classify(d - dt.timedelta(days=1))
        nxt = holidays.classify(d + dt.timedelta(days=1))
        if cls == "calendar":
            tgt[k] *= 1.2
            rev[k] *= 1.1
            if prev == "weekend":
                # holiday right after a weekend: the return wave moves here
                tgt[k] *= 1.45
        if cls == "weekend" and nxt == "calendar":
            tgt[k] *= 0.8  # travellers stay one more day
        if nxt == "calendar" and cls != "calendar":
            rev[k] *= 1.35  # holiday eve outbound surge
    return tgt, rev


def generate_synthetic(cfg: SyntheticConfig, seed: int = 0) -> FusedSeries:
    """Synthetic 5-minute two-direction series with calendar structure.

    Volume = base x daily profile x weekly profile x holiday effects, plus
    AR(1) + white noise whose scale is ``cfg.noise`` times that mean, clipped
    at 0. Speed
    falls with the volume/capacity ratio and bad weather. When ``noise`` is 0
    the series is a deterministic function of the calendar (weather stays
    sunny) and the seed is unused.
    """
    rng = np.random.default_rng(seed)
    holidays = cfg.holidays or default_holidays(cfg.start, cfg.days)
    per_day = 1440 // BASE_INTERVAL
    n = cfg.days * per_day
    t0 = np.datetime64(cfg.start, "m")
    ts = t0 + np.arange(n) * np.timedelta64(BASE_INTERVAL, "m")
    days = [cfg.start + dt.timedelta(days=k) for k in range(cfg.days)]
    day_idx = np.repeat(np.arange(cfg.days), per_day)
    hour = np.tile(np.arange(per_day) * BASE_INTERVAL / 60.0, cfg.days)
    dow = np.array([d.isoweekday() - 1 for d in days])[day_idx]
    tgt_day, rev_day = _day_multipliers(days, holidays)

    tgt_mean = cfg.base_volume * _target_daily(hour) * _TARGET_WEEKLY[dow] * tgt_day[day_idx]
    rev_mean = cfg.base_volume * _reverse_daily(hour) * _REVERSE_WEEKLY[dow] * rev_day[day_idx]

    # lane reallocation: on heavy days one direction gets both lanes
    heavy_tgt = np.repeat(tgt_day * _TARGET_WEEKLY[[d.isoweekday() - 1 for d in days]] >= 1.6, per_day)
    heavy_rev = np.repeat(rev_day * _REVERSE_WEEKLY[[d.isoweekday() - 1 for d in days]] >= 1.75, per_day)
    double = heavy_tgt & (hour >= 14) & (hour < 20)
    one_way = heavy_rev & ~heavy_tgt & (hour >= 8) & (hour < 12)

    if cfg.noise > 0:
        weather_day = np.empty(cfg.days, dtype=np.int64)
        for k, d in enumerate(days):
            winter = season_of(d.month) == 4
            probs = (0.15, 0.65, 0.2) if winter else (0.12, 0.88, 0.0)
            weather_day[k] = rng.choice(3, p=probs)
        weather = weather_day[day_idx]
        noise = np.empty((2, n))
        for r in range(2):
            white = rng.standard_normal(n)
            innov = rng.standard_normal(n)
            # stationary unit-variance AR(1), phi = 0.8
            ar = lfilter([0.6], [1.0, -0.8], innov)
            noise[r] = 0.45 * ar + 0.9 * white
        speed_noise = rng.standard_normal((2, n))
    else:
        weather = np.full(n, WEATHER_LEVELS.index("sunny"), dtype=np.int64)
        noise = np.zeros((2, n))
        speed_noise = np.zeros((2, n))

    weather_factor = np.array([0.9, 1.0, 0.75])[weather]
    vf = cfg.free_flow_speed

    def speeds(vol, cap, sn):
        ratio = vol / cap
        s = vf * weather_factor / (1.0 + ratio**4) * np.exp(0.3 * cfg.noise * sn)
        return np.clip(s, 5.0, 130.0)

    tgt_vol = np.maximum(tgt_mean + tgt_mean * cfg.noise * noise[0], 0.0)
    rev_vol = np.maximum(rev_mean + rev_mean * cfg.noise * noise[1], 0.0)
    # a closed direction carries no traffic
    tgt_vol[one_way] = 0.0
    rev_vol[double] = 0.0
    tgt_spd = speeds(tgt_vol, np.where(double, 2 * cfg.capacity, cfg.capacity), speed_noise[0])
    rev_spd = speeds(rev_vol, np.where(one_way, 2 * cfg.capacity, cfg.capacity), speed_noise[1])
    tgt_spd[one_way] = 0.0
    rev_spd[double] = 0.0

    return FusedSeries(
        ts, BASE_INTERVAL, tgt_vol, tgt_spd, rev_vol, rev_spd, weather, one_way, double,
        np.zeros(n, bool), np.zeros((n, 4), bool), cfg.station_id,
    )
