"""Exogenous feature construction: calendar encodings, flags, normalization.

Two encoding modes produce the exogenous vector appended to every lag step:

cyclic (24 values)
    sin/cos of month/12, day/31, season/4, day-of-week/7, hour-288/288,
    hour/24 (12); flags 7-21, day-night, one-way, double-capacity (4);
    holiday one-hot (3); weather one-hot (3); reverse-direction V, S (2).
onehot (35 values)
    one-hot month (12), season (4), day-of-week (7), holiday (3),
    weather (3); the same 4 flags; reverse-direction V, S (2).

With the five lagged (V, S) pairs a window carries 34 or 45 input variables.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HOLIDAY_CLASSES = ("calendar", "weekend", "none")
WEATHER_LEVELS = ("rainy", "sunny", "snowy")
CHANNELS = ("volume", "speed", "reverse_volume", "reverse_speed")
ENCODINGS = ("cyclic", "onehot")

# Approximate local sunrise / sunset hours by month for the study latitude
# (~36 N); used for the day-night flag.
_SUNRISE = (7.0, 6.8, 6.3, 5.6, 5.1, 4.9, 5.1, 5.5, 5.9, 6.3, 6.7, 7.0)
_SUNSET = (17.1, 17.6, 18.1, 18.6, 19.1, 19.4, 19.3, 18.8, 18.1, 17.4, 16.9, 16.8)

# Iranian weekend days (isoweekday: Thursday=4, Friday=5).
DEFAULT_WEEKEND = (4, 5)


def encode_cyclic(index: int, period: int) -> tuple[float, float]:
    """Map a 1-based category index onto the unit circle (first index at angle 0)."""
    if period < 1 or not 1 <= index <= period:
        raise ValueError(f"cyclic index {index} outside 1..{period}")
    angle = 2.0 * math.pi * (index - 1) / period
    return math.sin(angle), math.cos(angle)


def encode_onehot(index: int, cardinality: int) -> np.ndarray:
    if cardinality < 1 or not 1 <= index <= cardinality:
        raise ValueError(f"one-hot index {index} outside 1..{cardinality}")
    out = np.zeros(cardinality)
    out[index - 1] = 1.0
    return out


def season_of(month: int) -> int:
    """1 spring (Mar-May), 2 summer, 3 fall, 4 winter (Dec-Feb)."""
    return ((month - 3) % 12) // 3 + 1


@dataclass(frozen=True)
class CalendarContext:
    month: int
    day: int
    season: int
    day_of_week: int  # 1 = Monday
    hour288: int
    hour: int  # 1..24
    is_7_21: bool
    is_day: bool
    holiday: str  # one of HOLIDAY_CLASSES
    weather: str  # one of WEATHER_LEVELS
    one_way: bool = False
    double_capacity: bool = False

    def __post_init__(self):
        ranges = {
            "month": (self.month, 12),
            "day": (self.day, 31),
            "season": (self.season, 4),
            "day_of_week": (self.day_of_week, 7),
            "hour288": (self.hour288, 288),
            "hour": (self.hour, 24),
        }
        for name, (val, hi) in ranges.items():
            if not 1 <= val <= hi:
                raise ValueError(f"{name}={val} outside 1..{hi}")
        if (self.hour288 - 1) // 12 + 1 != self.hour:
            raise ValueError(f"hour288={self.hour288} is not inside hour={self.hour}")
        if self.holiday not in HOLIDAY_CLASSES:
            raise ValueError(f"holiday class {self.holiday!r} not in {HOLIDAY_CLASSES}")
        if self.weather not in WEATHER_LEVELS:
            raise ValueError(f"weather {self.weather!r} not in {WEATHER_LEVELS}")


class HolidayCalendar:
    """Holiday classes by date.

    Dates listed in the calendar file take their class from the file; other
    dates falling on a weekend day are ``weekend``; everything else is
    ``none``.
    """

    def __init__(self, entries: dict[dt.date, str] | None = None, weekend: tuple[int, ...] = DEFAULT_WEEKEND):
        self.entries = dict(entries or {})
        self.weekend = tuple(weekend)
        for d, cls in self.entries.items():
            if cls not in ("calendar", "weekend"):
                raise ValueError(f"holiday class for {d} must be 'calendar' or 'weekend', got {cls!r}")

    def classify(self, day: dt.date) -> str:
        if day in self.entries:
            return self.entries[day]
        return "weekend" if day.isoweekday() in self.weekend else "none"

    @classmethod
    def from_csv(cls, path: str | Path, weekend: tuple[int, ...] = DEFAULT_WEEKEND) -> "HolidayCalendar":
        entries = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"date", "class"} <= set(reader.fieldnames):
                raise ValueError(f"{path}: holiday file needs header 'date,class'")
            for lineno, row in enumerate(reader, start=2):
                try:
                    day = dt.date.fromisoformat(row["date"].strip())
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad date {row['date']!r}") from exc
                entries[day] = row["class"].strip()
        return cls(entries, weekend)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["date", "class"])
            for d in sorted(self.entries):
                w.writerow([d.isoformat(), self.entries[d]])


def is_daytime(ts: dt.datetime) -> bool:
    h = ts.hour + ts.minute / 60.0
    return _SUNRISE[ts.month - 1] <= h < _SUNSET[ts.month - 1]


def calendar_context(
    ts: dt.datetime,
    holidays: HolidayCalendar,
    weather: str = "sunny",
    one_way: bool = False,
    double_capacity: bool = False,
) -> CalendarContext:
    """Calendar features for the interval starting at ``ts``."""
    return CalendarContext(
        month=ts.month,
        day=ts.day,
        season=season_of(ts.month),
        day_of_week=ts.isoweekday(),
        hour288=(ts.hour * 60 + ts.minute) // 5 + 1,
        hour=ts.hour + 1,
        is_7_21=7 <= ts.hour < 21,
        is_day=is_daytime(ts),
        holiday=holidays.classify(ts.date()),
        weather=weather,
        one_way=one_way,
        double_capacity=double_capacity,
    )


def exo_dim(mode: str) -> int:
    return {"cyclic": 24, "onehot": 35}[_check_mode(mode)]


def _check_mode(mode: str) -> str:
    if mode not in ENCODINGS:
        raise ValueError(f"encoding mode must be one of {ENCODINGS}, got {mode!r}")
    return mode


def feature_names(mode: str) -> list[str]:
    _check_mode(mode)
    flags = ["is_7_21", "is_day", "one_way", "double_capacity"]
    categorical = [f"holiday_{c}" for c in HOLIDAY_CLASSES] + [f"weather_{w}" for w in WEATHER_LEVELS]
    if mode == "cyclic":
        names = [
            f"{var}_{fn}"
            for var in ("month", "day", "season", "day_of_week", "hour288", "hour")
            for fn in ("sin", "cos")
        ]
        names += flags + categorical
    else:
        names = [f"month_{k}" for k in range(1, 13)]
        names += [f"season_{k}" for k in range(1, 5)]
        names += [f"day_of_week_{k}" for k in range(1, 8)]
        names += categorical + flags
    return names + ["reverse_volume", "reverse_speed"]


def build_calendar_features(ctx: CalendarContext, mode: str) -> np.ndarray:
    """Exogenous features without the trailing reverse-direction pair."""
    _check_mode(mode)
    flags = np.array([ctx.is_7_21, ctx.is_day, ctx.one_way, ctx.double_capacity], dtype=np.float64)
    holiday = encode_onehot(HOLIDAY_CLASSES.index(ctx.holiday) + 1, 3)
    weather = encode_onehot(WEATHER_LEVELS.index(ctx.weather) + 1, 3)
    if mode == "cyclic":
        cyc = []
        for idx, period in (
            (ctx.month, 12),
            (ctx.day, 31),
            (ctx.season, 4),
            (ctx.day_of_week, 7),
            (ctx.hour288, 288),
            (ctx.hour, 24),
        ):
            cyc.extend(encode_cyclic(idx, period))
        return np.concatenate([cyc, flags, holiday, weather])
    return np.concatenate(
        [
            encode_onehot(ctx.month, 12),
            encode_onehot(ctx.season, 4),
            encode_onehot(ctx.day_of_week, 7),
            holiday,
            weather,
            flags,
        ]
    )


def build_exo(ctx: CalendarContext, reverse: tuple[float, float], mode: str) -> np.ndarray:
    """Full exogenous vector: calendar block followed by normalized reverse (V, S)."""
    rev = np.asarray(reverse, dtype=np.float64)
    if rev.shape != (2,) or not np.all(np.isfinite(rev)):
        raise ValueError(f"reverse must be a finite (V, S) pair, got {reverse!r}")
    return np.concatenate([build_calendar_features(ctx, mode), rev])


@dataclass(frozen=True)
class Normalizer:
    """Per-channel min-max scaling fitted on a training range. Never clamps."""

    mins: dict[str, float]
    maxs: dict[str, float]

    def __post_init__(self):
        for ch in CHANNELS:
            if ch not in self.mins or ch not in self.maxs:
                raise ValueError(f"normalizer is missing channel {ch!r}")
            if not self.maxs[ch] > self.mins[ch]:
                raise ValueError(f"degenerate channel {ch!r}: max == min == {self.mins[ch]}")

    @classmethod
    def fit(cls, data: dict[str, np.ndarray]) -> "Normalizer":
        mins, maxs = {}, {}
        for ch in CHANNELS:
            x = np.asarray(data[ch], dtype=np.float64)
            x = x[np.isfinite(x)]
            if x.size == 0:
                raise ValueError(f"no training values for channel {ch!r}")
            mins[ch], maxs[ch] = float(x.min()), float(x.max())
        return cls(mins, maxs)

    def apply(self, channel: str, x):
        return (np.asarray(x, dtype=np.float64) - self.mins[channel]) / (self.maxs[channel] - self.mins[channel])

    def invert(self, channel: str, x):
        return np.asarray(x, dtype=np.float64) * (self.maxs[channel] - self.mins[channel]) + self.mins[channel]

    def to_dict(self) -> dict:
        return {"min": dict(self.mins), "max": dict(self.maxs)}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(dict(d["min"]), dict(d["max"]))
