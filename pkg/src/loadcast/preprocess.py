"""Weekly/daily pattern encoding and training-set assembly.

An hourly series is turned into overlapping (input, target) pairs: the input
is the standardized 168-hour week preceding a target day, extended with the
log10 level and calendar one-hots for that day; the target is the day's 24
hours encoded with the preceding week's mean and standard deviation.  The same
coding variables invert the network output back to physical units.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstantWeekError,
    IncompleteHistoryError,
    NonPositiveLevelError,
    NoTrainableSamplesError,
)

HOURS_PER_DAY = 24
HOURS_PER_WEEK = 168
#: weeks with population std below this carry no usable shape and are rejected
STD_FLOOR = 1e-6
#: raw extended-input length: 168 + 1 + 7 + 31 + 52
CALENDAR_SIZE = 7 + 31 + 52
EXTENDED_INPUT_SIZE = HOURS_PER_WEEK + 1 + CALENDAR_SIZE


@dataclass(frozen=True)
class HourlySeries:
    """One contiguous hourly history; ``missing[i]`` marks unusable hours.

    Timestamps are implicit: hour ``i`` is ``start + i hours``.  Missing
    entries hold NaN in ``values``.
    """

    series_id: str
    start: dt.datetime
    values: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        missing = np.asarray(self.missing, dtype=bool)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)
        if values.shape != missing.shape or values.ndim != 1:
            raise ValueError("values and missing_mask must be equal-length vectors")
        if self.start.minute or self.start.second or self.start.microsecond:
            raise ValueError("series must start on a whole hour")
        present = values[~missing]
        if present.size and (not np.all(np.isfinite(present)) or np.any(present <= 0)):
            raise ValueError("non-missing loads must be finite and strictly positive")

    def __len__(self) -> int:
        return self.values.shape[0]

    def timestamp(self, index: int) -> dt.datetime:
        return self.start + dt.timedelta(hours=index)

    @property
    def end(self) -> dt.datetime:
        """Timestamp of the last stored hour."""
        return self.timestamp(len(self) - 1)

    def day_start_index(self, day: dt.date) -> int:
        """Index of ``day`` 00:00 within the series (may be out of range)."""
        delta = dt.datetime.combine(day, dt.time()) - self.start
        hours = delta / dt.timedelta(hours=1)
        if hours != int(hours):
            raise ValueError("series does not start on a whole hour boundary")
        return int(hours)

    def window(self, start_index: int, length: int) -> np.ndarray:
        """Return ``length`` hours from ``start_index``; all must be present."""
        if start_index < 0 or start_index + length > len(self):
            raise IncompleteHistoryError(
                f"{self.series_id}: window [{start_index}, {start_index + length}) "
                f"outside stored range"
            )
        if self.missing[start_index : start_index + length].any():
            raise IncompleteHistoryError(
                f"{self.series_id}: window [{start_index}, {start_index + length}) "
                f"touches missing hours"
            )
        return self.values[start_index : start_index + length]


@dataclass(frozen=True)
class WeeklyPattern:
    """Standardized weekly input sequence (zero mean, unit population std)."""

    values: np.ndarray  # (168,)


@dataclass(frozen=True)
class CodingVariables:
    """Mean/std of the historical week, used to encode and decode days."""

    week_mean: float
    week_std: float


@dataclass(frozen=True)
class DailyPattern:
    """A day's 24 hours expressed in units of the preceding week."""

    values: np.ndarray  # (24,)


@dataclass(frozen=True)
class ExtendedInput:
    """Weekly pattern plus level and calendar one-hots for the target day."""

    week: WeeklyPattern
    level: float
    day_of_week: np.ndarray  # (7,)
    day_of_month: np.ndarray  # (31,)
    week_of_year: np.ndarray  # (52,)

    def calendar_vector(self) -> np.ndarray:
        return np.concatenate([self.day_of_week, self.day_of_month, self.week_of_year])

    def vector(self) -> np.ndarray:
        """Full concatenated form, length 259."""
        return np.concatenate([self.week.values, [self.level], self.calendar_vector()])


@dataclass(frozen=True)
class TrainingSample:
    input: ExtendedInput
    target: DailyPattern
    coding: CodingVariables
    series_id: str
    target_date: dt.date


def standardize_week(week) -> tuple[WeeklyPattern, CodingVariables]:
    """Standardize a 168-hour window; rejects (near-)constant weeks.

    Uses the population standard deviation so the output has unit variance
    exactly.
    """
    week = np.asarray(week, dtype=np.float64)
    if week.shape != (HOURS_PER_WEEK,):
        raise ValueError(f"weekly window must have {HOURS_PER_WEEK} hours")
    if not np.all(np.isfinite(week)):
        raise ValueError("weekly window contains non-finite values")
    mean = float(np.mean(week))
    std = float(np.std(week))
    if std < STD_FLOOR:
        raise ConstantWeekError(f"constant week (std {std:.3e} < {STD_FLOOR})")
    return WeeklyPattern((week - mean) / std), CodingVariables(mean, std)


def encode_day(day, coding: CodingVariables) -> DailyPattern:
    """Encode 24 hourly values with the preceding week's mean/std."""
    day = np.asarray(day, dtype=np.float64)
    if day.shape != (HOURS_PER_DAY,):
        raise ValueError(f"daily window must have {HOURS_PER_DAY} hours")
    if not np.all(np.isfinite(day)):
        raise ValueError("daily window contains non-finite values")
    return DailyPattern((day - coding.week_mean) / coding.week_std)


def decode_day(pattern, coding: CodingVariables) -> np.ndarray:
    """Invert :func:`encode_day`: map an encoded day back to physical units."""
    values = pattern.values if isinstance(pattern, DailyPattern) else np.asarray(pattern)
    return np.asarray(values, dtype=np.float64) * coding.week_std + coding.week_mean


def _one_hot(n: int, index: int) -> np.ndarray:
    out = np.zeros(n)
    out[index] = 1.0
    return out


def calendar_features(day: dt.date) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-hots for day-of-week (Monday=0), day-of-month, ISO week-of-year.

    ISO week 53 is folded into slot 52 to fit the 52-slot encoding.
    """
    week = min(day.isocalendar()[1], 52)
    return (
        _one_hot(7, day.weekday()),
        _one_hot(31, day.day - 1),
        _one_hot(52, week - 1),
    )


def build_extended_input(series: HourlySeries, target_date: dt.date) -> ExtendedInput:
    """Assemble the extended input pattern for forecasting ``target_date``."""
    day_start = series.day_start_index(target_date)
    week_values = series.window(day_start - HOURS_PER_WEEK, HOURS_PER_WEEK)
    pattern, coding = standardize_week(week_values)
    if coding.week_mean <= 0:
        raise NonPositiveLevelError(
            f"{series.series_id}: weekly mean {coding.week_mean} is not positive"
        )
    dow, dom, woy = calendar_features(target_date)
    return ExtendedInput(pattern, float(np.log10(coding.week_mean)), dow, dom, woy)


def build_sample(series: HourlySeries, target_date: dt.date) -> TrainingSample:
    """One (extended input, encoded target) pair for ``target_date``."""
    day_start = series.day_start_index(target_date)
    week_values = series.window(day_start - HOURS_PER_WEEK, HOURS_PER_WEEK)
    pattern, coding = standardize_week(week_values)
    if coding.week_mean <= 0:
        raise NonPositiveLevelError(
            f"{series.series_id}: weekly mean {coding.week_mean} is not positive"
        )
    dow, dom, woy = calendar_features(target_date)
    extended = ExtendedInput(pattern, float(np.log10(coding.week_mean)), dow, dom, woy)
    target = encode_day(series.window(day_start, HOURS_PER_DAY), coding)
    return TrainingSample(extended, target, coding, series.series_id, target_date)


@dataclass
class TrainingSet:
    """Per-series chronological sample lists built over many series."""

    by_series: dict[str, list[TrainingSample]] = field(default_factory=dict)

    def __len__(self) -> int:
        return sum(len(samples) for samples in self.by_series.values())

    def __iter__(self):
        for samples in self.by_series.values():
            yield from samples

    @property
    def series_ids(self) -> list[str]:
        return sorted(self.by_series)


def candidate_target_dates(series: HourlySeries, train_range=None) -> list[dt.date]:
    """All dates whose 168h input + 24h target windows fit in the series."""
    first_day = series.start.date()
    if dt.datetime.combine(first_day, dt.time()) < series.start:
        first_day += dt.timedelta(days=1)
    first_target = first_day + dt.timedelta(days=7)
    last_target = series.timestamp(len(series)).date() - dt.timedelta(days=1)
    if train_range is not None:
        lo, hi = train_range
        first_target = max(first_target, lo)
        last_target = min(last_target, hi)
    days = (last_target - first_target).days
    return [first_target + dt.timedelta(days=i) for i in range(days + 1)]


def build_training_set(series_list, train_range=None) -> TrainingSet:
    """Union of per-series sample sets, excluding windows that touch gaps.

    ``train_range`` is an inclusive (first_date, last_date) pair of target
    dates, or None for the full history.
    """
    out = TrainingSet()
    for series in series_list:
        samples = []
        for day in candidate_target_dates(series, train_range):
            try:
                samples.append(build_sample(series, day))
            except (IncompleteHistoryError, ConstantWeekError, NonPositiveLevelError):
                continue
        if samples:
            out.by_series[series.series_id] = samples
    if len(out) == 0:
        raise NoTrainableSamplesError("no trainable samples in the given range")
    return out
