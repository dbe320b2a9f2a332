"""Forecast quality metrics, interval diagnostics, and model comparison.

Percentage errors use PE = 100 (z - zhat) / z, so systematic over-prediction
shows up as negative MPE.  Interval quality combines empirical coverage with
the Winkler score, normalized by the mean test load.  Pairwise model
comparison uses a conditional predictive-ability test on daily loss
differentials with instruments [1, lagged differential]; rankings aggregate
per-series metric order.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import IncompleteHistoryError
from .network import HORIZON
from .preprocess import HOURS_PER_DAY, HourlySeries

#: CSV column sets for the two summary tables
TABLE1_COLUMNS = ("Cell type", "MAPE", "MdAPE", "IqrAPE", "RMSE", "MPE", "StdPE")
TABLE2_COLUMNS = ("Cell type", "% in PI", "% below PI", "% above PI",
                  "Winkler score")

#: minimum paired days for the predictive-ability test
GW_MIN_DAYS = 30


@dataclass(frozen=True)
class ForecastRecord:
    """One day-ahead forecast for one series, in MW."""

    series_id: str
    target_date: dt.date
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    model: str = ""

    def __post_init__(self):
        for name in ("point", "lower", "upper"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (HORIZON,):
                raise ValueError(f"{name} must hold {HORIZON} hourly values")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class PointMetrics:
    mape: float
    mdape: float
    iqr_ape: float
    rmse: float
    mpe: float
    std_pe: float


@dataclass(frozen=True)
class PiMetrics:
    pi_in: float
    pi_below: float
    pi_above: float
    winkler_normalized: float
    crossings: int


@dataclass(frozen=True)
class MetricsReport:
    mape: float
    mdape: float
    iqr_ape: float
    rmse: float
    mpe: float
    std_pe: float
    pi_in: float
    pi_below: float
    pi_above: float
    winkler_normalized: float
    pi_crossings: int
    n_hours: int
    n_days: int


def _paired(actual, forecast):
    actual = np.asarray(actual, dtype=np.float64)
    forecast = np.asarray(forecast, dtype=np.float64)
    if actual.shape != forecast.shape or actual.ndim != 1 or actual.size == 0:
        raise ValueError("need equal-length non-empty 1-d arrays")
    return actual, forecast


def percentage_errors(actual, forecast) -> np.ndarray:
    actual, forecast = _paired(actual, forecast)
    if np.any(actual <= 0.0):
        raise ValueError("percentage errors need strictly positive actuals")
    return 100.0 * (actual - forecast) / actual


def point_metrics(actual, forecast) -> PointMetrics:
    pe = percentage_errors(actual, forecast)
    ape = np.abs(pe)
    actual, forecast = _paired(actual, forecast)
    return PointMetrics(
        mape=float(np.mean(ape)),
        mdape=float(np.median(ape)),
        iqr_ape=float(np.percentile(ape, 75) - np.percentile(ape, 25)),
        rmse=float(np.sqrt(np.mean((actual - forecast) ** 2))),
        mpe=float(np.mean(pe)),
        std_pe=float(np.std(pe)),
    )


def winkler_scores(actual, lower, upper, alpha: float) -> np.ndarray:
    """Per-hour interval scores on raw bounds, crossings included as-is."""
    actual = np.asarray(actual, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    width = upper - lower
    below = np.where(actual < lower, (2.0 / alpha) * (lower - actual), 0.0)
    above = np.where(actual > upper, (2.0 / alpha) * (actual - upper), 0.0)
    return width + below + above


def pi_metrics(actual, lower, upper, alpha: float,
               mean_test_load: float) -> PiMetrics:
    actual, lower = _paired(actual, lower)
    _, upper = _paired(actual, upper)
    if mean_test_load <= 0.0:
        raise ValueError("mean test load must be positive")
    scores = winkler_scores(actual, lower, upper, alpha)
    n = actual.size
    # each hour lands in exactly one bucket even when bounds cross
    below_mask = actual < lower
    above_mask = (actual > upper) & ~below_mask
    below = int(np.sum(below_mask))
    above = int(np.sum(above_mask))
    inside = n - below - above
    return PiMetrics(
        pi_in=100.0 * inside / n,
        pi_below=100.0 * below / n,
        pi_above=100.0 * above / n,
        winkler_normalized=float(np.mean(scores)) / mean_test_load,
        crossings=int(np.sum(lower > upper)),
    )


@dataclass(frozen=True)
class GWResult:
    statistic: float
    p_value: float
    degenerate: bool
    n: int


def gw_test(losses_a, losses_b, direction: str = "a_better") -> GWResult:
    """One-sided conditional predictive-ability test on daily losses.

    ``direction="a_better"`` asks whether the first loss series is the more
    accurate one (negative mean differential).  A zero-variance differential
    cannot discriminate: p = 1 with the degenerate flag set.
    """
    a, b = _paired(losses_a, losses_b)
    if direction == "b_better":
        a, b = b, a
    elif direction != "a_better":
        raise ValueError("direction must be 'a_better' or 'b_better'")
    n = a.size
    if n < GW_MIN_DAYS:
        raise ValueError(f"need at least {GW_MIN_DAYS} paired days, got {n}")
    d = a - b
    # relative floor: a constant offset between float arrays leaves ulp-level
    # noise in d, which must still count as zero variance
    scale = float(np.max(np.abs(d)))
    if scale == 0.0 or float(np.std(d)) <= 1e-12 * scale:
        return GWResult(statistic=float("nan"), p_value=1.0, degenerate=True, n=n)
    # instruments [1, d_{t-1}] applied to d_t
    z = np.column_stack([d[1:], d[:-1] * d[1:]])
    zbar = z.mean(axis=0)
    cov = np.cov(z, rowvar=False, ddof=1)
    try:
        solved = np.linalg.solve(cov, zbar)
    except np.linalg.LinAlgError:
        return GWResult(statistic=float("nan"), p_value=1.0, degenerate=True, n=n)
    statistic = float(z.shape[0] * (zbar @ solved))
    two_sided = float(stats.chi2.sf(statistic, df=2))
    if float(np.mean(d)) < 0.0:
        p = two_sided / 2.0
    else:
        p = 1.0 - two_sided / 2.0
    return GWResult(statistic=statistic, p_value=p, degenerate=False, n=n)


@dataclass(frozen=True)
class RankingReport:
    mean_ranks: dict[str, float]
    first_places: dict[str, int]
    tied_series: int


def rank_models(table: dict[str, dict[str, float]]) -> RankingReport:
    """Per-series ascending metric ranks; ties broken by model label."""
    models = sorted(table)
    if not models:
        raise ValueError("empty table")
    series_keys = [frozenset(table[m]) for m in models]
    if any(k != series_keys[0] for k in series_keys) or not series_keys[0]:
        raise ValueError("table must cover every model x series pair")
    series = sorted(series_keys[0])
    ranks = {m: [] for m in models}
    first_places = {m: 0 for m in models}
    tied = 0
    for s in series:
        values = [table[m][s] for m in models]
        if len(set(values)) < len(values):
            tied += 1
        ordered = sorted(models, key=lambda m: (table[m][s], m))
        for position, m in enumerate(ordered, start=1):
            ranks[m].append(position)
        first_places[ordered[0]] += 1
    mean_ranks = {m: float(np.mean(ranks[m])) for m in models}
    return RankingReport(mean_ranks=mean_ranks, first_places=first_places,
                         tied_series=tied)


# -- pairing forecasts with stored actuals ---------------------------------


def day_actual(series: HourlySeries, day: dt.date) -> np.ndarray | None:
    """The day's 24 stored values, or None if absent or incomplete."""
    try:
        return series.window(series.day_start_index(day), HOURS_PER_DAY)
    except IncompleteHistoryError:
        return None


def sort_records(records) -> list[ForecastRecord]:
    return sorted(records, key=lambda r: (r.series_id, r.target_date))


def collect_pairs(records, series_by_id: dict[str, HourlySeries]):
    """Flatten records into aligned hourly arrays, skipping days without a
    complete stored actual.  Returns (actual, point, lower, upper)."""
    actuals, points, lowers, uppers = [], [], [], []
    for rec in sort_records(records):
        actual = day_actual(series_by_id[rec.series_id], rec.target_date)
        if actual is None:
            continue
        actuals.append(actual)
        points.append(rec.point)
        lowers.append(rec.lower)
        uppers.append(rec.upper)
    if not actuals:
        raise ValueError("no records with complete actuals to evaluate")
    return (np.concatenate(actuals), np.concatenate(points),
            np.concatenate(lowers), np.concatenate(uppers))


def daily_loss_series(records, series_by_id: dict[str, HourlySeries]):
    """Mean absolute error per calendar day, averaged across series.

    Returns (sorted dates, losses) for the predictive-ability test; days
    without any complete actual are dropped.
    """
    by_date: dict[dt.date, list[float]] = {}
    for rec in sort_records(records):
        actual = day_actual(series_by_id[rec.series_id], rec.target_date)
        if actual is None:
            continue
        by_date.setdefault(rec.target_date, []).append(
            float(np.mean(np.abs(actual - rec.point))))
    dates = sorted(by_date)
    losses = np.array([float(np.mean(by_date[d])) for d in dates])
    return dates, losses


def evaluate_forecasts(records, series_by_id: dict[str, HourlySeries],
                       alpha: float = 0.1) -> MetricsReport:
    """Full metric report over all records with complete actuals."""
    actual, point, lower, upper = collect_pairs(records, series_by_id)
    pm = point_metrics(actual, point)
    pim = pi_metrics(actual, lower, upper, alpha,
                     mean_test_load=float(np.mean(actual)))
    return MetricsReport(
        mape=pm.mape, mdape=pm.mdape, iqr_ape=pm.iqr_ape, rmse=pm.rmse,
        mpe=pm.mpe, std_pe=pm.std_pe,
        pi_in=pim.pi_in, pi_below=pim.pi_below, pi_above=pim.pi_above,
        winkler_normalized=pim.winkler_normalized, pi_crossings=pim.crossings,
        n_hours=actual.size, n_days=actual.size // HOURS_PER_DAY,
    )
