"""Tick data to per-day range and return series.

Pipeline per day: :func:`filter_ticks` (irregular and outlying ticks),
:func:`count_increments` (the ``#r != 0`` and reversal-adjusted counts),
:func:`previous_tick_grid` (equidistant grid for returns) and
:func:`extract_range_series` (per-interval ranges and increment counts).

Time is seconds since midnight; the default session is 9:30 to 16:00.
Interval ``i`` owns the ticks in ``(t_{i-1}, t_i]`` and starts from the
previous-tick value at ``t_{i-1}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Hashable, Iterator

import numpy as np
import pandas as pd

from .errors import InputError
from .estimators import RangeSeries, ReturnSeries

logger = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_SESSION",
    "FilterConfig",
    "FilterReport",
    "PriceGrid",
    "TickSeries",
    "count_increments",
    "extract_range_series",
    "extract_return_series",
    "filter_ticks",
    "previous_tick_grid",
    "read_ticks_csv",
    "reversal_adjusted_count",
]

DEFAULT_SESSION = (9.5 * 3600.0, 16.0 * 3600.0)
RULES = ("unparseable", "zero-price", "out-of-session", "negative-spread", "outlier")


@dataclass(frozen=True)
class TickSeries:
    """Time-ordered ticks of one day; ``prices`` is the midquote when quotes are given."""

    day_id: Hashable
    times: np.ndarray
    prices: np.ndarray
    bid: np.ndarray | None = None
    ask: np.ndarray | None = None
    session: tuple[float, float] = DEFAULT_SESSION
    malformed: int = 0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.prices, dtype=float)
        if t.shape != p.shape or t.ndim != 1:
            raise ValueError("times and prices must be 1-d arrays of equal length")
        if np.any(np.diff(t) < 0):
            raise ValueError("tick times must be nondecreasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "prices", p)
        for name in ("bid", "ask"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != t.shape:
                    raise ValueError(f"{name} must match times in length")
                object.__setattr__(self, name, v)
        if (self.bid is None) != (self.ask is None):
            raise ValueError("bid and ask must be given together")
        if self.session[1] <= self.session[0]:
            raise ValueError("session close must be after open")

    @classmethod
    def from_quotes(cls, day_id, times, bid, ask, session=DEFAULT_SESSION, malformed: int = 0):
        bid = np.asarray(bid, dtype=float)
        ask = np.asarray(ask, dtype=float)
        return cls(day_id, times, 0.5 * (bid + ask), bid, ask, session, malformed)

    @property
    def has_quotes(self) -> bool:
        return self.bid is not None

    def __len__(self) -> int:
        return int(self.times.size)

    def _subset(self, keep: np.ndarray) -> "TickSeries":
        return replace(
            self,
            times=self.times[keep],
            prices=self.prices[keep],
            bid=None if self.bid is None else self.bid[keep],
            ask=None if self.ask is None else self.ask[keep],
            malformed=0,
        )


@dataclass(frozen=True)
class FilterConfig:
    """Filtering rules.

    The outlier rule drops ticks whose log-price is more than ``outlier_threshold``
    median absolute deviations from the centered rolling median of
    ``outlier_window`` neighbours.  The MAD is floored at the day's median
    absolute nonzero log-price change so that windows of constant prices do
    not flag every ordinary tick move.
    """

    session: tuple[float, float] | None = None
    outlier_window: int = 50
    outlier_threshold: float = 10.0
    outliers: bool = True


@dataclass
class FilterReport:
    day_id: Hashable
    raw_count: int
    kept_count: int
    dropped_by_rule: dict[str, int] = field(default_factory=dict)
    count_nonzero: int = 0
    count_reversal_adjusted: int = 0

    def check(self) -> None:
        """Raise ``ValueError`` when the count chain is broken."""
        ok = (
            self.kept_count <= self.raw_count
            and self.raw_count - sum(self.dropped_by_rule.values()) == self.kept_count
            and self.count_reversal_adjusted <= self.count_nonzero <= max(self.kept_count - 1, 0)
        )
        if not ok:
            raise ValueError(f"inconsistent filter counts for day {self.day_id}: {self.as_row()}")

    def as_row(self) -> dict:
        row = {"day_id": self.day_id, "raw_count": self.raw_count, "kept_count": self.kept_count}
        for rule in RULES:
            row[f"dropped_{rule}"] = self.dropped_by_rule.get(rule, 0)
        row["count_nonzero"] = self.count_nonzero
        row["count_reversal_adjusted"] = self.count_reversal_adjusted
        return row


# ---------------------------------------------------------------------------
# filtering


def _outlier_mask(prices: np.ndarray, window: int, threshold: float) -> np.ndarray:
    x = np.log(prices)
    if x.size < 3:
        return np.zeros(x.size, dtype=bool)
    s = pd.Series(x)
    w = window + 1
    med = s.rolling(w, center=True, min_periods=1).median()
    dev = (s - med).abs()
    mad = dev.rolling(w, center=True, min_periods=1).median().to_numpy()
    moves = np.abs(np.diff(x))
    moves = moves[moves > 0]
    floor = float(np.median(moves)) if moves.size else 0.0
    scale = np.maximum(mad, floor)
    return (dev.to_numpy() > threshold * scale) & (scale > 0)


def filter_ticks(raw: TickSeries, rules: FilterConfig | None = None) -> tuple[TickSeries, FilterReport]:
    """Drop irregular ticks and report counts per rule.

    Rules in order: nonpositive prices (``zero-price``), timestamps outside
    the session, quotes with bid > ask, then the outlier rule, which is
    repeated until no tick is flagged so that filtering is idempotent.
    """
    rules = rules or FilterConfig()
    session = rules.session or raw.session
    open_, close = session
    dropped = {rule: 0 for rule in RULES}
    dropped["unparseable"] = raw.malformed
    ts = replace(raw, session=session)

    def drop(mask: np.ndarray, rule: str) -> None:
        nonlocal ts
        k = int(mask.sum())
        if k:
            dropped[rule] += k
            ts = ts._subset(~mask)

    if ts.has_quotes:
        drop((ts.bid <= 0) | (ts.ask <= 0) | ~np.isfinite(ts.bid) | ~np.isfinite(ts.ask), "zero-price")
    else:
        drop((ts.prices <= 0) | ~np.isfinite(ts.prices), "zero-price")
    drop((ts.times < open_) | (ts.times > close), "out-of-session")
    if ts.has_quotes:
        drop(ts.bid > ts.ask, "negative-spread")
        ts = replace(ts, prices=0.5 * (ts.bid + ts.ask))
    if rules.outliers:
        while len(ts):
            mask = _outlier_mask(ts.prices, rules.outlier_window, rules.outlier_threshold)
            if not mask.any():
                break
            drop(mask, "outlier")
    ts = replace(ts, malformed=0)
    nz, adj = count_increments(ts)
    report = FilterReport(
        day_id=raw.day_id,
        raw_count=len(raw) + raw.malformed,
        kept_count=len(ts),
        dropped_by_rule=dropped,
        count_nonzero=nz,
        count_reversal_adjusted=adj,
    )
    return ts, report


# ---------------------------------------------------------------------------
# counting


def reversal_adjusted_count(prices) -> int:
    """Number of effective increments after removing repeats and collapsing reversals.

    Zero changes are dropped first.  On the remaining changes, a maximal run
    of ``k >= 2`` changes where each one exactly reverses the previous
    (equal magnitude, opposite sign) counts as 2 increments, not ``k``.
    """
    p = np.asarray(prices, dtype=float)
    if p.size < 2:
        return 0
    c = np.diff(p)
    c = c[c != 0]
    if c.size == 0:
        return 0
    linked = np.isclose(c[1:], -c[:-1], rtol=1e-9, atol=0.0)
    # a run of L reversal links covers L + 1 changes and counts as 2: subtract L - 1
    return int(c.size - np.count_nonzero(linked[1:] & linked[:-1]))


def count_increments(ts) -> tuple[int, int]:
    """``(#r != 0, reversal-adjusted count)`` for a :class:`TickSeries` or price array."""
    prices = ts.prices if isinstance(ts, TickSeries) else np.asarray(ts, dtype=float)
    if prices.size < 2:
        return 0, 0
    nonzero = int(np.count_nonzero(np.diff(prices)))
    return nonzero, reversal_adjusted_count(prices)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class PriceGrid:
    """Log-prices at ``n + 1`` grid times with per-interval increment counts."""

    day_id: Hashable
    times: np.ndarray
    log_prices: np.ndarray
    counts: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(self.log_prices.size - 1)

    def returns(self) -> ReturnSeries:
        return ReturnSeries(self.day_id, np.diff(self.log_prices))


def _grid_times(session: tuple[float, float], n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    open_, close = session
    return open_ + (close - open_) * np.arange(n + 1) / n


def _opening_index(ts: TickSeries, backfill_open: bool) -> int:
    if len(ts) == 0:
        raise InputError(f"day {ts.day_id}: no ticks")
    idx = int(np.searchsorted(ts.times, ts.session[0], side="right")) - 1
    if idx < 0:
        if not backfill_open:
            raise InputError(f"day {ts.day_id}: no tick at or before the session open")
        return 0
    return idx


def previous_tick_grid(ts: TickSeries, n: int, *, backfill_open: bool = False) -> PriceGrid:
    """Previous-tick sampling at ``n + 1`` equidistant times from open to close.

    Each grid time takes the latest tick at or before it.  With
    ``backfill_open`` a day whose first tick comes after the open uses that
    tick for the opening price instead of failing.
    """
    grid = _grid_times(ts.session, n)
    first = _opening_index(ts, backfill_open)
    idx = np.searchsorted(ts.times, grid, side="right") - 1
    idx = np.maximum(idx, first)
    return PriceGrid(ts.day_id, grid, np.log(ts.prices[idx]))


def extract_range_series(ts: TickSeries, n: int, *, backfill_open: bool = False) -> RangeSeries:
    """Per-interval log-price ranges and reversal-adjusted counts ``m_i`` (floored at 1)."""
    grid = _grid_times(ts.session, n)
    first = _opening_index(ts, backfill_open)
    logp = np.log(ts.prices)
    # ticks with times <= grid[i]
    cut = np.maximum(np.searchsorted(ts.times, grid, side="right"), first + 1)
    ranges = np.zeros(n)
    counts = np.ones(n, dtype=np.int64)
    for i in range(n):
        lo = cut[i] - 1  # carried previous-tick value
        hi = cut[i + 1]
        seg = logp[lo:hi]
        ranges[i] = seg.max() - seg.min()
        counts[i] = max(reversal_adjusted_count(ts.prices[lo:hi]), 1)
    return RangeSeries(ts.day_id, ranges, counts)


def extract_return_series(ts: TickSeries, n: int, *, backfill_open: bool = False) -> ReturnSeries:
    return previous_tick_grid(ts, n, backfill_open=backfill_open).returns()


# ---------------------------------------------------------------------------
# CSV input


def _parse_times(col: pd.Series, utc_offset: float = 0.0) -> pd.Series:
    """Seconds since midnight from ``HH:MM:SS[.f]`` strings, seconds, or epoch seconds.

    ``utc_offset`` (hours) is added to epoch values before reducing to time of day.
    """
    num = pd.to_numeric(col, errors="coerce")
    if num.notna().sum() >= col.notna().sum() and col.notna().any():
        epoch = num >= 86400
        return num.where(~epoch, (num + 3600.0 * utc_offset) % 86400)
    td = pd.to_timedelta(col.astype(str).str.strip(), errors="coerce")
    return td.dt.total_seconds()


def read_ticks_csv(
    path,
    *,
    quotes: bool = False,
    date_col: str = "date",
    time_col: str = "time",
    price_col: str = "price",
    bid_col: str = "bid",
    ask_col: str = "ask",
    delimiter: str = ",",
    session: tuple[float, float] = DEFAULT_SESSION,
    strict: bool = False,
    utc_offset: float = 0.0,
) -> Iterator[TickSeries]:
    """Read a tick CSV and yield one :class:`TickSeries` per date in file order.

    Rows whose time or price fields do not parse are counted in
    ``TickSeries.malformed`` and skipped; with ``strict`` they raise
    :class:`InputError` instead.  Numeric times of 86,400 or more are read
    as epoch seconds and shifted by ``utc_offset`` hours to local time of day.
    """
    cols = [date_col, time_col] + ([bid_col, ask_col] if quotes else [price_col])
    try:
        df = pd.read_csv(path, sep=delimiter, dtype=str, comment="#", skipinitialspace=True)
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read tick file {path}: {exc}") from exc
    except pd.errors.EmptyDataError:
        raise InputError(f"tick file {path} is empty") from None
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise InputError(f"{path}: missing columns {missing} (have {list(df.columns)})")
    if df.empty:
        raise InputError(f"tick file {path} has no rows")
    t = _parse_times(df[time_col], utc_offset)
    vals = {c: pd.to_numeric(df[c], errors="coerce") for c in cols[2:]}
    bad = t.isna() | df[date_col].isna()
    for v in vals.values():
        bad |= v.isna()
    if strict and bad.any():
        first = int(np.flatnonzero(bad.to_numpy())[0])
        raise InputError(f"{path}: unparseable row {first + 2}")
    if bad.any():
        logger.warning("%s: skipping %d unparseable rows", path, int(bad.sum()))
    frame = pd.DataFrame({"date": df[date_col].str.strip(), "t": t, **vals, "bad": bad})
    for day, g in frame.groupby("date", sort=False, dropna=True):
        good = g[~g["bad"]].sort_values("t", kind="stable")
        malformed = int(g["bad"].sum())
        times = good["t"].to_numpy(float)
        if quotes:
            yield TickSeries.from_quotes(
                day, times, good[bid_col].to_numpy(float), good[ask_col].to_numpy(float), session, malformed
            )
        else:
            yield TickSeries(day, times, good[price_col].to_numpy(float), session=session, malformed=malformed)
