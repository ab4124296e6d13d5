"""Point estimators of integrated variance and quarticity.

Return-based: :func:`rv`, :func:`rq`.  Range-based: :func:`rrv`, :func:`rrq`
with the normalizing constants taken from a :class:`~rangevol.moments.LambdaTable`
in one of three modes:

``asymptotic``
    continuous-record constants ``lambda_2``, ``lambda_4``;
``homogeneous``
    one ``m`` for every interval, ``lambda_{r,m}``;
``per_interval``
    each interval scaled by its own ``lambda_{r,m_i}``.

Sums of squares and fourth powers use ``math.fsum``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .moments import INF, LambdaTable

__all__ = [
    "MODES",
    "RangeSeries",
    "ReturnSeries",
    "blockwise_variance",
    "blockwise_variance_factor",
    "range_of_block",
    "ranges_from_grid",
    "rq",
    "rrq",
    "rrv",
    "rrv_xi",
    "rv",
]

MODES = ("homogeneous", "per_interval", "asymptotic")
_DURATION_TOL = 1e-12


def _normalize_mode(mode: str) -> str:
    mode = mode.replace("-", "_").lower()
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    return mode


def _durations(durations, n: int) -> np.ndarray:
    if durations is None:
        return np.full(n, 1.0 / n)
    d = np.asarray(durations, dtype=float)
    if d.shape != (n,):
        raise ValueError(f"durations must have length {n}")
    if np.any(d <= 0):
        raise ValueError("durations must be positive")
    if abs(math.fsum(d) - 1.0) > _DURATION_TOL:
        raise ValueError(f"durations must sum to 1, got {math.fsum(d)!r}")
    return d


@dataclass(frozen=True)
class RangeSeries:
    """Per-interval observed ranges ``s_i`` with increment counts ``m_i``."""

    day_id: Hashable
    ranges: np.ndarray
    counts: np.ndarray
    durations: np.ndarray | None = None

    def __post_init__(self):
        s = np.asarray(self.ranges, dtype=float)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("ranges must be a nonempty 1-d sequence")
        if np.any(~np.isfinite(s)) or np.any(s < 0):
            raise ValueError("ranges must be finite and nonnegative")
        c = np.asarray(self.counts)
        if c.shape != s.shape:
            raise ValueError("counts and ranges must have equal length")
        if np.any(c != np.round(c)) or np.any(c < 1):
            raise ValueError("counts must be positive integers (assign m_i = 1 to empty intervals first)")
        object.__setattr__(self, "ranges", s)
        object.__setattr__(self, "counts", c.astype(np.int64))
        object.__setattr__(self, "durations", _durations(self.durations, s.size))

    @property
    def n(self) -> int:
        return int(self.ranges.size)

    @classmethod
    def from_prices(cls, log_prices: Sequence[float], n: int, day_id: Hashable = 0) -> "RangeSeries":
        """Split an equidistant grid of ``m n + 1`` log-prices into ``n`` blocks of ``m`` increments."""
        p = np.asarray(log_prices, dtype=float)
        mn = p.size - 1
        if n < 1 or mn < n or mn % n:
            raise ValueError(f"{p.size} prices cannot be split into {n} equal intervals")
        return cls(day_id, ranges_from_grid(p, n), np.full(n, mn // n))


@dataclass(frozen=True)
class ReturnSeries:
    """Per-interval log-returns ``r_i``."""

    day_id: Hashable
    returns: np.ndarray
    durations: np.ndarray | None = None

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim != 1 or r.size < 1:
            raise ValueError("returns must be a nonempty 1-d sequence")
        if np.any(~np.isfinite(r)):
            raise ValueError("returns must be finite")
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "durations", _durations(self.durations, r.size))

    @property
    def n(self) -> int:
        return int(self.returns.size)

    @classmethod
    def from_prices(cls, log_prices: Sequence[float], n: int, day_id: Hashable = 0) -> "ReturnSeries":
        p = np.asarray(log_prices, dtype=float)
        mn = p.size - 1
        if n < 1 or mn < n or mn % n:
            raise ValueError(f"{p.size} prices cannot be split into {n} equal intervals")
        return cls(day_id, np.diff(p[:: mn // n]))


# ---------------------------------------------------------------------------
# ranges


def range_of_block(prices: Sequence[float], start: int, stop: int) -> float:
    """``max - min`` of ``prices[start..stop]`` (both ends included), in one pass."""
    if stop < start:
        raise ValueError(f"empty block: stop={stop} < start={start}")
    it = iter(prices[start : stop + 1])
    try:
        lo = hi = float(next(it))
    except StopIteration:
        raise ValueError(f"empty block [{start}, {stop}]") from None
    for x in it:
        if x > hi:
            hi = float(x)
        elif x < lo:
            lo = float(x)
    return hi - lo


def ranges_from_grid(log_prices, bounds) -> np.ndarray:
    """Ranges of consecutive blocks of a price grid.

    ``bounds`` is either the number of equal blocks ``n`` or the increasing
    grid indices of the interval boundaries (length ``n + 1``).  Block ``i``
    spans ``bounds[i] .. bounds[i+1]`` inclusive, so neighbours share their
    boundary point.  Works along the last axis of 1-d or 2-d input.
    """
    p = np.asarray(log_prices, dtype=float)
    size = p.shape[-1]
    if np.isscalar(bounds):
        n = int(bounds)
        if n < 1 or (size - 1) % n or size - 1 < n:
            raise ValueError(f"{size} grid points cannot be split into {n} equal blocks")
        b = np.arange(0, size, (size - 1) // n)
    else:
        b = np.asarray(bounds, dtype=np.int64)
        if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) < 1) or b[0] < 0 or b[-1] > size - 1:
            raise ValueError("bounds must be increasing grid indices")
    starts = b[:-1]
    hi = np.maximum.reduceat(p[..., : b[-1]], starts, axis=-1)
    lo = np.minimum.reduceat(p[..., : b[-1]], starts, axis=-1)
    right = p[..., b[1:]]
    return np.maximum(hi, right) - np.minimum(lo, right)


# ---------------------------------------------------------------------------
# return-based


def rv(rs: ReturnSeries) -> float:
    """Realized variance ``sum r_i^2``."""
    return math.fsum(rs.returns**2)


def rq(rs: ReturnSeries) -> float:
    """Realized quarticity ``(n/3) sum r_i^4``."""
    return rs.n / 3.0 * math.fsum(rs.returns**4)


# ---------------------------------------------------------------------------
# range-based


def _lambdas(rs: RangeSeries, table: LambdaTable, r: int, mode: str, m: int | None) -> np.ndarray | float:
    mode = _normalize_mode(mode)
    if mode == "asymptotic":
        return table.value(r, INF)
    if mode == "homogeneous":
        if m is None:
            uniq = np.unique(rs.counts)
            if uniq.size != 1:
                raise ValueError("homogeneous mode needs m when interval counts differ")
            m = int(uniq[0])
        return table.value(r, int(m))
    return table.values(r, rs.counts.tolist())


def rrv(rs: RangeSeries, table: LambdaTable, mode: str = "per_interval", m: int | None = None) -> float:
    """Realized range-based variance.

    ``asymptotic``: ``sum s_i^2 / lambda_2``; ``homogeneous``:
    ``sum s_i^2 / lambda_{2,m}``; ``per_interval``: ``sum s_i^2 / lambda_{2,m_i}``.
    """
    lam = _lambdas(rs, table, 2, mode, m)
    return math.fsum(rs.ranges**2 / lam)


def rrq(rs: RangeSeries, table: LambdaTable, mode: str = "per_interval", m: int | None = None) -> float:
    """Realized range-based quarticity ``n sum s_i^4 / lambda_{4,.}``, modes as :func:`rrv`."""
    lam = _lambdas(rs, table, 4, mode, m)
    return rs.n * math.fsum(rs.ranges**4 / lam)


def rrv_xi(rs: RangeSeries, table: LambdaTable, mode: str = "asymptotic") -> tuple[float, float]:
    """Range-based variance on an irregular partition.

    Returns the estimate (the :func:`rrv` formula; durations only enter the
    inference) and ``n sum s_i^4 / lambda_4``, which is consistent for the
    quarticity weighted by the derivative of the limiting quadratic-duration
    function.  For equidistant intervals the second output equals
    :func:`rrq`.
    """
    return rrv(rs, table, mode), rrq(rs, table, mode)


def blockwise_variance(rs: RangeSeries, table: LambdaTable) -> float:
    """Feasible ``n * var`` of the per-interval estimator: ``n sum Lambda_{m_i} s_i^4 / lambda_{4,m_i}``.

    Reduces to ``Lambda_m * rrq`` when every interval has the same ``m``.
    """
    ms = rs.counts.tolist()
    l2 = table.values(2, ms)
    l4 = table.values(4, ms)
    lam = l4 / l2**2 - 1.0
    return rs.n * math.fsum(lam * rs.ranges**4 / l4)


def blockwise_variance_factor(rs: RangeSeries, table: LambdaTable) -> float:
    """Effective variance factor ``blockwise_variance / rrq(per_interval)``.

    Undefined (raises) when every range is zero.
    """
    q = rrq(rs, table, "per_interval")
    if q <= 0:
        raise ValueError("all ranges are zero; variance factor undefined")
    return blockwise_variance(rs, table) / q
