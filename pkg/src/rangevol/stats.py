"""Descriptive statistics and time-series diagnostics for daily estimate series."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "SeriesSummary",
    "acf",
    "annualize",
    "correlation",
    "signature_curve",
    "summarize",
]


@dataclass(frozen=True)
class SeriesSummary:
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    min: float
    max: float
    count: int

    def as_dict(self) -> dict:
        return asdict(self)


def _as_series(x, name: str = "series") -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if np.any(~np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def summarize(series: Sequence[float]) -> SeriesSummary:
    """Mean, unbiased variance, skewness, raw (non-excess) kurtosis, min and max.

    Skewness and kurtosis are the third and fourth central sample moments
    divided by the matching power of the (biased) standard deviation.

    Raises
    ------
    ValueError
        Fewer than two observations, or a constant series (skewness and
        kurtosis undefined).
    """
    x = _as_series(series)
    if x.size < 2:
        raise ValueError("need at least two observations")
    mean = float(np.mean(x))
    d = x - mean
    m2 = float(np.mean(d**2))
    if m2 == 0.0:
        raise ValueError("constant series: skewness and kurtosis are undefined")
    skew = float(np.mean(d**3) / m2**1.5)
    kurt = float(np.mean(d**4) / m2**2)
    return SeriesSummary(
        mean=min(max(mean, float(x.min())), float(x.max())),
        variance=float(np.sum(d**2) / (x.size - 1)),
        skewness=skew,
        kurtosis=kurt,
        min=float(x.min()),
        max=float(x.max()),
        count=int(x.size),
    )


def correlation(a: Sequence[float], b: Sequence[float]) -> float:
    """Pearson correlation of two equal-length nonconstant series."""
    x = _as_series(a, "a")
    y = _as_series(b, "b")
    if x.size != y.size:
        raise ValueError("series must have equal length")
    if x.size < 2:
        raise ValueError("need at least two observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation undefined for a constant series")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def acf(series: Sequence[float], max_lag: int) -> tuple[np.ndarray, float]:
    """Sample autocorrelations at lags ``1..max_lag`` and the ``2/sqrt(T)`` Bartlett band.

    Uses the full-sample mean and the lag-0 sum of squares as denominator.
    """
    x = _as_series(series)
    T = x.size
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if max_lag >= T:
        raise ValueError(f"max_lag={max_lag} must be smaller than the series length {T}")
    d = x - x.mean()
    c0 = float(np.dot(d, d))
    if c0 == 0.0:
        raise ValueError("autocorrelation undefined for a constant series")
    coef = np.array([np.dot(d[:-k], d[k:]) / c0 for k in range(1, max_lag + 1)])
    return np.clip(coef, -1.0, 1.0), 2.0 / math.sqrt(T)


def signature_curve(estimates: Mapping[int, Sequence[float]]) -> dict[int, float]:
    """Sample mean of the daily estimates at each sampling frequency ``n``."""
    out = {}
    for n in sorted(estimates):
        x = _as_series(estimates[n], f"estimates[{n}]")
        if x.size < 1:
            raise ValueError(f"no days at frequency {n}")
        out[int(n)] = float(np.mean(x))
    return out


def annualize(values, days: int = 252, percent: bool = True):
    """Daily decimal variance to annualized (percentage-squared when ``percent``) variance."""
    factor = days * (1e4 if percent else 1.0)
    return np.asarray(values, dtype=float) * factor
