"""Feasible confidence intervals and t-statistics for realized variance estimators.

All three transforms standardize with ``variance_factor * quarticity / n``:

raw
    ``point +- z sqrt(vf q / n)``
log
    ``exp(ln point +- z sqrt(vf q / (n point^2)))``
sqrt
    ``(sqrt(point) +- z sqrt(vf q / (4 n point)))^2``, lower root floored at 0

The variance factor is 2 for RV, ``Lambda`` or ``Lambda_m`` for the range
estimators.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Hashable

import numpy as np
from scipy.special import ndtri

__all__ = [
    "TRANSFORMS",
    "EstimateRecord",
    "confidence_interval",
    "normal_quantile",
    "t_statistic",
]

TRANSFORMS = ("raw", "log", "sqrt")


@dataclass(frozen=True)
class EstimateRecord:
    day_id: Hashable
    estimator: str
    point: float
    quarticity: float
    n: int
    variance_factor: float
    transform: str
    ci_low: float
    ci_high: float
    level: float

    def as_dict(self) -> dict:
        return asdict(self)


def normal_quantile(p):
    """Standard normal quantile (``scipy.special.ndtri``)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("probability must lie in (0, 1)")
    q = ndtri(p)
    return float(q) if q.ndim == 0 else q


def _check(point, quarticity, n, variance_factor, transform):
    if transform not in TRANSFORMS:
        raise ValueError(f"unknown transform {transform!r}; expected one of {TRANSFORMS}")
    if np.any(np.asarray(quarticity) <= 0):
        raise ValueError("quarticity must be positive")
    if np.any(np.asarray(n) < 1):
        raise ValueError("n must be a positive integer")
    if np.any(np.asarray(variance_factor) <= 0):
        raise ValueError("variance_factor must be positive")
    p = np.asarray(point)
    if transform in ("log", "sqrt") and np.any(p <= 0):
        raise ValueError(f"point must be positive under the {transform} transform")
    if transform == "raw" and np.any(p < 0):
        raise ValueError("point must be nonnegative")


def _scale(point, quarticity, n, variance_factor, transform):
    """Standard error on the transformed scale."""
    v = variance_factor * quarticity / n
    if transform == "raw":
        return np.sqrt(v)
    if transform == "log":
        return np.sqrt(v) / point
    return np.sqrt(v / (4.0 * point))


def confidence_interval(
    point: float,
    quarticity: float,
    n: int,
    variance_factor: float,
    transform: str = "log",
    level: float = 0.95,
    *,
    day_id: Hashable = None,
    estimator: str = "",
) -> EstimateRecord:
    """Two-sided feasible confidence interval at ``level`` under ``transform``."""
    _check(point, quarticity, n, variance_factor, transform)
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    z = normal_quantile(0.5 * (1.0 + level))
    h = float(z * _scale(point, quarticity, n, variance_factor, transform))
    if transform == "raw":
        lo, hi = point - h, point + h
    elif transform == "log":
        # exp overflows only for absurd half-widths; the band is then unbounded above
        lo, hi = point * math.exp(-h), (point * math.exp(h) if h < 700.0 else math.inf)
    else:
        root = math.sqrt(point)
        lo, hi = max(root - h, 0.0) ** 2, (root + h) ** 2
    # guard against rounding pushing the point outside a near-zero-width band
    lo, hi = min(lo, point), max(hi, point)
    return EstimateRecord(
        day_id=day_id,
        estimator=estimator,
        point=float(point),
        quarticity=float(quarticity),
        n=int(n),
        variance_factor=float(variance_factor),
        transform=transform,
        ci_low=float(lo),
        ci_high=float(hi),
        level=float(level),
    )


def t_statistic(point, truth, quarticity, n, variance_factor, transform: str = "log"):
    """Feasible t-statistic of ``point`` against ``truth``; vectorizes over numpy arrays."""
    _check(point, quarticity, n, variance_factor, transform)
    point = np.asarray(point, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if transform in ("log", "sqrt") and np.any(truth <= 0):
        raise ValueError(f"truth must be positive under the {transform} transform")
    se = _scale(point, quarticity, n, variance_factor, transform)
    if transform == "raw":
        diff = point - truth
    elif transform == "log":
        diff = np.log(point) - np.log(truth)
    else:
        diff = np.sqrt(point) - np.sqrt(truth)
    t = diff / se
    return float(t) if t.ndim == 0 else t
