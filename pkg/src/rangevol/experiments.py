"""Monte Carlo studies of the range-based estimators.

* :func:`run_coverage_study` - finite-sample distribution of feasible
  t-statistics under the log-OU volatility model;
* :func:`run_efficiency_study` - var(RRV_m) / var(RV) on scaled Brownian motion;
* :func:`run_irregular_coverage` - interval coverage on an irregular partition;
* :func:`run_joint_correlation_study` - asymptotic correlation of RV and RRV_m errors;
* :func:`kernel_density` and :func:`ks_distance` for summarizing t-statistics.

Simulations are split into chunks of days; every day has its own random
substream so results do not depend on chunking or thread count.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from . import _rng
from .estimators import ranges_from_grid
from .inference import TRANSFORMS, normal_quantile, t_statistic
from .moments import LambdaTable, build_lambda_table, implied_correlation, simulate_joint_covariance
from .simulate import DEFAULT_SV, SvScenario, constant_sigma_prices, simulate_sv_days

__all__ = [
    "CoverageReport",
    "CoverageRow",
    "EfficiencyRow",
    "LEVELS",
    "kernel_density",
    "ks_distance",
    "run_coverage_study",
    "run_efficiency_study",
    "run_irregular_coverage",
    "run_joint_correlation_study",
    "tstat_moments",
]

LEVELS = (0.90, 0.95, 0.99)
_CHUNK_ELEMENTS = 4_000_000


def ks_distance(samples) -> float:
    """One-sample Kolmogorov-Smirnov distance to the standard normal CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    k = x.size
    if k == 0:
        raise ValueError("no samples")
    cdf = ndtr(x)
    i = np.arange(1, k + 1)
    return float(max(np.max(i / k - cdf), np.max(cdf - (i - 1) / k)))


def tstat_moments(t) -> tuple[float, float, float, float]:
    """Mean, sample std, skewness and raw kurtosis; degenerate samples give std 0."""
    t = np.asarray(t, dtype=float)
    mean = float(t.mean())
    if t.size < 2:
        return mean, 0.0, math.nan, math.nan
    d = t - mean
    m2 = float(np.mean(d**2))
    std = float(np.sqrt(np.sum(d**2) / (t.size - 1)))
    if m2 == 0.0:
        return mean, 0.0, math.nan, math.nan
    return mean, std, float(np.mean(d**3) / m2**1.5), float(np.mean(d**4) / m2**2)


def kernel_density(samples, grid) -> np.ndarray:
    """Gaussian kernel density with Silverman's bandwidth ``1.06 std k^(-1/5)``."""
    x = np.asarray(samples, dtype=float)
    g = np.asarray(grid, dtype=float)
    if x.size < 2 or np.unique(x).size < 2:
        raise ValueError("kernel density needs at least two distinct samples")
    h = 1.06 * float(np.std(x, ddof=1)) * x.size ** (-0.2)
    out = np.zeros(g.shape)
    flat = out.reshape(-1)
    gf = g.reshape(-1)
    step = max(1, _CHUNK_ELEMENTS // max(gf.size, 1))
    for lo in range(0, x.size, step):
        u = (gf[:, None] - x[None, lo : lo + step]) / h
        flat += np.exp(-0.5 * u * u).sum(axis=1)
    return out / (x.size * h * math.sqrt(2.0 * math.pi))


# ---------------------------------------------------------------------------
# coverage


@dataclass
class CoverageRow:
    n: int
    m: int
    transform: str
    reps: int
    mean: float
    std: float
    skewness: float
    kurtosis: float
    coverage: dict[float, float]
    ks: float

    def as_dict(self) -> dict:
        d = asdict(self)
        cov = d.pop("coverage")
        for level, v in cov.items():
            d[f"coverage_{level:.2f}"] = v
        return d


@dataclass
class CoverageReport:
    scenario: dict
    rows: list[CoverageRow]
    tstats: dict[tuple[int, int, str], np.ndarray] = field(default_factory=dict, repr=False)

    def row(self, n: int, m: int, transform: str) -> CoverageRow:
        for r in self.rows:
            if (r.n, r.m, r.transform) == (n, m, transform):
                return r
        raise KeyError((n, m, transform))


def _required_table(ms: Iterable[int], table: LambdaTable | None, seed: int) -> LambdaTable:
    if table is not None:
        return table
    grid = sorted({int(m) for m in ms})
    return build_lambda_table(grid, paths=1_000_000, seed=seed)


def _rows_per_chunk(width: int) -> int:
    return max(1, _CHUNK_ELEMENTS // max(width, 1))


def run_coverage_study(
    grid: Sequence[tuple[int, int]],
    transforms: Iterable[str] = ("raw", "log"),
    reps: int = 10_000,
    seed: int = 0,
    *,
    theta: float = DEFAULT_SV[0],
    omega: float = DEFAULT_SV[1],
    eta: float = DEFAULT_SV[2],
    substeps: int = 1,
    table: LambdaTable | None = None,
    levels: Sequence[float] = LEVELS,
) -> CoverageReport:
    """Distribution of feasible t-statistics of RRV_m against true IV.

    For each ``(n, m)`` simulate ``reps`` SV days with ``m n`` returns,
    compute RRV_m and RRQ_m with homogeneous ``m`` and standardize
    ``RRV_m - IV`` by ``Lambda_m RRQ_m / n`` under each transform.
    Without ``table`` the needed ``lambda_{r,m}`` are simulated with
    10^6 paths.
    """
    transforms = list(dict.fromkeys(transforms))
    for tr in transforms:
        if tr not in TRANSFORMS:
            raise ValueError(f"unknown transform {tr!r}")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    table = _required_table([m for _, m in grid], table, seed)
    rows: list[CoverageRow] = []
    tstats: dict[tuple[int, int, str], np.ndarray] = {}
    for n, m in grid:
        n, m = int(n), int(m)
        try:
            scen = SvScenario(theta, omega, eta, mn=n * m, n=n, substeps=substeps, seed=seed, days=reps)
            lam2, lam4 = table.value(2, m), table.value(4, m)
            vf = table.variance_factor(m).value
            prices, iv, _ = simulate_sv_days(scen, chunk=_rows_per_chunk(n * m * substeps))
        except (ValueError, LookupError) as exc:
            raise type(exc)(f"(n={n}, m={m}): {exc}") from exc
        s = ranges_from_grid(prices, n)
        point = (s**2).sum(axis=1) / lam2
        quart = n * (s**4).sum(axis=1) / lam4
        for tr in transforms:
            t = np.asarray(t_statistic(point, iv, quart, n, vf, tr), dtype=float).reshape(-1)
            tstats[(n, m, tr)] = t
            mean, std, skew, kurt = tstat_moments(t)
            cov = {float(lv): float(np.mean(np.abs(t) <= normal_quantile(0.5 * (1 + lv)))) for lv in levels}
            rows.append(CoverageRow(n, m, tr, int(t.size), mean, std, skew, kurt, cov, ks_distance(t)))
    scenario = {"theta": theta, "omega": omega, "eta": eta, "substeps": substeps, "reps": reps, "seed": seed}
    return CoverageReport(scenario, rows, tstats)


# ---------------------------------------------------------------------------
# efficiency


@dataclass
class EfficiencyRow:
    m: int
    n: int
    reps: int
    var_rv: float
    var_rrv: float
    ratio: float
    implied_lambda: float
    lambda_m: float
    target: float

    def as_dict(self) -> dict:
        return asdict(self)


def run_efficiency_study(
    m_list: Sequence[int],
    n: int,
    reps: int,
    seed: int = 0,
    *,
    sigma: float = 1.0,
    table: LambdaTable | None = None,
) -> list[EfficiencyRow]:
    """Sample variance ratio var(RRV_m) / var(RV) on constant-sigma days.

    RV uses the ``n + 1`` interval endpoints of the same path that feeds
    RRV_m, so the ratio is paired.  The theoretical target is ``Lambda_m / 2``.
    """
    table = _required_table(m_list, table, seed)
    out = []
    for m in m_list:
        m = int(m)
        mn = n * m
        lam2 = table.value(2, m)
        rrv_v = np.empty(reps)
        rv_v = np.empty(reps)
        step = _rows_per_chunk(mn)
        for lo in range(0, reps, step):
            k = min(step, reps - lo)
            p = constant_sigma_prices(sigma, mn, k, seed, start=lo)
            s = ranges_from_grid(p, n)
            rrv_v[lo : lo + k] = (s**2).sum(axis=1) / lam2
            rv_v[lo : lo + k] = (np.diff(p[:, ::m], axis=1) ** 2).sum(axis=1)
        var_rv = float(np.var(rv_v, ddof=1))
        var_rrv = float(np.var(rrv_v, ddof=1))
        ratio = var_rrv / var_rv
        lam_m = table.variance_factor(m).value if m > 1 else 2.0
        out.append(EfficiencyRow(m, n, reps, var_rv, var_rrv, ratio, 2.0 * ratio, lam_m, lam_m / 2.0))
    return out


# ---------------------------------------------------------------------------
# irregular partition


def run_irregular_coverage(
    n: int,
    reps: int,
    seed: int = 0,
    *,
    sigma: float = 1.0,
    points_per_unit: int = 2,
    weights: Sequence[float] | None = None,
    table: LambdaTable,
    transform: str = "log",
    level: float = 0.95,
) -> dict:
    """Coverage of per-interval range intervals on an irregular partition.

    Interval ``i`` spans ``points_per_unit * w_i`` fine steps of one
    equidistant constant-sigma path, with ``w_i = i`` by default, so both
    the durations and the counts ``m_i`` vary.  The feasible variance is
    the blockwise ``n sum Lambda_{m_i} s_i^4 / lambda_{4,m_i}``.
    """
    w = np.arange(1, n + 1) if weights is None else np.asarray(weights)
    counts = np.maximum(np.round(points_per_unit * w).astype(np.int64), 1)
    bounds = np.concatenate([[0], np.cumsum(counts)])
    total = int(bounds[-1])
    durations = counts / total
    l2 = table.values(2, counts.tolist())
    l4 = table.values(4, counts.tolist())
    lam = l4 / l2**2 - 1.0
    z = normal_quantile(0.5 * (1.0 + level))
    t_all = np.empty(reps)
    step = _rows_per_chunk(total)
    for lo in range(0, reps, step):
        k = min(step, reps - lo)
        p = np.zeros((k, total + 1))
        for i in range(k):
            inc = _rng.substream(seed, _rng.IRREGULAR, lo + i).standard_normal(total)
            np.cumsum(inc * (sigma / math.sqrt(total)), out=p[i, 1:])
        s = ranges_from_grid(p, bounds)
        point = (s**2 / l2).sum(axis=1)
        v = n * (lam * s**4 / l4).sum(axis=1)
        t_all[lo : lo + k] = t_statistic(point, sigma**2, v, n, 1.0, transform)
    h_deriv = n * np.sum(durations**2)
    return {
        "n": n,
        "reps": reps,
        "level": level,
        "transform": transform,
        "coverage": float(np.mean(np.abs(t_all) <= z)),
        "quadratic_duration_factor": float(h_deriv),
        "tstats": t_all,
    }


# ---------------------------------------------------------------------------
# joint RV / RRV covariance


def run_joint_correlation_study(m_list: Sequence[int], paths: int, seed: int = 0, *, table: LambdaTable | None = None):
    """Off-diagonal element of the joint RV/RRV_m conditional covariance and the implied correlation."""
    table = _required_table(m_list, table, seed)
    rows = []
    for m in m_list:
        est = simulate_joint_covariance(int(m), paths, seed)
        lam_m = table.variance_factor(int(m)).value if m > 1 else 2.0
        rows.append(
            {
                "m": int(m),
                "cov_term": est.value,
                "std_error": est.std_error,
                "lambda_m": lam_m,
                "correlation": implied_correlation(est.value, lam_m),
            }
        )
    return rows
