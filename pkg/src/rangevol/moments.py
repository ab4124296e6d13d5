"""Moment constants of the range of Brownian motion.

The range of a standard Brownian motion over the unit interval, observed
either continuously or on ``m + 1`` equidistant points, has moments

    lambda_r     = E[s_W^r]           (closed form)
    lambda_{r,m} = E[s_{W,m}^r]       (no closed form; simulated)

The bias-corrected range estimators divide by ``lambda_{2,m}`` and their CLT
variance factor is ``Lambda_m = lambda_{4,m} / lambda_{2,m}**2 - 1``.  This
module computes and simulates those constants and keeps them in a
:class:`LambdaTable` that can be cached to a small CSV file.

Random numbers come from PCG64 substreams keyed by ``(seed, m, block)``; the
block size depends only on ``m``, so results do not depend on the number of
worker threads.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma, zeta

from . import _rng
from .errors import MissingLambdaError, TablePersistenceError

__all__ = [
    "INF",
    "LAMBDA2",
    "LAMBDA4",
    "LAMBDA_ORDERS",
    "LambdaEntry",
    "LambdaTable",
    "MCEstimate",
    "VarianceFactor",
    "build_lambda_table",
    "default_m_grid",
    "feller_range_density",
    "gaussian_abs_moment",
    "implied_correlation",
    "load_table",
    "parkinson_lambda",
    "simulate_joint_covariance",
    "simulate_lambda_rm",
    "simulate_range_moments",
    "simulate_variance_factor",
    "variance_factor",
]

INF = math.inf
LAMBDA_ORDERS = (1, 2, 4)

_APERY = 1.2020569031595942853997381615114499907649862923405  # zeta(3)
LAMBDA2 = 4.0 * math.log(2.0)
LAMBDA4 = 9.0 * _APERY

TABLE_FORMAT_VERSION = 1
TABLE_ENV_VAR = "RANGE_VOL_TABLE"

# standardized x below which Feller's density is < 1e-200; the alternating
# series only produces cancellation noise there
# below this standardized range the theta-dual series is used
_DENSITY_SWITCH = 1.5
_BLOCK_ELEMENTS = 1 << 20
_MIN_PATHS = 1000


class MCEstimate(NamedTuple):
    value: float
    std_error: float


class LambdaEntry(NamedTuple):
    value: float
    std_error: float
    paths: int


@dataclass(frozen=True)
class VarianceFactor:
    """CLT variance factor ``(lambda4 - lambda2**2) / lambda2**2``."""

    lambda2: float
    lambda4: float
    value: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "value", self.lambda4 / self.lambda2**2 - 1.0)


# ---------------------------------------------------------------------------
# analytic constants


def gaussian_abs_moment(r: float) -> float:
    """E|Z|^r for a standard normal Z; equals lambda_{r,1}."""
    if r == 2:
        return 1.0
    if r == 4:
        return 3.0
    return float(2.0 ** (r / 2.0) * gamma((r + 1.0) / 2.0) / math.sqrt(math.pi))


def parkinson_lambda(r: float) -> float:
    """r-th moment of the range of standard Brownian motion on [0, 1].

    ``lambda_r = 4/sqrt(pi) (1 - 4/2^r) 2^(r/2) Gamma((r+1)/2) zeta(r-1)``.
    The product ``(1 - 4/2^r) zeta(r-1)`` is 0 * inf at r = 2; the limit gives
    ``lambda_2 = 4 ln 2``.  ``lambda_4 = 9 zeta(3)``.
    """
    r = float(r)
    if not r >= 1.0:
        raise ValueError(f"moment order must be >= 1, got {r}")
    if r == 2.0:
        return LAMBDA2
    if r == 4.0:
        return LAMBDA4
    # -expm1 keeps (1 - 2^(2-r)) accurate close to r = 2
    factor = -math.expm1((2.0 - r) * math.log(2.0))
    return float(
        4.0 / math.sqrt(math.pi) * factor * 2.0 ** (r / 2.0) * gamma((r + 1.0) / 2.0) * zeta(r - 1.0)
    )


def variance_factor(lambda2: float, lambda4: float) -> VarianceFactor:
    """Build the variance factor from second and fourth range moments.

    Raises
    ------
    ValueError
        If ``lambda4 <= lambda2**2``; a nondegenerate range always has
        positive variance, so this signals a corrupted table.
    """
    if not (lambda2 > 0 and lambda4 > 0):
        raise ValueError("moments must be positive")
    if not lambda4 > lambda2**2:
        raise ValueError(
            f"lambda4={lambda4!r} <= lambda2**2={lambda2 ** 2!r}: degenerate or corrupted moments"
        )
    return VarianceFactor(float(lambda2), float(lambda4))


def feller_range_density(x: float, delta: float = 1.0, tol: float = 1e-12) -> float:
    """Density of the range of standard Brownian motion over an interval of length ``delta``.

    With ``u = x / sqrt(delta)`` the density is ``f(u) / sqrt(delta)`` where::

        f(u) = 8 sum_j (-1)^(j-1) j^2 phi(j u)                                  (u >= 1.5)
             = (8 / u) sum_k ((2k-1)^2 pi^2 / u^4 - 1 / u^2) exp(-(2k-1)^2 pi^2 / (2 u^2))   (u < 1.5)

    The second form is the Poisson-summation dual of the first; it avoids
    the cancellation of the alternating series near the origin.  Terms are
    added until the next one drops below ``tol`` times the running sum, with
    at least three terms.
    """
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    sd = math.sqrt(delta)
    u = x / sd
    if u < _DENSITY_SWITCH:
        def term(k):
            a2 = ((2 * k - 1) * math.pi) ** 2
            return (a2 / u**4 - 1.0 / u**2) * math.exp(-0.5 * a2 / (u * u))

        scale = 8.0 / u
    else:
        def term(j):
            return (-1.0) ** (j - 1) * j * j * math.exp(-0.5 * (j * u) ** 2)

        scale = 8.0 / math.sqrt(2.0 * math.pi)
    total = 0.0
    j = 1
    while True:
        total += term(j)
        nxt = abs(term(j + 1))
        if nxt == 0.0 or (j >= 3 and nxt < tol * abs(total)):
            break
        j += 1
    return max(scale * total / sd, 0.0)


# ---------------------------------------------------------------------------
# simulation


def _check_paths(paths: int) -> None:
    if paths < _MIN_PATHS:
        raise ValueError(f"paths must be >= {_MIN_PATHS}, got {paths}")


def _walk_ranges(m: int, paths: int, seed: int, workers: int | None = None):
    """Ranges and endpoints of ``paths`` discrete walks with ``m`` N(0, 1/m) steps.

    Each walk starts at 0, so the grid has m + 1 points.
    """
    m = int(m)
    if m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    per_block = max(1, _BLOCK_ELEMENTS // m)
    n_blocks = -(-paths // per_block)
    scale = 1.0 / math.sqrt(m)

    def run(k: int):
        size = min(per_block, paths - k * per_block)
        z = _rng.substream(seed, _rng.LAMBDA, m, k).standard_normal((size, m))
        np.cumsum(z, axis=1, out=z)
        hi = np.maximum(z.max(axis=1), 0.0)
        lo = np.minimum(z.min(axis=1), 0.0)
        return (hi - lo) * scale, z[:, -1] * scale

    blocks = _rng.ordered_map(run, range(n_blocks), workers)
    ranges = np.concatenate([b[0] for b in blocks])
    ends = np.concatenate([b[1] for b in blocks])
    return ranges, ends


def simulate_range_moments(
    m: int,
    paths: int,
    seed: int,
    orders: Sequence[int] = LAMBDA_ORDERS,
    workers: int | None = None,
) -> dict[int, MCEstimate]:
    """Simulate ``lambda_{r,m}`` for several orders from one set of walks."""
    _check_paths(paths)
    ranges, _ = _walk_ranges(m, paths, seed, workers)
    out = {}
    for r in orders:
        x = ranges**r
        out[int(r)] = MCEstimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(paths)))
    return out


def simulate_lambda_rm(
    r: int,
    m: int,
    paths: int,
    seed: int,
    *,
    extended: bool = False,
    workers: int | None = None,
) -> MCEstimate:
    """Monte Carlo estimate of ``lambda_{r,m}`` with its standard error.

    Only r in {1, 2, 4} is accepted unless ``extended`` is set.
    """
    if r not in LAMBDA_ORDERS and not (extended and int(r) == r and r >= 1):
        raise ValueError(f"moment order {r} not supported (use r in {LAMBDA_ORDERS} or extended=True)")
    return simulate_range_moments(m, paths, seed, orders=(int(r),), workers=workers)[int(r)]


def simulate_variance_factor(m: int, paths: int, seed: int, workers: int | None = None) -> MCEstimate:
    """Monte Carlo ``Lambda_m`` with a delta-method standard error."""
    _check_paths(paths)
    s, _ = _walk_ranges(m, paths, seed, workers)
    s2 = s * s
    s4 = s2 * s2
    l2, l4 = s2.mean(), s4.mean()
    psi = (s4 - l4) / l2**2 - 2.0 * l4 * (s2 - l2) / l2**3
    return MCEstimate(float(l4 / l2**2 - 1.0), float(psi.std(ddof=1) / math.sqrt(paths)))


def simulate_joint_covariance(m: int, paths: int, seed: int, workers: int | None = None) -> MCEstimate:
    """Off-diagonal element ``cov(W_1^2, s_{W,m}^2) / lambda_{2,m}`` of the joint RV/RRV covariance.

    Both the covariance and ``lambda_{2,m}`` come from the same walks; the
    standard error is from the ratio estimator's influence function.
    """
    _check_paths(paths)
    s, w = _walk_ranges(m, paths, seed, workers)
    a = w * w
    b = s * s
    da = a - a.mean()
    db = b - b.mean()
    cov = float(np.mean(da * db))
    lam = float(b.mean())
    psi = (da * db - cov) / lam - cov * db / lam**2
    return MCEstimate(cov / lam, float(psi.std(ddof=1) / math.sqrt(paths)))


def implied_correlation(cov_term: float, lambda_m: float) -> float:
    """Asymptotic correlation of RV and RRV_m errors: ``cov_term / sqrt(2 Lambda_m)``."""
    return float(cov_term / math.sqrt(2.0 * lambda_m))


# ---------------------------------------------------------------------------
# table


def default_m_grid() -> list[int]:
    """Divisors of 23,400 up to 1,800 together with 2^0 .. 2^14."""
    divisors = {d for d in range(1, 1801) if 23400 % d == 0}
    return sorted(divisors | {2**k for k in range(15)})


@dataclass
class LambdaTable:
    """Cached ``lambda_{r,m}``; key ``(r, m)`` with ``m = INF`` for the continuous-record value.

    Off-grid ``m`` is served by monotone cubic interpolation in ``log m``;
    above the largest simulated ``m`` the value is bridged linearly in
    ``1/sqrt(m)`` to the stored INF entry (the discretization bias of the
    range decays like ``m**-0.5``).
    """

    entries: dict[tuple[int, float], LambdaEntry]
    rng_seed: int = 0
    paths: int = 0
    created_at: str = ""
    _interp: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        clean = {}
        for (r, m), e in self.entries.items():
            e = LambdaEntry(float(e[0]), float(e[1]), int(e[2]))
            if not e.value > 0:
                raise ValueError(f"lambda entry ({r}, {m}) must be positive, got {e.value}")
            m = INF if (m == 0 or math.isinf(m)) else int(m)
            clean[(int(r), m)] = e
        clean[(2, 1)] = LambdaEntry(1.0, 0.0, 0)
        self.entries = clean

    # lookup ----------------------------------------------------------------

    def orders(self) -> list[int]:
        return sorted({r for r, _ in self.entries})

    def grid(self, r: int) -> list[int]:
        """Finite ``m`` stored for order ``r`` (excluding INF)."""
        return sorted(m for (rr, m) in self.entries if rr == r and not math.isinf(m))

    def entry(self, r: int, m: float) -> LambdaEntry:
        m = INF if (m == 0 or math.isinf(m)) else int(m)
        try:
            return self.entries[(int(r), m)]
        except KeyError:
            raise MissingLambdaError(r, m, "not stored") from None

    def value(self, r: int, m: float) -> float:
        """``lambda_{r,m}``, interpolated when ``m`` is off the grid."""
        r = int(r)
        if math.isinf(m):
            if (r, INF) in self.entries:
                return self.entries[(r, INF)].value
            return parkinson_lambda(r)
        if m != int(m) or m < 1:
            raise ValueError(f"m must be a positive integer, got {m}")
        m = int(m)
        hit = self.entries.get((r, m))
        if hit is not None:
            return hit.value
        if m == 1:
            return gaussian_abs_moment(r)
        grid = sorted(set(self.grid(r)) | {1})
        if len(grid) < 2:
            raise MissingLambdaError(r, m, "no simulated entries for this order")
        if m < grid[-1]:
            return float(self._interpolator(r, grid)(math.log(m)))
        if (r, INF) not in self.entries:
            raise MissingLambdaError(r, m, f"above grid maximum {grid[-1]} and no INF entry")
        top = grid[-1]
        v_top = self.value(r, top)
        v_inf = self.entries[(r, INF)].value
        w = math.sqrt(top / m)
        return float(v_inf + (v_top - v_inf) * w)

    def values(self, r: int, ms: Iterable[float]) -> np.ndarray:
        cache: dict[float, float] = {}
        out = []
        for m in ms:
            if m not in cache:
                cache[m] = self.value(r, m)
            out.append(cache[m])
        return np.asarray(out, dtype=float)

    def _interpolator(self, r: int, grid: list[int]):
        key = (r, tuple(grid))
        f = self._interp.get(key)
        if f is None:
            ys = [self.entries[(r, g)].value if (r, g) in self.entries else gaussian_abs_moment(r) for g in grid]
            f = PchipInterpolator(np.log(np.asarray(grid, dtype=float)), np.asarray(ys))
            self._interp[key] = f
        return f

    def variance_factor(self, m: float) -> VarianceFactor:
        """``Lambda_m`` from the table's second and fourth moments."""
        return variance_factor(self.value(2, m), self.value(4, m))

    # persistence -------------------------------------------------------------

    def to_csv(self, path: str | os.PathLike) -> None:
        """Write the cache file.

        Line 1 is the header (version, seed, paths); line 2 the creation
        time; then one ``r,m,value,std_error,paths`` row per entry, INF as m = 0.
        """
        rows = sorted(self.entries.items(), key=lambda kv: (kv[0][0], math.isinf(kv[0][1]), kv[0][1]))
        try:
            with open(path, "w", newline="") as fh:
                fh.write(
                    f"# lambda-table version={TABLE_FORMAT_VERSION} seed={self.rng_seed} paths={self.paths}\n"
                )
                fh.write(f"# created_at={self.created_at}\n")
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["r", "m", "value", "std_error", "paths"])
                for (r, m), e in rows:
                    w.writerow([r, 0 if math.isinf(m) else m, repr(e.value), repr(e.std_error), e.paths])
        except OSError as exc:
            raise TablePersistenceError(f"cannot write lambda table to {path}: {exc}") from exc

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "LambdaTable":
        try:
            with open(path, newline="") as fh:
                text = fh.read()
        except OSError as exc:
            raise TablePersistenceError(f"cannot read lambda table {path}: {exc}") from exc
        return cls._parse(text, str(path))

    @classmethod
    def _parse(cls, text: str, source: str) -> "LambdaTable":
        meta: dict[str, str] = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
            elif line.strip():
                body.append(line)
        if not body or body[0].split(",")[:4] != ["r", "m", "value", "std_error"]:
            raise TablePersistenceError(f"{source}: not a lambda table (missing column header)")
        version = int(meta.get("version", TABLE_FORMAT_VERSION))
        if version != TABLE_FORMAT_VERSION:
            raise TablePersistenceError(f"{source}: unsupported table version {version}")
        entries = {}
        try:
            for row in csv.reader(body[1:]):
                r, m, value, se = int(row[0]), int(row[1]), float(row[2]), float(row[3])
                n = int(row[4]) if len(row) > 4 else 0
                entries[(r, INF if m == 0 else m)] = LambdaEntry(value, se, n)
        except (ValueError, IndexError) as exc:
            raise TablePersistenceError(f"{source}: malformed row: {exc}") from exc
        return cls(
            entries,
            rng_seed=int(meta.get("seed", 0)),
            paths=int(meta.get("paths", 0)),
            created_at=meta.get("created_at", ""),
        )


def build_lambda_table(
    m_grid: Sequence[int],
    paths: int,
    seed: int,
    *,
    out: str | os.PathLike | None = None,
    orders: Sequence[int] = LAMBDA_ORDERS,
    workers: int | None = None,
    progress=None,
) -> LambdaTable:
    """Simulate ``lambda_{r,m}`` on ``m_grid`` and add the analytic INF entries.

    ``m = 1`` entries are the exact Gaussian absolute moments.  Each ``m``
    uses its own substream, so grid points are independent estimates.
    If ``out`` is given the table is written there; write failures raise
    :class:`TablePersistenceError`.
    """
    grid = [int(m) for m in m_grid]
    if not grid:
        raise ValueError("m_grid must be nonempty")
    if any(m < 1 for m in grid) or grid != sorted(set(grid)):
        raise ValueError("m_grid must hold sorted, distinct positive integers")
    _check_paths(paths)
    entries: dict[tuple[int, float], LambdaEntry] = {}
    for m in grid:
        if m == 1:
            for r in orders:
                entries[(r, 1)] = LambdaEntry(gaussian_abs_moment(r), 0.0, 0)
            continue
        est = simulate_range_moments(m, paths, seed, orders=orders, workers=workers)
        for r, e in est.items():
            entries[(r, m)] = LambdaEntry(e.value, e.std_error, paths)
        if progress is not None:
            progress(m)
    for r in orders:
        entries[(r, INF)] = LambdaEntry(parkinson_lambda(r), 0.0, 0)
    table = LambdaTable(
        entries,
        rng_seed=int(seed),
        paths=int(paths),
        created_at=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    )
    if out is not None:
        table.to_csv(out)
    return table


def load_table(path: str | os.PathLike | None = None) -> LambdaTable:
    """Load a lambda table.

    Resolution order: ``path``, the ``RANGE_VOL_TABLE`` environment variable,
    then the table shipped with the package.
    """
    path = path or os.environ.get(TABLE_ENV_VAR)
    if path:
        return LambdaTable.from_csv(path)
    ref = resources.files("rangevol").joinpath("data/lambda_default.csv")
    try:
        text = ref.read_text()
    except OSError as exc:
        raise TablePersistenceError(f"packaged lambda table unavailable: {exc}") from exc
    return LambdaTable._parse(text, "packaged lambda_default.csv")
