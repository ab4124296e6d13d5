"""Ground-truth price paths.

Two models on the unit-day ``[0, 1]``:

* scaled Brownian motion ``p_t = sigma W_t``;
* the log-OU stochastic volatility model::

      dp_t         = sigma_t dW_t
      d ln sigma^2 = theta (omega - ln sigma^2) dt + eta dB_t,   W independent of B

  with ``p_0 = 0`` and ``ln sigma_0^2 = omega``.  The log-variance moves by its
  exact OU transition over each fine step; the price uses sigma frozen at the
  left end of the step, so the recorded ``true_iv`` (left Riemann sum of
  sigma^2) is exactly the quadratic variation of the simulated price.

Every day draws from its own substreams keyed by ``(seed, day_index)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from . import _rng

__all__ = [
    "DEFAULT_SV",
    "SimulatedDay",
    "SvScenario",
    "constant_sigma_prices",
    "ou_transition",
    "simulate_constant_sigma_day",
    "simulate_log_variance",
    "simulate_sv_day",
    "simulate_sv_days",
    "simulate_sv_series",
    "synthesize_ticks",
]

# (theta, omega, eta) from the EMM calibration used in the Monte Carlo study
DEFAULT_SV = (0.032, -0.631, 0.115)


@dataclass(frozen=True)
class SvScenario:
    theta: float = DEFAULT_SV[0]
    omega: float = DEFAULT_SV[1]
    eta: float = DEFAULT_SV[2]
    mn: int = 1000
    n: int = 100
    substeps: int = 1
    seed: int = 0
    days: int = 1

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.n < 1 or self.mn < 1 or self.mn % self.n:
            raise ValueError(f"mn={self.mn} is not a multiple of n={self.n}")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.days < 1:
            raise ValueError("days must be >= 1")

    @property
    def m(self) -> int:
        return self.mn // self.n


@dataclass(frozen=True)
class SimulatedDay:
    prices: np.ndarray
    spot_var: np.ndarray
    true_iv: float
    true_iq: float


def ou_transition(theta: float, eta: float, dt: float) -> tuple[float, float]:
    """Exact OU step: ``x_{t+dt} - mu = a (x_t - mu) + sd Z``; returns ``(a, sd)``."""
    a = math.exp(-theta * dt)
    sd = eta * math.sqrt(-math.expm1(-2.0 * theta * dt) / (2.0 * theta))
    return a, sd


def simulate_log_variance(
    theta: float,
    omega: float,
    eta: float,
    steps: int,
    dt: float,
    shocks: np.ndarray,
    start=None,
) -> np.ndarray:
    """Log-variance at ``steps`` consecutive grid times from exact OU transitions.

    ``shocks`` holds ``steps - 1`` standard normals along its last axis (may
    be 2-d for a batch of paths); ``start`` defaults to ``omega``.
    """
    a, sd = ou_transition(theta, eta, dt)
    shocks = np.asarray(shocks, dtype=float)
    lead = shocks.shape[:-1]
    dev0 = np.zeros(lead) if start is None else np.asarray(start, dtype=float) - omega
    dev = np.empty(lead + (steps,))
    dev[..., 0] = dev0
    if steps > 1:
        # y_k = a y_{k-1} + sd z_k with y_0 = dev0
        zi = (a * np.asarray(dev0))[..., None]
        dev[..., 1:], _ = lfilter([1.0], [1.0, -a], sd * shocks, axis=-1, zi=zi)
    return omega + dev


def simulate_constant_sigma_day(sigma: float, mn: int, seed: int, day_index: int = 0) -> SimulatedDay:
    """Scaled Brownian motion sampled at ``mn + 1`` equidistant points of [0, 1]."""
    if not sigma > 0:
        raise ValueError("sigma must be positive (volatility may not vanish)")
    if mn < 1:
        raise ValueError("mn must be >= 1")
    prices = constant_sigma_prices(sigma, mn, 1, seed, start=day_index)[0]
    return SimulatedDay(prices, np.full(mn, sigma**2), sigma**2, sigma**4)


def constant_sigma_prices(sigma: float, mn: int, days: int, seed: int, start: int = 0) -> np.ndarray:
    """Price grids for days ``start .. start+days-1``, shape ``(days, mn + 1)``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    out = np.zeros((days, mn + 1))
    step = sigma / math.sqrt(mn)
    for d in range(days):
        z = _rng.substream(seed, _rng.CONSTANT_SIGMA, start + d).standard_normal(mn)
        np.cumsum(z * step, out=out[d, 1:])
    return out


def _sv_block(scenario: SvScenario, day_indices, keep_spot: bool):
    k = scenario.substeps
    fine = scenario.mn * k
    dt = 1.0 / fine
    nd = len(day_indices)
    zp = np.empty((nd, fine))
    zv = np.empty((nd, fine - 1))
    for i, d in enumerate(day_indices):
        zp[i] = _rng.substream(scenario.seed, _rng.SV_PRICE, d).standard_normal(fine)
        zv[i] = _rng.substream(scenario.seed, _rng.SV_VOLATILITY, d).standard_normal(fine - 1)
    h = simulate_log_variance(scenario.theta, scenario.omega, scenario.eta, fine, dt, zv)
    var = np.exp(h)
    incr = np.sqrt(var * dt) * zp
    path = np.zeros((nd, fine + 1))
    np.cumsum(incr, axis=1, out=path[:, 1:])
    prices = path[:, ::k]
    iv = var.sum(axis=1) * dt
    iq = (var * var).sum(axis=1) * dt
    return prices, iv, iq, (var if keep_spot else None)


def simulate_sv_day(scenario: SvScenario, day_index: int = 0) -> SimulatedDay:
    """One day of the log-OU model; deterministic in ``(scenario, day_index)``."""
    prices, iv, iq, var = _sv_block(scenario, [int(day_index)], keep_spot=True)
    return SimulatedDay(prices[0], var[0], float(iv[0]), float(iq[0]))


def simulate_sv_days(scenario: SvScenario, start: int = 0, count: int | None = None, chunk: int = 1000):
    """Batch of independent SV days (each restarting at ``ln sigma^2 = omega``).

    Returns ``(prices, true_iv, true_iq)`` with ``prices`` of shape
    ``(count, mn + 1)``; row ``i`` matches ``simulate_sv_day(scenario, start + i)``.
    """
    count = scenario.days if count is None else int(count)
    parts = []
    for lo in range(start, start + count, chunk):
        idx = list(range(lo, min(lo + chunk, start + count)))
        p, iv, iq, _ = _sv_block(scenario, idx, keep_spot=False)
        parts.append((p, iv, iq))
    return (
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
    )


def simulate_sv_series(scenario: SvScenario, start_log_var: float | None = None) -> list[SimulatedDay]:
    """Consecutive days of one SV path: log-variance carries over from day to day.

    Used for multi-day datasets where the level of integrated variance
    should be persistent across days.  Day ``d`` still draws its shocks from
    the ``(seed, d)`` substreams.
    """
    k = scenario.substeps
    fine = scenario.mn * k
    dt = 1.0 / fine
    a, sd = ou_transition(scenario.theta, scenario.eta, dt)
    h0 = scenario.omega if start_log_var is None else float(start_log_var)
    days = []
    for d in range(scenario.days):
        zp = _rng.substream(scenario.seed, _rng.SV_PRICE, d).standard_normal(fine)
        zv = _rng.substream(scenario.seed, _rng.SV_VOLATILITY, d).standard_normal(fine)
        # fine steps of the day start one transition after the previous day's last value
        h = simulate_log_variance(scenario.theta, scenario.omega, scenario.eta, fine + 1, dt, zv, start=h0)
        var = np.exp(h[1:])
        h0 = h[-1]
        path = np.zeros(fine + 1)
        np.cumsum(np.sqrt(var * dt) * zp, out=path[1:])
        days.append(SimulatedDay(path[::k], var, float(var.sum() * dt), float((var * var).sum() * dt)))
    return days


def synthesize_ticks(
    log_prices,
    *,
    rate: float,
    seed: int,
    day_index: int = 0,
    session: tuple[float, float] = (34200.0, 57600.0),
    base_price: float = 40.0,
    price_scale: float = 0.01,
    tick_size: float = 0.01,
    repeat_prob: float = 0.0,
    bounce_prob: float = 0.0,
):
    """Trade-like ticks observing an efficient log-price path.

    ``log_prices`` is an equidistant grid over the session.  Arrival times
    are a Poisson process with ``rate`` expected ticks per session plus a tick
    at the open; each tick shows ``base_price * exp(price_scale * p)`` at the
    last grid point at or before it, rounded to ``tick_size``.  Optionally
    injects exact repeats (same time and price) and one-tick bounces that
    revert at the next tick.

    Returns ``(times, prices)`` as float arrays.
    """
    p = np.asarray(log_prices, dtype=float)
    open_, close = session
    rng = _rng.substream(seed, _rng.TICKS, day_index)
    k = rng.poisson(rate)
    times = np.concatenate([[open_], np.sort(rng.uniform(open_, close, k))])
    pos = np.floor((times - open_) / (close - open_) * (p.size - 1)).astype(np.int64)
    pos = np.clip(pos, 0, p.size - 1)
    prices = base_price * np.exp(price_scale * p[pos])
    if tick_size > 0:
        prices = np.round(prices / tick_size) * tick_size
    if bounce_prob > 0 and prices.size > 2:
        flip = rng.random(prices.size) < bounce_prob
        flip[0] = flip[-1] = False
        sign = np.where(rng.random(prices.size) < 0.5, -1.0, 1.0)
        prices = np.where(flip, prices + sign * tick_size, prices)
    if repeat_prob > 0:
        dup = np.flatnonzero(rng.random(prices.size) < repeat_prob)
        times = np.insert(times, dup + 1, times[dup])
        prices = np.insert(prices, dup + 1, prices[dup])
    return times, np.round(prices, 10)
