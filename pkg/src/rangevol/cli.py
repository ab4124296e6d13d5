"""``range-vol`` command-line entry point.

Exit codes: 0 success, 2 usage error, 3 input error (missing, empty or
malformed files, unwritable outputs), 4 numeric failure (for example a
day whose estimate is zero under the log transform).

Settings come from flags, then from the JSON file named by ``--config``,
then from built-in defaults.  The config file is a flat object keyed by
flag destination (``"max_lag": 75``); an object under the subcommand's name
overrides the flat keys for that subcommand.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from . import __version__
from . import io as rio
from .errors import InputError, MissingLambdaError, TablePersistenceError
from .estimators import (
    MODES,
    RangeSeries,
    ReturnSeries,
    blockwise_variance_factor,
    ranges_from_grid,
    rq,
    rrq,
    rrv,
    rrv_xi,
    rv,
)
from .inference import TRANSFORMS, confidence_interval
from .moments import (
    INF,
    LAMBDA_ORDERS,
    build_lambda_table,
    default_m_grid,
    load_table,
    parkinson_lambda,
    simulate_lambda_rm,
)
from .stats import acf, annualize, correlation, signature_curve, summarize

log = logging.getLogger("rangevol")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3, 4

# flags describing files; validated before any work
_INPUT_FLAGS = ("input", "table")
_OUTPUT_FLAGS = ("out", "report", "returns_out", "truth_out", "paths_out", "ticks_out", "tstats_out", "density_out")
_NOT_CONFIG = {"command", "config", "handler"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _grid_pairs(text: str) -> list[tuple[int, int]]:
    try:
        pairs = [tuple(int(v) for v in item.split(":")) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected n:m pairs, got {text!r}") from None
    if not pairs or any(len(p) != 2 for p in pairs):
        raise argparse.ArgumentTypeError(f"expected n:m pairs, got {text!r}")
    return pairs


def _m_value(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity", "0"):
        return INF
    try:
        m = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"m must be a positive integer or 'inf', got {text!r}") from None
    if m < 1:
        raise argparse.ArgumentTypeError("m must be >= 1")
    return m


def _str_list(choices):
    def parse(text: str) -> list[str]:
        items = [x.strip().replace("-", "_") for x in text.split(",") if x.strip()]
        bad = [x for x in items if x not in choices]
        if bad or not items:
            raise argparse.ArgumentTypeError(f"expected a subset of {','.join(choices)}, got {text!r}")
        return items

    return parse


def _mode(text: str) -> str:
    mode = text.replace("-", "_")
    if mode not in MODES:
        raise argparse.ArgumentTypeError(f"mode must be one of {', '.join(MODES)}")
    return mode


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--config", help="JSON file of default settings (flags take precedence)")
    g.add_argument("--seed", type=int, default=0, help="master random seed (default: 0)")
    g.add_argument("--workers", type=int, default=None, help="worker threads (default: available cores)")
    g.add_argument("--strict", action="store_true", default=False, help="fail on malformed rows or days instead of skipping")
    g.add_argument("--table", default=None, help="lambda table CSV (default: $RANGE_VOL_TABLE, else the packaged table)")
    g.add_argument("--quiet", action="store_true", default=False, help="suppress progress messages")
    return p


def _sv_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=float, default=0.032, help="mean reversion of log-variance")
    p.add_argument("--omega", type=float, default=-0.631, help="long-run mean of log-variance")
    p.add_argument("--eta", type=float, default=0.115, help="volatility of log-variance")
    p.add_argument("--substeps", type=int, default=1, help="fine simulation steps per recorded price")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="range-vol", description="Realized range-based variance toolkit.")
    parser.add_argument("--version", action="version", version=f"range-vol {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, handler, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(handler=handler)
        return p

    p = add("lambda", cmd_lambda, "Print lambda_{r,m}, the r-th moment of the range of m Gaussian increments.")
    p.add_argument("--r", type=float, default=2.0, help="moment order (default: 2)")
    p.add_argument("--m", type=_m_value, default=INF, help="number of increments or 'inf' (default: inf)")
    p.add_argument("--paths", type=int, default=0, help="simulate with this many paths instead of using the table")

    p = add("lambda-table", cmd_lambda_table, "Simulate and write a lambda table.")
    p.add_argument("--grid", default="default", help="'default' or comma-separated m values")
    p.add_argument("--paths", type=int, default=1_000_000, help="paths per grid point (default: 10^6)")
    p.add_argument("--orders", type=_int_list, default=list(LAMBDA_ORDERS), help="moment orders (default: 1,2,4)")
    p.add_argument("--out", required=True, help="output table CSV")

    p = add("simulate", cmd_simulate, "Simulate days of prices and write interval ranges and returns.")
    p.add_argument("--model", choices=("sv", "constant"), default="sv", help="log-OU volatility or constant sigma")
    _sv_args(p)
    p.add_argument("--sigma", type=float, default=1.0, help="volatility for --model constant")
    p.add_argument("--mn", type=int, default=1000, help="price increments per day (default: 1000)")
    p.add_argument("--n", type=int, default=100, help="intervals per day (default: 100)")
    p.add_argument("--days", type=int, default=100, help="number of days")
    p.add_argument("--persistent", action="store_true", help="carry log-variance across days (one long SV path)")
    p.add_argument("--out", help="RangeSeries CSV")
    p.add_argument("--returns-out", help="ReturnSeries CSV")
    p.add_argument("--truth-out", help="per-day true IV and IQ")
    p.add_argument("--paths-out", help="full path dump (day, t, price, spot_var)")
    p.add_argument("--ticks-out", help="synthetic trade ticks (date, time, price) observing each path")
    p.add_argument("--tick-rate", type=float, default=2000.0, help="expected ticks per day for --ticks-out")
    p.add_argument("--repeat-prob", type=float, default=0.0, help="probability of an exact repeated tick")
    p.add_argument("--bounce-prob", type=float, default=0.0, help="probability of a one-tick bounce")

    p = add("ingest", cmd_ingest, "Filter tick data and sample it onto an intraday grid.")
    p.add_argument("--input", required=True, help="tick CSV")
    p.add_argument("--quotes", action="store_true", help="rows hold bid/ask quotes; use the midquote")
    p.add_argument("--n", type=int, default=78, help="intervals per day (default: 78)")
    p.add_argument("--out", required=True, help="RangeSeries CSV")
    p.add_argument("--returns-out", help="ReturnSeries CSV from previous-tick sampling")
    p.add_argument("--report", help="per-day filter report CSV")
    p.add_argument("--date-col", default="date")
    p.add_argument("--time-col", default="time")
    p.add_argument("--price-col", default="price")
    p.add_argument("--bid-col", default="bid")
    p.add_argument("--ask-col", default="ask")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--session-open", type=float, default=34200.0, help="seconds after midnight (default: 9:30)")
    p.add_argument("--session-close", type=float, default=57600.0, help="seconds after midnight (default: 16:00)")
    p.add_argument("--utc-offset", type=float, default=0.0, help="hours added to epoch timestamps")
    p.add_argument("--outlier-window", type=int, default=50)
    p.add_argument("--outlier-threshold", type=float, default=10.0)
    p.add_argument("--no-outliers", action="store_true", help="disable the outlier rule")
    p.add_argument("--backfill-open", action="store_true", help="use the first tick as the opening price if none precedes the open")

    p = add("estimate", cmd_estimate, "Point estimates and confidence intervals per day.")
    p.add_argument("--input", required=True, help="RangeSeries CSV (ReturnSeries CSV for --estimator rv)")
    p.add_argument("--estimator", choices=("rv", "rrv", "rrv_xi"), default="rrv")
    p.add_argument("--mode", type=_mode, default="per_interval", help="homogeneous, per-interval or asymptotic")
    p.add_argument("--m", type=int, default=None, help="m for homogeneous mode (default: the series' own m)")
    p.add_argument("--transform", choices=TRANSFORMS, default="log")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", required=True, help="estimates CSV")

    p = add("coverage", cmd_coverage, "Monte Carlo study of t-statistics under the SV model.")
    p.add_argument("--grid", type=_grid_pairs, default=[(10, 10), (50, 10), (100, 10)], help="n:m pairs")
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--transforms", type=_str_list(TRANSFORMS), default=["raw", "log"])
    _sv_args(p)
    p.add_argument("--out", required=True, help="report CSV")
    p.add_argument("--tstats-out", help="all t-statistics (n, m, transform, t)")
    p.add_argument("--density-out", help="kernel density CSV (an SVG is written alongside)")

    p = add("efficiency", cmd_efficiency, "Variance ratio var(RRV_m)/var(RV) on constant-sigma days.")
    p.add_argument("--m-list", type=_int_list, default=[1, 10, 100, 1000])
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out", required=True)

    p = add("summarize", cmd_summarize, "Sample statistics of estimate series and their correlations.")
    p.add_argument("--input", nargs="+", required=True, help="estimates CSV files")
    p.add_argument("--out", help="summary CSV (default: print)")
    p.add_argument("--annualize", action="store_true", help="report annualized percentage variances")
    p.add_argument("--days-per-year", type=int, default=252)

    p = add("acf", cmd_acf, "Sample autocorrelations with Bartlett bands.")
    p.add_argument("--input", required=True, help="estimates CSV or any CSV with the column")
    p.add_argument("--column", default="rrv", help="estimator tag or column name")
    p.add_argument("--max-lag", type=int, default=75)
    p.add_argument("--out", help="ACF CSV (default: print)")

    p = add("plot", cmd_plot, "Write plot-ready CSV (and optional SVG).")
    p.add_argument("--kind", required=True, choices=("density", "bands", "acf", "signature", "lambda_curve"))
    p.add_argument("--input", nargs="*", default=[], help="input CSV(s); not used by lambda_curve")
    p.add_argument("--estimator", default=None, help="estimator tag for bands/acf")
    p.add_argument("--max-lag", type=int, default=75)
    p.add_argument("--r", type=int, default=2, help="moment order for lambda_curve")
    p.add_argument("--svg", action="store_true", help="also write an SVG next to the CSV")
    p.add_argument("--out", required=True)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str], args: argparse.Namespace) -> argparse.Namespace:
    path = Path(args.config)
    if not path.is_file():
        raise InputError(f"config file {path} not found")
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError(f"config {path} must hold a JSON object")
    flat = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    flat.update(cfg.get(args.command, {}) if isinstance(cfg.get(args.command), dict) else {})
    known = set(vars(args)) - _NOT_CONFIG
    unknown = sorted(set(flat) - known)
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    subparser = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    # config values become parser defaults so explicit flags still win
    for action in subparser._actions:  # noqa: SLF001
        if action.dest in flat:
            action.default = _coerce(action, flat[action.dest])
    return parser.parse_args(argv)


def _coerce(action: argparse.Action, value):
    """Run a JSON config value through the flag's own type parser."""
    if action.type is None or isinstance(value, bool) or action.nargs is not None:
        return value
    if isinstance(value, list):
        value = ",".join(":".join(map(str, x)) if isinstance(x, list) else str(x) for x in value)
    return action.type(str(value))


def _resolved_config(args: argparse.Namespace) -> dict:
    # output destinations do not affect file contents, so they stay out of the hash
    cfg = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG and k != "out" and not k.endswith("_out")}
    cfg["command"] = args.command
    if cfg.get("m") == INF:
        cfg["m"] = "inf"
    return cfg


def _validate_paths(args: argparse.Namespace) -> None:
    for flag in _INPUT_FLAGS:
        value = getattr(args, flag, None)
        for p in ([value] if isinstance(value, str) else value or []):
            if not Path(p).is_file():
                raise InputError(f"--{flag.replace('_', '-')}: {p} does not exist")
    if getattr(args, "table", None) is None and os.environ.get("RANGE_VOL_TABLE"):
        p = os.environ["RANGE_VOL_TABLE"]
        if not Path(p).is_file():
            raise InputError(f"RANGE_VOL_TABLE: {p} does not exist")
    inputs = set()
    for flag in _INPUT_FLAGS:
        value = getattr(args, flag, None)
        inputs.update(Path(p).resolve() for p in ([value] if isinstance(value, str) else value or []))
    for flag in _OUTPUT_FLAGS:
        value = getattr(args, flag, None)
        if not value:
            continue
        out = Path(value)
        parent = out.parent if str(out.parent) else Path(".")
        if not parent.is_dir():
            raise InputError(f"--{flag.replace('_', '-')}: directory {parent} does not exist")
        if not os.access(parent, os.W_OK):
            raise InputError(f"--{flag.replace('_', '-')}: directory {parent} is not writable")
        if out.resolve() in inputs:
            raise InputError(f"--{flag.replace('_', '-')}: refusing to overwrite input {out}")


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="range-vol: %(message)s")
    try:
        if args.config:
            try:
                args = _apply_config(parser, argv, args)
            except SystemExit as exc:
                return int(exc.code or 0)
            except (argparse.ArgumentTypeError, TypeError, ValueError) as exc:
                raise UsageError(f"bad config value: {exc}") from None
        if args.workers is not None and args.workers < 1:
            raise UsageError("--workers must be >= 1")
        _validate_paths(args)
        args.header = rio.provenance_header(args.seed, _resolved_config(args))
        return args.handler(args) or EXIT_OK
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"range-vol: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, TablePersistenceError) as exc:
        print(f"range-vol: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, ArithmeticError, MissingLambdaError) as exc:
        print(f"range-vol: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


# ---------------------------------------------------------------------------
# subcommands


def _table(args):
    return load_table(args.table)


def _header(args, *extra: str) -> list[str]:
    return list(args.header) + [f"# {line}" for line in extra]


def _emit(args, frame: pd.DataFrame) -> None:
    if getattr(args, "out", None):
        rio.write_frame(args.out, frame, _header(args))
    else:
        frame.to_csv(sys.stdout, index=False, lineterminator="\n")


def cmd_lambda(args) -> int:
    r, m = args.r, args.m
    if args.paths:
        if math.isinf(m):
            raise UsageError("--paths needs a finite --m")
        est = simulate_lambda_rm(r, int(m), args.paths, args.seed, workers=args.workers)
        print(f"{est.value!r} {est.std_error!r}")
        return EXIT_OK
    if m == 1 and r == 2:
        value = 1.0
    elif math.isinf(m):
        value = parkinson_lambda(r)
    else:
        if r != int(r):
            raise UsageError("fractional orders need --paths")
        value = _table(args).value(int(r), m)
    print(repr(float(value)))
    return EXIT_OK


def cmd_lambda_table(args) -> int:
    grid = default_m_grid() if args.grid == "default" else sorted(set(_int_list(args.grid)))
    progress = None if args.quiet else (lambda m: log.info("m=%d done", m))
    build_lambda_table(grid, args.paths, args.seed, out=args.out, orders=args.orders, workers=args.workers, progress=progress)
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .simulate import (
        SvScenario,
        constant_sigma_prices,
        simulate_sv_day,
        simulate_sv_days,
        simulate_sv_series,
        synthesize_ticks,
    )

    if not any([args.out, args.returns_out, args.truth_out, args.paths_out, args.ticks_out]):
        raise UsageError("simulate needs at least one of --out, --returns-out, --truth-out, --paths-out, --ticks-out")
    if args.n < 1 or args.mn % args.n:
        raise UsageError(f"--mn {args.mn} must be a positive multiple of --n {args.n}")
    spot = None
    if args.model == "constant":
        if not args.sigma > 0:
            raise UsageError("--sigma must be positive")
        prices = constant_sigma_prices(args.sigma, args.mn, args.days, args.seed)
        iv = np.full(args.days, args.sigma**2)
        iq = np.full(args.days, args.sigma**4)
    else:
        scen = SvScenario(args.theta, args.omega, args.eta, mn=args.mn, n=args.n, substeps=args.substeps,
                          seed=args.seed, days=args.days)
        if args.persistent or args.paths_out:
            if args.persistent:
                days = simulate_sv_series(scen)
            else:
                days = [simulate_sv_day(scen, d) for d in range(args.days)]
            prices = np.stack([d.prices for d in days])
            iv = np.array([d.true_iv for d in days])
            iq = np.array([d.true_iq for d in days])
            spot = [d.spot_var[:: args.substeps] for d in days]
        else:
            prices, iv, iq = simulate_sv_days(scen)
    day_ids = [f"{d:05d}" for d in range(args.days)]
    m = args.mn // args.n
    if args.out:
        s = ranges_from_grid(prices, args.n)
        series = [RangeSeries(day_ids[d], s[d], np.full(args.n, m)) for d in range(args.days)]
        rio.write_range_series(args.out, series, _header(args))
    if args.returns_out:
        r = np.diff(prices[:, ::m], axis=1)
        rio.write_return_series(args.returns_out, [ReturnSeries(day_ids[d], r[d]) for d in range(args.days)], _header(args))
    if args.truth_out:
        rio.write_frame(args.truth_out, pd.DataFrame({"day_id": day_ids, "true_iv": iv, "true_iq": iq}), _header(args))
    if args.paths_out:
        t = np.linspace(0.0, 1.0, args.mn + 1)
        frames = []
        for d in range(args.days):
            sv = np.full(args.mn + 1, np.nan) if spot is None else np.append(spot[d], np.nan)
            if args.model == "constant":
                sv = np.full(args.mn + 1, args.sigma**2)
            frames.append(pd.DataFrame({"day": day_ids[d], "t": t, "price": prices[d], "spot_var": sv}))
        rio.write_frame(args.paths_out, pd.concat(frames, ignore_index=True), _header(args))
    if args.ticks_out:
        frames = []
        for d in range(args.days):
            times, px = synthesize_ticks(prices[d], rate=args.tick_rate, seed=args.seed, day_index=d,
                                         repeat_prob=args.repeat_prob, bounce_prob=args.bounce_prob)
            frames.append(pd.DataFrame({"date": day_ids[d], "time": times, "price": px}))
        rio.write_frame(args.ticks_out, pd.concat(frames, ignore_index=True), _header(args))
    return EXIT_OK


def cmd_ingest(args) -> int:
    from .ingest import FilterConfig, extract_range_series, extract_return_series, filter_ticks, read_ticks_csv

    session = (args.session_open, args.session_close)
    if not session[0] < session[1]:
        raise UsageError("--session-open must precede --session-close")
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    cfg = FilterConfig(session=session, outlier_window=args.outlier_window,
                       outlier_threshold=args.outlier_threshold, outliers=not args.no_outliers)
    ranges, returns, reports = [], [], []
    ticks = read_ticks_csv(args.input, quotes=args.quotes, date_col=args.date_col, time_col=args.time_col,
                           price_col=args.price_col, bid_col=args.bid_col, ask_col=args.ask_col,
                           delimiter=args.delimiter, session=session, strict=args.strict, utc_offset=args.utc_offset)
    for raw in ticks:
        kept, report = filter_ticks(raw, cfg)
        report.check()
        reports.append(report.as_row())
        try:
            rs = extract_range_series(kept, args.n, backfill_open=args.backfill_open)
            rets = extract_return_series(kept, args.n, backfill_open=args.backfill_open) if args.returns_out else None
        except InputError as exc:
            if args.strict:
                raise
            log.warning("skipping day: %s", exc)
            continue
        ranges.append(rs)
        if rets is not None:
            returns.append(rets)
    if not ranges:
        raise InputError(f"{args.input}: no usable days")
    rio.write_range_series(args.out, ranges, _header(args))
    if args.returns_out:
        rio.write_return_series(args.returns_out, returns, _header(args))
    if args.report:
        rio.write_frame(args.report, pd.DataFrame(reports), _header(args))
    return EXIT_OK


def _estimate_day(args, series, table):
    if args.estimator == "rv":
        return rv(series), rq(series), 2.0
    mode = args.mode
    if mode == "homogeneous":
        m = args.m
        if m is None:
            counts = np.unique(series.counts)
            if counts.size != 1:
                raise UsageError(f"day {series.day_id}: counts vary; pass --m or use per-interval mode")
            m = int(counts[0])
        vf = table.variance_factor(m).value
        point, quart = rrv(series, table, mode, m), rrq(series, table, mode, m)
    elif args.estimator == "rrv_xi":
        point, quart = rrv_xi(series, table, mode)
        vf = blockwise_variance_factor(series, table) if mode == "per_interval" else table.variance_factor(INF).value
    else:
        point, quart = rrv(series, table, mode), rrq(series, table, mode)
        vf = blockwise_variance_factor(series, table) if mode == "per_interval" else table.variance_factor(INF).value
    return point, quart, vf


def cmd_estimate(args) -> int:
    if not 0 < args.level < 1:
        raise UsageError("--level must lie in (0, 1)")
    reader = rio.read_return_series if args.estimator == "rv" else rio.read_range_series
    days = reader(args.input)
    table = None if args.estimator == "rv" else _table(args)
    records = []
    for series in days:
        try:
            point, quart, vf = _estimate_day(args, series, table)
            records.append(confidence_interval(point, quart, series.n, vf, args.transform, args.level,
                                               day_id=series.day_id, estimator=args.estimator))
        except (ValueError, ArithmeticError) as exc:
            if args.strict:
                raise ValueError(f"day {series.day_id}: {exc}") from None
            log.warning("skipping day %s: %s", series.day_id, exc)
    if not records:
        raise ValueError("no day produced a finite estimate")
    rio.write_estimates(args.out, records, _header(args))
    return EXIT_OK


def cmd_coverage(args) -> int:
    from .experiments import run_coverage_study
    from .plotting import density_frame, emit_plot_data

    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    report = run_coverage_study(args.grid, args.transforms, args.reps, args.seed, theta=args.theta,
                                omega=args.omega, eta=args.eta, substeps=args.substeps, table=_table(args))
    rio.write_frame(args.out, pd.DataFrame([r.as_dict() for r in report.rows]), _header(args))
    if args.tstats_out:
        parts = [pd.DataFrame({"n": n, "m": m, "transform": tr, "t": t}) for (n, m, tr), t in report.tstats.items()]
        rio.write_frame(args.tstats_out, pd.concat(parts, ignore_index=True), _header(args))
    if args.density_out:
        samples = {f"n{n}_m{m}_{tr}": t for (n, m, tr), t in report.tstats.items()}
        emit_plot_data("density", density_frame(samples), args.density_out, header=_header(args), svg=True)
    return EXIT_OK


def cmd_efficiency(args) -> int:
    from .experiments import run_efficiency_study

    if args.reps < 2:
        raise UsageError("--reps must be >= 2")
    rows = run_efficiency_study(args.m_list, args.n, args.reps, args.seed, sigma=args.sigma, table=_table(args))
    rio.write_frame(args.out, pd.DataFrame([r.as_dict() for r in rows]), _header(args))
    return EXIT_OK


def _estimate_columns(paths) -> pd.DataFrame:
    """Wide frame of daily point estimates: one column per estimator tag, indexed by day."""
    frames = [rio.read_estimates(p) for p in paths]
    est = pd.concat(frames, ignore_index=True)
    if est.duplicated(["day_id", "estimator"]).any():
        raise InputError("duplicate (day_id, estimator) rows across inputs")
    wide = est.pivot(index="day_id", columns="estimator", values="point")
    order = list(dict.fromkeys(est["estimator"]))
    return wide[order].dropna()


def cmd_summarize(args) -> int:
    wide = _estimate_columns(args.input)
    if args.annualize:
        wide = wide.apply(lambda c: annualize(c.to_numpy(), args.days_per_year))
    rows = {}
    for col in wide.columns:
        rows[col] = summarize(wide[col].to_numpy()).as_dict()
    frame = pd.DataFrame(rows)
    frame.index.name = "statistic"
    cols = list(wide.columns)
    corr = {}
    for i, a in enumerate(cols):
        for b in cols[i + 1 :]:
            corr[f"{a}:{b}"] = correlation(wide[a].to_numpy(), wide[b].to_numpy())
    out = frame.reset_index()
    for pair, value in corr.items():
        row = {"statistic": f"correlation_{pair}"}
        row.update({c: value for c in cols})
        out = pd.concat([out, pd.DataFrame([row])], ignore_index=True)
    _emit(args, out)
    return EXIT_OK


def _column_series(path, column: str) -> np.ndarray:
    frame = rio.read_frame(path, dtype={"day_id": str})
    if "estimator" in frame.columns and "point" in frame.columns and column in set(frame["estimator"]):
        return frame.loc[frame["estimator"] == column, "point"].to_numpy(float)
    if column in frame.columns:
        try:
            return frame[column].to_numpy(float)
        except ValueError:
            raise InputError(f"{path}: column {column!r} is not numeric") from None
    raise InputError(f"{path}: no estimator or column named {column!r}")


def cmd_acf(args) -> int:
    from .plotting import acf_frame

    x = _column_series(args.input, args.column)
    coefs, band = acf(x, args.max_lag)
    _emit(args, acf_frame(coefs, band))
    return EXIT_OK


def cmd_plot(args) -> int:
    from . import plotting

    kind = args.kind
    if kind != "lambda_curve" and not args.input:
        raise UsageError(f"--kind {kind} needs --input")
    if kind == "lambda_curve":
        frame = plotting.lambda_curve_frame(_table(args), args.r)
    elif kind == "density":
        t = rio.read_frame(args.input[0], required=("t",))
        if {"n", "m", "transform"} <= set(t.columns):
            samples = {f"n{n}_m{m}_{tr}": g["t"].to_numpy(float) for (n, m, tr), g in t.groupby(["n", "m", "transform"], sort=False)}
        else:
            samples = {"t": t["t"].to_numpy(float)}
        frame = plotting.density_frame(samples)
    elif kind == "bands":
        est = pd.concat([rio.read_estimates(p) for p in args.input], ignore_index=True)
        frame = plotting.bands_frame(est, args.estimator)
    elif kind == "acf":
        x = _column_series(args.input[0], args.estimator or "rrv")
        frame = plotting.acf_frame(*acf(x, args.max_lag))
    else:
        est = pd.concat([rio.read_estimates(p) for p in args.input], ignore_index=True)
        curves = {}
        for tag, g in est.groupby("estimator", sort=False):
            curves[tag] = signature_curve({int(n): gg["point"].to_numpy(float) for n, gg in g.groupby("n")})
        frame = plotting.signature_frame(curves)
    plotting.emit_plot_data(kind, frame, args.out, header=_header(args), svg=args.svg)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
