"""File formats shared by the command-line pipeline.

Every output file starts with a provenance block of ``#`` comment lines::

    # range-vol version=0.1.0 seed=7 config_hash=3f2a...
    # created_at=2024-06-01T12:00:00+00:00
    # config={"n": 78, ...}

Only the ``created_at`` line varies between identical runs.  Files are
written to a temporary sibling and renamed into place, so a failed run never
leaves a partial output behind.
"""

from __future__ import annotations

import hashlib
import io as _io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from . import __version__
from .errors import InputError
from .estimators import RangeSeries, ReturnSeries
from .inference import EstimateRecord

__all__ = [
    "ESTIMATE_COLUMNS",
    "SERIES_COLUMNS",
    "atomic_write",
    "config_hash",
    "provenance_header",
    "read_estimates",
    "read_frame",
    "read_range_series",
    "read_return_series",
    "write_estimates",
    "write_frame",
    "write_range_series",
    "write_return_series",
]

SERIES_COLUMNS = ("day_id", "interval_index", "value", "m", "duration")


def _canonical(config: Mapping | None) -> str:
    return json.dumps(dict(config or {}), sort_keys=True, default=str, separators=(",", ":"))


def config_hash(config: Mapping | None) -> str:
    """Short SHA-256 digest of the canonical JSON form of ``config``."""
    return hashlib.sha256(_canonical(config).encode()).hexdigest()[:16]


def provenance_header(seed, config: Mapping | None = None, *, timestamp: str | None = None) -> list[str]:
    stamp = timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds")
    return [
        f"# range-vol version={__version__} seed={seed} config_hash={config_hash(config)}",
        f"# created_at={stamp}",
        f"# config={_canonical(config)}",
    ]


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and ``os.replace``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        # mkstemp creates 0600; give the file the mode a plain open() would
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_frame(path, frame: pd.DataFrame, header: Sequence[str] = ()) -> None:
    buf = _io.StringIO()
    for line in header:
        buf.write(line.rstrip("\n") + "\n")
    frame.to_csv(buf, index=False, lineterminator="\n")
    atomic_write(path, buf.getvalue())


def read_frame(path, *, required: Iterable[str] = (), dtype=None) -> pd.DataFrame:
    """Read a CSV written by :func:`write_frame`, skipping provenance lines.

    Raises
    ------
    InputError
        Missing or empty file, or absent ``required`` columns.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    try:
        frame = pd.read_csv(path, comment="#", dtype=dtype, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise InputError(f"{path}: file is empty") from None
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: cannot parse CSV ({exc})") from None
    if frame.empty:
        raise InputError(f"{path}: no data rows")
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise InputError(f"{path}: missing columns {missing}")
    return frame


# ---------------------------------------------------------------------------
# interval series


def _series_frame(series, values_attr: str) -> pd.DataFrame:
    parts = []
    for s in series:
        vals = np.asarray(getattr(s, values_attr), dtype=float)
        n = vals.size
        m = np.asarray(s.counts) if hasattr(s, "counts") else np.ones(n, dtype=np.int64)
        parts.append(
            pd.DataFrame(
                {
                    "day_id": [s.day_id] * n,
                    "interval_index": np.arange(n),
                    "value": vals,
                    "m": m.astype(np.int64),
                    "duration": np.asarray(s.durations, dtype=float),
                }
            )
        )
    if not parts:
        return pd.DataFrame(columns=list(SERIES_COLUMNS))
    return pd.concat(parts, ignore_index=True)


def write_range_series(path, series: Iterable[RangeSeries], header: Sequence[str] = ()) -> None:
    write_frame(path, _series_frame(series, "ranges"), header)


def write_return_series(path, series: Iterable[ReturnSeries], header: Sequence[str] = ()) -> None:
    write_frame(path, _series_frame(series, "returns"), header)


def _read_series(path):
    frame = read_frame(path, required=SERIES_COLUMNS, dtype={"day_id": str})
    try:
        frame["value"] = frame["value"].astype(float)
        frame["duration"] = frame["duration"].astype(float)
        frame["interval_index"] = frame["interval_index"].astype(np.int64)
        m = frame["m"].astype(float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric series field ({exc})") from None
    if np.any(m != np.round(m)):
        raise InputError(f"{path}: non-integer m")
    frame["m"] = m.astype(np.int64)
    for day, g in frame.groupby("day_id", sort=False):
        g = g.sort_values("interval_index")
        if not np.array_equal(g["interval_index"].to_numpy(), np.arange(len(g))):
            raise InputError(f"{path}: day {day}: interval_index must run 0..n-1")
        yield day, g


def read_range_series(path) -> list[RangeSeries]:
    out = []
    for day, g in _read_series(path):
        try:
            out.append(RangeSeries(day, g["value"].to_numpy(), g["m"].to_numpy(), g["duration"].to_numpy()))
        except ValueError as exc:
            raise InputError(f"{path}: day {day}: {exc}") from None
    return out


def read_return_series(path) -> list[ReturnSeries]:
    out = []
    for day, g in _read_series(path):
        try:
            out.append(ReturnSeries(day, g["value"].to_numpy(), g["duration"].to_numpy()))
        except ValueError as exc:
            raise InputError(f"{path}: day {day}: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# estimate records

ESTIMATE_COLUMNS = tuple(EstimateRecord.__dataclass_fields__)


def write_estimates(path, records: Iterable[EstimateRecord], header: Sequence[str] = ()) -> None:
    frame = pd.DataFrame([r.as_dict() for r in records], columns=list(ESTIMATE_COLUMNS))
    write_frame(path, frame, header)


def read_estimates(path) -> pd.DataFrame:
    return read_frame(path, required=ESTIMATE_COLUMNS, dtype={"day_id": str})
