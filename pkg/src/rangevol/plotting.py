"""Plot-ready data: CSV columns plus an optional bare SVG polyline chart.

The SVG output is a convenience preview with no styling contract.  Each
kind maps to a frame whose first column is the x axis and whose remaining
columns are series.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .experiments import kernel_density
from .io import atomic_write, write_frame
from .moments import LambdaTable

__all__ = [
    "PLOT_KINDS",
    "acf_frame",
    "bands_frame",
    "density_frame",
    "emit_plot_data",
    "lambda_curve_frame",
    "signature_frame",
    "svg_polylines",
]

PLOT_KINDS = ("density", "bands", "acf", "signature", "lambda_curve")


def density_frame(samples: Mapping[str, Sequence[float]], points: int = 801) -> pd.DataFrame:
    """Kernel densities of each sample on a common grid, plus the N(0, 1) reference.

    The grid spans the pooled sample range padded by five of the widest
    bandwidth on each side, so every density integrates to one.
    """
    arrays = {k: np.asarray(v, dtype=float) for k, v in samples.items()}
    if not arrays:
        raise ValueError("no samples")
    pad = max(1.06 * np.std(a, ddof=1) * a.size ** (-0.2) for a in arrays.values()) * 5.0
    lo = min(a.min() for a in arrays.values()) - pad
    hi = max(a.max() for a in arrays.values()) + pad
    x = np.linspace(lo, hi, points)
    frame = {"x": x}
    for label, a in arrays.items():
        frame[f"density_{label}"] = kernel_density(a, x)
    frame["normal"] = np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    return pd.DataFrame(frame)


def bands_frame(estimates: pd.DataFrame, estimator: str | None = None) -> pd.DataFrame:
    est = estimates if estimator is None else estimates[estimates["estimator"] == estimator]
    if est.empty:
        raise ValueError(f"no estimates for estimator {estimator!r}")
    out = est[["day_id", "point", "ci_low", "ci_high"]].reset_index(drop=True)
    out.insert(0, "index", np.arange(len(out)))
    return out


def acf_frame(coefs: Sequence[float], band: float) -> pd.DataFrame:
    k = len(coefs)
    return pd.DataFrame({"lag": np.arange(1, k + 1), "acf": np.asarray(coefs, float), "band_upper": band, "band_lower": -band})


def signature_frame(curves: Mapping[str, Mapping[int, float]]) -> pd.DataFrame:
    ns = sorted({int(n) for c in curves.values() for n in c})
    frame = {"n": ns}
    for label, c in curves.items():
        frame[label] = [c.get(n, np.nan) for n in ns]
    return pd.DataFrame(frame)


def lambda_curve_frame(table: LambdaTable, r: int = 2) -> pd.DataFrame:
    """``lambda_{r,m}`` against ``m`` on the table grid, with the continuous limit for reference."""
    grid = [m for m in table.grid(r) if math.isfinite(m)]
    rows = [table.entry(r, m) for m in grid]
    return pd.DataFrame(
        {
            "m": grid,
            "log10_m": np.log10(grid),
            f"lambda_{r}": [e.value for e in rows],
            "std_error": [e.std_error for e in rows],
            "limit": table.value(r, math.inf),
        }
    )


def svg_polylines(frame: pd.DataFrame, *, x: str | None = None, columns: Sequence[str] | None = None,
                  width: int = 640, height: int = 400) -> str:
    """Render numeric columns of ``frame`` against ``x`` as unstyled polylines."""
    x = x or frame.columns[0]
    cols = [c for c in (columns or frame.columns) if c != x and pd.api.types.is_numeric_dtype(frame[c])]
    xs = frame[x].to_numpy(float)
    ys = frame[cols].to_numpy(float)
    finite = np.isfinite(ys)
    x0, x1 = float(np.nanmin(xs)), float(np.nanmax(xs))
    y0, y1 = (float(ys[finite].min()), float(ys[finite].max())) if finite.any() else (0.0, 1.0)
    sx = (width - 20) / ((x1 - x0) or 1.0)
    sy = (height - 20) / ((y1 - y0) or 1.0)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">']
    for j, c in enumerate(cols):
        pts = " ".join(
            f"{10 + (xv - x0) * sx:.2f},{height - 10 - (yv - y0) * sy:.2f}"
            for xv, yv in zip(xs, ys[:, j])
            if np.isfinite(yv)
        )
        lines.append(f'<polyline data-series="{c}" fill="none" stroke="black" points="{pts}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_plot_data(kind: str, frame: pd.DataFrame, out, *, header: Sequence[str] = (), svg: bool = False) -> list[Path]:
    """Write ``frame`` (built by one of the ``*_frame`` helpers) to ``out``; optionally ``out`` with ``.svg``."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    out = Path(out)
    write_frame(out, frame, header)
    paths = [out]
    if svg:
        x = "index" if kind == "bands" else None
        cols = ["point", "ci_low", "ci_high"] if kind == "bands" else None
        target = out.with_suffix(".svg")
        atomic_write(target, svg_polylines(frame, x=x, columns=cols))
        paths.append(target)
    return paths
