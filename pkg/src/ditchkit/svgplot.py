"""Dependency-free SVG rendering for heatmaps and line plots.

Every figure writes two files: the .svg and a .csv holding the plotted
numbers, so results stay grep-able.  Output is deterministic (fixed
float formatting, no timestamps).
"""

from __future__ import annotations

import os

import numpy as np

from .evaluation import write_grid_csv, write_series_csv

# five-stop blue -> teal -> yellow ramp, linear in between
_STOPS = np.array([
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
], dtype=np.float64)


def _ramp(v: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to RGB rows via the stop table."""
    v = np.clip(v, 0.0, 1.0) * (len(_STOPS) - 1)
    lo = np.floor(v).astype(int)
    hi = np.minimum(lo + 1, len(_STOPS) - 1)
    frac = (v - lo)[..., None]
    return (_STOPS[lo] * (1 - frac) + _STOPS[hi] * frac).astype(int)


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def _csv_sibling(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".csv"


def heatmap_svg(grid: np.ndarray, path: str, title: str = "",
                vmin: float | None = None,
                vmax: float | None = None) -> None:
    """Cell-per-rect heatmap; row 0 is drawn at the top."""
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError("heatmap needs a 2-D array")
    lo = float(np.min(g)) if vmin is None else vmin
    hi = float(np.max(g)) if vmax is None else vmax
    span = hi - lo if hi > lo else 1.0
    rgb = _ramp((g - lo) / span)

    h, w = g.shape
    cell = max(2, min(12, 560 // max(h, w)))
    width = w * cell + 80
    height = h * cell + 60
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        parts.append(f'<text x="10" y="20" font-family="monospace" '
                     f'font-size="13">{title}</text>')
    y0 = 35
    for i in range(h):
        for j in range(w):
            r, gg, b = rgb[i, j]
            parts.append(
                f'<rect x="{10 + j * cell}" y="{y0 + i * cell}" '
                f'width="{cell}" height="{cell}" '
                f'fill="rgb({r},{gg},{b})"/>')
    parts.append(f'<text x="10" y="{y0 + h * cell + 16}" '
                 f'font-family="monospace" font-size="11">'
                 f'min {_fmt(lo)}  max {_fmt(hi)}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
    write_grid_csv(_csv_sibling(path), g)


def line_svg(series: dict, path: str, title: str = "",
             x_label: str = "step", y_label: str = "value",
             dt: float = 1.0) -> None:
    """Multi-series line plot; series maps name -> 1-D array."""
    if not series:
        raise ValueError("no series to plot")
    names = sorted(series)
    ys = {k: np.asarray(series[k], dtype=np.float64) for k in names}
    y_all = np.concatenate([ys[k] for k in names])
    y_lo, y_hi = float(np.min(y_all)), float(np.max(y_all))
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    x_hi = max(len(ys[k]) for k in names) - 1
    x_hi = max(x_hi, 1) * dt

    width, height = 640, 400
    ml, mr, mt, mb = 60, 20, 40, 45
    pw, ph = width - ml - mr, height - mt - mb

    def sx(x):
        return ml + pw * (x / x_hi)

    def sy(y):
        return mt + ph * (1 - (y - y_lo) / (y_hi - y_lo))

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
              "#8c564b", "#17becf", "#7f7f7f"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" '
             f'fill="none" stroke="black"/>']
    if title:
        parts.append(f'<text x="{ml}" y="22" font-family="monospace" '
                     f'font-size="13">{title}</text>')
    for k in range(5):
        yv = y_lo + (y_hi - y_lo) * k / 4
        yy = sy(yv)
        parts.append(f'<line x1="{ml}" y1="{_fmt(yy)}" x2="{ml + pw}" '
                     f'y2="{_fmt(yy)}" stroke="#dddddd"/>')
        parts.append(f'<text x="4" y="{_fmt(yy + 4)}" '
                     f'font-family="monospace" font-size="10">'
                     f'{_fmt(yv)}</text>')
        xv = x_hi * k / 4
        xx = sx(xv)
        parts.append(f'<text x="{_fmt(xx - 8)}" y="{height - 25}" '
                     f'font-family="monospace" font-size="10">'
                     f'{_fmt(xv)}</text>')
    parts.append(f'<text x="{ml + pw // 2 - 20}" y="{height - 8}" '
                 f'font-family="monospace" font-size="11">{x_label}</text>')
    parts.append(f'<text x="4" y="{mt - 8}" font-family="monospace" '
                 f'font-size="11">{y_label}</text>')
    for ci, k in enumerate(names):
        y = ys[k]
        pts = " ".join(f"{_fmt(sx(i * dt))},{_fmt(sy(v))}"
                       for i, v in enumerate(y))
        color = colors[ci % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{ml + pw + 2 - 110}" '
                     f'y="{mt + 14 + 13 * ci}" font-family="monospace" '
                     f'font-size="10" fill="{color}">{k}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
    write_series_csv(_csv_sibling(path), ys, dt=dt, x_label=x_label)
