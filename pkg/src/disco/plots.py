"""Static SVG views of the estimated series.

Each figure holds one panel per period: treated vs synthetic lines for
the level kinds, a single gap line for the diff kinds, bootstrap bands
as a shaded polygon when available.  With ``categorical=True`` the
series are drawn as grouped bars instead of lines.  Everything is
rendered by hand into a flat SVG string, no plotting backends, so the
files are deterministic.  The emitted CSVs stay the canonical artifact;
these are a convenience view over them.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

from .core import DiscoResult
from .inference import BootstrapBands
from .io import band_matrices

__all__ = ["render_plots", "render_figure"]

PANEL_W = 300
PANEL_H = 230
PAD_L = 58
PAD_R = 14
PAD_T = 30
PAD_B = 40
FIG_MARGIN = 10
LEGEND_H = 22
MAX_COLS = 3

SERIES_COLORS = ("#1f6fb4", "#c23b22")
BAND_FILL = "#1f6fb4"
REF_COLOR = "#777777"
AXIS_COLOR = "#333333"


def _fmt(v: float) -> str:
    # coordinate precision: hundredths of a pixel are plenty
    return f"{v:.2f}"


def _label(v: float) -> str:
    return f"{v:.4g}"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class _Scale:
    """Affine data-to-pixel map for one axis."""

    def __init__(self, lo: float, hi: float, p0: float, p1: float):
        if not np.isfinite(lo) or not np.isfinite(hi):
            lo, hi = 0.0, 1.0
        if hi <= lo:
            pad = 1.0 if lo == 0 else abs(lo) * 0.5
            lo, hi = lo - pad, hi + pad
        self.lo = lo
        self.hi = hi
        self.p0 = p0
        self.p1 = p1

    def __call__(self, v) -> float:
        frac = (np.asarray(v, dtype=float) - self.lo) / (self.hi - self.lo)
        return float(self.p0 + frac * (self.p1 - self.p0))

    def ticks(self, n: int = 4):
        return np.linspace(self.lo, self.hi, n + 1)


def _data_range(arrays, pad_frac: float = 0.05):
    vals = np.concatenate([np.asarray(a, dtype=float).reshape(-1) for a in arrays])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return 0.0, 1.0
    lo, hi = float(vals.min()), float(vals.max())
    if hi == lo:
        pad = 1.0 if lo == 0 else abs(lo) * 0.1
    else:
        pad = (hi - lo) * pad_frac
    return lo - pad, hi + pad


def _panel(parts: list, ox: float, oy: float, title: str, x: np.ndarray,
           columns: dict, band, xlabel: str, categorical: bool,
           ylo: float, yhi: float, hline: Optional[float],
           vline: Optional[float]) -> None:
    xs = _Scale(float(x.min()), float(x.max()), ox + PAD_L, ox + PANEL_W - PAD_R)
    ys = _Scale(ylo, yhi, oy + PANEL_H - PAD_B, oy + PAD_T)

    left, right = ox + PAD_L, ox + PANEL_W - PAD_R
    top, bottom = oy + PAD_T, oy + PANEL_H - PAD_B

    parts.append(f'<text x="{_fmt((left + right) / 2)}" y="{_fmt(oy + 18)}" '
                 f'text-anchor="middle" font-weight="bold">{_esc(title)}</text>')

    if band is not None:
        lower, upper = band
        fwd = " ".join(f"{_fmt(xs(v))},{_fmt(ys(lo_i))}" for v, lo_i in zip(x, lower))
        back = " ".join(f"{_fmt(xs(v))},{_fmt(ys(up_i))}"
                        for v, up_i in zip(x[::-1], upper[::-1]))
        parts.append(f'<polygon points="{fwd} {back}" fill="{BAND_FILL}" '
                     'fill-opacity="0.18" stroke="none"/>')

    if hline is not None and ylo <= hline <= yhi:
        py = _fmt(ys(hline))
        parts.append(f'<line x1="{_fmt(left)}" y1="{py}" x2="{_fmt(right)}" y2="{py}" '
                     f'stroke="{REF_COLOR}" stroke-dasharray="4 3"/>')
    if vline is not None and xs.lo <= vline <= xs.hi:
        px = _fmt(xs(vline))
        parts.append(f'<line x1="{px}" y1="{_fmt(top)}" x2="{px}" y2="{_fmt(bottom)}" '
                     f'stroke="{REF_COLOR}" stroke-dasharray="4 3"/>')

    if categorical:
        # grouped bars: one slot per grid point, split among the series
        slot = (right - left) / max(len(x), 1)
        bar = 0.8 * slot / max(len(columns), 1)
        base = ys(max(ylo, min(0.0, yhi)))
        for s, (name, values) in enumerate(columns.items()):
            color = SERIES_COLORS[s % len(SERIES_COLORS)]
            for i, v in enumerate(values):
                cx = left + (i + 0.5) * slot - 0.8 * slot / 2 + s * bar
                py = ys(float(v))
                y0, y1 = min(py, base), max(py, base)
                parts.append(f'<rect x="{_fmt(cx)}" y="{_fmt(y0)}" '
                             f'width="{_fmt(bar)}" height="{_fmt(max(y1 - y0, 0.5))}" '
                             f'fill="{color}" fill-opacity="0.85"/>')
    else:
        for s, (name, values) in enumerate(columns.items()):
            color = SERIES_COLORS[s % len(SERIES_COLORS)]
            dash = ' stroke-dasharray="6 3"' if s == 1 else ""
            pts = " ".join(f"{_fmt(xs(v))},{_fmt(ys(float(w)))}"
                           for v, w in zip(x, values))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                         f'stroke-width="1.6"{dash}/>')

    parts.append(f'<line x1="{_fmt(left)}" y1="{_fmt(bottom)}" x2="{_fmt(right)}" '
                 f'y2="{_fmt(bottom)}" stroke="{AXIS_COLOR}"/>')
    parts.append(f'<line x1="{_fmt(left)}" y1="{_fmt(top)}" x2="{_fmt(left)}" '
                 f'y2="{_fmt(bottom)}" stroke="{AXIS_COLOR}"/>')
    for tv in xs.ticks():
        px = _fmt(xs(tv))
        parts.append(f'<line x1="{px}" y1="{_fmt(bottom)}" x2="{px}" '
                     f'y2="{_fmt(bottom + 4)}" stroke="{AXIS_COLOR}"/>')
        parts.append(f'<text x="{px}" y="{_fmt(bottom + 16)}" '
                     f'text-anchor="middle">{_label(float(tv))}</text>')
    for tv in ys.ticks():
        py = _fmt(ys(tv))
        parts.append(f'<line x1="{_fmt(left - 4)}" y1="{py}" x2="{_fmt(left)}" '
                     f'y2="{py}" stroke="{AXIS_COLOR}"/>')
        parts.append(f'<text x="{_fmt(left - 7)}" y="{_fmt(ys(tv) + 4)}" '
                     f'text-anchor="end">{_label(float(tv))}</text>')
    parts.append(f'<text x="{_fmt((left + right) / 2)}" y="{_fmt(bottom + 32)}" '
                 f'text-anchor="middle">{_esc(xlabel)}</text>')


def render_figure(path: str, x: np.ndarray, periods, series: dict, band,
                  xlabel: str, categorical: bool = False,
                  hline: Optional[float] = None,
                  vline: Optional[float] = None) -> None:
    """Write one SVG figure with a panel for every period.

    Parameters
    ----------
    series : dict
        Legend name -> (grid, periods) matrix.
    band : (lower, upper) matrices or None
        Shaded region, same shape as the series matrices.
    """
    periods = list(periods)
    x = np.asarray(x, dtype=float)
    ncols = min(len(periods), MAX_COLS)
    nrows = (len(periods) + ncols - 1) // ncols
    width = 2 * FIG_MARGIN + ncols * PANEL_W
    height = 2 * FIG_MARGIN + LEGEND_H + nrows * PANEL_H

    bounds = list(series.values())
    if band is not None:
        bounds += [band[0], band[1]]
    ylo, yhi = _data_range(bounds)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}" '
             'font-family="sans-serif" font-size="11">',
             f'<rect width="{width}" height="{height}" fill="white"/>']

    lx = FIG_MARGIN + 4
    for s, name in enumerate(series):
        color = SERIES_COLORS[s % len(SERIES_COLORS)]
        parts.append(f'<rect x="{_fmt(lx)}" y="{FIG_MARGIN + 4}" width="14" '
                     f'height="10" fill="{color}"/>')
        parts.append(f'<text x="{_fmt(lx + 18)}" y="{FIG_MARGIN + 13}">'
                     f'{_esc(name)}</text>')
        lx += 26 + 7 * len(name)

    for k, t in enumerate(periods):
        ox = FIG_MARGIN + (k % ncols) * PANEL_W
        oy = FIG_MARGIN + LEGEND_H + (k // ncols) * PANEL_H
        columns = {name: mat[:, k] for name, mat in series.items()}
        pband = None if band is None else (band[0][:, k], band[1][:, k])
        _panel(parts, ox, oy, f"period {int(t)}", x, columns, pband, xlabel,
               categorical, ylo, yhi, hline, vline)

    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def render_plots(result: DiscoResult, bands: Optional[BootstrapBands],
                 out_dir: str, categorical: bool = False,
                 hline: Optional[float] = None,
                 vline: Optional[float] = None) -> tuple:
    """Write the four standard figures into out_dir, return their paths."""
    jobs = (
        ("plot_quantile.svg", "quantile", result.q_points, "q",
         {"treated": result.quantile_t, "synthetic": result.quantile_synth}, None),
        ("plot_cdf.svg", "cdf", result.y_points, "y",
         {"treated": result.cdf_t, "synthetic": result.cdf_synth}, None),
        ("plot_quantile_diff.svg", "quantileDiff", result.q_points, "q",
         {"treated - synthetic": result.quantile_diff}, 0.0),
        ("plot_cdf_diff.svg", "cdfDiff", result.y_points, "y",
         {"treated - synthetic": result.cdf_diff}, 0.0),
    )
    paths = []
    for fname, kind, x, xlabel, series, default_hline in jobs:
        band = band_matrices(result, bands, kind)
        ref = hline if hline is not None else default_hline
        path = os.path.join(out_dir, fname)
        render_figure(path, x, result.periods, series, band, xlabel,
                      categorical=categorical, hline=ref, vline=vline)
        paths.append(path)
    return tuple(paths)
