"""Interval summaries of grid-level effects, with bootstrap inference.

Collapses the g-point paths into partition-cell means per period, with
standard errors and confidence intervals computed from the cell means
of the retained bootstrap gap draws (not from averaging pointwise
standard errors, which would ignore within-cell correlation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import AGG_KINDS, DiscoResult
from .inference import BootstrapBands

__all__ = ["SummaryRow", "SummaryTable", "aggregate"]


@dataclass(frozen=True)
class SummaryRow:
    """One partition cell of one period."""

    period: int
    range_lo: float
    range_hi: float
    effect: float
    se: Optional[float]
    ci_lo: Optional[float]
    ci_hi: Optional[float]
    significant: bool


@dataclass(frozen=True)
class SummaryTable:
    """Summary rows for every period, pre and post, labeled by period."""

    rows: tuple
    agg_kind: str
    partition: tuple
    cl: Optional[float]

    def for_period(self, period: int) -> tuple:
        return tuple(r for r in self.rows if r.period == period)


def _default_partition(kind: str, result: DiscoResult) -> tuple:
    if kind.startswith("quantile"):
        return (0.0, 0.25, 0.5, 0.75, 1.0)
    return tuple(float(p) for p in np.linspace(result.amin, result.amax, 5))


def aggregate(result: DiscoResult, bands: Optional[BootstrapBands] = None,
              agg: Optional[str] = None, partition=None) -> SummaryTable:
    """Collapse a result's grid paths into a partition-cell summary table.

    Parameters
    ----------
    result : DiscoResult
    bands : BootstrapBands, optional
        Supplies the gap draws for cell standard errors and percentile
        confidence intervals.  Must have been computed for the same
        category of estimand (diff versus level); the representation
        may differ because both gap tensors are retained.
    agg : str, optional
        Summary kind; defaults to the result's configured kind.  Level
        kinds (``quantile``, ``cdf``) summarize the synthetic paths,
        diff kinds the treated-minus-synthetic paths.
    partition : sequence of float, optional
        Strictly increasing cell boundaries: probabilities in [0, 1]
        for quantile kinds, outcome values in [amin, amax] for cdf
        kinds.  Defaults to the configured samples, else quartiles of
        [0, 1] or five equally spaced outcome points.  Cells are
        half-open [lo, hi) with the final cell closed.

    Returns
    -------
    SummaryTable
        Rows ordered period-major; ``significant`` is set only for diff
        kinds whose confidence interval excludes zero.
    """
    kind = agg if agg is not None else result.config.agg
    if kind not in AGG_KINDS:
        raise ValueError(f"agg must be one of {AGG_KINDS}")
    quantile_rep = kind.startswith("quantile")
    diff_kind = kind.endswith("Diff")

    if partition is None:
        partition = result.config.samples
    if partition is None:
        partition = _default_partition(kind, result)
    pts = tuple(float(p) for p in partition)
    if len(pts) < 2 or any(b <= a for a, b in zip(pts, pts[1:])):
        raise ValueError("partition must be at least 2 strictly increasing points")
    if quantile_rep:
        if pts[0] < 0.0 or pts[-1] > 1.0:
            raise ValueError("quantile-kind partition points outside [0, 1]")
    else:
        if pts[0] < result.amin or pts[-1] > result.amax:
            raise ValueError("cdf-kind partition points outside [amin, amax]")

    coords = result.q_points if quantile_rep else result.y_points
    values = {
        "quantile": result.quantile_synth,
        "cdf": result.cdf_synth,
        "quantileDiff": result.quantile_diff,
        "cdfDiff": result.cdf_diff,
    }[kind]

    gaps = None
    cl = None
    if bands is not None:
        if bands.estimand.endswith("Diff") != diff_kind:
            raise ValueError(
                f"bands were computed for {bands.estimand!r}; "
                f"a {kind!r} summary needs the same diff/level category"
            )
        gaps = bands.gaps(kind)
        if diff_kind:
            gaps = -gaps
        cl = bands.cl

    rows = []
    n_cells = len(pts) - 1
    for t_idx, period in enumerate(result.periods):
        for c in range(n_cells):
            lo, hi = pts[c], pts[c + 1]
            if c == n_cells - 1:
                mask = (coords >= lo) & (coords <= hi)
            else:
                mask = (coords >= lo) & (coords < hi)
            if not mask.any():
                se = ci_lo = ci_hi = float("nan") if gaps is not None else None
                rows.append(SummaryRow(period, lo, hi, float("nan"),
                                       se, ci_lo, ci_hi, False))
                continue
            effect = float(values[mask, t_idx].mean())
            if gaps is None:
                rows.append(SummaryRow(period, lo, hi, effect,
                                       None, None, None, False))
                continue
            cell = gaps[:, mask, t_idx].mean(axis=1)
            rn = float(bands.root_n[t_idx])
            se = float(cell.std(ddof=1)) / rn if cell.size > 1 else 0.0
            ci_lo = effect + float(np.quantile(cell, (1.0 - cl) / 2.0)) / rn
            ci_hi = effect + float(np.quantile(cell, (1.0 + cl) / 2.0)) / rn
            significant = bool(diff_kind and (ci_lo > 0.0 or ci_hi < 0.0))
            rows.append(SummaryRow(period, lo, hi, effect,
                                   se, ci_lo, ci_hi, significant))
    return SummaryTable(rows=tuple(rows), agg_kind=kind, partition=pts, cl=cl)
