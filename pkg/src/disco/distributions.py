"""Empirical distributions over a repeated cross-section panel.

Micro observations arrive as (unit, period, outcome) records and are
grouped into cells of sorted draws.  Everything downstream consumes the
two dual summaries built here: the empirical quantile function evaluated
on a probability grid, and the empirical CDF evaluated on a support grid
shared by all units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MicroPanel",
    "DistGrid",
    "build_panel",
    "empirical_quantile",
    "empirical_cdf",
    "quantile_grid",
    "support_grid",
    "dist_grid",
    "quantile_from_cdf",
]


@dataclass(frozen=True)
class MicroPanel:
    """Outcome draws per (unit, period) cell, each cell sorted ascending.

    Attributes
    ----------
    cells : dict
        Maps ``(unit, period)`` to a sorted 1-D float array of draws.
    units : tuple of int
        Distinct unit ids, ascending.
    periods : tuple of int
        Distinct period ids, ascending.
    amin, amax : float
        Global outcome range over every cell; all support grids are
        anchored to this shared range.
    """

    cells: dict
    units: tuple
    periods: tuple
    amin: float
    amax: float

    def sample(self, unit: int, period: int) -> np.ndarray:
        try:
            return self.cells[(unit, period)]
        except KeyError:
            raise KeyError(
                f"unit {unit} has no observations in period {period}"
            ) from None

    def n(self, unit: int, period: int) -> int:
        return self.sample(unit, period).size

    def has(self, unit: int, period: int) -> bool:
        return (unit, period) in self.cells

    @property
    def support(self) -> tuple:
        return self.amin, self.amax

    @property
    def n_total(self) -> int:
        return sum(v.size for v in self.cells.values())

    def counts(self) -> dict:
        """Observation count per (unit, period) cell."""
        return {key: arr.size for key, arr in self.cells.items()}


@dataclass(frozen=True)
class DistGrid:
    """One empirical distribution in its two dual grid views.

    Attributes
    ----------
    q_points : ndarray, shape (m,)
        Probability grid in [qmin, qmax].
    quantiles : ndarray, shape (m,)
        Left-continuous empirical quantiles at ``q_points``.
    y_points : ndarray, shape (g,)
        Support grid spanning the shared outcome range.
    cdf : ndarray, shape (g,)
        Empirical CDF values at ``y_points``.
    """

    q_points: np.ndarray
    quantiles: np.ndarray
    y_points: np.ndarray
    cdf: np.ndarray


def build_panel(records) -> MicroPanel:
    """Group raw (unit, period, outcome) records into a MicroPanel.

    Parameters
    ----------
    records : array_like, shape (n, 3)
        One row per micro observation: integer unit id, integer period
        id, finite float outcome.

    Returns
    -------
    MicroPanel

    Raises
    ------
    ValueError
        On empty input, malformed shape, non-integer ids, or non-finite
        outcomes; the message names the offending 1-based record.
    """
    arr = np.asarray(records, dtype=float)
    if arr.size == 0:
        raise ValueError("empty input: no records")
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("records must be rows of (unit, period, outcome)")
    for col, what in ((0, "unit id"), (1, "period id")):
        vals = arr[:, col]
        bad = ~np.isfinite(vals) | (vals != np.floor(vals))
        if bad.any():
            row = int(np.argmax(bad))
            raise ValueError(f"record {row + 1}: {what} {vals[row]} is not an integer")
    bad = ~np.isfinite(arr[:, 2])
    if bad.any():
        row = int(np.argmax(bad))
        raise ValueError(f"record {row + 1}: outcome {arr[row, 2]} is not finite")

    unit_ids = arr[:, 0].astype(np.int64)
    period_ids = arr[:, 1].astype(np.int64)
    outcomes = arr[:, 2]
    order = np.lexsort((outcomes, period_ids, unit_ids))
    u, p, y = unit_ids[order], period_ids[order], outcomes[order]
    y.flags.writeable = False
    starts = np.r_[0, np.flatnonzero((u[1:] != u[:-1]) | (p[1:] != p[:-1])) + 1]
    cells = {}
    for lo, hi in zip(starts, np.r_[starts[1:], y.size]):
        cells[(int(u[lo]), int(p[lo]))] = y[lo:hi]
    units = tuple(sorted({key[0] for key in cells}))
    periods = tuple(sorted({key[1] for key in cells}))
    return MicroPanel(cells, units, periods, float(y.min()), float(y.max()))


def _sorted_sample(sample) -> np.ndarray:
    xs = np.asarray(sample, dtype=float)
    if xs.ndim != 1:
        xs = xs.reshape(-1)
    if xs.size == 0:
        raise ValueError("sample is empty")
    if xs.size > 1 and np.any(xs[1:] < xs[:-1]):
        xs = np.sort(xs)
    return xs


def empirical_quantile(sample, q):
    """Left-continuous empirical quantile function of a sample.

    Evaluates ``inf {x : q <= F(x)}`` for the empirical CDF ``F``, which
    is the order statistic ``x_(k)`` with ``k`` the smallest integer
    such that ``k / n >= q``.  ``q = 0`` returns the minimum.

    Parameters
    ----------
    sample : array_like
        Observed draws; sorted input is used as is.
    q : float or array_like
        Probabilities in [0, 1].

    Returns
    -------
    float or ndarray
        Quantile values with the shape of ``q``.
    """
    xs = _sorted_sample(sample)
    qs = np.asarray(q, dtype=float)
    if np.any((qs < 0.0) | (qs > 1.0)):
        raise ValueError("q must lie in [0, 1]")
    ranks = np.arange(1, xs.size + 1) / xs.size
    idx = np.searchsorted(ranks, qs, side="left")
    out = xs[np.minimum(idx, xs.size - 1)]
    return float(out) if out.ndim == 0 else out


def empirical_cdf(sample, y):
    """Empirical CDF of a sample: ``#{x_i <= y} / n``.

    Parameters
    ----------
    sample : array_like
        Observed draws; sorted input is used as is.
    y : float or array_like
        Evaluation points.

    Returns
    -------
    float or ndarray
        Probabilities with the shape of ``y``.
    """
    xs = _sorted_sample(sample)
    ys = np.asarray(y, dtype=float)
    out = np.searchsorted(xs, ys, side="right") / xs.size
    return float(out) if out.ndim == 0 else out


def quantile_grid(m: int, qmin: float = 0.0, qmax: float = 1.0) -> np.ndarray:
    """Midpoint probability grid: ``qmin + (i - 0.5)/m * (qmax - qmin)``.

    The midpoint rule approximates integrals over [qmin, qmax] with
    O(1/m^2) bias and never evaluates at the ambiguous q = 0 endpoint.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    if not (0.0 <= qmin < qmax <= 1.0):
        raise ValueError("need 0 <= qmin < qmax <= 1")
    return qmin + (qmax - qmin) * (np.arange(m) + 0.5) / m


def support_grid(g: int, amin: float, amax: float) -> np.ndarray:
    """Uniform support grid of g points spanning [amin, amax] inclusive."""
    if g < 2:
        raise ValueError("g must be at least 2")
    if not np.isfinite(amin) or not np.isfinite(amax) or amin > amax:
        raise ValueError("need finite amin <= amax")
    return np.linspace(amin, amax, g)


def dist_grid(sample, m: int, g: int, qmin: float = 0.0, qmax: float = 1.0,
              support=None) -> DistGrid:
    """Evaluate both grid summaries of a sample's empirical distribution.

    Parameters
    ----------
    sample : array_like
        Observed draws.
    m : int
        Number of probability grid points (midpoint rule).
    g : int
        Number of support grid points.
    qmin, qmax : float
        Probability range, 0 <= qmin < qmax <= 1.
    support : tuple of float, optional
        Global (amin, amax) for the support grid.  Defaults to the
        sample's own range; cross-unit comparisons must pass the pooled
        range so every unit shares one grid.

    Returns
    -------
    DistGrid
    """
    xs = _sorted_sample(sample)
    if support is None:
        support = (float(xs[0]), float(xs[-1]))
    amin, amax = float(support[0]), float(support[1])
    if amin == amax and (xs[0] != amin or xs[-1] != amin):
        raise ValueError("one-point support requires a constant sample")
    qp = quantile_grid(m, qmin, qmax)
    yp = support_grid(g, amin, amax)
    return DistGrid(qp, empirical_quantile(xs, qp), yp, empirical_cdf(xs, yp))


def quantile_from_cdf(cdf_grid, y_points, q):
    """Pseudo-invert a gridded CDF: smallest grid y with ``cdf >= q``.

    Parameters
    ----------
    cdf_grid : array_like
        Nondecreasing CDF values on ``y_points``.
    y_points : array_like
        Support grid, same length as ``cdf_grid``.
    q : float or array_like
        Probabilities.

    Returns
    -------
    values : float or ndarray
        Support values with the shape of ``q``.
    saturated : bool or ndarray
        True where ``q`` exceeds the top of the CDF, in which case the
        last grid point is returned.
    """
    c = np.asarray(cdf_grid, dtype=float)
    ys = np.asarray(y_points, dtype=float)
    if c.ndim != 1 or c.shape != ys.shape:
        raise ValueError("cdf_grid and y_points must be 1-D of equal length")
    if c.size == 0:
        raise ValueError("cdf_grid is empty")
    if np.any(c[1:] < c[:-1]):
        raise ValueError("cdf_grid must be nondecreasing")
    qs = np.asarray(q, dtype=float)
    idx = np.searchsorted(c, qs, side="left")
    saturated = idx >= c.size
    vals = ys[np.minimum(idx, c.size - 1)]
    if vals.ndim == 0:
        return float(vals), bool(saturated)
    return vals, saturated
