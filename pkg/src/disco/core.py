"""Distributional synthetic control estimation.

Weights are fitted period by period on pre-treatment data, averaged,
and applied to every period to produce synthetic quantile and CDF paths
next to the treated unit's own paths.  Both representations are always
computed: in quantile mode the synthetic CDF is the pseudo-inverse of
the synthetic quantile function, in mixture mode the synthetic quantile
function is the pseudo-inverse of the mixture CDF.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import (
    MicroPanel,
    empirical_cdf,
    empirical_quantile,
    quantile_grid,
    support_grid,
    quantile_from_cdf,
)
from .solvers import LsProblem, WeightVector, solve_affine_ls, solve_simplex_l1, solve_simplex_ls

__all__ = [
    "AGG_KINDS",
    "DiscoConfig",
    "DiscoResult",
    "SyntheticPaths",
    "period_weights",
    "average_weights",
    "synthetic_paths",
    "wasserstein2_sq",
    "run_disco",
]

AGG_KINDS = ("quantile", "cdf", "quantileDiff", "cdfDiff")


@dataclass(frozen=True)
class DiscoConfig:
    """Full configuration of one estimation run.

    Attributes
    ----------
    target_id : int
        Unit id of the treated unit.
    t0 : int
        First treated period; periods strictly before it are
        pre-treatment.
    m : int
        Probability grid size for the weight-fitting objective.
    g : int
        Evaluation grid size for the reported quantile and CDF paths
        (and for the mixture-mode fitting grid).
    mixture : bool
        Fit weights by matching CDFs (1-Wasserstein mixture) instead of
        quantile functions.
    simplex : bool
        Constrain weights to be nonnegative.  Relaxing it is only
        defined in quantile mode: negative mixture weights can produce
        non-monotone CDFs, so mixture + nosimplex is rejected.
    qmin, qmax : float
        Probability range over which quantile functions are matched.
    seed : int, optional
        Root seed for the inference resampling; the point estimate
        itself uses no randomness.
    inference : InferenceConfig, optional
        Bootstrap and permutation settings, used by the inference layer.
    agg : str
        Summary kind, one of ``quantile``, ``cdf``, ``quantileDiff``,
        ``cdfDiff``.
    samples : tuple of float, optional
        Partition points for the summary table.  None means the kind's
        default: quartiles of [0, 1] for quantile kinds, five equally
        spaced outcome points for cdf kinds.
    """

    target_id: int
    t0: int
    m: int = 1000
    g: int = 100
    mixture: bool = False
    simplex: bool = True
    qmin: float = 0.0
    qmax: float = 1.0
    seed: Optional[int] = None
    inference: Optional[object] = None
    agg: str = "quantileDiff"
    samples: Optional[tuple] = None

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if self.g < 2:
            raise ValueError("g must be at least 2")
        if not (0.0 <= self.qmin < self.qmax <= 1.0):
            raise ValueError("need 0 <= qmin < qmax <= 1")
        if self.agg not in AGG_KINDS:
            raise ValueError(f"agg must be one of {AGG_KINDS}")
        if self.mixture and not self.simplex:
            raise ValueError("mixture mode requires the simplex: negative mixture "
                             "weights can produce non-monotone CDFs")
        if self.samples is not None:
            pts = tuple(float(s) for s in self.samples)
            if len(pts) < 2 or any(b <= a for a, b in zip(pts, pts[1:])):
                raise ValueError("samples must be at least 2 strictly increasing points")
            object.__setattr__(self, "samples", pts)


@dataclass(frozen=True)
class SyntheticPaths:
    """Treated and synthetic grids for every period, both representations."""

    q_points: np.ndarray
    y_points: np.ndarray
    quantile_t: np.ndarray
    quantile_synth: np.ndarray
    cdf_t: np.ndarray
    cdf_synth: np.ndarray


@dataclass(frozen=True)
class DiscoResult:
    """Everything the estimator produces for one run.

    Matrix columns are ordered by ascending period over
    ``pre_periods + post_periods``; rows follow ``q_points`` for the
    quantile matrices and ``y_points`` for the CDF matrices.
    """

    config: DiscoConfig
    control_ids: tuple
    periods: tuple
    pre_periods: tuple
    post_periods: tuple
    period_weights: np.ndarray
    weights: np.ndarray
    q_points: np.ndarray
    y_points: np.ndarray
    quantile_t: np.ndarray
    quantile_synth: np.ndarray
    cdf_t: np.ndarray
    cdf_synth: np.ndarray
    amin: float
    amax: float

    @property
    def support(self) -> tuple:
        return self.amin, self.amax

    @property
    def quantile_diff(self) -> np.ndarray:
        """Treated minus synthetic quantile paths."""
        return self.quantile_t - self.quantile_synth

    @property
    def cdf_diff(self) -> np.ndarray:
        """Treated minus synthetic CDF paths."""
        return self.cdf_t - self.cdf_synth

    def period_column(self, period: int) -> int:
        try:
            return self.periods.index(period)
        except ValueError:
            raise KeyError(f"period {period} not in result") from None


def _control_ids(panel: MicroPanel, config: DiscoConfig) -> tuple:
    if config.target_id not in panel.units:
        raise ValueError(f"target id {config.target_id} not in panel")
    controls = tuple(u for u in panel.units if u != config.target_id)
    if not controls:
        raise ValueError("panel has no control units")
    return controls


def period_weights(panel: MicroPanel, config: DiscoConfig, period: int) -> WeightVector:
    """Fit the weight vector for a single pre-treatment period.

    Quantile mode builds the m-point quantile design over [qmin, qmax]
    and solves the simplex (or sum-to-one only) least squares problem;
    mixture mode builds the g-point CDF design on the panel's shared
    support grid and solves the simplex L1 problem.

    Parameters
    ----------
    panel : MicroPanel
    config : DiscoConfig
    period : int
        Period whose cells supply the fitting data.

    Returns
    -------
    WeightVector
    """
    controls = _control_ids(panel, config)
    target = panel.sample(config.target_id, period)
    if config.mixture:
        amin, amax = panel.support
        yp = support_grid(config.g, amin, amax)
        design = np.column_stack(
            [empirical_cdf(panel.sample(u, period), yp) for u in controls]
        )
        problem = LsProblem(design, empirical_cdf(target, yp), simplex=True)
        return solve_simplex_l1(problem, cell_width=float(yp[1] - yp[0]))
    qp = quantile_grid(config.m, config.qmin, config.qmax)
    design = np.column_stack(
        [empirical_quantile(panel.sample(u, period), qp) for u in controls]
    )
    problem = LsProblem(design, empirical_quantile(target, qp), simplex=config.simplex)
    if config.simplex:
        return solve_simplex_ls(problem)
    return solve_affine_ls(problem)


def average_weights(period_weight_rows: np.ndarray) -> np.ndarray:
    """Unweighted column mean of the per-period weight rows."""
    rows = np.atleast_2d(np.asarray(period_weight_rows, dtype=float))
    if rows.shape[0] < 1:
        raise ValueError("need at least one pre-treatment weight row")
    return rows.mean(axis=0)


def wasserstein2_sq(qf_a, qf_b, qmin: float = 0.0, qmax: float = 1.0) -> float:
    """Squared 2-Wasserstein distance between gridded quantile functions.

    Midpoint-rule approximation of the integral of the squared quantile
    difference over [qmin, qmax]; both vectors must sit on the same
    probability grid.
    """
    a = np.asarray(qf_a, dtype=float)
    b = np.asarray(qf_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("quantile vectors differ in length")
    d = a - b
    return float(qmax - qmin) * float(d @ d) / a.size


def synthetic_paths(panel: MicroPanel, weights, config: DiscoConfig) -> SyntheticPaths:
    """Build treated and synthetic quantile/CDF paths for every period.

    Both representations are always produced.  Quantile mode averages
    control quantile functions and derives the synthetic CDF as the
    empirical CDF of the g weighted quantile values (its mass spans
    [qmin, qmax], so with the full probability range it is an ordinary
    step CDF).  Mixture mode averages control CDFs and derives the
    synthetic quantile function by pseudo-inverting the mixture onto
    the support grid.
    """
    controls = _control_ids(panel, config)
    w = np.asarray(weights, dtype=float)
    amin, amax = panel.support
    qp = quantile_grid(config.g, config.qmin, config.qmax)
    yp = support_grid(config.g, amin, amax)
    n_periods = len(panel.periods)
    shape = (config.g, n_periods)
    quantile_t = np.empty(shape)
    quantile_synth = np.empty(shape)
    cdf_t = np.empty(shape)
    cdf_synth = np.empty(shape)
    span = config.qmax - config.qmin
    for k, t in enumerate(panel.periods):
        tgt = panel.sample(config.target_id, t)
        quantile_t[:, k] = empirical_quantile(tgt, qp)
        cdf_t[:, k] = empirical_cdf(tgt, yp)
        if config.mixture:
            mix = np.column_stack(
                [empirical_cdf(panel.sample(u, t), yp) for u in controls]
            ) @ w
            # Nonnegative weights keep the mixture monotone; the guard
            # only absorbs last-bit rounding in the dot products.
            mix = np.maximum.accumulate(mix)
            cdf_synth[:, k] = mix
            quantile_synth[:, k] = quantile_from_cdf(mix, yp, qp)[0]
        else:
            qs = np.column_stack(
                [empirical_quantile(panel.sample(u, t), qp) for u in controls]
            ) @ w
            if config.simplex:
                qs = np.maximum.accumulate(qs)
            quantile_synth[:, k] = qs
            draws = np.sort(qs)
            cdf_synth[:, k] = config.qmin + span * (
                np.searchsorted(draws, yp, side="right") / config.g
            )
    return SyntheticPaths(qp, yp, quantile_t, quantile_synth, cdf_t, cdf_synth)


def run_disco(panel: MicroPanel, config: DiscoConfig) -> DiscoResult:
    """Run the full estimator: per-period weights, averaging, paths.

    Parameters
    ----------
    panel : MicroPanel
        Must contain the target and every control in every period.
    config : DiscoConfig

    Returns
    -------
    DiscoResult
    """
    controls = _control_ids(panel, config)
    pre = tuple(t for t in panel.periods if t < config.t0)
    post = tuple(t for t in panel.periods if t >= config.t0)
    if not pre:
        raise ValueError(f"no pre-treatment periods before t0={config.t0}")
    if not post:
        raise ValueError(f"all periods are pre-treatment for t0={config.t0}")
    for u in (config.target_id,) + controls:
        for t in panel.periods:
            if not panel.has(u, t):
                raise ValueError(f"unit {u} has no observations in period {t}")

    rows = np.vstack([period_weights(panel, config, t).weights for t in pre])
    weights = average_weights(rows)
    paths = synthetic_paths(panel, weights, config)
    return DiscoResult(
        config=config,
        control_ids=controls,
        periods=tuple(panel.periods),
        pre_periods=pre,
        post_periods=post,
        period_weights=rows,
        weights=weights,
        q_points=paths.q_points,
        y_points=paths.y_points,
        quantile_t=paths.quantile_t,
        quantile_synth=paths.quantile_synth,
        cdf_t=paths.cdf_t,
        cdf_synth=paths.cdf_synth,
        amin=panel.amin,
        amax=panel.amax,
    )
