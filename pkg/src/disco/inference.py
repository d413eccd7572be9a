"""Permutation and bootstrap inference for distributional synthetic controls.

The permutation test re-runs the whole estimator once per unit,
pretending in turn that each control was treated, and ranks
post-to-pre distance ratios.  The bootstrap resamples every (unit,
period) cell with replacement, re-estimates the weights on the
resampled pre-treatment data, and records the scaled gap between the
resampled synthetic paths and the point-estimate paths.

Replicates and placebo runs are independent work items and may run on a
thread pool (capped by the DISCO_THREADS environment variable); every
replicate derives its own generator from (seed, replicate index), so
results are bitwise identical regardless of thread count or schedule.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import DiscoConfig, DiscoResult, average_weights, period_weights, run_disco, synthetic_paths, wasserstein2_sq
from .distributions import MicroPanel
from .solvers import SolverError

__all__ = [
    "InferenceConfig",
    "PermutationResult",
    "BootstrapBands",
    "permutation_test",
    "bootstrap_gaps",
    "confidence_bands",
]

SE_FLOOR = 1e-12
MAX_DROP_FRACTION = 0.05


@dataclass(frozen=True)
class InferenceConfig:
    """Bootstrap and permutation settings.

    Attributes
    ----------
    ci : bool
        Compute bootstrap confidence bands.
    boots : int
        Number of bootstrap replicates.
    cl : float
        Confidence level in (0, 1).
    uniform : bool
        Sup-t uniform bands instead of pointwise percentile bands.
    permutation : bool
        Run the placebo permutation test.
    seed : int, optional
        Root seed for the resampling; falls back to DiscoConfig.seed.
    """

    ci: bool = False
    boots: int = 300
    cl: float = 0.95
    uniform: bool = True
    permutation: bool = False
    seed: Optional[int] = None

    def __post_init__(self):
        if self.boots < 1:
            raise ValueError("boots must be at least 1")
        if not (0.0 < self.cl < 1.0):
            raise ValueError("cl must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class PermutationResult:
    """Placebo distance ratios for every unit, true treated first.

    Attributes
    ----------
    unit_ids : tuple of int
        Unit order of the vectors; index 0 is the actual treated unit.
    ratios : ndarray
        Post over pre root-mean-square Wasserstein distances.
    per_unit_pre_rmse, per_unit_post_rmse : ndarray
        The R values entering each ratio.
    p_value : float
        Share of units whose ratio weakly exceeds the treated one;
        never below 1/(J+1) because the treated unit counts itself.
    """

    unit_ids: tuple
    ratios: np.ndarray
    per_unit_pre_rmse: np.ndarray
    per_unit_post_rmse: np.ndarray
    p_value: float


@dataclass(frozen=True)
class BootstrapBands:
    """Bootstrap gap draws plus the bands for the configured estimand.

    Attributes
    ----------
    gaps_quantile, gaps_cdf : ndarray, shape (effective, g, periods)
        Scaled gaps between resampled and point-estimate synthetic
        paths, in both representations, for every period (pre-period
        gaps feed the diagnostic rows of the summary table).  Oriented
        as synthetic-path deviations; negate for treated-minus-synth
        difference estimands.
    root_n : ndarray, shape (periods,)
        Square root of the treated unit's cell size per period, the
        scaling applied to the gaps.
    lower, upper, se : ndarray, shape (g, periods)
        Bands and pointwise standard errors for ``estimand``, in effect
        units.
    estimand : str
        Which path the bands describe: one of the agg kinds.
    band_kind : str
        "uniform" or "pointwise".
    cl : float
    requested, dropped : int
        Replicate accounting; effective replicates = requested - dropped.
    """

    gaps_quantile: np.ndarray
    gaps_cdf: np.ndarray
    root_n: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    se: np.ndarray
    estimand: str
    band_kind: str
    cl: float
    requested: int
    dropped: int

    @property
    def effective(self) -> int:
        return self.gaps_quantile.shape[0]

    def gaps(self, kind: Optional[str] = None) -> np.ndarray:
        """Synthetic-path gap tensor for an agg kind (default: estimand)."""
        kind = self.estimand if kind is None else kind
        if kind.startswith("quantile"):
            return self.gaps_quantile
        if kind.startswith("cdf"):
            return self.gaps_cdf
        raise ValueError(f"unknown agg kind {kind!r}")


def _worker_count() -> int:
    env = os.environ.get("DISCO_THREADS")
    if env is not None:
        try:
            workers = int(env)
        except ValueError:
            raise ValueError("DISCO_THREADS must be a positive integer") from None
        if workers < 1:
            raise ValueError("DISCO_THREADS must be a positive integer")
        return workers
    return os.cpu_count() or 1


def _parallel_map(fn, n_items: int) -> list:
    """Order-preserving map over range(n_items), threaded when allowed."""
    workers = min(_worker_count(), n_items)
    if workers <= 1:
        return [fn(i) for i in range(n_items)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_items)))


def permutation_test(panel: MicroPanel, config: DiscoConfig) -> PermutationResult:
    """Placebo permutation test over all units.

    Each unit takes a turn as the treated unit with all other units
    (including the original treated one) as its donor pool, using the
    point-estimate pipeline unchanged.  Per period the squared
    2-Wasserstein distance between the unit's observed and synthetic
    quantile paths is averaged within the pre and post windows; the
    p-value is the share of units whose post/pre ratio weakly exceeds
    the treated unit's.

    Parameters
    ----------
    panel : MicroPanel
    config : DiscoConfig
        ``target_id`` marks the actual treated unit.

    Returns
    -------
    PermutationResult
    """
    controls = tuple(u for u in panel.units if u != config.target_id)
    if config.target_id not in panel.units:
        raise ValueError(f"target id {config.target_id} not in panel")
    if len(controls) < 2:
        raise ValueError("permutation test needs at least 2 control units")
    units = (config.target_id,) + controls

    def placebo(i: int):
        res = run_disco(panel, replace(config, target_id=units[i]))
        d2 = np.array([
            wasserstein2_sq(res.quantile_t[:, k], res.quantile_synth[:, k],
                            config.qmin, config.qmax)
            for k in range(len(res.periods))
        ])
        pre_cols = [k for k, t in enumerate(res.periods) if t in res.pre_periods]
        post_cols = [k for k, t in enumerate(res.periods) if t in res.post_periods]
        return float(np.sqrt(d2[pre_cols].mean())), float(np.sqrt(d2[post_cols].mean()))

    rmse = _parallel_map(placebo, len(units))
    pre_rmse = np.array([r[0] for r in rmse])
    post_rmse = np.array([r[1] for r in rmse])
    ratios = np.empty(len(units))
    for i in range(len(units)):
        if pre_rmse[i] == 0.0:
            # Limit of the ratio: a perfect pre fit ranks above everything
            # unless the post fit is perfect too.
            ratios[i] = np.inf if post_rmse[i] > 0.0 else 1.0
        else:
            ratios[i] = post_rmse[i] / pre_rmse[i]
    p_value = float(np.count_nonzero(ratios >= ratios[0])) / len(units)
    return PermutationResult(
        unit_ids=units,
        ratios=ratios,
        per_unit_pre_rmse=pre_rmse,
        per_unit_post_rmse=post_rmse,
        p_value=p_value,
    )


def _resample_panel(panel: MicroPanel, rng: np.random.Generator) -> MicroPanel:
    """Within-cell resampling with replacement, preserving every cell size.

    Iterates cells in sorted (unit, period) order so a given generator
    state always produces the same panel.  The original support bounds
    are kept: gaps are evaluated on the point estimate's grids.
    """
    cells = {}
    for u in panel.units:
        for t in panel.periods:
            if not panel.has(u, t):
                continue
            xs = panel.sample(u, t)
            draw = xs[rng.integers(0, xs.size, xs.size)]
            draw.sort()
            cells[(u, t)] = draw
    return MicroPanel(cells, panel.units, panel.periods, panel.amin, panel.amax)


def bootstrap_gaps(panel: MicroPanel, config: DiscoConfig,
                   point: DiscoResult, inference: Optional[InferenceConfig] = None,
                   ) -> BootstrapBands:
    """Bootstrap the synthetic paths and build confidence bands.

    Per replicate: every (unit, period) cell is resampled with
    replacement at its own size, the per-period weights are re-estimated
    on the resampled pre-treatment data and averaged, the synthetic
    paths are rebuilt for every period, and the difference to the
    point-estimate paths is recorded scaled by the square root of the
    treated unit's per-period cell size.

    Replicate b draws from a generator seeded by (seed, spawn_key=b), a
    splittable scheme that makes the draw stream independent of
    execution order and thread count.  Replicates whose weight fit
    fails are dropped and counted; more than 5 percent dropping is an
    error.

    Parameters
    ----------
    panel : MicroPanel
    config : DiscoConfig
    point : DiscoResult
        The point estimate whose paths anchor the gaps.
    inference : InferenceConfig, optional
        Defaults to ``config.inference``.

    Returns
    -------
    BootstrapBands
    """
    inf_cfg = inference if inference is not None else config.inference
    if inf_cfg is None:
        raise ValueError("inference settings required (config.inference or argument)")
    seed = inf_cfg.seed if inf_cfg.seed is not None else config.seed
    if seed is None:
        seed = np.random.SeedSequence().entropy
    pre = point.pre_periods
    root_n = np.sqrt([panel.n(config.target_id, t) for t in point.periods])

    def one_replicate(b: int):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(b,)))
        rpanel = _resample_panel(panel, rng)
        try:
            rows = np.vstack([period_weights(rpanel, config, t).weights for t in pre])
        except SolverError:
            return None
        paths = synthetic_paths(rpanel, average_weights(rows), config)
        gap_q = (paths.quantile_synth - point.quantile_synth) * root_n[None, :]
        gap_c = (paths.cdf_synth - point.cdf_synth) * root_n[None, :]
        return gap_q, gap_c

    results = _parallel_map(one_replicate, inf_cfg.boots)
    kept = [r for r in results if r is not None]
    dropped = inf_cfg.boots - len(kept)
    if dropped > MAX_DROP_FRACTION * inf_cfg.boots:
        raise RuntimeError(
            f"{dropped} of {inf_cfg.boots} bootstrap replicates failed to solve"
        )
    if not kept:
        raise RuntimeError("all bootstrap replicates failed to solve")
    gaps_quantile = np.stack([r[0] for r in kept])
    gaps_cdf = np.stack([r[1] for r in kept])

    diff_kind = config.agg.endswith("Diff")
    rep_gaps = gaps_quantile if config.agg.startswith("quantile") else gaps_cdf
    if diff_kind:
        oriented = -rep_gaps
        estimate = point.quantile_diff if config.agg.startswith("quantile") else point.cdf_diff
    else:
        oriented = rep_gaps
        estimate = point.quantile_synth if config.agg.startswith("quantile") else point.cdf_synth
    lower, upper, se = confidence_bands(
        oriented, inf_cfg.cl, inf_cfg.uniform, estimate=estimate, root_n=root_n
    )
    return BootstrapBands(
        gaps_quantile=gaps_quantile,
        gaps_cdf=gaps_cdf,
        root_n=root_n,
        lower=lower,
        upper=upper,
        se=se,
        estimand=config.agg,
        band_kind="uniform" if inf_cfg.uniform else "pointwise",
        cl=inf_cfg.cl,
        requested=inf_cfg.boots,
        dropped=dropped,
    )


def confidence_bands(gaps, cl: float, uniform: bool,
                     estimate=None, root_n=None):
    """Pointwise percentile or sup-t uniform bands from gap draws.

    Parameters
    ----------
    gaps : ndarray, shape (boots, g, periods)
        Scaled gap draws oriented like ``estimate``.
    cl : float
        Confidence level in (0, 1).
    uniform : bool
        Sup-t band (estimate plus/minus the cl-quantile of the
        per-replicate sup of |gap|/se times se) instead of re-centered
        pointwise percentile bands.
    estimate : ndarray, shape (g, periods), optional
        Band center; zero when omitted.
    root_n : ndarray, shape (periods,), optional
        Scale dividing the gaps back into effect units; one when
        omitted.

    Returns
    -------
    lower, upper, se : ndarray, shape (g, periods)
        ``se`` is the pointwise standard deviation in effect units.
    """
    g = np.asarray(gaps, dtype=float)
    if g.ndim != 3:
        raise ValueError("gaps must have shape (boots, grid, periods)")
    if not (0.0 < cl < 1.0):
        raise ValueError("cl must lie strictly inside (0, 1)")
    boots = g.shape[0]
    if boots < 1:
        raise ValueError("need at least one replicate")
    est = np.zeros(g.shape[1:]) if estimate is None else np.asarray(estimate, dtype=float)
    rn = np.ones(g.shape[2]) if root_n is None else np.asarray(root_n, dtype=float)
    scale = rn[None, :]
    se_scaled = g.std(axis=0, ddof=1) if boots > 1 else np.zeros(g.shape[1:])
    se = se_scaled / scale
    if uniform:
        denom = np.maximum(se_scaled, SE_FLOOR)
        sups = (np.abs(g) / denom[None, :, :]).max(axis=1)
        s_star = np.quantile(sups, cl, axis=0)
        half = s_star[None, :] * se
        return est - half, est + half, se
    lo = np.quantile(g, (1.0 - cl) / 2.0, axis=0) / scale
    hi = np.quantile(g, (1.0 + cl) / 2.0, axis=0) / scale
    return est + lo, est + hi, se
