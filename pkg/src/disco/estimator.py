"""Scikit-learn style front end over the functional pipeline."""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from .aggregation import aggregate
from .core import DiscoConfig, run_disco
from .distributions import build_panel
from .inference import InferenceConfig, bootstrap_gaps, permutation_test

__all__ = ["DiscoEstimator", "as_records"]


def as_records(X) -> np.ndarray:
    """Coerce input data to an (n, 3) float array of (unit, period, outcome).

    Accepts any array-like with three columns in that order, or a
    pandas DataFrame; a DataFrame with columns named ``unit``,
    ``period`` and ``outcome`` is reordered by name, otherwise its
    first three columns are taken positionally.
    """
    if hasattr(X, "columns") and hasattr(X, "to_numpy"):
        cols = list(X.columns)
        wanted = ["unit", "period", "outcome"]
        if all(c in cols for c in wanted):
            X = X[wanted].to_numpy()
        else:
            X = X.to_numpy()
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 3:
        raise ValueError("X must be (n_samples, 3): unit, period, outcome")
    return arr[:, :3]


class DiscoEstimator(BaseEstimator):
    """Distributional synthetic control estimator.

    Fits simplex weights that make a combination of control units'
    outcome distributions match the treated unit's pre-treatment
    distribution, then builds counterfactual post-treatment
    distributions, with optional permutation and bootstrap inference.

    Parameters
    ----------
    target_id : int
        Unit id of the treated unit.
    t0 : int
        First treated period.
    m : int, default 1000
        Probability grid size for the weight-fitting objective.
    g : int, default 100
        Evaluation grid size for the reported paths.
    mixture : bool, default False
        Match CDFs (1-Wasserstein mixture weights) instead of quantile
        functions.
    simplex : bool, default True
        Constrain weights to be nonnegative.
    qmin, qmax : float, defaults 0 and 1
        Probability range over which quantile functions are matched.
    ci : bool, default False
        Compute bootstrap confidence bands.
    boots : int, default 300
        Bootstrap replicates.
    cl : float, default 0.95
        Confidence level.
    uniform : bool, default True
        Sup-t uniform bands instead of pointwise percentile bands.
    permutation : bool, default False
        Run the placebo permutation test.
    seed : int, optional
        Root seed for the resampling.
    agg : str, default "quantileDiff"
        Summary kind for ``summary_``.
    samples : sequence of float, optional
        Partition points for the summary table.

    Attributes
    ----------
    result_ : DiscoResult
        Full estimation output.
    weights_ : ndarray of shape (J,)
        Averaged simplex weights.
    period_weights_ : ndarray of shape (T0, J)
        Per-pre-period weights.
    control_ids_ : tuple of int
    bands_ : BootstrapBands or None
    permutation_ : PermutationResult or None
    summary_ : SummaryTable

    Examples
    --------
    >>> est = DiscoEstimator(target_id=1, t0=2, m=100, g=20)
    >>> est.fit(records)                          # doctest: +SKIP
    >>> est.weights_                              # doctest: +SKIP
    """

    def __init__(self, target_id=None, t0=None, m=1000, g=100, mixture=False,
                 simplex=True, qmin=0.0, qmax=1.0, ci=False, boots=300,
                 cl=0.95, uniform=True, permutation=False,
                 seed: Optional[int] = None, agg="quantileDiff", samples=None):
        self.target_id = target_id
        self.t0 = t0
        self.m = m
        self.g = g
        self.mixture = mixture
        self.simplex = simplex
        self.qmin = qmin
        self.qmax = qmax
        self.ci = ci
        self.boots = boots
        self.cl = cl
        self.uniform = uniform
        self.permutation = permutation
        self.seed = seed
        self.agg = agg
        self.samples = samples

    def _config(self) -> DiscoConfig:
        if self.target_id is None or self.t0 is None:
            raise ValueError("target_id and t0 are required")
        inference = InferenceConfig(
            ci=self.ci, boots=self.boots, cl=self.cl, uniform=self.uniform,
            permutation=self.permutation, seed=self.seed,
        )
        return DiscoConfig(
            target_id=int(self.target_id), t0=int(self.t0), m=self.m, g=self.g,
            mixture=self.mixture, simplex=self.simplex,
            qmin=self.qmin, qmax=self.qmax, seed=self.seed,
            inference=inference, agg=self.agg,
            samples=None if self.samples is None else tuple(self.samples),
        )

    def fit(self, X, y=None):
        """Estimate weights and paths from long-format records.

        Parameters
        ----------
        X : array_like of shape (n_samples, 3)
            Columns (unit, period, outcome); see ``as_records``.
        y : ignored
            Present for scikit-learn API compatibility.

        Returns
        -------
        self
        """
        config = self._config()
        panel = build_panel(as_records(X))
        self.panel_ = panel
        self.result_ = run_disco(panel, config)
        self.weights_ = self.result_.weights
        self.period_weights_ = self.result_.period_weights
        self.control_ids_ = self.result_.control_ids
        self.permutation_ = permutation_test(panel, config) if self.permutation else None
        self.bands_ = bootstrap_gaps(panel, config, self.result_) if self.ci else None
        self.summary_ = aggregate(self.result_, self.bands_)
        return self

    def counterfactual(self, kind: str = "quantile") -> np.ndarray:
        """Synthetic path matrix (g x periods) for a representation."""
        if not hasattr(self, "result_"):
            raise AttributeError("estimator is not fitted")
        if kind == "quantile":
            return self.result_.quantile_synth
        if kind == "cdf":
            return self.result_.cdf_synth
        raise ValueError("kind must be 'quantile' or 'cdf'")
