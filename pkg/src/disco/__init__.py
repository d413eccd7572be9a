"""Synthetic controls for outcome distributions.

Estimate simplex weights that reproduce a treated unit's pre-treatment
outcome distribution from control units, build the counterfactual
post-treatment distributions, and quantify uncertainty with placebo
permutation tests and bootstrap confidence bands.
"""

__version__ = "0.1.0"

from .aggregation import SummaryRow, SummaryTable, aggregate
from .core import (AGG_KINDS, DiscoConfig, DiscoResult, SyntheticPaths,
                   run_disco, synthetic_paths, wasserstein2_sq)
from .distributions import (DistGrid, MicroPanel, build_panel, dist_grid,
                            empirical_cdf, empirical_quantile,
                            quantile_from_cdf, quantile_grid, support_grid)
from .estimator import DiscoEstimator
from .inference import (BootstrapBands, InferenceConfig, PermutationResult,
                        bootstrap_gaps, confidence_bands, permutation_test)
from .io import RunManifest, emit_results, read_panel_csv
from .solvers import (LsProblem, SolverError, WeightVector, solve_affine_ls,
                      solve_simplex_l1, solve_simplex_ls)

__all__ = [
    "__version__",
    "AGG_KINDS",
    "BootstrapBands",
    "DiscoConfig",
    "DiscoEstimator",
    "DiscoResult",
    "DistGrid",
    "InferenceConfig",
    "LsProblem",
    "MicroPanel",
    "PermutationResult",
    "RunManifest",
    "SolverError",
    "SummaryRow",
    "SummaryTable",
    "SyntheticPaths",
    "WeightVector",
    "aggregate",
    "bootstrap_gaps",
    "build_panel",
    "confidence_bands",
    "dist_grid",
    "emit_results",
    "empirical_cdf",
    "empirical_quantile",
    "permutation_test",
    "quantile_from_cdf",
    "quantile_grid",
    "read_panel_csv",
    "run_disco",
    "solve_affine_ls",
    "solve_simplex_l1",
    "solve_simplex_ls",
    "support_grid",
    "synthetic_paths",
    "wasserstein2_sq",
]
