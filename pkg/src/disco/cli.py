"""Command-line entry point.

Usage errors (bad flags, inconsistent configuration) exit with code 2
before anything is read or written, so they never leave partial output
behind.  Runtime failures (unreadable input, solver breakdown,
unwritable output directory) exit with code 1.
"""

from __future__ import annotations

import argparse
import sys
import time
from typing import Optional

from . import __version__
from .aggregation import aggregate
from .core import AGG_KINDS, DiscoConfig, run_disco
from .inference import InferenceConfig, bootstrap_gaps, permutation_test
from .io import RunManifest, emit_results, panel_digest, read_panel_csv
from .plots import render_plots

__all__ = ["build_parser", "cli_main", "main"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="disco",
        description="Synthetic control weights for outcome distributions: "
                    "match a treated unit's pre-treatment quantiles or CDF "
                    "with a convex combination of control units, then report "
                    "counterfactual distributions, permutation p-values, and "
                    "bootstrap confidence bands.")
    p.add_argument("--input", required=True, help="long-format CSV file")
    p.add_argument("--id-col", default="id", help="unit id column (default id)")
    p.add_argument("--time-col", default="time", help="period column (default time)")
    p.add_argument("--y-col", default="y", help="outcome column (default y)")
    p.add_argument("--name-col", default=None,
                   help="optional display-name column for the weights table")
    p.add_argument("--target-id", type=int, required=True, help="treated unit id")
    p.add_argument("--t0", type=int, required=True,
                   help="first treatment period; earlier periods are pre-treatment")
    p.add_argument("--m", type=int, default=1000,
                   help="quantile grid size (default 1000)")
    p.add_argument("--g", type=int, default=100,
                   help="output grid size (default 100)")
    p.add_argument("--mixture", action="store_true",
                   help="fit weights on CDFs (1-Wasserstein) instead of quantiles")
    p.add_argument("--no-simplex", action="store_true",
                   help="drop the nonnegativity constraint (weights still sum to 1)")
    p.add_argument("--qmin", type=float, default=0.0,
                   help="lower quantile bound for fitting (default 0)")
    p.add_argument("--qmax", type=float, default=1.0,
                   help="upper quantile bound for fitting (default 1)")
    p.add_argument("--ci", action="store_true",
                   help="bootstrap confidence bands")
    p.add_argument("--boots", type=int, default=300,
                   help="bootstrap replicates (default 300)")
    p.add_argument("--cl", type=float, default=0.95,
                   help="confidence level (default 0.95)")
    p.add_argument("--no-uniform", action="store_true",
                   help="pointwise bands instead of uniform sup-t bands")
    p.add_argument("--permutation", action="store_true",
                   help="placebo permutation test over control units")
    p.add_argument("--seed", type=int, default=None, help="RNG seed")
    p.add_argument("--agg", choices=list(AGG_KINDS), default="quantileDiff",
                   help="summary-table estimand (default quantileDiff)")
    p.add_argument("--samples", default=None,
                   help="comma-separated partition points for the summary table")
    p.add_argument("--out", default="disco_out", help="output directory")
    p.add_argument("--plots", action="store_true", help="also write SVG figures")
    p.add_argument("--categorical", action="store_true",
                   help="bar panels instead of line panels in the figures")
    p.add_argument("--top", type=int, default=5,
                   help="rows in weights.csv (default 5)")
    p.add_argument("--hline", type=float, default=None,
                   help="horizontal reference line in the figures")
    p.add_argument("--vline", type=float, default=None,
                   help="vertical reference line in the figures")
    return p


def _parse_samples(text: Optional[str], parser: argparse.ArgumentParser):
    if text is None:
        return None
    try:
        values = tuple(float(tok) for tok in text.split(","))
    except ValueError:
        parser.error(f"--samples: cannot parse {text!r} as comma-separated numbers")
    if len(values) < 2:
        parser.error("--samples needs at least two points")
    return values


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)

        samples = _parse_samples(args.samples, parser)
        if args.top < 1:
            parser.error("--top must be at least 1")
        # all configuration constraints are checked before any I/O
        try:
            inference = InferenceConfig(ci=args.ci, boots=args.boots, cl=args.cl,
                                        uniform=not args.no_uniform,
                                        permutation=args.permutation,
                                        seed=args.seed)
            config = DiscoConfig(target_id=args.target_id, t0=args.t0,
                                 m=args.m, g=args.g, mixture=args.mixture,
                                 simplex=not args.no_simplex,
                                 qmin=args.qmin, qmax=args.qmax,
                                 seed=args.seed, inference=inference,
                                 agg=args.agg, samples=samples)
        except ValueError as exc:
            parser.error(str(exc))
    except SystemExit as exc:
        return int(exc.code or 0)

    started = time.perf_counter()
    try:
        panel, names = read_panel_csv(args.input, args.id_col, args.time_col,
                                      args.y_col, args.name_col)
        result = run_disco(panel, config)
        permutation = permutation_test(panel, config) if args.permutation else None
        bands = bootstrap_gaps(panel, config, result) if args.ci else None
        summary = aggregate(result, bands=bands)

        digest = panel_digest(panel)
        config_echo = {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in sorted(vars(args).items())}
        manifest = RunManifest(config=config_echo,
                               row_count=digest["row_count"],
                               unit_count=digest["unit_count"],
                               periods=tuple(digest["periods"]),
                               cell_counts=tuple(tuple(c) for c in digest["cell_counts"]),
                               version=__version__, seed=args.seed,
                               timing_seconds=time.perf_counter() - started)
        files = emit_results(result, permutation, bands, summary, manifest,
                             args.out, names=names, top=args.top)
        if args.plots:
            files += render_plots(result, bands, args.out,
                                  categorical=args.categorical,
                                  hline=args.hline, vline=args.vline)
    except Exception as exc:
        print(f"disco: error: {exc}", file=sys.stderr)
        return 1

    order = sorted(range(len(result.control_ids)),
                   key=lambda j: (-result.weights[j], result.control_ids[j]))
    shown = ", ".join(f"{result.control_ids[j]}:{result.weights[j]:.4f}"
                      for j in order[:args.top])
    print(f"weights ({len(result.control_ids)} controls): {shown}")
    if permutation is not None:
        print(f"permutation p-value: {permutation.p_value:.4f}")
    if bands is not None and bands.dropped:
        print(f"bootstrap: {bands.dropped} of {bands.requested} replicates dropped")
    print(f"wrote {len(files)} files to {args.out}")
    return 0


def main() -> None:
    raise SystemExit(cli_main())
