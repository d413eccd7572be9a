"""CSV ingestion and deterministic result emission.

result.json is the canonical machine-readable artifact: floats are
serialized with 17 significant digits (enough to round-trip IEEE
doubles) in a fixed key order, so identical inputs and seed produce
byte-identical files.  Plot-data CSVs are long-format (grid index,
period, values) and read back through read_panel_csv bitwise.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .aggregation import SummaryTable
from .core import DiscoResult
from .distributions import MicroPanel, build_panel
from .inference import BootstrapBands, PermutationResult, confidence_bands

__all__ = ["RunManifest", "read_panel_csv", "emit_results", "panel_digest",
           "band_matrices"]


@dataclass(frozen=True)
class RunManifest:
    """Provenance record for one CLI run.

    ``timing_seconds`` stays in memory only; the written manifest.json
    contains just the deterministic fields so re-runs are byte
    identical.
    """

    config: dict
    row_count: int
    unit_count: int
    periods: tuple
    cell_counts: tuple
    version: str
    seed: Optional[int]
    timing_seconds: Optional[float] = None
    outputs: tuple = ()


def panel_digest(panel: MicroPanel) -> dict:
    counts = sorted((int(u), int(t), int(n)) for (u, t), n in panel.counts().items())
    return {
        "row_count": panel.n_total,
        "unit_count": len(panel.units),
        "periods": [int(t) for t in panel.periods],
        "cell_counts": [list(c) for c in counts],
    }


def read_panel_csv(path, id_col: str, time_col: str, y_col: str,
                   name_col: Optional[str] = None):
    """Read a long-format CSV into a MicroPanel plus optional name map.

    Parameters
    ----------
    path : str
        CSV file with a header row.
    id_col, time_col, y_col : str
        Column names for the integer unit id, integer period, and float
        outcome.
    name_col : str, optional
        Column of display names; the returned map keeps the last name
        seen per unit id.

    Returns
    -------
    panel : MicroPanel
    names : dict or None
        Maps unit id to display name when ``name_col`` was given.

    Raises
    ------
    ValueError
        On missing or duplicate header columns, or an unparseable row;
        row errors carry the 1-based file line number.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty input: no header row") from None
        header = [h.strip() for h in header]
        wanted = [id_col, time_col, y_col] + ([name_col] if name_col else [])
        for col in wanted:
            hits = [i for i, h in enumerate(header) if h == col]
            if not hits:
                raise ValueError(f"column {col!r} not in header {header}")
            if len(hits) > 1:
                raise ValueError(f"duplicate header column {col!r}")
        idx = {col: header.index(col) for col in wanted}

        records = []
        names = {} if name_col else None
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and row[0].strip() == ""):
                continue
            if len(row) != width:
                raise ValueError(f"line {lineno}: expected {width} fields, got {len(row)}")
            try:
                unit = int(row[idx[id_col]])
            except ValueError:
                raise ValueError(
                    f"line {lineno}: cannot parse {id_col!r} value {row[idx[id_col]]!r} "
                    "as an integer") from None
            try:
                period = int(row[idx[time_col]])
            except ValueError:
                raise ValueError(
                    f"line {lineno}: cannot parse {time_col!r} value "
                    f"{row[idx[time_col]]!r} as an integer") from None
            try:
                y = float(row[idx[y_col]])
            except ValueError:
                raise ValueError(
                    f"line {lineno}: cannot parse {y_col!r} value "
                    f"{row[idx[y_col]]!r} as a number") from None
            if not math.isfinite(y):
                raise ValueError(f"line {lineno}: {y_col!r} value {y} is not finite")
            records.append((unit, period, y))
            if names is not None:
                names[unit] = row[idx[name_col]].strip()
    if not records:
        raise ValueError("empty input: no data rows")
    return build_panel(records), names


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _dump_json(obj) -> str:
    """Canonical JSON: fixed key order, 17-significant-digit floats."""
    if isinstance(obj, dict):
        items = ",".join(f"{json.dumps(k)}:{_dump_json(v)}" for k, v in obj.items())
        return "{" + items + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_dump_json(v) for v in obj) + "]"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _dump_json(obj.tolist())
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _matrix(a: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.asarray(a, dtype=float)]


def _vector(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=float).reshape(-1)]


def _result_document(result: DiscoResult, permutation: Optional[PermutationResult],
                     bands: Optional[BootstrapBands]) -> dict:
    cfg = result.config
    doc = {
        "cids": [int(u) for u in result.control_ids],
        "weights": _vector(result.weights),
        "period_weights": _matrix(result.period_weights),
        "t0": int(cfg.t0),
        "target_id": int(cfg.target_id),
        "m": int(cfg.m),
        "g": int(cfg.g),
        "qmin": float(cfg.qmin),
        "qmax": float(cfg.qmax),
        "mixture": bool(cfg.mixture),
        "simplex": bool(cfg.simplex),
        "agg": cfg.agg,
        "seed": None if cfg.seed is None else int(cfg.seed),
        "amin": float(result.amin),
        "amax": float(result.amax),
        "periods": [int(t) for t in result.periods],
        "pre_periods": [int(t) for t in result.pre_periods],
        "post_periods": [int(t) for t in result.post_periods],
        "q_points": _vector(result.q_points),
        "y_points": _vector(result.y_points),
        "quantile_t": _matrix(result.quantile_t),
        "quantile_synth": _matrix(result.quantile_synth),
        "cdf_t": _matrix(result.cdf_t),
        "cdf_synth": _matrix(result.cdf_synth),
        "quantile_diff": _matrix(result.quantile_diff),
        "cdf_diff": _matrix(result.cdf_diff),
    }
    if permutation is not None:
        doc["pval"] = float(permutation.p_value)
        doc["ratios"] = _vector(permutation.ratios)
        doc["ratio_units"] = [int(u) for u in permutation.unit_ids]
        doc["pre_rmse"] = _vector(permutation.per_unit_pre_rmse)
        doc["post_rmse"] = _vector(permutation.per_unit_post_rmse)
    if bands is not None:
        doc["cl"] = float(bands.cl)
        doc["band_kind"] = bands.band_kind
        doc["band_estimand"] = bands.estimand
        doc["boots"] = int(bands.requested)
        doc["dropped_replicates"] = int(bands.dropped)
        doc["lower"] = _matrix(bands.lower)
        doc["upper"] = _matrix(bands.upper)
        doc["se"] = _matrix(bands.se)
    return doc


def _write_weights_csv(path: str, result: DiscoResult, names: Optional[dict],
                       top: int) -> None:
    order = sorted(range(len(result.control_ids)),
                   key=lambda j: (-result.weights[j], result.control_ids[j]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        head = ["unit_id", "weight"] if names is None else ["unit_id", "name", "weight"]
        writer.writerow(head)
        for j in order[:top]:
            uid = result.control_ids[j]
            w = f"{result.weights[j]:.4f}"
            if names is None:
                writer.writerow([uid, w])
            else:
                writer.writerow([uid, names.get(uid, ""), w])


def _write_summary_csv(path: str, summary: SummaryTable) -> None:
    with_ci = summary.cl is not None
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if with_ci:
            writer.writerow(["period", "range_lo", "range_hi", "effect",
                             "se", "ci_lo", "ci_hi", "significant"])
        else:
            writer.writerow(["period", "range_lo", "range_hi", "effect"])
        for row in summary.rows:
            base = [row.period, _fmt_float(row.range_lo), _fmt_float(row.range_hi),
                    _fmt_float(row.effect)]
            if with_ci:
                base += [_fmt_float(row.se), _fmt_float(row.ci_lo),
                         _fmt_float(row.ci_hi), int(row.significant)]
            writer.writerow(base)


def band_matrices(result: DiscoResult, bands: Optional[BootstrapBands], kind: str):
    """Lower/upper matrices for one agg kind, from the retained gap draws."""
    if bands is None:
        return None
    gaps = bands.gaps(kind)
    if kind.endswith("Diff"):
        gaps = -gaps
        estimate = result.quantile_diff if kind.startswith("quantile") else result.cdf_diff
    else:
        estimate = result.quantile_synth if kind.startswith("quantile") else result.cdf_synth
    uniform = bands.band_kind == "uniform"
    lower, upper, _ = confidence_bands(gaps, bands.cl, uniform,
                                       estimate=estimate, root_n=bands.root_n)
    return lower, upper


def _write_plot_csv(path: str, result: DiscoResult, coord_name: str,
                    coords: np.ndarray, series: dict, band) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        head = ["grid", "period", coord_name] + list(series)
        if band is not None:
            head += ["lower", "upper"]
        writer.writerow(head)
        for k, t in enumerate(result.periods):
            for i, x in enumerate(coords):
                row = [i, int(t), _fmt_float(float(x))]
                row += [_fmt_float(float(mat[i, k])) for mat in series.values()]
                if band is not None:
                    row += [_fmt_float(float(band[0][i, k])),
                            _fmt_float(float(band[1][i, k]))]
                writer.writerow(row)


def emit_results(result: DiscoResult, permutation: Optional[PermutationResult],
                 bands: Optional[BootstrapBands], summary: SummaryTable,
                 manifest: RunManifest, out_dir: str,
                 names: Optional[dict] = None, top: int = 5) -> tuple:
    """Write all result files into out_dir and return their paths.

    Files: result.json (canonical, byte-deterministic), weights.csv
    (top weights, ranked, 4-decimal rounding), summary.csv, four
    long-format plot-data CSVs, manifest.json.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def dest(name: str) -> str:
        written.append(name)
        return os.path.join(out_dir, name)

    with open(dest("result.json"), "w", encoding="utf-8") as fh:
        fh.write(_dump_json(_result_document(result, permutation, bands)) + "\n")

    _write_weights_csv(dest("weights.csv"), result, names, top)
    _write_summary_csv(dest("summary.csv"), summary)

    _write_plot_csv(dest("plot_quantile.csv"), result, "q", result.q_points,
                    {"treated": result.quantile_t, "synthetic": result.quantile_synth},
                    band_matrices(result, bands, "quantile"))
    _write_plot_csv(dest("plot_cdf.csv"), result, "y", result.y_points,
                    {"treated": result.cdf_t, "synthetic": result.cdf_synth},
                    band_matrices(result, bands, "cdf"))
    _write_plot_csv(dest("plot_quantile_diff.csv"), result, "q", result.q_points,
                    {"diff": result.quantile_diff},
                    band_matrices(result, bands, "quantileDiff"))
    _write_plot_csv(dest("plot_cdf_diff.csv"), result, "y", result.y_points,
                    {"diff": result.cdf_diff},
                    band_matrices(result, bands, "cdfDiff"))

    manifest_doc = {
        "version": manifest.version,
        "seed": manifest.seed,
        "config": manifest.config,
        "panel": {
            "row_count": manifest.row_count,
            "unit_count": manifest.unit_count,
            "periods": [int(t) for t in manifest.periods],
            "cell_counts": [list(c) for c in manifest.cell_counts],
        },
        "outputs": sorted(written + ["manifest.json"]),
    }
    with open(dest("manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(_dump_json(manifest_doc) + "\n")
    return tuple(os.path.join(out_dir, name) for name in written)
