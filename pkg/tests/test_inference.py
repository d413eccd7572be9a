"""Permutation and bootstrap inference tests."""

import dataclasses

import numpy as np
import pytest

import disco.inference
from disco.core import DiscoConfig, run_disco
from disco.distributions import build_panel
from disco.inference import (BootstrapBands, InferenceConfig, bootstrap_gaps,
                             confidence_bands, permutation_test)
from disco.solvers import SolverError
from helpers import normal_records, records_from_cells


def _panel_and_config(seed: int, j: int = 4, n: int = 30, boots: int = 16,
                      shift: float = 0.0, **kw):
    rng = np.random.default_rng(seed)
    recs = normal_records(rng, np.linspace(0.0, 1.2, j + 1), (1, 2, 3),
                          n=n, t0=3, post_shift=shift)
    panel = build_panel(recs)
    inf = InferenceConfig(ci=True, boots=boots, **kw)
    cfg = DiscoConfig(target_id=0, t0=3, m=20, g=12, seed=99, inference=inf)
    return panel, cfg


def test_inference_config_validation():
    with pytest.raises(ValueError, match="boots must be at least 1"):
        InferenceConfig(boots=0)
    with pytest.raises(ValueError, match=r"inside \(0, 1\)"):
        InferenceConfig(cl=1.0)
    with pytest.raises(ValueError, match=r"inside \(0, 1\)"):
        InferenceConfig(cl=0.0)


def test_permutation_basic_properties():
    for seed in range(6):
        rng = np.random.default_rng(seed)
        recs = normal_records(rng, rng.uniform(-1.0, 1.0, 5), (1, 2, 3),
                              n=30, t0=3)
        panel = build_panel(recs)
        cfg = DiscoConfig(target_id=0, t0=3, m=24, g=12)
        perm = permutation_test(panel, cfg)
        jp1 = len(panel.units)
        assert perm.unit_ids[0] == 0
        assert set(perm.unit_ids) == set(panel.units)
        assert perm.ratios.shape == (jp1,)
        assert perm.p_value >= 1.0 / jp1 - 1e-12
        assert perm.p_value == pytest.approx(
            float(np.mean(perm.ratios >= perm.ratios[0])))
        for i in range(jp1):
            if perm.per_unit_pre_rmse[i] > 0:
                want = perm.per_unit_post_rmse[i] / perm.per_unit_pre_rmse[i]
                assert perm.ratios[i] == pytest.approx(want, rel=1e-12)


def test_permutation_flags_a_large_shift():
    rng = np.random.default_rng(42)
    recs = normal_records(rng, np.zeros(10), (1, 2, 3, 4), n=50, t0=3,
                          post_shift=25.0)
    panel = build_panel(recs)
    perm = permutation_test(panel, DiscoConfig(target_id=0, t0=3, m=30, g=20))
    assert perm.ratios[0] == np.max(perm.ratios)
    assert perm.p_value == pytest.approx(0.1)


def test_permutation_degenerate_panel():
    cells = {(u, t): [1.0, 1.0] for u in range(4) for t in (1, 2)}
    panel = build_panel(records_from_cells(cells))
    perm = permutation_test(panel, DiscoConfig(target_id=0, t0=2, m=4, g=4))
    assert np.all(perm.ratios == 1.0)
    assert perm.p_value == 1.0


def test_permutation_zero_pre_distance_maps_to_infinity():
    # identical pre-treatment point masses give every unit an exact pre
    # fit; the treated unit moves post-treatment, so its ratio is +inf
    cells = {(u, 1): [1.0, 1.0, 1.0] for u in range(4)}
    for u in range(4):
        cells[(u, 2)] = [2.0] * 3 if u == 0 else [1.0] * 3
    panel = build_panel(records_from_cells(cells))
    perm = permutation_test(panel, DiscoConfig(target_id=0, t0=2, m=6, g=4))
    assert np.all(perm.per_unit_pre_rmse == 0.0)
    assert perm.ratios[0] == np.inf
    assert perm.p_value <= 1.0


def test_permutation_invariant_to_relabeling():
    rng = np.random.default_rng(9)
    recs = normal_records(rng, [0.0, 0.3, 0.7, 1.1, 1.6], (1, 2, 3),
                          n=25, t0=3, post_shift=0.8)
    panel = build_panel(recs)
    cfg = DiscoConfig(target_id=0, t0=3, m=18, g=10)
    base = permutation_test(panel, cfg)
    mapping = {0: 40, 1: 11, 2: 5, 3: 23, 4: 7}
    relabeled = build_panel([(mapping[u], t, y) for u, t, y in recs])
    cfg2 = dataclasses.replace(cfg, target_id=40)
    got = permutation_test(relabeled, cfg2)
    assert got.p_value == base.p_value
    assert np.allclose(np.sort(got.ratios), np.sort(base.ratios), rtol=1e-9)
    # same ratio per unit under the relabeling
    for pos, unit in enumerate(base.unit_ids):
        new_pos = got.unit_ids.index(mapping[unit])
        assert got.ratios[new_pos] == pytest.approx(base.ratios[pos],
                                                    rel=1e-9)


def test_permutation_needs_enough_controls():
    panel = build_panel([(0, 1, 0.1), (0, 2, 0.2), (1, 1, 0.3), (1, 2, 0.4)])
    with pytest.raises(ValueError, match="at least 2 control units"):
        permutation_test(panel, DiscoConfig(target_id=0, t0=2, m=4, g=4))


def test_permutation_mean_p_under_exchangeability():
    # with no effect anywhere, ranks are exchangeable and the mean
    # p-value over panels is (J+2)/(2(J+1)); J=4 gives 0.6
    ps = []
    for run in range(80):
        rng = np.random.default_rng(10_000 + run)
        recs = normal_records(rng, np.zeros(5), (1, 2), n=30, t0=2)
        panel = build_panel(recs)
        ps.append(permutation_test(
            panel, DiscoConfig(target_id=0, t0=2, m=24, g=12)).p_value)
    assert abs(float(np.mean(ps)) - 0.6) < 0.1


def test_bootstrap_requires_inference_settings():
    panel, cfg = _panel_and_config(1)
    bare = dataclasses.replace(cfg, inference=None)
    point = run_disco(panel, bare)
    with pytest.raises(ValueError, match="inference settings required"):
        bootstrap_gaps(panel, bare, point)


def test_bootstrap_shapes_and_centering():
    panel, cfg = _panel_and_config(2, boots=12)
    point = run_disco(panel, cfg)
    bands = bootstrap_gaps(panel, cfg, point)
    n_periods = len(point.periods)
    assert bands.gaps_quantile.shape == (12, cfg.g, n_periods)
    assert bands.gaps_cdf.shape == (12, cfg.g, n_periods)
    assert bands.root_n.shape == (n_periods,)
    assert bands.requested == 12
    assert bands.dropped == 0
    assert bands.effective == 12
    assert bands.estimand == "quantileDiff"
    assert bands.cl == cfg.inference.cl
    # default estimand centers the band on the quantile difference
    assert bands.lower.shape == point.quantile_diff.shape
    assert np.all(bands.lower <= point.quantile_diff + 1e-12)
    assert np.all(bands.upper >= point.quantile_diff - 1e-12)


def test_bootstrap_deterministic_and_thread_invariant(monkeypatch):
    panel, cfg = _panel_and_config(3, boots=16)
    point = run_disco(panel, cfg)
    monkeypatch.setenv("DISCO_THREADS", "1")
    a = bootstrap_gaps(panel, cfg, point)
    monkeypatch.setenv("DISCO_THREADS", "4")
    b = bootstrap_gaps(panel, cfg, point)
    c = bootstrap_gaps(panel, cfg, point)
    assert np.array_equal(a.gaps_quantile, b.gaps_quantile)
    assert np.array_equal(a.gaps_cdf, b.gaps_cdf)
    assert np.array_equal(a.lower, b.lower)
    assert np.array_equal(a.upper, b.upper)
    assert np.array_equal(b.gaps_quantile, c.gaps_quantile)


def test_bootstrap_seed_precedence():
    panel, cfg = _panel_and_config(4, boots=8)
    point = run_disco(panel, cfg)
    a = bootstrap_gaps(panel, cfg, point)
    # an explicit inference seed overrides the config seed
    inf = dataclasses.replace(cfg.inference, seed=1234)
    b = bootstrap_gaps(panel, cfg, point, inf)
    assert not np.array_equal(a.gaps_quantile, b.gaps_quantile)
    c = bootstrap_gaps(panel, cfg, point, inf)
    assert np.array_equal(b.gaps_quantile, c.gaps_quantile)
    # no seed anywhere draws fresh entropy
    loose = dataclasses.replace(cfg, seed=None,
                                inference=InferenceConfig(ci=True, boots=8))
    d = bootstrap_gaps(panel, loose, point)
    e = bootstrap_gaps(panel, loose, point)
    assert not np.array_equal(d.gaps_quantile, e.gaps_quantile)


def test_bootstrap_point_mass_panel_has_zero_width():
    cells = {(u, t): [float(u)] * 5 for u in range(4) for t in (1, 2)}
    panel = build_panel(records_from_cells(cells))
    cfg = DiscoConfig(target_id=0, t0=2, m=8, g=6, seed=1,
                      inference=InferenceConfig(ci=True, boots=12))
    point = run_disco(panel, cfg)
    bands = bootstrap_gaps(panel, cfg, point)
    assert np.all(bands.gaps_quantile == 0.0)
    assert np.array_equal(bands.lower, bands.upper)
    assert np.array_equal(bands.lower, point.quantile_diff)
    assert np.all(bands.se == 0.0)


def test_bootstrap_drop_accounting(monkeypatch):
    panel, cfg = _panel_and_config(5, boots=20)
    point = run_disco(panel, cfg)
    monkeypatch.setenv("DISCO_THREADS", "1")
    real = disco.inference.period_weights
    state = {"calls": 0}

    def flaky(pnl, config, period):
        state["calls"] += 1
        if state["calls"] == 1:
            raise SolverError("injected failure")
        return real(pnl, config, period)

    monkeypatch.setattr(disco.inference, "period_weights", flaky)
    bands = bootstrap_gaps(panel, cfg, point)
    assert bands.requested == 20
    assert bands.dropped == 1
    assert bands.effective == 19
    assert bands.gaps_quantile.shape[0] == 19


def test_bootstrap_drop_fraction_limit(monkeypatch):
    panel, cfg = _panel_and_config(6, boots=20)
    point = run_disco(panel, cfg)
    monkeypatch.setenv("DISCO_THREADS", "1")
    real = disco.inference.period_weights
    state = {"calls": 0}

    def flaky(pnl, config, period):
        # a failing replicate aborts on its first period solve, so the
        # first two calls map to the first two replicates
        state["calls"] += 1
        if state["calls"] <= 2:
            raise SolverError("injected failure")
        return real(pnl, config, period)

    monkeypatch.setattr(disco.inference, "period_weights", flaky)
    with pytest.raises(RuntimeError, match="2 of 20 bootstrap replicates"):
        bootstrap_gaps(panel, cfg, point)


def test_gap_tensor_lookup():
    panel, cfg = _panel_and_config(7, boots=6)
    point = run_disco(panel, cfg)
    bands = bootstrap_gaps(panel, cfg, point)
    assert bands.gaps("quantile") is bands.gaps_quantile
    assert bands.gaps("quantileDiff") is bands.gaps_quantile
    assert bands.gaps("cdf") is bands.gaps_cdf
    assert bands.gaps("cdfDiff") is bands.gaps_cdf
    with pytest.raises(ValueError, match="unknown agg kind 'zzz'"):
        bands.gaps("zzz")


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("DISCO_THREADS", "3")
    assert disco.inference._worker_count() == 3
    monkeypatch.setenv("DISCO_THREADS", "0")
    with pytest.raises(ValueError, match="DISCO_THREADS"):
        disco.inference._worker_count()
    monkeypatch.setenv("DISCO_THREADS", "two")
    with pytest.raises(ValueError, match="DISCO_THREADS"):
        disco.inference._worker_count()


def test_pointwise_band_matches_normal_quantiles():
    rng = np.random.default_rng(21)
    gaps = rng.standard_normal((2000, 10, 1))
    lower, upper, se = confidence_bands(gaps, 0.95, uniform=False)
    half = (upper - lower) / 2.0
    assert np.allclose(half[:, 0], 1.96 * se[:, 0], rtol=0.05)
    assert np.allclose(se[:, 0], 1.0, rtol=0.1)


def test_uniform_band_contains_pointwise_and_nests():
    for seed in range(10):
        rng = np.random.default_rng(500 + seed)
        gaps = rng.normal(0.0, rng.uniform(0.5, 2.0), (60, 18, 2))
        est = rng.normal(0.0, 1.0, (18, 2))
        lo_u, up_u, _ = confidence_bands(gaps, 0.9, True, estimate=est)
        lo_p, up_p, _ = confidence_bands(gaps, 0.9, False, estimate=est)
        assert np.all(lo_u <= lo_p + 1e-12)
        assert np.all(up_u >= up_p - 1e-12)
        assert np.all(lo_u <= up_u)
        # higher level nests lower, for both band kinds
        lo_u2, up_u2, _ = confidence_bands(gaps, 0.95, True, estimate=est)
        assert np.all(lo_u2 <= lo_u + 1e-12)
        assert np.all(up_u2 >= up_u - 1e-12)
        lo_p2, up_p2, _ = confidence_bands(gaps, 0.95, False, estimate=est)
        assert np.all(lo_p2 <= lo_p)
        assert np.all(up_p2 >= up_p)


def test_single_replicate_band_is_the_shifted_estimate():
    gaps = np.full((1, 4, 2), 3.0)
    est = np.zeros((4, 2))
    lo, up, se = confidence_bands(gaps, 0.9, False, estimate=est,
                                  root_n=np.array([1.0, 4.0]))
    assert np.array_equal(lo, up)
    assert np.allclose(lo[:, 0], 3.0)
    assert np.allclose(lo[:, 1], 0.75)
    assert np.all(se == 0.0)


def test_confidence_bands_validation():
    gaps = np.zeros((5, 3, 2))
    with pytest.raises(ValueError, match=r"shape \(boots, grid, periods\)"):
        confidence_bands(np.zeros((5, 3)), 0.9, False)
    with pytest.raises(ValueError, match="at least one replicate"):
        confidence_bands(np.zeros((0, 3, 2)), 0.9, False)
    lo, up, se = confidence_bands(gaps, 0.9, True)
    assert np.all(lo == 0.0) and np.all(up == 0.0)


def test_pointwise_band_recomputes_from_gap_draws():
    # the stored band must tie exactly to the stored draws: estimate
    # plus the alpha/2 gap quantiles scaled back by root n
    panel, cfg = _panel_and_config(8, boots=400, n=40, uniform=False)
    point = run_disco(panel, cfg)
    bands = bootstrap_gaps(panel, cfg, point)
    rn = bands.root_n[None, :]
    # gap draws are stored for the synthetic level; the diff estimand
    # flips their sign
    neg = -bands.gaps_quantile
    lo = point.quantile_diff + np.quantile(neg, 0.025, axis=0) / rn
    up = point.quantile_diff + np.quantile(neg, 0.975, axis=0) / rn
    assert np.allclose(bands.lower, lo, atol=1e-12)
    assert np.allclose(bands.upper, up, atol=1e-12)
    assert bands.band_kind == "pointwise"


def test_uniform_band_recomputes_from_gap_draws():
    panel, cfg = _panel_and_config(9, boots=120, n=30)
    point = run_disco(panel, cfg)
    bands = bootstrap_gaps(panel, cfg, point)
    rn = bands.root_n[None, :]
    se = bands.gaps_quantile.std(axis=0, ddof=1) / rn
    scaled = np.abs(bands.gaps_quantile) / np.maximum(
        bands.gaps_quantile.std(axis=0, ddof=1), 1e-12)[None, :, :]
    s_star = np.quantile(scaled.max(axis=1), 0.95, axis=0)
    lo = point.quantile_diff - s_star[None, :] * se
    up = point.quantile_diff + s_star[None, :] * se
    assert np.allclose(bands.lower, lo, atol=1e-10)
    assert np.allclose(bands.upper, up, atol=1e-10)
    assert bands.band_kind == "uniform"
