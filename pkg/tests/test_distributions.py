"""Distribution layer: frozen hand values first, then invariant loops."""

import numpy as np
import pytest

from disco.distributions import (build_panel, dist_grid, empirical_cdf,
                                 empirical_quantile, quantile_from_cdf,
                                 quantile_grid, support_grid)


def test_quantile_frozen_thresholds():
    # ranks of [1,2,3,4] are k/4; the quantile is the smallest x(k) with k/n >= q
    xs = [1.0, 2.0, 3.0, 4.0]
    cases = [(0.0, 1.0), (0.1, 1.0), (0.25, 1.0), (0.26, 2.0), (0.5, 2.0),
             (0.51, 3.0), (0.75, 3.0), (0.76, 4.0), (1.0, 4.0)]
    for q, want in cases:
        assert empirical_quantile(xs, q) == want


def test_quantile_singleton_and_ties():
    for q in (0.0, 0.3, 1.0):
        assert empirical_quantile([7.0], q) == 7.0
    # duplicates collapse ranks but not values
    assert empirical_quantile([2.0, 2.0, 5.0], 0.5) == 2.0
    assert empirical_quantile([2.0, 2.0, 5.0], 0.7) == 5.0


def test_quantile_matches_scan_oracle():
    # brute-force the infimum definition on the sorted sample
    for seed in range(30):
        rng = np.random.default_rng(seed)
        xs = rng.normal(0.0, 1.0, int(rng.integers(1, 40)))
        qs = rng.uniform(0.0, 1.0, 25)
        got = empirical_quantile(xs, qs)
        srt = np.sort(xs)
        n = xs.size
        for q, v in zip(qs, got):
            want = next(x for k, x in enumerate(srt, start=1) if k / n >= q)
            assert v == want


def test_quantile_validation():
    with pytest.raises(ValueError):
        empirical_quantile([], 0.5)
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        empirical_quantile([1.0], 1.5)
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        empirical_quantile([1.0], -0.1)


def test_cdf_frozen():
    assert empirical_cdf([1, 2, 3, 4], 2.0) == 0.5
    assert empirical_cdf([1, 1, 2], 1.0) == pytest.approx(2.0 / 3.0)
    assert empirical_cdf([1, 2], 0.5) == 0.0
    assert empirical_cdf([1, 2], 2.0) == 1.0


def test_cdf_matches_count_oracle():
    for seed in range(30):
        rng = np.random.default_rng(100 + seed)
        xs = rng.choice([0.0, 1.0, 1.0, 2.0, 3.5], size=int(rng.integers(1, 30)))
        ys = np.concatenate([rng.normal(1.0, 2.0, 20), xs[:1]])
        got = empirical_cdf(xs, ys)
        for y, v in zip(ys, got):
            assert v == np.count_nonzero(xs <= y) / xs.size


def test_monotonicity_and_galois():
    for seed in range(25):
        rng = np.random.default_rng(200 + seed)
        xs = rng.normal(0.0, 3.0, int(rng.integers(2, 50)))
        qs = np.sort(rng.uniform(0.0, 1.0, 30))
        vals = empirical_quantile(xs, qs)
        assert np.all(np.diff(vals) >= 0)
        ys = np.sort(rng.normal(0.0, 3.0, 30))
        cds = empirical_cdf(xs, ys)
        assert np.all(np.diff(cds) >= 0)
        # F(Q(q)) >= q for q > 0, Q(F(y)) <= y for y above the sample minimum
        pos = qs[qs > 0]
        assert np.all(empirical_cdf(xs, empirical_quantile(xs, pos)) >= pos)
        above = ys[ys >= xs.min()]
        assert np.all(empirical_quantile(xs, empirical_cdf(xs, above)) <= above)


def test_quantile_grid_midpoints():
    assert np.allclose(quantile_grid(4), [0.125, 0.375, 0.625, 0.875])
    assert np.allclose(quantile_grid(2, 0.2, 0.6), [0.3, 0.5])
    got = quantile_grid(5)
    assert got[0] > 0.0 and got[-1] < 1.0
    with pytest.raises(ValueError, match="at least 2"):
        quantile_grid(1)
    with pytest.raises(ValueError, match="qmin < qmax"):
        quantile_grid(4, 0.5, 0.5)
    with pytest.raises(ValueError, match="qmin < qmax"):
        quantile_grid(4, -0.1, 1.0)


def test_support_grid_endpoints():
    assert np.array_equal(support_grid(4, 1.0, 4.0), [1.0, 2.0, 3.0, 4.0])
    got = support_grid(7, -2.0, 2.0)
    assert got[0] == -2.0 and got[-1] == 2.0
    with pytest.raises(ValueError, match="at least 2"):
        support_grid(1, 0.0, 1.0)
    with pytest.raises(ValueError, match="finite"):
        support_grid(3, 2.0, 1.0)


def test_dist_grid_two_point_sample():
    dg = dist_grid([0.0, 1.0], m=2, g=2, support=(0.0, 1.0))
    assert np.allclose(dg.q_points, [0.25, 0.75])
    assert np.array_equal(dg.quantiles, [0.0, 1.0])
    assert np.array_equal(dg.y_points, [0.0, 1.0])
    assert np.array_equal(dg.cdf, [0.5, 1.0])


def test_dist_grid_constant_sample():
    dg = dist_grid([5.0, 5.0, 5.0], m=3, g=4, support=(4.0, 6.0))
    assert np.all(dg.quantiles == 5.0)
    assert np.array_equal(dg.cdf, [0.0, 0.0, 1.0, 1.0])


def test_dist_grid_one_point_support():
    dg = dist_grid([5.0, 5.0], m=2, g=3, support=(5.0, 5.0))
    assert np.all(dg.y_points == 5.0)
    assert np.all(dg.cdf == 1.0)
    with pytest.raises(ValueError, match="one-point support"):
        dist_grid([4.0, 5.0], m=2, g=3, support=(5.0, 5.0))


def test_dist_grid_categorical_support_hits_levels():
    rng = np.random.default_rng(3)
    xs = rng.choice([1.0, 2.0, 3.0, 4.0], size=200)
    dg = dist_grid(xs, m=4, g=4, support=(1.0, 4.0))
    assert np.array_equal(dg.y_points, [1.0, 2.0, 3.0, 4.0])
    assert dg.cdf[-1] == 1.0


def test_grid_refinement_keeps_coincident_points():
    rng = np.random.default_rng(7)
    xs = rng.normal(0.0, 1.0, 37)
    a = dist_grid(xs, m=5, g=6, support=(-3.0, 3.0))
    b = dist_grid(xs, m=15, g=11, support=(-3.0, 3.0))
    # (i+0.5)/5 == (3i+1.5)/15 and the g=6 grid is every other point of g=11
    assert np.array_equal(a.quantiles, b.quantiles[1::3])
    assert np.array_equal(a.cdf, b.cdf[::2])


def test_quantile_from_cdf_frozen():
    vals, sat = quantile_from_cdf(np.array([0.25, 0.5, 0.75, 1.0]),
                                  np.array([1.0, 2.0, 3.0, 4.0]),
                                  np.array([0.0, 0.25, 0.6, 1.0]))
    assert np.array_equal(vals, [1.0, 1.0, 3.0, 4.0])
    assert not np.any(sat)
    vals, sat = quantile_from_cdf(np.array([0.2, 0.4]), np.array([0.0, 1.0]),
                                  np.array([0.3, 0.9]))
    assert np.array_equal(vals, [1.0, 1.0])
    assert np.array_equal(sat, [False, True])
    with pytest.raises(ValueError, match="nondecreasing"):
        quantile_from_cdf(np.array([0.5, 0.4]), np.array([0.0, 1.0]),
                          np.array([0.5]))


def test_pseudo_inverse_roundtrip_within_cell():
    # inverting the gridded cdf stays within one support cell of the
    # exact sample quantile
    for seed in range(20):
        rng = np.random.default_rng(300 + seed)
        xs = rng.normal(0.0, 2.0, int(rng.integers(3, 60)))
        g = int(rng.integers(8, 40))
        dg = dist_grid(xs, m=9, g=g, support=(xs.min(), xs.max()))
        width = (xs.max() - xs.min()) / (g - 1)
        vals, sat = quantile_from_cdf(dg.cdf, dg.y_points, dg.q_points)
        assert not np.any(sat)
        assert np.all(np.abs(vals - dg.quantiles) <= width + 1e-12)


def test_build_panel_listing():
    records = [(17, 2, 1650.0), (1, 2, 1213.5), (72, 3, 2101.25),
               (2, 3, 1682.25), (17, 3, 1700.0)]
    panel = build_panel(records)
    assert panel.units == (1, 2, 17, 72)
    assert panel.periods == (2, 3)
    assert panel.n(17, 2) == 1
    assert panel.amin == 1213.5
    assert panel.amax == 2101.25


def test_build_panel_sorts_cells():
    panel = build_panel([(1, 1, 3.0), (1, 1, 1.0), (1, 1, 2.0)])
    assert np.array_equal(panel.sample(1, 1), [1.0, 2.0, 3.0])
    assert panel.sample(1, 1).flags.writeable is False


def test_build_panel_accepts_array_input():
    arr = np.array([[2, 1, 0.5], [1, 1, 0.25], [2, 2, 1.5]])
    panel = build_panel(arr)
    assert panel.units == (1, 2)
    assert panel.periods == (1, 2)


def test_build_panel_errors():
    with pytest.raises(ValueError, match="empty input"):
        build_panel([])
    with pytest.raises(ValueError, match="rows of"):
        build_panel([(1, 1)])
    with pytest.raises(ValueError, match="record 2: unit id 1.5"):
        build_panel([(1, 1, 0.0), (1.5, 1, 0.0)])
    with pytest.raises(ValueError, match="record 1: period id"):
        build_panel([(1, 0.25, 0.0)])
    with pytest.raises(ValueError, match="record 1: outcome nan"):
        build_panel([(1, 1, float("nan"))])
    with pytest.raises(ValueError, match="record 2: outcome inf"):
        build_panel([(1, 1, 0.0), (1, 2, float("inf"))])


def test_panel_missing_cell_message():
    panel = build_panel([(1, 1, 0.0), (2, 2, 1.0)])
    with pytest.raises(KeyError, match="unit 1 has no observations in period 2"):
        panel.sample(1, 2)
