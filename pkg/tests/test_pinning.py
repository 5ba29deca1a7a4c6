import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinnedgl.lab.rates import fit_rate
from pinnedgl.mesh import build_grid, grid_from_intervals, integrate
from pinnedgl.pinning import (
    CellFunction,
    RandomCellLaw,
    cell_value_hash,
    empirical_mean_drift,
    exact_mean_intervals,
    sample_periodic,
    sample_random,
)

LAW = RandomCellLaw((0.5, 1.5), (0.5, 0.5))


class TestCellFunction:
    def test_constant(self):
        c = CellFunction.constant(2.0)
        assert c.mean == 2.0 and c.symmetric

    def test_checkerboard_bounds_and_mean(self):
        c = CellFunction.checkerboard(0.5, 1.5)
        assert (c.m, c.M, c.mean) == (0.5, 1.5, 1.0)

    def test_symmetric_checkerboard_is_mirror_symmetric(self):
        c = CellFunction.checkerboard(0.5, 1.5, symmetric=True)
        t = np.linspace(0.01, 0.99, 37)
        x, y = np.meshgrid(t, t, indexing="ij")
        np.testing.assert_array_equal(c(x, y), c(1 - x, y))
        np.testing.assert_array_equal(c(x, y), c(x, 1 - y))

    def test_plain_checkerboard_is_not_mirror_symmetric(self):
        c = CellFunction.checkerboard(0.5, 1.5)
        assert c(0.1, 0.1) != c(0.9, 0.1)

    def test_trig(self):
        c = CellFunction.trig(0.5)
        assert c(0.0, 0.0) == pytest.approx(1.5)
        assert (c.m, c.M, c.mean) == (0.5, 1.5, 1.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            CellFunction("stripes", (1.0,))

    def test_nonpositive_values_rejected(self):
        with pytest.raises(ValueError):
            CellFunction.checkerboard(0.0, 1.0)

    def test_piecewise(self):
        c = CellFunction.piecewise([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        assert c(0.5, 0.1) == 4.0 and c.mean == 5.0


class TestSamplePeriodic:
    def test_constant(self):
        g = build_grid(1, 1, 10)
        p = sample_periodic(CellFunction.constant(1.0), 0.37, g)
        assert np.all(p.values == 1.0)

    def test_checkerboard_node_value(self):
        g = build_grid(1, 1, 10)
        p = sample_periodic(CellFunction.checkerboard(0.5, 1.5), 0.5, g)
        x, y = g.coordinates()
        assert (x[1, 1], y[1, 1]) == pytest.approx((0.1, 0.1))
        assert p.values[1, 1] == 0.5

    def test_trig_mean(self):
        g = build_grid(1, 1, 400)
        p = sample_periodic(CellFunction.trig(0.5), 0.01, g)
        assert abs(integrate(p.field) - 1.0) <= 0.01

    def test_bounds_preserved(self):
        g = build_grid(1, 1, 64)
        c = CellFunction.checkerboard(0.5, 1.5, symmetric=True)
        p = sample_periodic(c, 0.13, g)
        assert c.m <= p.values.min() and p.values.max() <= c.M

    def test_nonpositive_delta(self):
        with pytest.raises(ValueError):
            sample_periodic(CellFunction.constant(1.0), 0.0, build_grid(1, 1, 4))

    def test_aliasing_warning(self):
        g = build_grid(1, 1, 10)
        p = sample_periodic(CellFunction.checkerboard(0.5, 1.5), 0.01, g)
        assert any("aliasing" in w for w in p.warnings)
        assert not sample_periodic(CellFunction.checkerboard(0.5, 1.5), 0.5, g).warnings


class TestExactMean:
    @pytest.mark.parametrize(
        "cell",
        [
            CellFunction.checkerboard(0.5, 1.5, symmetric=True),
            CellFunction.piecewise([[1, 2, 2, 1], [3, 5, 5, 3], [3, 5, 5, 3], [1, 2, 2, 1]], symmetric=True),
        ],
    )
    def test_trapezoid_mean_is_exact(self, cell):
        n = exact_mean_intervals(cell, 20)
        g = grid_from_intervals(1.0, 1.0, n, n)
        p = sample_periodic(cell, 1.0, g)
        assert integrate(p.field) == pytest.approx(cell.mean, abs=1e-14)

    def test_plain_checkerboard_edge_row_costs_order_h(self):
        # the edge x = 1 is sampled as x = 0, which belongs to the other colour
        cell = CellFunction.checkerboard(0.5, 1.5)
        n = exact_mean_intervals(cell, 20)
        g = grid_from_intervals(1.0, 1.0, n, n)
        assert abs(integrate(sample_periodic(cell, 1.0, g).field) - 1.0) <= 1.0 / n

    def test_odd_block_count_keeps_nodes_off_jumps(self):
        cell = CellFunction.piecewise([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        n = exact_mean_intervals(cell, 21)
        assert n == 22 and n % 3

    def test_tiling_drift_vanishes(self):
        cell = CellFunction.checkerboard(0.5, 1.5, symmetric=True)
        n = exact_mean_intervals(cell, 8)
        delta = 0.125
        g = grid_from_intervals(1.0, 1.0, 8 * n, 8 * n)
        assert empirical_mean_drift(sample_periodic(cell, delta, g)) <= 1e-13

    def test_tiling_drift_small_at_generic_resolution(self):
        cell = CellFunction.checkerboard(0.5, 1.5)
        g = build_grid(1, 1, 96)
        assert empirical_mean_drift(sample_periodic(cell, 0.125, g)) <= 2 * g.h


class TestRandom:
    def test_degenerate_law(self):
        g = build_grid(1, 1, 20)
        p = sample_random(RandomCellLaw((1.0,), (1.0,)), 0.1, 3, g)
        assert np.all(p.values == 1.0)
        assert empirical_mean_drift(p) <= 1e-15

    def test_support(self):
        p = sample_random(LAW, 0.02, 7, build_grid(1, 1, 200))
        assert set(np.unique(p.values)) <= {0.5, 1.5}

    def test_deterministic(self):
        g = build_grid(1, 1, 50)
        a = sample_random(LAW, 0.05, 11, g).values
        b = sample_random(LAW, 0.05, 11, g).values
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, sample_random(LAW, 0.05, 12, g).values)

    def test_shift_in_cell(self):
        p = sample_random(LAW, 0.05, 4, build_grid(1, 1, 50))
        assert all(0 <= s < 0.05 for s in p.shift)

    def test_bad_law(self):
        with pytest.raises(ValueError):
            RandomCellLaw((), ())
        with pytest.raises(ValueError):
            RandomCellLaw((0.5, 1.5), (0.6, 0.6))
        with pytest.raises(ValueError):
            sample_random(LAW, -1.0, 0, build_grid(1, 1, 4))

    def test_lattice_shift_by_whole_cells_keeps_law(self):
        # moving the shift by a lattice vector only relabels cells
        g = build_grid(1, 1, 100)
        p = sample_random(LAW, 0.05, 5, g, shift=(0.01, 0.02))
        q = sample_random(LAW, 0.05, 5, g, shift=(0.06, 0.02))
        for f in (p, q):
            assert abs(np.mean(f.values == 0.5) - 0.5) < 0.1

    def test_histogram_matches_law(self):
        law = RandomCellLaw((0.5, 1.0, 2.0), (0.2, 0.5, 0.3))
        k, l = np.meshgrid(np.arange(200), np.arange(200), indexing="ij")
        u = np.concatenate([cell_value_hash(s, k, l).ravel() for s in range(5)])
        counts = np.array([np.sum(u < 0.2), np.sum((u >= 0.2) & (u < 0.7)), np.sum(u >= 0.7)])
        N = u.size
        p = np.array(law.probabilities)
        se = np.sqrt(p * (1 - p) / N)
        assert np.all(np.abs(counts / N - p) <= 3 * se)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**40), st.floats(0.02, 0.3))
    def test_bounds_property(self, seed, delta):
        p = sample_random(LAW, delta, seed, build_grid(1, 1, 30))
        assert LAW.m <= p.values.min() and p.values.max() <= LAW.M

    def test_drift_slope_over_seeds(self):
        pairs = []
        for delta in (0.04, 0.02, 0.01):
            g = build_grid(1, 1, 8 / delta)
            drift = [empirical_mean_drift(sample_random(LAW, delta, s, g)) for s in range(32)]
            pairs.append((delta, float(np.mean(drift))))
        assert pairs[0][1] > pairs[-1][1]
        assert abs(fit_rate(pairs).slope - 1.0) <= 0.3
