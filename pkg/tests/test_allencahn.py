import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from pinnedgl.allencahn import (
    AC_COLUMNS,
    PER_JUMP_CONSTANT,
    PER_PERIMETER_CONSTANT,
    ac_energy,
    homogenized_ac_check,
    interface_constant_1d,
    interface_length,
    minimize_ac,
    split_state,
)
from pinnedgl.mesh import ScalarField, build_grid, integrate
from pinnedgl.pinning import CellFunction, sample_periodic


def shooting_constant(eps=1.0, L=12.0):
    """Energy of the optimal 1-D profile u' = (1 - u²)/ε integrated from u(0) = 0."""

    def rhs(_, z):
        u = z[0]
        du = (1 - u * u) / eps
        return [du, eps * du * du + (1 - u * u) ** 2 / eps]

    half = solve_ivp(rhs, (0, L * eps), [0.0, 0.0], rtol=1e-12, atol=1e-14)
    return 2 * half.y[1, -1]


def mean(u):
    return integrate(u.values, u.grid) / u.grid.area


@pytest.fixture(scope="module")
def vertical():
    return minimize_ac(None, 0.02, 0.0, build_grid(1, 1, 400))


class TestConstants:
    def test_shooting_oracle(self):
        assert shooting_constant() == pytest.approx(8 / 3, rel=1e-8)
        assert shooting_constant(0.1) == pytest.approx(8 / 3, rel=1e-8)

    def test_constants(self):
        assert PER_PERIMETER_CONSTANT == pytest.approx(2 * PER_JUMP_CONSTANT)
        assert PER_JUMP_CONSTANT == pytest.approx(4 / 3)
        assert AC_COLUMNS[:3] == ("eps", "delta", "beta")


class TestMinimize:
    def test_constant_ground_state(self):
        g = build_grid(1, 1, 32)
        s = minimize_ac(None, 0.1, 1.0, g, init=np.ones(g.shape))
        np.testing.assert_allclose(s.u.values, 1.0, atol=1e-12)
        assert s.energy == pytest.approx(0.0, abs=1e-20)

    def test_vertical_split(self, vertical):
        s = vertical
        assert s.interface_length == pytest.approx(1.0, rel=0.05)
        assert s.per_length_constant == pytest.approx(8 / 3, rel=0.02)
        assert abs(mean(s.u) - s.beta) <= 1e-8
        u = s.u.values
        assert u[5, :].max() < -0.99 and u[-6, :].min() > 0.99

    def test_tilted_init_relaxes(self):
        g = build_grid(1, 1, 100)
        tilted = minimize_ac(None, 0.05, 0.0, g, init="tilted")
        straight = minimize_ac(None, 0.05, 0.0, g)
        assert tilted.energy == pytest.approx(straight.energy, rel=0.02)
        assert tilted.interface_length == pytest.approx(1.0, rel=0.05)

    def test_energy_nonincreasing(self):
        g = build_grid(1, 1, 64)
        s = minimize_ac(None, 0.08, 0.0, g, init="tilted")
        hist = np.asarray(s.history[100:])
        assert np.all(np.diff(hist) <= 1e-12 * hist[0])

    @pytest.mark.parametrize("k", [1, 2, 3, 7])
    def test_mass_each_step(self, k, rng):
        g = build_grid(1, 1, 40)
        u0 = rng.uniform(-1, 1, g.shape)
        s = minimize_ac(None, 0.1, 0.3, g, init=u0, window=k, tol=math.inf)
        assert s.steps == k
        assert abs(mean(s.u) - 0.3) <= 1e-10

    def test_comparison_bound(self):
        g = build_grid(1, 1, 120)
        p = sample_periodic(CellFunction.checkerboard(0.5, 1.5), 0.1, g)
        s = minimize_ac(p, 0.1, 0.2, g)
        assert np.abs(s.u.values).max() <= math.sqrt(1.5) + 0.1 + 1e-6
        assert s.energy >= 0
        assert s.energy == pytest.approx(ac_energy(s.u, p, 0.1), rel=1e-12)

    def test_infeasible_beta(self):
        with pytest.raises(ValueError):
            minimize_ac(None, 0.1, 1.2, build_grid(1, 1, 16))
        with pytest.raises(ValueError):
            minimize_ac(None, -0.1, 0.0, build_grid(1, 1, 16))

    def test_non_convergence(self):
        with pytest.raises(RuntimeError):
            minimize_ac(None, 0.05, 0.0, build_grid(1, 1, 64), init="tilted", max_steps=150)

    def test_constant_per_length_stable(self):
        c = [
            minimize_ac(None, e, 0.0, build_grid(1, 1, n)).per_length_constant
            for e, n in ((0.04, 100), (0.02, 200))
        ]
        assert abs(c[1] / c[0] - 1) <= 0.05


class TestInterfaceLength:
    def test_straight_line(self):
        g = build_grid(1, 1, 50)
        assert interface_length(ScalarField(g, split_state(g, 0.05))) == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.15, 0.35))
    def test_circle(self, r):
        g = build_grid(1, 1, 200)
        x, y = g.coordinates()
        u = ScalarField(g, np.hypot(x - 0.5, y - 0.5) - r + 0 * x)
        assert interface_length(u) == pytest.approx(2 * math.pi * r, rel=2e-3)


class TestOneDimensional:
    def test_constant_and_widths(self):
        val, energies, widths = interface_constant_1d([0.04, 0.02, 0.01], return_details=True)
        assert val == pytest.approx(shooting_constant(), rel=0.02)
        for w0, w1 in zip(widths, widths[1:]):
            assert w1 / w0 == pytest.approx(0.5, rel=0.15)
        # the 0.9-level width of tanh(x/ε) is 2ε artanh(0.9)
        assert widths[-1] == pytest.approx(2 * 0.01 * math.atanh(0.9), rel=0.02)

    def test_decreasing_required(self):
        with pytest.raises(ValueError):
            interface_constant_1d([0.01, 0.02])


class TestHomogenized:
    def test_unpinned_v_equals_u(self):
        g = build_grid(1, 1, 60)
        p = sample_periodic(CellFunction.constant(1.0), 0.1, g)
        r = homogenized_ac_check(p, 0.1, 0.0)
        np.testing.assert_array_equal(r.v.values, r.solve.u.values)
        assert r.U_sup_error <= 1e-12

    def test_checkerboard(self):
        eps = 0.1
        g = build_grid(1, 1, 400)
        cell = CellFunction.checkerboard(0.5, 1.5, symmetric=True)
        p = sample_periodic(cell, eps**2 / 2, g)
        r = homogenized_ac_check(p, eps, 0.0, band_factor=3)
        assert math.isfinite(r.v_phase_error)
        assert r.v_phase_error <= r.U_sup_error + eps
        plain = minimize_ac(None, eps, 0.0, g)
        assert r.interface_length == pytest.approx(plain.interface_length, rel=0.05)
