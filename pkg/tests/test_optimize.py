import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oproute.analytic import SystemParams, progress_rate_density
from oproute.optimize import (
    Axis,
    GridSpec,
    SimulatedObjective,
    analytic_objective,
    argmax_beta_given_p,
    argmax_joint,
    argmax_p_given_beta,
    argmax_table,
    near_optimal_region,
)


def fine_grid():
    return GridSpec(Axis(0.005, 0.5, 60), Axis(0.1, 30.0, 60, log=True), 4)


class TestAxis:
    def test_values(self):
        assert Axis(1, 3, 3).values().tolist() == [1, 2, 3]
        np.testing.assert_allclose(Axis(1, 100, 3, log=True).values(), [1, 10, 100])

    def test_invalid(self):
        for args in [(1, 1, 3), (2, 1, 3), (0, 1, 3, True), (0, 1, 0)]:
            with pytest.raises(ValueError):
                Axis(*args)

    def test_zoom_clipped(self):
        box = Axis(0.0, 9.0, 10)
        z = box.zoom(0.0, box)
        assert (z.lo, z.hi) == (0.0, 3.0)
        z = box.zoom(4.5, box)
        assert (z.lo, z.hi) == pytest.approx((3.0, 6.0))

    def test_grid_invariants(self):
        with pytest.raises(ValueError):
            GridSpec(Axis(0.0, 0.5, 5), Axis(0.1, 1, 5))
        with pytest.raises(ValueError):
            GridSpec(Axis(0.1, 1.0, 5), Axis(0.1, 1, 5))
        with pytest.raises(ValueError):
            GridSpec(Axis(0.1, 0.5, 2), Axis(0.1, 1, 5))


class TestJoint:
    def test_value_is_exact_objective(self):
        res = argmax_joint(analytic_objective(3.0), fine_grid())
        assert res.value == progress_rate_density(SystemParams(1, 3, res.p_star, res.beta_star))
        assert res.spectral_efficiency_star == math.log2(1 + res.beta_star)
        assert not res.boundary
        assert res.objective == "analytic"

    def test_known_optimum_alpha3(self):
        res = argmax_joint(analytic_objective(3.0), fine_grid())
        assert res.p_star == pytest.approx(0.0608, rel=0.02)
        assert res.beta_star == pytest.approx(1.576, rel=0.02)

    def test_trace_monotone(self):
        res = argmax_joint(analytic_objective(4.0), fine_grid())
        vals = [t["value"] for t in res.trace]
        assert len(vals) == 5
        assert np.all(np.diff(vals) >= 0)

    def test_resolution_stable(self):
        a = argmax_joint(analytic_objective(3.5), fine_grid())
        b = argmax_joint(analytic_objective(3.5),
                         GridSpec(Axis(0.005, 0.5, 120), Axis(0.1, 30.0, 120, log=True), 4))
        assert a.p_star == pytest.approx(b.p_star, rel=0.01)
        assert a.beta_star == pytest.approx(b.beta_star, rel=0.01)

    def test_constant_objective_tie_break(self):
        res = argmax_joint(lambda p, b: np.zeros(np.broadcast(p, b).shape) + 1.0,
                           GridSpec(Axis(0.1, 0.9, 5), Axis(1.0, 5.0, 5)))
        assert (res.p_star, res.beta_star) == (0.1, 1.0)
        assert res.boundary

    def test_boundary_flag(self):
        res = argmax_joint(lambda p, b: p + b, GridSpec(Axis(0.1, 0.9, 5), Axis(1.0, 5.0, 5)))
        assert (res.p_star, res.beta_star) == (0.9, 5.0)
        assert res.boundary

    def test_interior_quadratic(self):
        res = argmax_joint(lambda p, b: -(p - 0.37) ** 2 - (np.log(b) - 0.5) ** 2,
                           GridSpec(Axis(0.01, 0.99, 21), Axis(0.1, 20.0, 21, log=True), 6))
        assert res.p_star == pytest.approx(0.37, abs=1e-3)
        assert res.beta_star == pytest.approx(math.exp(0.5), rel=1e-3)
        assert not res.boundary

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.01, 100.0))
    def test_scale_invariant(self, k):
        obj = analytic_objective(4.0)
        grid = GridSpec(Axis(0.01, 0.5, 15), Axis(0.2, 20.0, 15, log=True), 2)
        a = argmax_joint(obj, grid)
        b = argmax_joint(lambda p, b: k * obj(p, b), grid)
        assert (a.p_star, a.beta_star) == (b.p_star, b.beta_star)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            argmax_joint(lambda p, b: np.full(np.broadcast(p, b).shape, np.nan),
                         GridSpec(Axis(0.1, 0.9, 3), Axis(1.0, 5.0, 3)))


class TestConditional:
    @pytest.mark.parametrize("beta", [0.5, 1.0, 4.0])
    def test_p_given_beta_vs_scan(self, beta):
        obj = analytic_objective(3.0)
        res = argmax_p_given_beta(obj, beta, Axis(0.005, 0.5, 40), rounds=5)
        scan = np.arange(0.005, 0.5, 1e-3)
        ref = scan[np.argmax(obj(scan, beta))]
        assert res.p_star == pytest.approx(ref, abs=1.5e-3)
        assert res.beta_star == beta
        assert not res.boundary

    def test_beta_given_p_vs_scan(self):
        obj = analytic_objective(4.0)
        res = argmax_beta_given_p(obj, 0.05, Axis(0.1, 50.0, 40, log=True), rounds=5)
        scan = np.exp(np.arange(math.log(0.1), math.log(50.0), 1e-3))
        ref = scan[np.argmax(obj(0.05, scan))]
        assert res.beta_star == pytest.approx(ref, rel=2e-3)
        assert res.p_star == 0.05

    def test_single_point(self):
        res = argmax_beta_given_p(analytic_objective(3.0), 0.1, Axis(2.0, 2.0, 1), rounds=2)
        assert (res.p_star, res.beta_star) == (0.1, 2.0)
        assert not res.boundary


class TestTable:
    def test_picks_max(self):
        tab = np.array([[1.0, 2.0, 1.0], [1.0, 5.0, 1.0], [0.0, 1.0, 0.0]])
        res = argmax_table(tab, [0.1, 0.2, 0.3], [1.0, 2.0, 3.0])
        assert (res.p_star, res.beta_star, res.value) == (0.2, 2.0, 5.0)
        assert not res.boundary

    def test_edge(self):
        res = argmax_table(np.eye(3), [0.1, 0.2, 0.3], [1.0, 2.0, 3.0])
        assert (res.p_star, res.beta_star) == (0.1, 1.0)
        assert res.boundary


class TestRegion:
    grid = GridSpec(Axis(0.02, 0.12, 11), Axis(0.5, 8.0, 5, log=True), 0)

    def test_contains_known_points(self):
        cells = near_optimal_region(analytic_objective(3.0), self.grid, 0.9)
        pts = {(round(c.p, 6), round(c.beta, 6)) for c in cells}
        assert (0.06, 1.0) in pts and (0.06, 2.0) in pts
        assert all(c.normalized >= 0.9 for c in cells)

    def test_threshold_one(self):
        cells = near_optimal_region(analytic_objective(3.0), self.grid, 1.0)
        assert len(cells) == 1 and cells[0].normalized == 1.0

    def test_tiny_threshold(self):
        cells = near_optimal_region(analytic_objective(3.0), self.grid, 1e-9)
        assert len(cells) == 11 * 5

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            near_optimal_region(analytic_objective(3.0), self.grid, 0.0)


class TestSimulatedObjective:
    def test_cells_consistent(self):
        obj = SimulatedObjective(3.0, n_trials=60, seed=4, beta_window=0.5)
        full = obj(np.array([0.05, 0.1])[:, None], np.array([0.5, 1.0, 2.0])[None, :])
        one = obj(0.1, 1.0)
        assert float(one) == full[1, 1]
        assert full.shape == (2, 3)

    def test_beta_window_enforced(self):
        obj = SimulatedObjective(3.0, n_trials=10, beta_window=1.0)
        with pytest.raises(ValueError):
            obj(0.1, 0.5)
