"""Tests for initial sets, static problems and the peaks pipeline."""

import numpy as np
import pytest

from src.core.gallery import ArtifactChoice, canonical_artifacts
from src.core.pairs import MonotoneBijection, UsefulPair
from src.core.settings import SolverSettings
from src.core.systems import (
    DynamicalSystem,
    InitialSet,
    NuOracle,
    has_fixed_point_obstruction,
    solve_peaks,
    solve_static,
)
from src.errors import NotUsefulError, OrbitDivergenceError, ParameterError


class TestInitialSet:
    @pytest.mark.parametrize("build", [
        lambda: InitialSet.box((0.0, 1.0), (1.0, 0.0)),
        lambda: InitialSet.box((0.0,), (1.0, 2.0)),
        lambda: InitialSet.segment((0.0,), (1.0, 1.0)),
        lambda: InitialSet.finite([]),
        lambda: InitialSet.finite([(0.0,), (1.0, 2.0)]),
        lambda: InitialSet.box_line((1.0, 1.0), (2.0, 2.0), (1.0, -1.0)),
    ])
    def test_invalid_sets(self, build):
        with pytest.raises(ParameterError):
            build()

    def test_box_line_range(self):
        init = InitialSet.box_line((-1.0, -1.0), (1.0, 2.0), (1.0, 2.0))
        lo, hi = init.parameter_bounds()
        assert lo[0] == pytest.approx(-0.5)
        assert hi[0] == pytest.approx(1.0)
        points = init.point(init.grid(5))
        assert np.allclose(points[:, 1], 2.0 * points[:, 0])

    def test_box_grid_is_lexicographic(self):
        init = InitialSet.box((0.0, 0.0), (1.0, 1.0))
        grid = init.grid(100)
        assert grid.shape == (100, 2)
        assert tuple(grid[0]) == (0.0, 0.0)
        assert tuple(grid[1]) == pytest.approx((0.0, 1.0 / 9.0))

    def test_segment_points(self):
        init = InitialSet.segment((0.0, 0.0), (2.0, 1.0))
        assert np.allclose(init.point(np.array([[0.5]])), [[1.0, 0.5]])
        lo, hi = init.bounding_box()
        assert tuple(lo) == (0.0, 0.0)
        assert tuple(hi) == (2.0, 1.0)

    def test_finite_samples_every_point(self):
        init = InitialSet.finite([(1.0,), (3.0,)])
        assert init.sample(10).tolist() == [[1.0], [3.0]]
        assert init.to_dict() == {'points': [(1.0,), (3.0,)], 'kind': 'finite-list'}


class TestDynamicalSystem:
    def test_matrix_shape_must_match(self):
        with pytest.raises(ParameterError):
            DynamicalSystem.linear([[1.0, 0.0]], InitialSet.box((0.0, 0.0), (1.0, 1.0)), lambda X: X[:, 0])

    def test_map_needs_every_component(self):
        with pytest.raises(ParameterError):
            DynamicalSystem.from_expressions(["x1"], "x1", InitialSet.box((0.0, 0.0), (1.0, 1.0)))

    def test_orbit_values(self, worked_system):
        values = worked_system.orbit_values(np.array([[1.0, 0.5]]), 2)
        # phi(A^n (1, 1/2)) with c = 1.5^n
        expected = [-3.0 * c * c * 0.25 + 2.0 * 30.0 * c * 0.5 for c in (1.0, 1.5, 2.25)]
        assert values[0] == pytest.approx(expected)

    def test_divergence_reports_step(self):
        system = DynamicalSystem.from_expressions(["x1*1e100"], "x1", InitialSet.box((1.0,), (2.0,)))
        with pytest.raises(OrbitDivergenceError) as info:
            system.iterate(np.array([1.0]), 3)
        assert info.value.step == 2
        assert info.value.point == (1.0,)

    def test_shifted(self):
        system = DynamicalSystem.from_expressions(["x1/2"], "x1 + 5", InitialSet.box((1.0,), (2.0,)))
        shifted = system.shifted()
        assert shifted.phi_shift == 5.0
        assert shifted.phi(np.zeros(1)) == 0.0
        assert shifted.phi(np.array([2.0])) == 2.0

    def test_fixed_point_obstruction(self):
        identity = DynamicalSystem.from_expressions(["x1"], "x1", InitialSet.box((1.0,), (2.0,)))
        halving = DynamicalSystem.from_expressions(["x1/2"], "x1", InitialSet.box((1.0,), (2.0,)))
        assert has_fixed_point_obstruction(identity)
        assert not has_fixed_point_obstruction(halving)


class TestStaticSolve:
    def test_worked_example_peak(self, worked_system):
        result = solve_static(worked_system, 8, grid=300, refine_rounds=3)
        assert result.value == pytest.approx(300.0, abs=1e-6)
        x1, x2 = result.maximizer
        assert x1 == pytest.approx(2.0 * x2)
        assert x2 == pytest.approx(10.0 / 1.5 ** 8, abs=1e-5)
        assert result.refined
        assert not result.suspect

    def test_endpoint_maximum(self, worked_system):
        result = solve_static(worked_system, 0, grid=300, refine_rounds=3)
        assert result.value == pytest.approx(29.25)
        assert result.maximizer == pytest.approx((1.0, 0.5))

    def test_finite_set_is_not_refined(self):
        system = DynamicalSystem.from_expressions(["x1"], "x1", InitialSet.finite([(1.0,), (3.0,), (2.0,)]))
        result = solve_static(system, 4)
        assert result.value == 3.0
        assert result.maximizer == (3.0,)
        assert not result.refined

    def test_grid_size(self, worked_system):
        with pytest.raises(ParameterError):
            solve_static(worked_system, 0, grid=1)


def test_oracle_memoizes(worked_system):
    oracle = NuOracle(worked_system, grid=100, refine_rounds=1, thread_count=2)
    first = oracle(3)
    assert oracle(3) == first
    assert oracle.solves == 1
    oracle.prefetch(range(5))
    assert oracle.solves == 5
    assert [r.k for r in oracle.results] == [0, 1, 2, 3, 4]


class TestSolvePeaks:
    def test_worked_example(self, worked_params, worked_system, fast_settings):
        pair = canonical_artifacts(worked_params, ArtifactChoice.PAIR_B)
        solution = solve_peaks(worked_system, pair, fast_settings.grid, fast_settings.refine_rounds,
                               fast_settings)
        assert solution.nu_opt == pytest.approx(300.0, abs=1e-6)
        assert solution.k_opt == 8
        assert solution.k_greatest == 8
        assert solution.K_bound == 10
        assert solution.static_solves == solution.K_bound + 1
        assert [r.k for r in solution.static_results] == list(range(11))
        assert solution.x_opt[0] == pytest.approx(2.0 * solution.x_opt[1])

    def test_threads_solve_ahead(self, worked_params, worked_system, fast_settings):
        settings = fast_settings.with_overrides(thread_count=3)
        pair = canonical_artifacts(worked_params, ArtifactChoice.PAIR_B)
        solution = solve_peaks(worked_system, pair, settings.grid, settings.refine_rounds, settings)
        assert solution.K_bound == 10
        assert solution.nu_opt == pytest.approx(300.0, abs=1e-6)
        assert solution.K_bound + 1 <= solution.static_solves <= settings.horizon + 1

    def test_orbits_diverging_after_the_stopping_index(self):
        settings = SolverSettings(grid=200, refine_rounds=2)
        system = DynamicalSystem.from_expressions(["1000*x1"], "-x1", InitialSet.box((1.0,), (2.0,)))
        with pytest.raises(OrbitDivergenceError):
            system.iterate((1.0,), settings.horizon)
        pair = UsefulPair(MonotoneBijection.affine(2.0, -3.0), 0.5)
        solution = solve_peaks(system, pair, settings.grid, settings.refine_rounds, settings)
        assert solution.nu_opt == pytest.approx(-1.0)
        assert solution.k_opt == 0
        assert solution.K_bound == 0
        assert solution.static_solves == 1

    def test_stopping_index_past_the_verification_horizon(self, fast_settings):
        system = DynamicalSystem.from_expressions(["x1/2"], "x1", InitialSet.box((1.0,), (2.0,)))
        pair = UsefulPair(MonotoneBijection.linear(4.0), 0.5)
        settings = fast_settings.with_overrides(horizon=0)
        solution = solve_peaks(system, pair, 200, 2, settings)
        assert solution.nu_opt == pytest.approx(2.0)
        assert solution.static_solves == solution.K_bound + 1

    def test_shift_is_added_back(self, fast_settings):
        system = DynamicalSystem.from_expressions(["x1/2"], "x1 + 5", InitialSet.box((1.0,), (2.0,)))
        pair = UsefulPair(MonotoneBijection.linear(4.0), 0.5)
        solution = solve_peaks(system.shifted(), pair, 200, 2, fast_settings)
        assert solution.nu_opt == pytest.approx(7.0)
        assert solution.k_opt == 0
        assert solution.phi_shift == 5.0

    def test_fixed_points_are_not_useful(self, fast_settings):
        identity = DynamicalSystem.from_expressions(["x1"], "x1", InitialSet.box((1.0,), (2.0,)))
        pair = UsefulPair(MonotoneBijection.linear(4.0), 0.5)
        with pytest.raises(NotUsefulError):
            solve_peaks(identity, pair, 200, 2, fast_settings)
