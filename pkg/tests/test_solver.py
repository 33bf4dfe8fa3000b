"""Tests for the ML and MAP variational solves.

Critical scenarios tested:
- Brownian quasi-potential (L - y)^2 / (2 T) at a fixed horizon
- OU quasi-potential against its closed form
- Free final time settles on the window bound
- MAP initial state and objective against the closed form
- Zero-cost solutions when the unperturbed flow reaches the set
- Degenerate start where the level gradient vanishes
- CONVERGED implies maximum-principle residuals within residual_tol
- MAP objective bounds, the narrow-prior limit and monotonicity in the window end
- Action stability under grid doubling
"""

import numpy as np
import pytest

from app.schemas.results import SolveMode, SolveStatus
from app.schemas.solver import SolverOptions, TimeWindow
from app.services.instanton.engine import (
    ConvergenceError,
    InitialDistribution,
    InitialGuess,
    UnsafeSet,
    outside_band,
    quasipotential,
    solve_map,
    solve_ml,
    straight_line_guess,
    upper_half_line,
)

from .conftest import (
    BROWNIAN_Q,
    MAP_INITIAL_STATE,
    MAP_OBJECTIVE,
    OU_Q,
    create_brownian_model,
    create_constant_drift_model,
    create_ou_model,
)


class TestBrownianMostLikelyPath:
    """Test the ML solve where every quantity has a closed form."""

    def test_quasipotential_from_origin(self, brownian_model, unit_threshold, unit_window, fast_options):
        solution = solve_ml(brownian_model, unit_threshold, np.array([0.0]), unit_window, fast_options)
        assert solution.status == SolveStatus.CONVERGED
        assert solution.mode == SolveMode.ML
        assert solution.action == pytest.approx(BROWNIAN_Q, rel=1e-6)
        assert solution.final_state[0] == pytest.approx(1.0, abs=1e-7)
        assert solution.final_time == pytest.approx(1.0)

    def test_deviation_is_constant(self, brownian_model, unit_threshold, unit_window, fast_options):
        solution = solve_ml(brownian_model, unit_threshold, np.array([0.0]), unit_window, fast_options)
        np.testing.assert_allclose(solution.path.deviations, 1.0, atol=1e-5)

    def test_multiplier_matches_costate(self, brownian_model, unit_threshold, unit_window, fast_options):
        """lam = w = 1 along the path and lam(T) = -alpha grad f with grad f = -1."""
        solution = solve_ml(brownian_model, unit_threshold, np.array([0.0]), unit_window, fast_options)
        assert solution.multiplier == pytest.approx(1.0, rel=1e-5)
        np.testing.assert_allclose(solution.adjoint, 1.0, atol=1e-5)
        assert solution.residuals["stationarity"] < 1e-6

    def test_quasipotential_scales_with_distance(self, brownian_model, unit_threshold, unit_window, fast_options):
        q = quasipotential(brownian_model, unit_threshold, np.array([-1.0]), unit_window, fast_options)
        assert q == pytest.approx(2.0, rel=1e-6)

    def test_start_inside_set_is_trivial(self, brownian_model, unit_threshold, unit_window, fast_options):
        solution = solve_ml(brownian_model, unit_threshold, np.array([1.5]), unit_window, fast_options)
        assert solution.status == SolveStatus.TRIVIAL
        assert solution.success
        assert solution.action == 0.0
        assert quasipotential(brownian_model, unit_threshold, np.array([1.5]), unit_window, fast_options) == 0.0

    def test_warm_start_reaches_same_optimum(self, brownian_model, unit_threshold, unit_window, fast_options):
        first = solve_ml(brownian_model, unit_threshold, np.array([0.0]), unit_window, fast_options)
        second = solve_ml(
            brownian_model, unit_threshold, np.array([0.2]), unit_window, fast_options,
            InitialGuess.from_solution(first),
        )
        assert second.action == pytest.approx(0.32, rel=1e-6)

    def test_wrong_start_shape_raises(self, brownian_model, unit_threshold, unit_window):
        with pytest.raises(ValueError, match="shape"):
            solve_ml(brownian_model, unit_threshold, np.zeros(2), unit_window)


class TestOrnsteinUhlenbeck:
    """Test a drift that pulls back towards the origin."""

    def test_fixed_horizon_quasipotential(self, ou_model, unit_threshold, unit_window):
        solution = solve_ml(ou_model, unit_threshold, np.array([0.0]), unit_window, SolverOptions(nodes=100))
        assert solution.status == SolveStatus.CONVERGED
        assert solution.action == pytest.approx(OU_Q, rel=1e-3)

    def test_optimal_deviation_grows_towards_the_end(self, ou_model, unit_threshold, unit_window):
        """The optimal control is proportional to sinh-like growth e^{a t}."""
        solution = solve_ml(ou_model, unit_threshold, np.array([0.0]), unit_window, SolverOptions(nodes=100))
        w = solution.path.deviations[:, 0]
        assert np.all(np.diff(w) > 0.0)
        assert w[-1] / w[0] == pytest.approx(np.e, rel=1e-2)


class TestFreeFinalTime:
    """Test solves where the hitting time ranges over a window."""

    def test_brownian_prefers_the_latest_time(self, brownian_model, unit_threshold, fast_options):
        window = TimeWindow(t_min=0.5, t_max=2.0)
        solution = solve_ml(brownian_model, unit_threshold, np.array([0.0]), window, fast_options)
        assert solution.status == SolveStatus.CONVERGED
        assert solution.final_time == pytest.approx(2.0, abs=1e-6)
        assert solution.action == pytest.approx(0.25, rel=1e-5)

    def test_flow_reaching_set_inside_window_is_trivial(self, unit_threshold, fast_options):
        model = create_constant_drift_model(rate=2.0)
        window = TimeWindow(t_min=0.0, t_max=1.0)
        solution = solve_ml(model, unit_threshold, np.array([0.0]), window, fast_options)
        assert solution.status == SolveStatus.TRIVIAL
        assert solution.action == 0.0
        assert 0.5 - 1e-9 <= solution.final_time <= 0.5 + 1.0 / fast_options.nodes + 1e-9
        np.testing.assert_array_equal(solution.adjoint, 0.0)

    def test_flow_reaching_set_before_fixed_horizon_is_trivial(self, unit_threshold, unit_window, fast_options):
        solution = solve_ml(
            create_constant_drift_model(rate=2.0), unit_threshold, np.array([0.0]), unit_window, fast_options
        )
        assert solution.status == SolveStatus.TRIVIAL
        assert solution.final_time == pytest.approx(1.0)


class TestMapSolve:
    """Test the MAP solve with a free initial state."""

    def test_brownian_map_matches_closed_form(self, brownian_model, unit_threshold, standard_prior, unit_window, fast_options):
        solution = solve_map(brownian_model, unit_threshold, standard_prior, 0.1, unit_window, fast_options)
        assert solution.status == SolveStatus.CONVERGED
        assert solution.mode == SolveMode.MAP
        assert solution.initial_state[0] == pytest.approx(MAP_INITIAL_STATE, abs=1e-5)
        assert solution.objective == pytest.approx(MAP_OBJECTIVE, rel=1e-5)
        assert solution.initial_cost == pytest.approx(0.5 * MAP_INITIAL_STATE**2, rel=1e-4)

    def test_prior_mean_inside_set_is_trivial(self, brownian_model, unit_threshold, unit_window, fast_options):
        dist = InitialDistribution.diagonal([2.0], [1.0])
        solution = solve_map(brownian_model, unit_threshold, dist, 0.1, unit_window, fast_options)
        assert solution.status == SolveStatus.TRIVIAL
        assert solution.objective == 0.0

    def test_non_positive_eps_raises(self, brownian_model, unit_threshold, standard_prior, unit_window):
        with pytest.raises(ValueError, match="eps"):
            solve_map(brownian_model, unit_threshold, standard_prior, 0.0, unit_window)

    def test_prior_dimension_mismatch_raises(self, brownian_model, unit_threshold, unit_window):
        dist = InitialDistribution.diagonal([0.0, 0.0], [1.0, 1.0])
        with pytest.raises(ValueError, match="dimension"):
            solve_map(brownian_model, unit_threshold, dist, 0.1, unit_window)


class TestDegenerateStart:
    """Test the symmetric target where grad f vanishes at the start."""

    def test_single_start_is_infeasible(self, unit_window, fast_options):
        solution = solve_ml(create_brownian_model(), outside_band(1.0), np.array([0.0]), unit_window, fast_options)
        assert solution.status == SolveStatus.INFEASIBLE
        assert solution.error_code == "DEGENERATE_CONSTRAINT"
        assert not solution.success

    def test_quasipotential_raises_on_failure(self, unit_window, fast_options):
        with pytest.raises(ConvergenceError):
            quasipotential(create_brownian_model(), outside_band(1.0), np.array([0.0]), unit_window, fast_options)


class TestStraightLineGuess:
    """Test the default initial guess."""

    def test_first_order_line_to_boundary(self):
        guess = straight_line_guess(create_brownian_model(), upper_half_line(1.0), np.array([0.0]), 2.0, 10)
        np.testing.assert_allclose(guess.deviations, 0.5, atol=1e-12)
        assert guess.final_time == 2.0

    def test_ou_line_compensates_drift(self):
        guess = straight_line_guess(create_ou_model(), upper_half_line(1.0), np.array([0.0]), 1.0, 10)
        times = np.linspace(0.0, 1.0, 11)
        np.testing.assert_allclose(guess.deviations[:, 0], 1.0 + times, atol=1e-12)


class TestCertifiedConvergence:
    """Test that a CONVERGED status carries passing maximum-principle residuals."""

    def test_residuals_are_recorded(self, ou_model, unit_threshold, unit_window):
        solution = solve_ml(ou_model, unit_threshold, np.array([0.0]), unit_window, SolverOptions(nodes=40))
        assert solution.status == SolveStatus.CONVERGED
        assert solution.residuals["final_transversality"] < 1e-6
        assert solution.residuals["deviation_consistency"] < 1e-6
        assert solution.residuals["complementarity"] < 1e-8
        assert "initial_transversality" not in solution.residuals

    def test_map_records_initial_transversality(self, brownian_model, unit_threshold, standard_prior, unit_window, fast_options):
        solution = solve_map(brownian_model, unit_threshold, standard_prior, 0.1, unit_window, fast_options)
        assert solution.status == SolveStatus.CONVERGED
        assert solution.residuals["initial_transversality"] < 1e-6

    def test_unreachable_residual_tolerance_is_not_converged(self, ou_model, unit_threshold, unit_window):
        options = SolverOptions(nodes=40, residual_tol=1e-30)
        solution = solve_ml(ou_model, unit_threshold, np.array([0.0]), unit_window, options)
        assert solution.status == SolveStatus.MAX_ITERATIONS
        assert solution.error_code == "RESIDUALS_ABOVE_TOLERANCE"
        assert "1e-30" in solution.error_message
        assert solution.path is not None

    def test_multiplier_scales_with_the_level_function(self, brownian_model, unit_window, fast_options):
        """f = 1e7 (1 - x) describes the same set; alpha shrinks by 1e7 and alpha f stays small."""
        steep = UnsafeSet(
            level_fn=lambda z: 1e7 * (1.0 - z[..., 0]),
            gradient_fn=lambda z: np.array([-1e7]),
            components=(0,),
            name="steep",
        )
        solution = solve_ml(brownian_model, steep, np.array([0.0]), unit_window, fast_options)
        assert solution.status == SolveStatus.CONVERGED
        assert solution.action == pytest.approx(BROWNIAN_Q, rel=1e-6)
        assert solution.residuals["complementarity"] < 1e-8
        assert solution.multiplier == pytest.approx(1e-7, rel=1e-4)


class TestObjectiveBounds:
    """Test orderings every solve must respect."""

    def test_map_objective_below_quasipotential_at_prior_mean(self, brownian_model, unit_threshold, standard_prior, unit_window, fast_options):
        q = quasipotential(brownian_model, unit_threshold, standard_prior.mean, unit_window, fast_options)
        solution = solve_map(brownian_model, unit_threshold, standard_prior, 0.1, unit_window, fast_options)
        assert solution.objective <= q + 1e-9

    def test_vanishing_prior_width_recovers_ml(self, brownian_model, unit_threshold, unit_window, fast_options):
        """J = k / (2 (1 + k)) with k = eps / Sigma, which tends to Q(0) = 0.5."""
        dist = InitialDistribution.diagonal([0.0], [1e-8])
        solution = solve_map(brownian_model, unit_threshold, dist, 0.1, unit_window, fast_options)
        assert solution.status == SolveStatus.CONVERGED
        assert solution.objective == pytest.approx(0.5, abs=1e-3)
        assert abs(solution.initial_state[0]) < 1e-5

    def test_quasipotential_nonincreasing_in_window_end(self, unit_threshold, fast_options):
        for model in (create_brownian_model(), create_ou_model()):
            short = quasipotential(model, unit_threshold, np.array([0.0]), TimeWindow.fixed(1.0), fast_options)
            long = quasipotential(model, unit_threshold, np.array([0.0]), TimeWindow(t_min=1.0, t_max=2.0), fast_options)
            assert long <= short + 1e-9

    def test_brownian_action_exact_on_any_grid(self, brownian_model, unit_threshold, unit_window):
        coarse = solve_ml(brownian_model, unit_threshold, np.array([0.0]), unit_window, SolverOptions(nodes=50))
        fine = solve_ml(brownian_model, unit_threshold, np.array([0.0]), unit_window, SolverOptions(nodes=100))
        assert abs(fine.action - coarse.action) < 1e-6

    def test_ou_action_settles_under_grid_doubling(self, ou_model, unit_threshold, unit_window):
        coarse = solve_ml(ou_model, unit_threshold, np.array([0.0]), unit_window, SolverOptions(nodes=100))
        fine = solve_ml(ou_model, unit_threshold, np.array([0.0]), unit_window, SolverOptions(nodes=200))
        assert abs(fine.action - coarse.action) < 1e-4
