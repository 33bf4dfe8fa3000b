"""Tests for the action functional, the Gaussian prior and the MAP objective.

Critical scenarios tested:
- Trapezoidal action of constant deviations
- Deviation recovery from sampled states
- Gaussian cost, gradient and log-density
- Prior validation
"""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from app.services.instanton.engine import (
    InitialDistribution,
    Path,
    TimeGrid,
    action_functional,
    cumulative_action,
    initial_cost,
    initial_cost_gradient,
    map_objective,
    recover_deviation,
)

from .conftest import create_brownian_model, create_ou_model


def create_line(final_time: float = 1.0, target: float = 1.0, steps: int = 20) -> Path:
    """Helper to create the straight line from 0 to `target`."""
    grid = TimeGrid.uniform(final_time, steps)
    return Path(grid=grid, states=(target * grid.times / final_time)[:, None])


class TestActionFunctional:
    """Test S_T = 1/2 int |w|^2 dt."""

    def test_constant_deviation(self):
        grid = TimeGrid.uniform(2.0, 10)
        path = Path(grid=grid, states=np.zeros((11, 1)), deviations=np.ones((11, 1)))
        assert action_functional(path) == pytest.approx(1.0)

    def test_cumulative_action_ends_at_total(self):
        grid = TimeGrid.uniform(1.0, 10)
        deviations = np.linspace(0.0, 2.0, 11)[:, None]
        path = Path(grid=grid, states=np.zeros((11, 1)), deviations=deviations)
        running = cumulative_action(path)
        assert running[0] == 0.0
        assert running[-1] == pytest.approx(action_functional(path))
        assert np.all(np.diff(running) >= 0.0)

    def test_single_node_path_has_zero_action(self):
        path = Path(grid=TimeGrid(np.zeros(1)), states=np.zeros((1, 1)), deviations=np.zeros((1, 1)))
        assert action_functional(path) == 0.0

    def test_missing_deviations_raise(self):
        with pytest.raises(ValueError, match="deviations"):
            action_functional(create_line())


class TestRecoverDeviation:
    """Test w = sigma^{-1} (phi' - b(phi))."""

    def test_brownian_line_has_unit_deviation(self):
        """Crossing distance 1 in time 1 with zero drift needs w = 1."""
        path = recover_deviation(create_line(), create_brownian_model())
        np.testing.assert_allclose(path.deviations, np.ones((21, 1)), atol=1e-12)
        assert action_functional(path) == pytest.approx(0.5)

    def test_sigma_scales_the_deviation(self):
        path = recover_deviation(create_line(), create_brownian_model(sigma=2.0))
        np.testing.assert_allclose(path.deviations, np.full((21, 1), 0.5), atol=1e-12)

    def test_drift_is_removed(self):
        """A path that follows the OU flow needs no deviation."""
        grid = TimeGrid.uniform(1.0, 2000)
        states = np.exp(-grid.times)[:, None]
        path = recover_deviation(Path(grid=grid, states=states), create_ou_model())
        assert np.max(np.abs(path.deviations[1:-1])) < 1e-6


class TestInitialDistribution:
    """Test the Gaussian prior over initial states."""

    def test_cost_and_gradient(self):
        dist = InitialDistribution.diagonal([0.0, 1.0], [4.0, 1.0])
        y = np.array([2.0, 2.0])
        assert initial_cost(dist, y) == pytest.approx(0.5 * (1.0 + 1.0))
        np.testing.assert_allclose(initial_cost_gradient(dist, y), [0.5, 1.0])

    def test_logpdf_matches_scipy(self):
        covariance = np.array([[2.0, 0.3], [0.3, 0.5]])
        dist = InitialDistribution(mean=np.array([1.0, -1.0]), covariance=covariance)
        y = np.array([0.2, 0.4])
        expected = multivariate_normal(mean=[1.0, -1.0], cov=covariance).logpdf(y)
        assert dist.logpdf(y) == pytest.approx(expected, rel=1e-12)

    def test_whiten_inverts_unwhiten(self):
        dist = InitialDistribution(mean=np.array([1.0, 2.0]), covariance=np.array([[2.0, 0.5], [0.5, 1.0]]))
        xi = np.array([0.3, -1.1])
        np.testing.assert_allclose(dist.whiten(dist.unwhiten(xi)), xi)

    def test_sample_moments(self):
        dist = InitialDistribution.diagonal([3.0], [0.25])
        samples = dist.sample(np.random.default_rng(7), 20000)
        assert samples.shape == (20000, 1)
        assert np.mean(samples) == pytest.approx(3.0, abs=0.02)
        assert np.std(samples) == pytest.approx(0.5, abs=0.02)

    def test_non_positive_definite_raises(self):
        with pytest.raises(ValueError, match="positive definite"):
            InitialDistribution(mean=np.zeros(2), covariance=np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_asymmetric_raises(self):
        with pytest.raises(ValueError, match="symmetric"):
            InitialDistribution(mean=np.zeros(2), covariance=np.array([[1.0, 0.1], [0.0, 1.0]]))

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError, match="does not match"):
            InitialDistribution(mean=np.zeros(2), covariance=np.eye(3))


class TestMapObjective:
    """Test J = S_T + eps S0(phi(0))."""

    def test_objective_adds_weighted_prior_cost(self):
        dist = InitialDistribution.diagonal([0.0], [1.0])
        grid = TimeGrid.uniform(1.0, 10)
        states = (0.5 + 0.5 * grid.times)[:, None]
        path = recover_deviation(Path(grid=grid, states=states), create_brownian_model())
        assert map_objective(path, dist, 0.1) == pytest.approx(0.125 + 0.1 * 0.125)

    def test_non_positive_eps_raises(self):
        path = recover_deviation(create_line(), create_brownian_model())
        with pytest.raises(ValueError, match="eps"):
            map_objective(path, InitialDistribution.diagonal([0.0], [1.0]), 0.0)
