"""Tests for the Euler-Maruyama engine and crude Monte Carlo estimators.

Critical scenarios tested:
- Per-path streams are reproducible and independent of batching
- Hitting detection and freezing at the first hit
- Crude estimate against the discretely monitored reflection formula
- Tube probabilities at the extremes and their concentration on the flow
- Euler-Maruyama terminal variance and first-order pathwise convergence
"""

import numpy as np
import pytest

from app.schemas.results import EstimateWithCI
from app.services.instanton.engine import InitialDistribution, flow_deterministic
from app.services.montecarlo import (
    EulerMaruyama,
    estimate_hitting_probability,
    path_generator,
    simulate_em,
    tube_probability,
)
from app.services.scenarios.analytic import discrete_hitting_probability

from .conftest import create_oscillator_model


class TestStreams:
    """Test counter-based random streams."""

    def test_same_key_same_draws(self):
        a = path_generator(5, 17).standard_normal(8)
        b = path_generator(5, 17).standard_normal(8)
        np.testing.assert_array_equal(a, b)

    def test_different_index_different_draws(self):
        a = path_generator(5, 17).standard_normal(8)
        b = path_generator(5, 18).standard_normal(8)
        assert not np.array_equal(a, b)

    def test_invalid_seed_raises(self):
        with pytest.raises(ValueError, match="Seed"):
            path_generator(-1, 0)
        with pytest.raises(ValueError, match="index"):
            path_generator(0, -3)


class TestSinglePath:
    """Test one simulated path."""

    def test_reproducible(self, brownian_model, unit_threshold):
        first = simulate_em(brownian_model, np.array([0.0]), 0.25, 1.0, 1e-2, seed=9, unsafe_set=unit_threshold)
        second = simulate_em(brownian_model, np.array([0.0]), 0.25, 1.0, 1e-2, seed=9, unsafe_set=unit_threshold)
        assert first == second

    def test_no_unsafe_set_never_hits(self, brownian_model):
        result = simulate_em(brownian_model, np.array([0.0]), 0.25, 1.0, 1e-2, seed=1)
        assert not result.hit
        assert result.hitting_time is None

    def test_path_freezes_at_first_hit(self, brownian_model, unit_threshold):
        engine = EulerMaruyama(brownian_model, 1.0, 1.0, 0.1, unit_threshold, store_trajectories=True)
        outcome = engine.run(np.array([[0.5]]), np.ones((1, 10, 1)))
        assert outcome.hit[0]
        assert outcome.hit_step[0] == 2
        trajectory = outcome.trajectories[0, :, 0]
        assert trajectory[2] == pytest.approx(0.5 + 2.0 * np.sqrt(0.1))
        np.testing.assert_array_equal(trajectory[2:], trajectory[2])
        assert outcome.final_states[0, 0] == trajectory[-1]

    def test_start_inside_set_hits_at_zero(self, brownian_model, unit_threshold):
        result = simulate_em(brownian_model, np.array([1.5]), 0.1, 1.0, 1e-2, seed=0, unsafe_set=unit_threshold)
        assert result.hit
        assert result.hitting_time == 0.0

    def test_zero_noise_follows_flow(self, ou_model):
        result = simulate_em(ou_model, np.array([1.0]), 0.0, 1.0, 1e-4, seed=0)
        assert result.terminal_state[0] == pytest.approx(np.exp(-1.0), rel=1e-3)

    def test_mechanical_noise_reaches_positions_through_velocities(self):
        model = create_oscillator_model()
        engine = EulerMaruyama(model, 1.0, 1.0, 0.5, store_trajectories=True)
        noise = np.ones((1, 2, 1))
        outcome = engine.run(np.zeros((1, 2)), noise)
        first_step = outcome.trajectories[0, 1]
        assert first_step[0] == 0.0
        assert first_step[1] == pytest.approx(np.sqrt(0.5))

    def test_invalid_step_raises(self, brownian_model):
        with pytest.raises(ValueError, match="dt"):
            EulerMaruyama(brownian_model, 0.1, 1.0, 0.0)


class TestCrudeEstimate:
    """Test crude Monte Carlo hitting probabilities."""

    def test_matches_reflection_formula(self, brownian_model, unit_threshold):
        result = estimate_hitting_probability(
            brownian_model, np.array([0.0]), unit_threshold, 0.25, 1.0, 1e-3, 20000, seed=1, threads=4
        )
        reference = discrete_hitting_probability(0.0, 1.0, 1.0, 0.25, 1e-3)
        assert result.samples == 20000
        assert abs(result.estimate - reference) <= 4.0 * result.standard_error

    def test_independent_of_threads_and_batches(self, brownian_model, unit_threshold):
        kwargs = {"final_time": 1.0, "dt": 1e-2, "n": 600, "seed": 12}
        a = estimate_hitting_probability(
            brownian_model, np.array([0.0]), unit_threshold, 0.5, batch_size=100, threads=1, **kwargs
        )
        b = estimate_hitting_probability(
            brownian_model, np.array([0.0]), unit_threshold, 0.5, batch_size=250, threads=3, **kwargs
        )
        assert a == b

    def test_prior_averaged_estimate(self, brownian_model, unit_threshold):
        """Averaging over N(0, 1) includes the mass already inside D."""
        prior = InitialDistribution.diagonal([0.0], [1.0])
        result = estimate_hitting_probability(
            brownian_model, prior, unit_threshold, 0.1, 1.0, 1e-2, 4000, seed=3
        )
        assert result.estimate > 0.1587 - 4.0 * result.standard_error

    def test_standard_error_is_binomial(self, brownian_model, unit_threshold):
        result = estimate_hitting_probability(
            brownian_model, np.array([0.0]), unit_threshold, 0.5, 1.0, 1e-2, 1000, seed=4
        )
        p = result.estimate
        assert result.standard_error == pytest.approx(np.sqrt(p * (1 - p) / 1000))

    def test_invalid_path_count_raises(self, brownian_model, unit_threshold):
        with pytest.raises(ValueError, match="Path count"):
            estimate_hitting_probability(brownian_model, np.array([0.0]), unit_threshold, 0.1, 1.0, 1e-2, 0, seed=0)

    def test_agreement_helper(self):
        a = EstimateWithCI(estimate=0.10, standard_error=0.01, samples=100)
        b = EstimateWithCI(estimate=0.12, standard_error=0.01, samples=100)
        assert a.agrees_with(b)
        assert not a.agrees_with(EstimateWithCI(estimate=0.30, standard_error=0.01, samples=100))


class TestTubeProbability:
    """Test P(sup |X - phi| <= delta)."""

    def test_wide_tube_always_holds(self, ou_model):
        phi = flow_deterministic(ou_model, np.array([0.0]), 1.0, 100)
        result = tube_probability(ou_model, phi, 10.0, 0.01, 1e-2, 200, seed=0)
        assert result.estimate == 1.0

    def test_narrow_tube_never_holds(self, ou_model):
        phi = flow_deterministic(ou_model, np.array([0.0]), 1.0, 100)
        result = tube_probability(ou_model, phi, 1e-6, 1.0, 1e-2, 200, seed=0)
        assert result.estimate == 0.0

    def test_non_positive_delta_raises(self, ou_model):
        phi = flow_deterministic(ou_model, np.array([0.0]), 1.0, 10)
        with pytest.raises(ValueError, match="delta"):
            tube_probability(ou_model, phi, 0.0, 0.1, 1e-2, 10, seed=0)

    def test_concentrates_on_the_flow_at_small_noise(self, ou_model):
        phi = flow_deterministic(ou_model, np.array([1.0]), 1.0, 100)
        small = tube_probability(ou_model, phi, 0.5, 0.01, 1e-2, 2000, seed=2)
        large = tube_probability(ou_model, phi, 0.5, 0.5, 1e-2, 2000, seed=2)
        assert small.estimate > 0.99
        assert large.estimate < small.estimate


class TestEulerMaruyamaAccuracy:
    """Test the variance and the pathwise convergence of the scheme."""

    def test_brownian_terminal_variance(self, brownian_model):
        """Var X(T) = eps sigma^2 T."""
        engine = EulerMaruyama(brownian_model, 0.25, 1.0, 1e-2)
        starts, noise = engine.draw(6, range(8000), start=np.array([0.0]))
        finals = engine.run(starts, noise).final_states[:, 0]
        assert np.var(finals) == pytest.approx(0.25, abs=0.02)
        assert abs(np.mean(finals)) < 0.03

    def test_strong_error_halves_with_the_step(self, ou_model):
        """Coarse increments are sums of fine ones, so every path shares one Brownian motion."""
        fine_steps, paths = 1024, 400
        rng = np.random.default_rng(11)
        fine_noise = rng.standard_normal((paths, fine_steps, 1))
        starts = np.ones((paths, 1))

        def terminal(steps: int) -> np.ndarray:
            ratio = fine_steps // steps
            noise = fine_noise.reshape(paths, steps, ratio, 1).sum(axis=2) / np.sqrt(ratio)
            return EulerMaruyama(ou_model, 1.0, 1.0, 1.0 / steps).run(starts, noise).final_states[:, 0]

        reference = terminal(fine_steps)
        errors = [np.mean(np.abs(terminal(steps) - reference)) for steps in (32, 64)]
        assert 1.5 < errors[0] / errors[1] < 2.7
