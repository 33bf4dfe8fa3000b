"""Tests for the multi-start driver.

Critical scenarios tested:
- Symmetric target yields both mirror-image optima
- Starts depend only on the seed
- Near-identical optima are merged
- Argument validation
"""

import numpy as np
import pytest

from app.schemas.solver import SolverOptions
from app.services.instanton.engine import (
    ConvergenceError,
    deduplicate,
    multi_start,
    outside_band,
    solve_ml,
)

from .conftest import BROWNIAN_Q, create_brownian_model


@pytest.fixture
def symmetric_options() -> SolverOptions:
    return SolverOptions(nodes=50, n_starts=5, threads=2)


class TestSymmetricTarget:
    """Test D = {|x| >= 1} from the origin."""

    def test_finds_both_mirror_paths(self, unit_window, symmetric_options):
        solutions = multi_start(
            create_brownian_model(), outside_band(1.0), unit_window, symmetric_options, y=np.array([0.0]), seed=0
        )
        assert len(solutions) == 2
        endpoints = sorted(s.final_state[0] for s in solutions)
        assert endpoints == pytest.approx([-1.0, 1.0], abs=1e-6)
        for solution in solutions:
            assert solution.action == pytest.approx(BROWNIAN_Q, rel=1e-6)

    def test_results_depend_only_on_seed(self, unit_window):
        model, unsafe = create_brownian_model(), outside_band(1.0)
        serial = multi_start(model, unsafe, unit_window, SolverOptions(nodes=50, n_starts=3, threads=1), y=np.array([0.0]), seed=4)
        parallel = multi_start(model, unsafe, unit_window, SolverOptions(nodes=50, n_starts=3, threads=3), y=np.array([0.0]), seed=4)
        assert [s.objective for s in serial] == [s.objective for s in parallel]
        for a, b in zip(serial, parallel, strict=True):
            np.testing.assert_array_equal(a.path.states, b.path.states)

    def test_all_starts_failing_raises(self, unit_window):
        """A single unperturbed start cannot leave the degenerate origin."""
        with pytest.raises(ConvergenceError, match="All 1 starts"):
            multi_start(
                create_brownian_model(), outside_band(1.0), unit_window, SolverOptions(nodes=50), y=np.array([0.0])
            )


class TestDeduplicate:
    """Test merging of repeated optima."""

    def test_identical_solutions_collapse(self, brownian_model, unit_threshold, unit_window, fast_options):
        solution = solve_ml(brownian_model, unit_threshold, np.array([0.0]), unit_window, fast_options)
        assert len(deduplicate([solution, solution, solution], 1e-3)) == 1

    def test_sorted_by_objective(self, brownian_model, unit_threshold, unit_window, fast_options):
        far = solve_ml(brownian_model, unit_threshold, np.array([-1.0]), unit_window, fast_options)
        near = solve_ml(brownian_model, unit_threshold, np.array([0.0]), unit_window, fast_options)
        ordered = deduplicate([far, near], 1e-3)
        assert [s.objective for s in ordered] == sorted([far.objective, near.objective])


class TestArguments:
    """Test argument validation."""

    def test_needs_exactly_one_start_kind(self, brownian_model, unit_threshold, standard_prior, unit_window):
        with pytest.raises(ValueError, match="exactly one"):
            multi_start(brownian_model, unit_threshold, unit_window, y=np.array([0.0]), dist=standard_prior, eps=0.1)
        with pytest.raises(ValueError, match="exactly one"):
            multi_start(brownian_model, unit_threshold, unit_window)

    def test_map_needs_eps(self, brownian_model, unit_threshold, standard_prior, unit_window):
        with pytest.raises(ValueError, match="eps"):
            multi_start(brownian_model, unit_threshold, unit_window, dist=standard_prior)
