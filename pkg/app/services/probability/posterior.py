"""Unnormalised posterior over initial states given a hit of the unsafe set."""

import logging

import numpy as np
from numpy.typing import NDArray

from app.schemas.results import PosteriorEvaluation, SolveStatus
from app.schemas.solver import SolverOptions, TimeWindow
from app.services.instanton.engine import (
    DynamicsModel,
    InitialDistribution,
    InitialGuess,
    UnsafeSet,
    VariationalSolution,
    solve_ml,
)

logger = logging.getLogger(__name__)


def evaluate_probe(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    dist: InitialDistribution,
    eps: float,
    y: NDArray[np.float64],
    window: TimeWindow,
    options: SolverOptions | None = None,
    guess: InitialGuess | None = None,
) -> tuple[PosteriorEvaluation, VariationalSolution | None]:
    """Gamma(y) = Q(y) + eps S0(y) at one probe, with the ML solve for warm starts.

    Probes inside D skip the solve and get Q = 0.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    weighted_cost = eps * dist.cost(y)

    if unsafe_set.contains(y):
        evaluation = PosteriorEvaluation(
            probe=y.tolist(),
            quasipotential=0.0,
            weighted_initial_cost=weighted_cost,
            gamma=weighted_cost,
            log_posterior=-weighted_cost / eps,
            inside_unsafe_set=True,
            status=SolveStatus.TRIVIAL,
        )
        return evaluation, None

    solution = solve_ml(model, unsafe_set, y, window, options, guess)
    q = max(solution.action, 0.0) if np.isfinite(solution.action) else np.inf
    gamma = q + weighted_cost
    evaluation = PosteriorEvaluation(
        probe=y.tolist(),
        quasipotential=q,
        weighted_initial_cost=weighted_cost,
        gamma=gamma,
        log_posterior=-gamma / eps,
        status=solution.status,
    )
    return evaluation, solution


def posterior_logdensity(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    dist: InitialDistribution,
    eps: float,
    y: NDArray[np.float64],
    window: TimeWindow,
    options: SolverOptions | None = None,
) -> PosteriorEvaluation:
    """log p(y | hit) up to a constant: -(Q(y) + eps S0(y)) / eps."""
    evaluation, _ = evaluate_probe(model, unsafe_set, dist, eps, y, window, options)
    if evaluation.status not in (SolveStatus.CONVERGED, SolveStatus.TRIVIAL):
        logger.warning("Posterior probe %s did not converge (%s)", evaluation.probe, evaluation.status.value)
    return evaluation
