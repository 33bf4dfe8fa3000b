"""Multi-start driver for non-convex hitting problems.

Start 0 is the unperturbed solve. Further starts come in antithetic pairs: smooth
perturbations +d and -d of the deviation guess (and of phi(0) for MAP), with the final
time jittered inside the window. Each pair draws from its own child of
SeedSequence(seed), so the set of starts depends only on the seed.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.polynomial import legendre
from numpy.typing import NDArray

from app.schemas.results import SolveMode
from app.schemas.solver import SolverOptions, TimeWindow

from .action import InitialDistribution
from .dynamics import DynamicsModel
from .solution import VariationalSolution
from .solver import (
    ConvergenceError,
    InitialGuess,
    solve_map,
    solve_ml,
    straight_line_guess,
)
from .unsafe_set import UnsafeSet

logger = logging.getLogger(__name__)

PERTURBATION_DEGREE = 2


def _perturbed_guesses(
    base: InitialGuess,
    window: TimeWindow,
    count: int,
    spread: float,
    seed: int,
    dist: InitialDistribution | None,
) -> list[InitialGuess]:
    nodes = base.deviations.shape[0]
    basis = legendre.legvander(np.linspace(-1.0, 1.0, nodes), PERTURBATION_DEGREE)
    scale = spread * (1.0 + float(np.max(np.abs(base.deviations))))
    guesses: list[InitialGuess] = []
    pairs = (count + 1) // 2
    for child in np.random.SeedSequence(seed).spawn(pairs):
        rng = np.random.default_rng(child)
        coefficients = rng.standard_normal((PERTURBATION_DEGREE + 1, base.deviations.shape[1]))
        offset = scale * (basis @ coefficients)
        shift = spread * rng.standard_normal(dist.dimension) if dist is not None else None
        final_time = (
            base.final_time if window.is_fixed else float(rng.uniform(window.t_min, window.t_max))
        )
        for sign in (1.0, -1.0):
            initial_state = None if shift is None else dist.unwhiten(sign * shift)
            guesses.append(
                InitialGuess(
                    final_time=max(final_time, 1e-6 * window.t_max),
                    deviations=base.deviations + sign * offset,
                    initial_state=initial_state,
                )
            )
    return guesses[:count]


def _distance(a: VariationalSolution, b: VariationalSolution) -> float:
    """Relative sup-norm gap on the common unit-time grid, combined with |T_a - T_b|."""
    sa, sb = a.path.states, b.path.states
    if sa.shape != sb.shape:
        return np.inf
    magnitude = 1.0 + max(float(np.max(np.abs(sa))), float(np.max(np.abs(sb))))
    gap = float(np.max(np.linalg.norm(sa - sb, axis=1))) / magnitude
    time_gap = abs(a.final_time - b.final_time) / (1.0 + a.window.t_max)
    return max(gap, time_gap)


def deduplicate(solutions: list[VariationalSolution], tol: float) -> list[VariationalSolution]:
    """Keep one representative per local optimum, ordered by objective then final time."""
    ordered = sorted(solutions, key=lambda s: (s.objective, s.final_time))
    distinct: list[VariationalSolution] = []
    for candidate in ordered:
        if all(_distance(candidate, kept) >= tol for kept in distinct):
            distinct.append(candidate)
    return distinct


def multi_start(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    window: TimeWindow,
    options: SolverOptions | None = None,
    *,
    y: NDArray[np.float64] | None = None,
    dist: InitialDistribution | None = None,
    eps: float | None = None,
    n_starts: int | None = None,
    seed: int = 0,
) -> list[VariationalSolution]:
    """Distinct local optima of an ML solve (pass y) or a MAP solve (pass dist and eps)."""
    options = options or SolverOptions()
    n_starts = n_starts or options.n_starts
    if n_starts < 1:
        raise ValueError(f"n_starts must be positive, got {n_starts}")
    if (y is None) == (dist is None):
        raise ValueError("Pass exactly one of y (ML) or dist (MAP)")
    mode = SolveMode.ML if y is not None else SolveMode.MAP
    if mode == SolveMode.MAP and eps is None:
        raise ValueError("MAP multi-start needs eps")

    def run(guess: InitialGuess | None) -> VariationalSolution:
        if mode == SolveMode.ML:
            return solve_ml(model, unsafe_set, y, window, options, guess)
        return solve_map(model, unsafe_set, dist, eps, window, options, guess)

    start = np.asarray(y, dtype=float) if y is not None else dist.mean
    base_time = window.t_max if window.is_fixed else 0.5 * (window.t_min + window.t_max)
    base = straight_line_guess(model, unsafe_set, start, base_time, options.nodes)
    guesses: list[InitialGuess | None] = [None]
    guesses += _perturbed_guesses(base, window, n_starts - 1, options.start_spread, seed, dist)

    logger.info("Multi-start %s solve: %d starts on %d threads", mode.value.upper(), n_starts, options.threads)
    with ThreadPoolExecutor(max_workers=options.threads) as pool:
        results = list(pool.map(run, guesses))

    succeeded = [r for r in results if r.success]
    for index, result in enumerate(results):
        if not result.success:
            logger.debug("Start %d ended with %s (%s)", index, result.status.value, result.error_code)
    if not succeeded:
        raise ConvergenceError(f"All {n_starts} starts failed to converge")

    distinct = deduplicate(succeeded, options.dedup_tol)
    logger.info(
        "Multi-start kept %d distinct optima from %d converged starts", len(distinct), len(succeeded)
    )
    return distinct
