"""Weak p-safety: the hitting probability averaged over the initial-state prior.

    P = int p0(y) exp(-Q(y) / eps) dy

Low-dimensional states (n <= 2) use composite Simpson on a tensor grid spanning five
prior standard deviations per axis; the error bar is the gap to the same rule on the
grid with every other node. Higher dimensions fall back to self-normalised importance
sampling with proposal N(y_map, Sigma) centred on the MAP initial state.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import simpson

from app.schemas.results import PSafetyEstimate, SolveStatus
from app.schemas.solver import SolverOptions, TimeWindow
from app.services.instanton.engine import (
    DynamicsModel,
    InitialDistribution,
    InitialGuess,
    UnsafeSet,
    solve_map,
)

from .posterior import evaluate_probe

logger = logging.getLogger(__name__)

QUADRATURE_MAX_DIMENSION = 2
PRIOR_HALF_WIDTH = 5.0
# Probes are warm-started sequentially within a chunk; chunks run in parallel
PROBE_CHUNK = 16


def _log_weights(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    dist: InitialDistribution,
    eps: float,
    probes: NDArray[np.float64],
    window: TimeWindow,
    options: SolverOptions,
    threads: int,
    guess: InitialGuess | None = None,
) -> tuple[NDArray[np.float64], int]:
    """log p0(y) - Q(y)/eps at every probe, and the number of probes whose solve failed."""

    def run_chunk(chunk: NDArray[np.float64]) -> list[tuple[float, bool]]:
        out: list[tuple[float, bool]] = []
        warm = guess
        for y in chunk:
            evaluation, solution = evaluate_probe(model, unsafe_set, dist, eps, y, window, options, warm)
            failed = evaluation.status not in (SolveStatus.CONVERGED, SolveStatus.TRIVIAL)
            if solution is not None and solution.path is not None and not failed:
                warm = InitialGuess.from_solution(solution)
            out.append((dist.logpdf(y) - evaluation.quasipotential / eps, failed))
        return out

    chunks = [probes[i : i + PROBE_CHUNK] for i in range(0, len(probes), PROBE_CHUNK)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = [item for chunk in pool.map(run_chunk, chunks) for item in chunk]

    values = np.array([value for value, _ in results])
    failed = sum(1 for _, bad in results if bad)
    if failed:
        logger.warning("%d of %d quasi-potential probes did not converge", failed, len(results))
    return values, failed


def _simpson_nd(values: NDArray[np.float64], axes: list[NDArray[np.float64]]) -> float:
    integral = values
    for axis in reversed(axes):
        integral = simpson(integral, x=axis, axis=-1)
    return float(integral)


def _quadrature(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    dist: InitialDistribution,
    eps: float,
    window: TimeWindow,
    options: SolverOptions,
    intervals: int,
    threads: int,
) -> PSafetyEstimate:
    if intervals < 4 or intervals % 4:
        raise ValueError(f"Quadrature intervals must be a positive multiple of 4, got {intervals}")
    std = np.sqrt(np.diag(dist.covariance))
    axes = [
        np.linspace(m - PRIOR_HALF_WIDTH * s, m + PRIOR_HALF_WIDTH * s, intervals + 1)
        for m, s in zip(dist.mean, std, strict=True)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    probes = np.stack([m.ravel() for m in mesh], axis=-1)
    log_values, failed = _log_weights(model, unsafe_set, dist, eps, probes, window, options, threads)
    values = np.exp(log_values).reshape(mesh[0].shape)

    fine = _simpson_nd(values, axes)
    coarse_slice = tuple(slice(None, None, 2) for _ in axes)
    coarse = _simpson_nd(values[coarse_slice], [a[::2] for a in axes])
    return PSafetyEstimate(
        estimate=float(np.clip(fine, 0.0, 1.0)),
        error=abs(fine - coarse),
        raw_estimate=fine,
        method="simpson",
        probes=len(probes),
        failed_probes=failed,
    )


def _importance(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    dist: InitialDistribution,
    eps: float,
    window: TimeWindow,
    options: SolverOptions,
    samples: int,
    seed: int,
    threads: int,
) -> PSafetyEstimate:
    map_solution = solve_map(model, unsafe_set, dist, eps, window, options)
    if not map_solution.success:
        raise RuntimeError(f"MAP solve for the proposal failed ({map_solution.error_code})")
    centre = map_solution.initial_state
    proposal = InitialDistribution(mean=centre, covariance=dist.covariance)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    probes = proposal.sample(rng, samples)

    log_target, failed = _log_weights(
        model, unsafe_set, dist, eps, probes, window, options, threads,
        guess=InitialGuess.from_solution(map_solution),
    )
    log_prior = np.array([dist.logpdf(y) for y in probes])
    log_ratio = log_prior - np.array([proposal.logpdf(y) for y in probes])
    g = np.exp(log_target - log_prior)
    weights = np.exp(log_ratio - np.max(log_ratio))
    total = float(np.sum(weights))
    estimate = float(np.sum(weights * g) / total)
    error = float(np.sqrt(np.sum(weights**2 * (g - estimate) ** 2)) / total)
    return PSafetyEstimate(
        estimate=float(np.clip(estimate, 0.0, 1.0)),
        error=error,
        raw_estimate=estimate,
        method="importance",
        probes=samples,
        failed_probes=failed,
    )


def weak_psafety(
    model: DynamicsModel,
    unsafe_set: UnsafeSet,
    dist: InitialDistribution,
    eps: float,
    window: TimeWindow,
    options: SolverOptions | None = None,
    *,
    intervals: int = 128,
    samples: int = 64,
    seed: int = 0,
    threads: int = 1,
) -> PSafetyEstimate:
    """Prior-averaged hitting probability with an error bar, clamped to [0, 1].

    Args:
        model: Dynamics of the system.
        unsafe_set: Level-set description of D.
        dist: Gaussian prior over the initial state.
        eps: Noise intensity.
        window: Hitting-time window passed to every quasi-potential solve.
        options: Solver settings for the probes.
        intervals: Simpson intervals per axis (multiple of 4), quadrature only.
        samples: Proposal draws, importance sampling only.
        seed: Seed for the proposal draws.
        threads: Worker threads for the probe solves.

    Returns:
        PSafetyEstimate naming the method used.

    Raises:
        RuntimeError: If the raw estimate falls outside [0, 1] by more than its error bar.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if dist.dimension != model.dimension:
        raise ValueError(f"Prior has dimension {dist.dimension}, model expects {model.dimension}")
    options = options or SolverOptions()

    if model.dimension <= QUADRATURE_MAX_DIMENSION:
        result = _quadrature(model, unsafe_set, dist, eps, window, options, intervals, threads)
    else:
        result = _importance(model, unsafe_set, dist, eps, window, options, samples, seed, threads)

    raw = result.raw_estimate
    overshoot = max(raw - 1.0, -raw, 0.0)
    if overshoot > result.error:
        raise RuntimeError(
            f"Weak p-safety estimate {raw:.6g} lies outside [0, 1] beyond its error bar {result.error:.3g}"
        )
    logger.info(
        "Weak p-safety (%s, %d probes): %.6g +/- %.2g", result.method, result.probes, result.estimate, result.error
    )
    return result
