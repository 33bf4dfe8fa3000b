"""Crude, tube and importance-sampling Monte Carlo estimators.

Paths are simulated in fixed batches of consecutive indices; batch results are
concatenated in index order before any reduction, so estimates are bit-identical for
any thread count.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.typing import NDArray

from app.schemas.results import EstimateWithCI
from app.services.instanton.engine import (
    DynamicsModel,
    InitialDistribution,
    Path,
    UnsafeSet,
    VariationalSolution,
)

from .simulate import BatchOutcome, EulerMaruyama

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 1000
MIN_EFFECTIVE_SAMPLES = 10.0


def _run_batches(
    engine: EulerMaruyama,
    n: int,
    seed: int,
    start: NDArray[np.float64] | None,
    dist: InitialDistribution | None,
    batch_size: int,
    threads: int,
) -> list[BatchOutcome]:
    if n < 1:
        raise ValueError(f"Path count must be positive, got {n}")
    if batch_size < 1:
        raise ValueError(f"Batch size must be positive, got {batch_size}")

    def run(first: int) -> BatchOutcome:
        indices = range(first, min(first + batch_size, n))
        starts, noise = engine.draw(seed, indices, start=start, dist=dist)
        return engine.run(starts, noise)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, range(0, n, batch_size)))


def _binomial(successes: NDArray[np.bool_]) -> EstimateWithCI:
    n = successes.size
    p = float(np.count_nonzero(successes)) / n
    return EstimateWithCI(estimate=p, standard_error=math.sqrt(p * (1.0 - p) / n), samples=n)


def _resolve_start(
    model: DynamicsModel, start: NDArray[np.float64] | InitialDistribution
) -> tuple[NDArray[np.float64] | None, InitialDistribution | None]:
    if isinstance(start, InitialDistribution):
        if start.dimension != model.dimension:
            raise ValueError(f"Prior has dimension {start.dimension}, model expects {model.dimension}")
        return None, start
    y = np.atleast_1d(np.asarray(start, dtype=float))
    if y.shape != (model.dimension,):
        raise ValueError(f"Initial state has shape {y.shape}, model expects ({model.dimension},)")
    return y, None


def estimate_hitting_probability(
    model: DynamicsModel,
    start: NDArray[np.float64] | InitialDistribution,
    unsafe_set: UnsafeSet,
    eps: float,
    final_time: float,
    dt: float,
    n: int,
    seed: int,
    *,
    batch_size: int = DEFAULT_BATCH_SIZE,
    threads: int = 1,
) -> EstimateWithCI:
    """Crude Monte Carlo P(hit D by T) from a fixed state or averaged over a prior.

    Args:
        model: Dynamics to simulate.
        start: Fixed initial state, or a prior to draw one from per path.
        unsafe_set: Level-set description of D.
        eps: Noise intensity.
        final_time: Horizon T.
        dt: Requested Euler-Maruyama step; rounded so the steps divide T.
        n: Number of paths.
        seed: Root seed; path k always draws from stream (seed, k).
        batch_size: Paths per worker task.
        threads: Worker threads.

    Returns:
        Binomial estimate with its standard error.
    """
    y, dist = _resolve_start(model, start)
    engine = EulerMaruyama(model, eps, final_time, dt, unsafe_set)
    batches = _run_batches(engine, n, seed, y, dist, batch_size, threads)
    result = _binomial(np.concatenate([b.hit for b in batches]))
    logger.info(
        "Crude MC: P=%.6g +/- %.2g over %d paths (dt=%g)", result.estimate, result.standard_error, n, engine.dt
    )
    return result


def tube_probability(
    model: DynamicsModel,
    phi: Path,
    delta: float,
    eps: float,
    dt: float,
    n: int,
    seed: int,
    *,
    batch_size: int = DEFAULT_BATCH_SIZE,
    threads: int = 1,
) -> EstimateWithCI:
    """P(sup_t |X_t - phi(t)| <= delta) with X_0 = phi(0), on the simulation grid."""
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    engine = EulerMaruyama(model, eps, phi.grid.final_time, dt, reference=phi)
    batches = _run_batches(engine, n, seed, phi.initial_state, None, batch_size, threads)
    distances = np.concatenate([b.sup_distance for b in batches])
    result = _binomial(distances <= delta)
    logger.info("Tube MC (delta=%g): P=%.6g +/- %.2g", delta, result.estimate, result.standard_error)
    return result


def importance_sampling_hitting(
    model: DynamicsModel,
    tilt: VariationalSolution,
    unsafe_set: UnsafeSet,
    eps: float,
    final_time: float,
    dt: float,
    n: int,
    seed: int,
    *,
    start: NDArray[np.float64] | None = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
    threads: int = 1,
) -> EstimateWithCI:
    """Hitting probability under the drift b + G w*(t), reweighted to the original law.

    Paths start from `start` (default: the tilt's initial state). Each hitting path
    contributes its likelihood ratio accumulated up to the hitting time. The effective
    sample size is computed over those contributions.
    """
    if tilt.path is None:
        raise ValueError("Tilt solution carries no path")
    y, _ = _resolve_start(model, tilt.path.initial_state if start is None else start)
    engine = EulerMaruyama(model, eps, final_time, dt, unsafe_set, tilt=tilt.path)
    batches = _run_batches(engine, n, seed, y, None, batch_size, threads)
    hit = np.concatenate([b.hit for b in batches])
    log_weights = np.concatenate([b.log_weights for b in batches])
    contributions = np.where(hit, np.exp(log_weights), 0.0)

    estimate = float(np.mean(contributions))
    standard_error = float(np.std(contributions, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    total = float(np.sum(contributions))
    squares = float(np.sum(contributions**2))
    ess = total**2 / squares if squares > 0.0 else 0.0
    warning = None
    if ess < MIN_EFFECTIVE_SAMPLES:
        warning = f"Degenerate importance weights: effective sample size {ess:.1f} < {MIN_EFFECTIVE_SAMPLES:g}"
        logger.warning(warning)

    if estimate > 1.0:
        logger.warning("Importance-sampling estimate %.6g exceeds 1; clamping", estimate)
    result = EstimateWithCI(
        estimate=min(max(estimate, 0.0), 1.0),
        standard_error=standard_error,
        samples=n,
        effective_sample_size=ess,
        warning=warning,
    )
    logger.info(
        "IS MC: P=%.6g +/- %.2g, ESS=%.1f over %d paths", result.estimate, result.standard_error, ess, n
    )
    return result
