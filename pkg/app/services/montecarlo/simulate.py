"""Euler-Maruyama simulation of dX = b(X) dt + sqrt(eps) G dW, vectorised over paths.

Hitting is detected by the sign of f at every grid time; a path freezes at its first
hit. Mechanical models receive noise through G, which is zero on the position block.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from app.schemas.results import SimulationResult
from app.services.instanton.engine import DynamicsModel, InitialDistribution, Path, UnsafeSet

from .streams import path_generator

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BatchOutcome:
    """Per-path results of one simulated batch."""

    hit: NDArray[np.bool_]
    hit_step: NDArray[np.int64]  # -1 when the path never hit
    final_states: NDArray[np.float64]
    log_weights: NDArray[np.float64]
    sup_distance: NDArray[np.float64] | None = None
    trajectories: NDArray[np.float64] | None = None


class EulerMaruyama:
    """Fixed-step simulator for one model, noise level and horizon.

    `tilt` adds G w(t) to the drift and accumulates the log likelihood ratio of the
    untilted law; `reference` tracks the running sup-norm distance to a path.
    """

    def __init__(
        self,
        model: DynamicsModel,
        eps: float,
        final_time: float,
        dt: float,
        unsafe_set: UnsafeSet | None = None,
        tilt: Path | None = None,
        reference: Path | None = None,
        store_trajectories: bool = False,
    ) -> None:
        if dt <= 0.0:
            raise ValueError(f"dt must be positive, got {dt}")
        if eps < 0.0:
            raise ValueError(f"eps must be non-negative, got {eps}")
        if final_time <= 0.0:
            raise ValueError(f"Final time must be positive, got {final_time}")
        if tilt is not None and eps == 0.0:
            raise ValueError("Importance sampling needs eps > 0")

        self.model = model
        self.eps = eps
        self.unsafe_set = unsafe_set
        self.steps = max(1, int(round(final_time / dt)))
        self.dt = final_time / self.steps
        self.times = np.linspace(0.0, final_time, self.steps + 1)
        self.store_trajectories = store_trajectories
        self._g = model.diffusion_matrix
        self.tilt = self._tilt_values(tilt) if tilt is not None else None
        self.reference = self._reference_states(reference) if reference is not None else None
        logger.debug("Euler-Maruyama engine: %d steps of %.3g, eps=%g", self.steps, self.dt, eps)

    def _tilt_values(self, tilt: Path) -> NDArray[np.float64]:
        """w(t_k) at the left end of every step, linear in between, zero past the tilt horizon."""
        if tilt.deviations is None:
            raise ValueError("Tilt path carries no deviations")
        left = self.times[:-1]
        values = np.column_stack(
            [np.interp(left, tilt.times, col, right=0.0) for col in tilt.deviations.T]
        )
        return values

    def _reference_states(self, reference: Path) -> NDArray[np.float64]:
        if not math.isclose(reference.grid.final_time, self.times[-1], rel_tol=1e-9):
            raise ValueError(
                f"Reference path spans [0, {reference.grid.final_time}], "
                f"simulation spans [0, {self.times[-1]}]"
            )
        return reference.sample(self.times)

    def draw(
        self,
        seed: int,
        indices: range,
        start: NDArray[np.float64] | None = None,
        dist: InitialDistribution | None = None,
    ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Initial states and standard normal increments for the given path indices.

        Each path draws its initial state (when `dist` is given) and then all of its
        increments from its own stream.
        """
        k = self.model.noise_dimension
        starts = np.empty((len(indices), self.model.dimension))
        noise = np.empty((len(indices), self.steps, k))
        for row, index in enumerate(indices):
            rng = path_generator(seed, index)
            starts[row] = dist.sample(rng) if dist is not None else start
            noise[row] = rng.standard_normal((self.steps, k))
        return starts, noise

    def run(self, starts: NDArray[np.float64], noise: NDArray[np.float64]) -> BatchOutcome:
        x = np.array(starts, dtype=float)
        batch = x.shape[0]
        active = np.ones(batch, dtype=bool)
        hit = np.zeros(batch, dtype=bool)
        hit_step = np.full(batch, -1, dtype=np.int64)
        log_weights = np.zeros(batch)
        sup_distance = None
        trajectories = None
        if self.reference is not None:
            sup_distance = np.linalg.norm(x - self.reference[0], axis=1)
        if self.store_trajectories:
            trajectories = np.empty((batch, self.steps + 1, x.shape[1]))
            trajectories[:, 0] = x

        if self.unsafe_set is not None:
            inside = np.atleast_1d(self.unsafe_set.level(x)) <= 0.0
            hit[inside] = True
            hit_step[inside] = 0
            active &= ~inside

        sqrt_eps = math.sqrt(self.eps)
        sqrt_dt = math.sqrt(self.dt)
        for k in range(self.steps):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                if trajectories is not None:
                    trajectories[:, k + 1 :] = x[:, None, :]
                break
            xa = x[idx]
            increments = sqrt_dt * noise[idx, k]
            rate = self.model.drift(xa)
            if self.tilt is not None:
                w = self.tilt[k]
                rate = rate + self._g @ w
                log_weights[idx] -= increments @ w / sqrt_eps + 0.5 * float(w @ w) * self.dt / self.eps
            xa = xa + rate * self.dt + sqrt_eps * increments @ self._g.T
            if not np.all(np.isfinite(xa)):
                raise FloatingPointError(f"Euler-Maruyama state became non-finite at t={self.times[k + 1]:.6g}")
            x[idx] = xa

            if sup_distance is not None:
                gap = np.linalg.norm(xa - self.reference[k + 1], axis=1)
                sup_distance[idx] = np.maximum(sup_distance[idx], gap)
            if self.unsafe_set is not None:
                newly = np.atleast_1d(self.unsafe_set.level(xa)) <= 0.0
                reached = idx[newly]
                hit[reached] = True
                hit_step[reached] = k + 1
                active[reached] = False
            if trajectories is not None:
                trajectories[:, k + 1] = x

        return BatchOutcome(
            hit=hit,
            hit_step=hit_step,
            final_states=x,
            log_weights=log_weights,
            sup_distance=sup_distance,
            trajectories=trajectories,
        )


def simulate_em(
    model: DynamicsModel,
    y0: NDArray[np.float64],
    eps: float,
    final_time: float,
    dt: float,
    seed: int,
    unsafe_set: UnsafeSet | None = None,
    store_trajectory: bool = False,
    index: int = 0,
) -> SimulationResult:
    """One path from y0 using the stream (seed, index)."""
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if y0.shape != (model.dimension,):
        raise ValueError(f"Initial state has shape {y0.shape}, model expects ({model.dimension},)")
    engine = EulerMaruyama(model, eps, final_time, dt, unsafe_set, store_trajectories=store_trajectory)
    starts, noise = engine.draw(seed, range(index, index + 1), start=y0)
    outcome = engine.run(starts, noise)
    hit = bool(outcome.hit[0])
    return SimulationResult(
        terminal_state=outcome.final_states[0].tolist(),
        hit=hit,
        hitting_time=float(engine.times[outcome.hit_step[0]]) if hit else None,
        trajectory=outcome.trajectories[0].tolist() if store_trajectory else None,
    )
