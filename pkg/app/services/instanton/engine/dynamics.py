"""Deterministic and perturbed system models.

Two structures are supported:
- first-order: dX = b(X) dt + sqrt(eps) sigma dW, sigma n x n and invertible
- mechanical: positions eta and velocities nu with d eta = nu dt and
  d nu = b(eta) dt + sqrt(eps) sigma dW, sigma m x m acting on the velocity block only

Drift callables accept batched states shaped (..., n) so the Monte Carlo engine can
evaluate many paths at once; Jacobians are evaluated one state at a time.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from app.schemas.results import ModelKind

from .paths import Path, TimeGrid

logger = logging.getLogger(__name__)

VectorField = Callable[[NDArray[np.float64]], NDArray[np.float64]]
JacobianField = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def finite_difference_jacobian(fn: VectorField, x: NDArray[np.float64]) -> NDArray[np.float64]:
    """Central-difference Jacobian with step 1e-6 * (1 + |x|)."""
    x = np.asarray(x, dtype=float)
    step = 1e-6 * (1.0 + np.linalg.norm(x))
    columns = []
    for i in range(x.size):
        offset = np.zeros_like(x)
        offset[i] = step
        columns.append((np.asarray(fn(x + offset)) - np.asarray(fn(x - offset))) / (2.0 * step))
    return np.column_stack(columns) if columns else np.zeros((0, 0))


@dataclass(frozen=True, eq=False)
class DynamicsModel:
    """Immutable drift/diffusion description shared by solver, verifier and simulator."""

    kind: ModelKind
    dimension: int
    field_fn: VectorField
    sigma: NDArray[np.float64]
    field_jacobian_fn: JacobianField | None = None
    position_index: tuple[int, ...] = ()
    velocity_index: tuple[int, ...] = ()
    name: str = ""
    _pos: NDArray[np.intp] = field(init=False, repr=False, compare=False)
    _vel: NDArray[np.intp] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if callable(self.sigma):
            raise ValueError("Diffusion must be a constant matrix; state-dependent sigma is not supported")
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if sigma.shape[0] != sigma.shape[1]:
            raise ValueError(f"sigma must be square, got shape {sigma.shape}")
        if not np.all(np.isfinite(sigma)):
            raise ValueError("sigma must be finite")
        object.__setattr__(self, "sigma", sigma)

        if self.kind == ModelKind.FIRST_ORDER:
            if sigma.shape[0] != self.dimension:
                raise ValueError(
                    f"First-order model of dimension {self.dimension} needs an "
                    f"{self.dimension}x{self.dimension} sigma, got {sigma.shape}"
                )
            if np.linalg.matrix_rank(sigma) < self.dimension:
                raise ValueError("First-order models require an invertible sigma")
            object.__setattr__(self, "_pos", np.arange(0, dtype=np.intp))
            object.__setattr__(self, "_vel", np.arange(0, dtype=np.intp))
            return

        m = sigma.shape[0]
        position = self.position_index or tuple(range(m))
        velocity = self.velocity_index or tuple(range(m, 2 * m))
        if len(position) != m or len(velocity) != m:
            raise ValueError(f"Mechanical model needs {m} position and {m} velocity indices")
        if sorted(position + velocity) != list(range(self.dimension)):
            raise ValueError("Position and velocity indices must partition the state")
        object.__setattr__(self, "position_index", tuple(position))
        object.__setattr__(self, "velocity_index", tuple(velocity))
        object.__setattr__(self, "_pos", np.asarray(position, dtype=np.intp))
        object.__setattr__(self, "_vel", np.asarray(velocity, dtype=np.intp))

    @classmethod
    def first_order(
        cls,
        drift_fn: VectorField,
        sigma: NDArray[np.float64] | float,
        jacobian_fn: JacobianField | None = None,
        name: str = "",
    ) -> "DynamicsModel":
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        return cls(
            kind=ModelKind.FIRST_ORDER,
            dimension=sigma.shape[0],
            field_fn=drift_fn,
            sigma=sigma,
            field_jacobian_fn=jacobian_fn,
            name=name,
        )

    @classmethod
    def mechanical(
        cls,
        acceleration_fn: VectorField,
        sigma: NDArray[np.float64] | float,
        jacobian_fn: JacobianField | None = None,
        position_index: Sequence[int] = (),
        velocity_index: Sequence[int] = (),
        name: str = "",
    ) -> "DynamicsModel":
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        return cls(
            kind=ModelKind.MECHANICAL,
            dimension=2 * sigma.shape[0],
            field_fn=acceleration_fn,
            sigma=sigma,
            field_jacobian_fn=jacobian_fn,
            position_index=tuple(position_index),
            velocity_index=tuple(velocity_index),
            name=name,
        )

    @property
    def is_mechanical(self) -> bool:
        return self.kind == ModelKind.MECHANICAL

    @property
    def noise_dimension(self) -> int:
        """Dimension k of the deviation w (n first-order, m mechanical)."""
        return self.sigma.shape[0]

    @property
    def positions(self) -> NDArray[np.intp]:
        return self._pos

    @property
    def velocities(self) -> NDArray[np.intp]:
        return self._vel

    @cached_property
    def noise_covariance(self) -> NDArray[np.float64]:
        """a = sigma sigma^T."""
        return self.sigma @ self.sigma.T

    @cached_property
    def diffusion_matrix(self) -> NDArray[np.float64]:
        """Full-state noise input G (n x k); zero rows on the position block."""
        if not self.is_mechanical:
            return self.sigma
        g = np.zeros((self.dimension, self.noise_dimension))
        g[self._vel, :] = self.sigma
        return g

    def drift(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise ValueError(f"State has dimension {x.shape[-1]}, model expects {self.dimension}")
        if not self.is_mechanical:
            return np.asarray(self.field_fn(x), dtype=float)
        out = np.empty_like(x)
        out[..., self._pos] = x[..., self._vel]
        out[..., self._vel] = self.field_fn(x[..., self._pos])
        return out

    def drift_jacobian(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(f"State has shape {x.shape}, model expects ({self.dimension},)")
        if not self.is_mechanical:
            if self.field_jacobian_fn is not None:
                return np.atleast_2d(np.asarray(self.field_jacobian_fn(x), dtype=float))
            return finite_difference_jacobian(self.field_fn, x)

        eta = x[self._pos]
        if self.field_jacobian_fn is not None:
            block = np.atleast_2d(np.asarray(self.field_jacobian_fn(eta), dtype=float))
        else:
            block = finite_difference_jacobian(self.field_fn, eta)
        jac = np.zeros((self.dimension, self.dimension))
        jac[np.ix_(self._pos, self._vel)] = np.eye(self.noise_dimension)
        jac[np.ix_(self._vel, self._pos)] = block
        return jac

    def velocity_block(self, vectors: NDArray[np.float64]) -> NDArray[np.float64]:
        """Components of full-state vectors that the noise acts on."""
        if not self.is_mechanical:
            return vectors
        return np.asarray(vectors)[..., self._vel]


def drift(model: DynamicsModel, x: NDArray[np.float64]) -> NDArray[np.float64]:
    """b(x), or the stacked (nu, b(eta)) time-derivative for mechanical models."""
    return model.drift(x)


def rk4_step(
    rhs: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    x: NDArray[np.float64],
    h: float,
) -> NDArray[np.float64]:
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * h * k1)
    k3 = rhs(x + 0.5 * h * k2)
    k4 = rhs(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def flow_deterministic(
    model: DynamicsModel, x0: NDArray[np.float64], final_time: float, steps: int
) -> Path:
    """Integrate x' = b(x) with classical RK4 on a uniform grid of `steps` intervals."""
    if steps < 2:
        raise ValueError(f"At least 2 steps are required, got {steps}")
    grid = TimeGrid.uniform(final_time, steps)
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (model.dimension,):
        raise ValueError(f"Initial state has shape {x.shape}, model expects ({model.dimension},)")

    states = np.empty((steps + 1, model.dimension))
    states[0] = x
    h = final_time / steps
    for k in range(steps):
        x = rk4_step(model.drift, x, h)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"Deterministic flow diverged at t={grid.times[k + 1]:.6g}")
        states[k + 1] = x

    return Path(grid=grid, states=states, deviations=np.zeros((steps + 1, model.noise_dimension)))


def jacobian_check(model: DynamicsModel, probes: NDArray[np.float64]) -> float:
    """Max relative Frobenius error between the model Jacobian and central differences."""
    worst = 0.0
    for x in np.atleast_2d(probes):
        analytic = model.drift_jacobian(x)
        numeric = finite_difference_jacobian(model.drift, x)
        scale = max(np.linalg.norm(numeric), np.finfo(float).tiny)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / scale))
    logger.debug("Jacobian check for %s: max relative error %.3e", model.name or model.kind, worst)
    return worst
