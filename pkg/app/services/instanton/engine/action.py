"""Action functional, Gaussian initial-state cost and the MAP objective."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.linalg import solve_triangular

from .dynamics import DynamicsModel
from .paths import Path


@dataclass(frozen=True, eq=False)
class InitialDistribution:
    """Gaussian prior N(x0, Sigma) over initial states."""

    mean: NDArray[np.float64]
    covariance: NDArray[np.float64]

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        covariance = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if covariance.shape != (mean.size, mean.size):
            raise ValueError(
                f"Covariance shape {covariance.shape} does not match mean dimension {mean.size}"
            )
        if not np.allclose(covariance, covariance.T, rtol=1e-12, atol=0.0):
            raise ValueError("Covariance must be symmetric")
        try:
            np.linalg.cholesky(covariance)
        except np.linalg.LinAlgError as exc:
            raise ValueError("Covariance must be positive definite") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", covariance)

    @classmethod
    def diagonal(cls, mean: NDArray[np.float64], variances: NDArray[np.float64]) -> "InitialDistribution":
        return cls(mean=np.asarray(mean, dtype=float), covariance=np.diag(np.asarray(variances, dtype=float)))

    @property
    def dimension(self) -> int:
        return self.mean.size

    @cached_property
    def cholesky(self) -> NDArray[np.float64]:
        """Lower-triangular L with Sigma = L L^T."""
        return np.linalg.cholesky(self.covariance)

    @cached_property
    def log_normalizer(self) -> float:
        log_det = 2.0 * float(np.sum(np.log(np.diag(self.cholesky))))
        return -0.5 * (self.dimension * np.log(2.0 * np.pi) + log_det)

    def whiten(self, y: NDArray[np.float64]) -> NDArray[np.float64]:
        """xi = L^{-1} (y - x0)."""
        return solve_triangular(self.cholesky, np.asarray(y, dtype=float) - self.mean, lower=True)

    def unwhiten(self, xi: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.mean + self.cholesky @ np.asarray(xi, dtype=float)

    def cost(self, y: NDArray[np.float64]) -> float:
        xi = self.whiten(y)
        return 0.5 * float(xi @ xi)

    def cost_gradient(self, y: NDArray[np.float64]) -> NDArray[np.float64]:
        xi = self.whiten(y)
        return solve_triangular(self.cholesky.T, xi, lower=False)

    def logpdf(self, y: NDArray[np.float64]) -> float:
        return self.log_normalizer - self.cost(y)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> NDArray[np.float64]:
        if size is None:
            return self.unwhiten(rng.standard_normal(self.dimension))
        z = rng.standard_normal((size, self.dimension))
        return self.mean + z @ self.cholesky.T


def _require_deviations(path: Path) -> NDArray[np.float64]:
    if path.deviations is None:
        raise ValueError("Path carries no deviations; call recover_deviation first")
    return path.deviations


def action_functional(path: Path) -> float:
    """S_T = 1/2 int |w|^2 dt by trapezoidal quadrature on the path grid."""
    deviations = _require_deviations(path)
    if len(path.grid) < 2:
        return 0.0
    return 0.5 * float(trapezoid(np.sum(deviations**2, axis=1), path.times))


def cumulative_action(path: Path) -> NDArray[np.float64]:
    """Running action S_t at every grid node (S_0 = 0)."""
    deviations = _require_deviations(path)
    if len(path.grid) < 2:
        return np.zeros(1)
    return 0.5 * cumulative_trapezoid(np.sum(deviations**2, axis=1), path.times, initial=0.0)


def initial_cost(dist: InitialDistribution, y: NDArray[np.float64]) -> float:
    """S0(y) = 1/2 (y - x0)^T Sigma^{-1} (y - x0)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (dist.dimension,):
        raise ValueError(f"State has shape {y.shape}, prior expects ({dist.dimension},)")
    return dist.cost(y)


def initial_cost_gradient(dist: InitialDistribution, y: NDArray[np.float64]) -> NDArray[np.float64]:
    return dist.cost_gradient(np.atleast_1d(np.asarray(y, dtype=float)))


def map_objective(path: Path, dist: InitialDistribution, eps: float) -> float:
    """J = S_T(phi) + eps * S0(phi(0))."""
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    return action_functional(path) + eps * initial_cost(dist, path.initial_state)


def recover_deviation(path: Path, model: DynamicsModel) -> Path:
    """Fill w_k = sigma^{-1} (phi'_k - b(phi_k)) from the sampled states.

    phi' uses central differences inside the grid and one-sided differences at the
    ends. Mechanical models apply the formula to the velocity block only.
    """
    if len(path.grid) < 2:
        return path.with_deviations(np.zeros((1, model.noise_dimension)))
    rates = np.gradient(path.states, path.times, axis=0, edge_order=1)
    residual = model.velocity_block(rates - model.drift(path.states))
    if np.linalg.matrix_rank(model.sigma) < model.noise_dimension:
        raise ValueError("Deviation recovery needs an invertible sigma")
    deviations = np.linalg.solve(model.sigma, residual.T).T
    return path.with_deviations(deviations)
