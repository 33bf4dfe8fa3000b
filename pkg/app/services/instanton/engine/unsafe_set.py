"""Unsafe sets D = {z : f(z) <= 0} given by a smooth level function."""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .dynamics import finite_difference_jacobian

logger = logging.getLogger(__name__)

LevelFn = Callable[[NDArray[np.float64]], NDArray[np.float64] | float]
GradientFn = Callable[[NDArray[np.float64]], NDArray[np.float64]]


@dataclass(frozen=True, eq=False)
class UnsafeSet:
    """Level function f (reading only `components` of the state) and its gradient.

    `level_fn` must accept batches shaped (..., len(components)).
    """

    level_fn: LevelFn
    gradient_fn: GradientFn
    components: tuple[int, ...]
    margin: float = 0.0
    name: str = ""

    def _select(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(x, dtype=float)[..., list(self.components)]

    def level(self, x: NDArray[np.float64]) -> NDArray[np.float64] | float:
        value = self.level_fn(self._select(x))
        return float(value) if np.ndim(value) == 0 else np.asarray(value, dtype=float)

    def gradient(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        x = np.asarray(x, dtype=float)
        grad = np.zeros_like(x)
        grad[list(self.components)] = self.gradient_fn(self._select(x))
        return grad

    def contains(self, x: NDArray[np.float64]) -> bool:
        return bool(self.level(x) <= 0.0)

    def project_to_boundary(
        self, y: NDArray[np.float64], max_iterations: int = 50
    ) -> NDArray[np.float64] | None:
        """Newton projection along grad f onto f = 0; None when the gradient vanishes."""
        z = np.asarray(y, dtype=float).copy()
        for _ in range(max_iterations):
            value = self.level(z)
            grad = self.gradient(z)
            norm_sq = float(grad @ grad)
            if norm_sq < 1e-24:
                return None
            if abs(value) <= 1e-12 * (1.0 + abs(self.margin)):
                return z
            z = z - value * grad / norm_sq
        return z

    def gradient_check(self, probes: NDArray[np.float64]) -> float:
        """Max relative error between gradient_fn and central differences."""
        worst = 0.0
        for x in np.atleast_2d(probes):
            numeric = finite_difference_jacobian(lambda z: np.atleast_1d(self.level(z)), x)[0]
            analytic = self.gradient(x)
            scale = max(np.linalg.norm(numeric), np.finfo(float).tiny)
            worst = max(worst, float(np.linalg.norm(analytic - numeric) / scale))
        return worst


def upper_half_line(threshold: float, component: int = 0) -> UnsafeSet:
    """D = {x_i >= L}, f = L - x_i."""
    return UnsafeSet(
        level_fn=lambda z: threshold - z[..., 0],
        gradient_fn=lambda z: np.array([-1.0]),
        components=(component,),
        name=f"x[{component}] >= {threshold:g}",
    )


def outside_band(threshold: float, component: int = 0) -> UnsafeSet:
    """D = {|x_i| >= L}, written smoothly as f = L^2 - x_i^2."""
    return UnsafeSet(
        level_fn=lambda z: threshold**2 - z[..., 0] ** 2,
        gradient_fn=lambda z: np.array([-2.0 * z[0]]),
        components=(component,),
        name=f"|x[{component}]| >= {threshold:g}",
    )


def separation_below(
    margin: float, first: Sequence[int], second: Sequence[int]
) -> UnsafeSet:
    """Collision set |eta_1 - eta_2|^2 - gamma <= 0 over two position blocks."""
    first, second = tuple(first), tuple(second)
    if len(first) != len(second):
        raise ValueError("Position blocks must have equal length")
    m = len(first)

    def level_fn(z: NDArray[np.float64]) -> NDArray[np.float64]:
        delta = z[..., :m] - z[..., m:]
        return np.sum(delta**2, axis=-1) - margin

    def gradient_fn(z: NDArray[np.float64]) -> NDArray[np.float64]:
        delta = z[:m] - z[m:]
        return np.concatenate([2.0 * delta, -2.0 * delta])

    return UnsafeSet(
        level_fn=level_fn,
        gradient_fn=gradient_fn,
        components=first + second,
        margin=margin,
        name=f"separation^2 <= {margin:g}",
    )
