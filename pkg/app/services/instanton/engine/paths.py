"""Time grids and sampled paths."""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing node times t_0 = 0 < ... < t_N = T."""

    times: NDArray[np.float64]

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("Time grid must be a non-empty 1-D array")
        if not np.all(np.isfinite(times)):
            raise ValueError("Time grid must be finite")
        if times.size > 1 and np.any(np.diff(times) <= 0.0):
            raise ValueError("Time grid must be strictly increasing")
        object.__setattr__(self, "times", times)

    @classmethod
    def uniform(cls, final_time: float, steps: int) -> "TimeGrid":
        if final_time <= 0.0:
            raise ValueError(f"Final time must be positive, got {final_time}")
        if steps < 1:
            raise ValueError(f"Step count must be at least 1, got {steps}")
        return cls(np.linspace(0.0, final_time, steps + 1))

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> int:
        return self.times.size - 1

    @property
    def spacing(self) -> NDArray[np.float64]:
        return np.diff(self.times)

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True, eq=False)
class Path:
    """States phi_k (and optionally deviations w_k) sampled on a grid."""

    grid: TimeGrid
    states: NDArray[np.float64]
    deviations: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        if states.shape[0] != len(self.grid):
            raise ValueError(
                f"State array has {states.shape[0]} rows for a grid of {len(self.grid)} nodes"
            )
        object.__setattr__(self, "states", states)
        if self.deviations is not None:
            deviations = np.atleast_2d(np.asarray(self.deviations, dtype=float))
            if deviations.shape[0] != len(self.grid):
                raise ValueError(
                    f"Deviation array has {deviations.shape[0]} rows "
                    f"for a grid of {len(self.grid)} nodes"
                )
            object.__setattr__(self, "deviations", deviations)

    @property
    def times(self) -> NDArray[np.float64]:
        return self.grid.times

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    @property
    def initial_state(self) -> NDArray[np.float64]:
        return self.states[0]

    @property
    def final_state(self) -> NDArray[np.float64]:
        return self.states[-1]

    def with_deviations(self, deviations: NDArray[np.float64]) -> "Path":
        return Path(grid=self.grid, states=self.states, deviations=deviations)

    def sample(self, times: NDArray[np.float64]) -> NDArray[np.float64]:
        """Linearly interpolate the states at the given times."""
        times = np.asarray(times, dtype=float)
        return np.column_stack(
            [np.interp(times, self.times, self.states[:, i]) for i in range(self.dimension)]
        )


@dataclass(frozen=True, eq=False)
class AdjointPath:
    """Costates lam_k on a grid; mechanical models stack (lam_eta, lam_nu) like the state."""

    grid: TimeGrid
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if values.shape[0] != len(self.grid):
            raise ValueError(
                f"Adjoint array has {values.shape[0]} rows for a grid of {len(self.grid)} nodes"
            )
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> NDArray[np.float64]:
        return self.grid.times

    @property
    def initial(self) -> NDArray[np.float64]:
        return self.values[0]

    @property
    def final(self) -> NDArray[np.float64]:
        return self.values[-1]

    def __len__(self) -> int:
        return len(self.grid)


def sup_norm_distance(path_a: Path, path_b: Path) -> float:
    """Sup-norm distance max_t |phi_a(t) - phi_b(t)| on the finer of the two grids.

    Both paths must span the same interval; the coarser one is linearly interpolated.
    """
    if path_a.dimension != path_b.dimension:
        raise ValueError("Paths have different state dimensions")
    if not np.isclose(path_a.grid.final_time, path_b.grid.final_time, rtol=1e-12, atol=0.0):
        raise ValueError(
            f"Paths span different intervals: {path_a.grid.final_time} "
            f"vs {path_b.grid.final_time}"
        )
    reference, other = (path_a, path_b) if len(path_a.grid) >= len(path_b.grid) else (path_b, path_a)
    difference = reference.states - other.sample(reference.times)
    return float(np.max(np.linalg.norm(difference, axis=1)))
