"""Result container shared by the solver and the maximum-principle checks."""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from app.schemas.results import SolveMode, SolveStatus
from app.schemas.solver import TimeWindow

from .paths import AdjointPath, Path


@dataclass(eq=False)
class VariationalSolution:
    """Outcome of an ML or MAP solve.

    Failures keep the last iterate in `path` when one exists, with `status`,
    `error_code` and `error_message` describing what went wrong.
    """

    mode: SolveMode
    status: SolveStatus
    window: TimeWindow
    path: Path | None = None
    adjoint: NDArray[np.float64] | None = None
    multiplier: float = 0.0
    action: float = math.nan
    initial_cost: float | None = None
    eps: float | None = None
    constraint_value: float = math.nan
    residuals: dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    error_code: str | None = None
    error_message: str | None = None

    @property
    def success(self) -> bool:
        return self.status in (SolveStatus.CONVERGED, SolveStatus.TRIVIAL)

    @property
    def final_time(self) -> float:
        return math.nan if self.path is None else self.path.grid.final_time

    @property
    def objective(self) -> float:
        if self.mode == SolveMode.MAP and self.initial_cost is not None and self.eps is not None:
            return self.action + self.eps * self.initial_cost
        return self.action

    @property
    def initial_state(self) -> NDArray[np.float64] | None:
        return None if self.path is None else self.path.initial_state

    @property
    def final_state(self) -> NDArray[np.float64] | None:
        return None if self.path is None else self.path.final_state

    @property
    def adjoint_path(self) -> AdjointPath | None:
        if self.path is None or self.adjoint is None:
            return None
        return AdjointPath(grid=self.path.grid, values=self.adjoint)

    @classmethod
    def failure(
        cls, mode: SolveMode, window: TimeWindow, code: str, message: str
    ) -> "VariationalSolution":
        return cls(
            mode=mode,
            status=SolveStatus.FAILED,
            window=window,
            error_code=code,
            error_message=message,
        )
