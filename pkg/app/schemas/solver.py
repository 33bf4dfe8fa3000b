from pydantic import BaseModel, ConfigDict, Field, model_validator


class TimeWindow(BaseModel):
    """Bounds [t_min, t_max] on the hitting time; t_min == t_max fixes the final time."""

    model_config = ConfigDict(frozen=True)

    t_min: float = Field(..., ge=0.0)
    t_max: float = Field(..., gt=0.0)

    @model_validator(mode="after")
    def check_order(self) -> "TimeWindow":
        if self.t_min > self.t_max:
            raise ValueError(f"t_min ({self.t_min}) must not exceed t_max ({self.t_max})")
        return self

    @classmethod
    def fixed(cls, final_time: float) -> "TimeWindow":
        return cls(t_min=final_time, t_max=final_time)

    @property
    def is_fixed(self) -> bool:
        return self.t_min == self.t_max

    def contains(self, t: float, rtol: float = 1e-12) -> bool:
        slack = rtol * self.t_max
        return self.t_min - slack <= t <= self.t_max + slack

    def is_interior(self, t: float, rtol: float = 1e-6) -> bool:
        """Strictly inside the window, away from both bounds by rtol * t_max."""
        if self.is_fixed:
            return False
        slack = rtol * self.t_max
        return self.t_min + slack < t < self.t_max - slack


class SolverOptions(BaseModel):
    """Transcription and augmented Lagrangian settings."""

    model_config = ConfigDict(frozen=True)

    nodes: int = Field(200, ge=2, description="Number of grid intervals N")
    gradient_tol: float = Field(1e-6, gt=0.0)
    constraint_tol: float = Field(
        1e-8, gt=0.0, description="On f / (1 + |f(start)|) and on |alpha f| / (1 + alpha)"
    )
    residual_tol: float = Field(1e-6, gt=0.0, description="Maximum-principle residuals a converged solve must meet")
    max_iterations: int = Field(500, ge=1, description="Inner L-BFGS-B iterations")
    max_outer_iterations: int = Field(40, ge=1)
    scan_points: int = Field(8, ge=1)
    initial_penalty: float = Field(10.0, gt=0.0)
    penalty_growth: float = Field(10.0, gt=1.0)
    max_penalty: float = Field(1e12, gt=0.0)
    n_starts: int = Field(1, ge=1)
    start_spread: float = Field(0.5, ge=0.0)
    dedup_tol: float = Field(1e-3, gt=0.0)
    threads: int = Field(1, ge=1)
