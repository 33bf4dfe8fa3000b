"""Scenario configuration schemas (TOML sections).

Every section forbids unknown keys so a typo fails the load instead of
silently falling back to a default.
"""

from enum import Enum
from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

EARTH_GM = 3.986004418e14  # m^3/s^2


class ScenarioFamily(str, Enum):
    BROWNIAN_1D = "brownian_1d"
    LINEAR_1D = "linear_1d"
    DOUBLE_TARGET = "double_target"
    TWO_BODY_CONJUNCTION = "two_body_conjunction"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScenarioSection(StrictModel):
    name: str
    description: str = ""


# [model] variants, discriminated by family
class BrownianModelConfig(StrictModel):
    family: Literal["brownian_1d"] = "brownian_1d"
    eps: float = Field(0.1, gt=0.0)
    sigma: float = Field(1.0, gt=0.0)


class LinearModelConfig(StrictModel):
    family: Literal["linear_1d"] = "linear_1d"
    eps: float = Field(0.1, gt=0.0)
    sigma: float = Field(1.0, gt=0.0)
    decay: float = Field(1.0, ge=0.0, description="a in b(x) = -a x")


class DoubleTargetModelConfig(StrictModel):
    family: Literal["double_target"] = "double_target"
    eps: float = Field(0.1, gt=0.0)
    sigma: float = Field(1.0, gt=0.0)


class ConjunctionModelConfig(StrictModel):
    family: Literal["two_body_conjunction"] = "two_body_conjunction"
    eps: float = Field(1e-3, gt=0.0)
    sigma: float = Field(1e-4, gt=0.0, description="m/s per sqrt(s), isotropic per object")
    gm: float = Field(EARTH_GM, gt=0.0)
    r1: tuple[float, float, float] = (-3.7179e6, 6.1141e6, 1.4944e4)
    r2: tuple[float, float, float] = (-3.7129e6, 6.1141e6, 1.4944e4)
    v1: tuple[float, float, float] | None = Field(
        None, description="Object 1 velocity; circular prograde when omitted"
    )
    v2: tuple[float, float, float] | None = Field(
        None, description="Object 2 velocity; constructed for the requested miss when omitted"
    )
    encounter_time: float = Field(4500.0, gt=0.0)
    miss_distance: float = Field(7000.0, gt=0.0)


ModelConfig = Annotated[
    BrownianModelConfig | LinearModelConfig | DoubleTargetModelConfig | ConjunctionModelConfig,
    Field(discriminator="family"),
]


class UnsafeSetConfig(StrictModel):
    threshold: float = Field(
        1.0, description="Level L for 1-D families, safety distance (m) for the conjunction"
    )


class PriorConfig(StrictModel):
    mean: list[float] | None = None
    variance: list[float] | None = Field(
        None, description="Diagonal of the covariance; per-component"
    )
    position_std: float = Field(100.0, gt=0.0, description="Conjunction only (m)")
    velocity_std: float = Field(0.1, gt=0.0, description="Conjunction only (m/s)")


class SolverConfig(StrictModel):
    t_min: float = Field(1.0, ge=0.0)
    t_max: float = Field(1.0, gt=0.0)
    nodes: int = Field(200, ge=2)
    gradient_tol: float = Field(1e-6, gt=0.0)
    constraint_tol: float = Field(1e-8, gt=0.0)
    residual_tol: float = Field(1e-6, gt=0.0)
    max_iterations: int = Field(500, ge=1)
    max_outer_iterations: int = Field(40, ge=1)
    scan_points: int = Field(8, ge=1)
    n_starts: int = Field(1, ge=1)
    start_spread: float = Field(0.5, ge=0.0)

    @model_validator(mode="after")
    def check_window(self) -> "SolverConfig":
        if self.t_min > self.t_max:
            raise ValueError("t_min must not exceed t_max")
        return self


class MonteCarloConfig(StrictModel):
    dt: float = Field(1e-3, gt=0.0)
    paths: int = Field(100_000, ge=1)
    horizon: float | None = Field(None, gt=0.0, description="Defaults to the solver t_max")
    tube_delta: float = Field(0.5, gt=0.0)
    quadrature_intervals: int = Field(128, ge=2)
    importance_samples: int = Field(64, ge=2)
    probe_nodes: int = Field(40, ge=2)


class ScenarioConfig(StrictModel):
    """Top-level TOML document."""

    scenario: ScenarioSection
    model: ModelConfig
    unsafe_set: UnsafeSetConfig = UnsafeSetConfig()
    prior: PriorConfig = PriorConfig()
    solver: SolverConfig = SolverConfig()
    mc: MonteCarloConfig = MonteCarloConfig()
