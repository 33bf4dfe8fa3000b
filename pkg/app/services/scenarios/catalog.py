"""Ready-made problem bundles."""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from app.schemas.scenario import ConjunctionModelConfig, MonteCarloConfig, ScenarioFamily
from app.schemas.solver import SolverOptions, TimeWindow
from app.services.instanton.engine import (
    DynamicsModel,
    InitialDistribution,
    UnsafeSet,
    outside_band,
    separation_below,
    upper_half_line,
)

from . import analytic
from .conjunction import (
    POSITION_INDEX,
    VELOCITY_INDEX,
    circular_velocity,
    closest_approach_of,
    encounter_velocity,
    two_body_acceleration,
    two_body_acceleration_jacobian,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Scenario:
    """Model, unsafe set, prior, noise level and run defaults for one problem."""

    name: str
    family: ScenarioFamily
    model: DynamicsModel
    unsafe_set: UnsafeSet
    dist: InitialDistribution
    eps: float
    window: TimeWindow
    solver: SolverOptions = field(default_factory=SolverOptions)
    mc: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    description: str = ""
    reference: dict[str, float] = field(default_factory=dict)
    gm: float | None = None

    def __post_init__(self) -> None:
        if self.dist.dimension != self.model.dimension:
            raise ValueError(
                f"Prior dimension {self.dist.dimension} does not match model dimension {self.model.dimension}"
            )
        if max(self.unsafe_set.components) >= self.model.dimension:
            raise ValueError("Unsafe set reads components outside the model state")
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @property
    def start(self) -> NDArray[np.float64]:
        """Fixed initial state for ML solves: the prior mean."""
        return self.dist.mean

    @property
    def horizon(self) -> float:
        return self.mc.horizon or self.window.t_max


def _one_dimensional_prior(mean: float, variance: float) -> InitialDistribution:
    return InitialDistribution.diagonal([mean], [variance])


def _zero_drift(x: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.zeros_like(x)


def _zero_jacobian(x: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.zeros((1, 1))


def brownian_1d(
    threshold: float = 1.0,
    window: TimeWindow | None = None,
    eps: float = 0.1,
    sigma: float = 1.0,
    mean: float = 0.0,
    variance: float = 1.0,
    solver: SolverOptions | None = None,
    mc: MonteCarloConfig | None = None,
    name: str = "brownian_1d",
    description: str = "",
) -> Scenario:
    """dX = sqrt(eps) sigma dW with D = {x >= L}."""
    window = window or TimeWindow.fixed(1.0)
    horizon = window.t_max
    effective_time = sigma**2 * horizon
    y_star, j_star = analytic.brownian_map(threshold, effective_time, eps, mean, variance)
    reference = {
        "quasipotential": analytic.brownian_quasipotential(mean, threshold, horizon, sigma),
        "map_initial_state": y_star,
        "map_objective": j_star,
        "hitting_probability": analytic.reflection_hitting_probability(mean, threshold, horizon, eps, sigma),
        "weak_psafety": analytic.brownian_weak_psafety(threshold, effective_time, eps, mean, variance),
    }
    return Scenario(
        name=name,
        family=ScenarioFamily.BROWNIAN_1D,
        model=DynamicsModel.first_order(_zero_drift, sigma, _zero_jacobian, name="brownian"),
        unsafe_set=upper_half_line(threshold),
        dist=_one_dimensional_prior(mean, variance),
        eps=eps,
        window=window,
        solver=solver or SolverOptions(),
        mc=mc or MonteCarloConfig(),
        description=description,
        reference=reference,
    )


def linear_1d(
    decay: float = 1.0,
    threshold: float = 1.0,
    window: TimeWindow | None = None,
    eps: float = 0.1,
    sigma: float = 1.0,
    mean: float = 0.0,
    variance: float = 1.0,
    solver: SolverOptions | None = None,
    mc: MonteCarloConfig | None = None,
    name: str = "linear_1d",
    description: str = "",
) -> Scenario:
    """Ornstein-Uhlenbeck drift b(x) = -a x with D = {x >= L}."""
    if decay < 0.0:
        raise ValueError(f"Decay rate must be non-negative, got {decay}")
    window = window or TimeWindow.fixed(1.0)

    def drift_fn(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return -decay * x

    def jacobian_fn(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.array([[-decay]])

    reference = {
        "quasipotential": analytic.ou_quasipotential(mean, decay, threshold, window.t_max, sigma),
    }
    return Scenario(
        name=name,
        family=ScenarioFamily.LINEAR_1D,
        model=DynamicsModel.first_order(drift_fn, sigma, jacobian_fn, name="ornstein_uhlenbeck"),
        unsafe_set=upper_half_line(threshold),
        dist=_one_dimensional_prior(mean, variance),
        eps=eps,
        window=window,
        solver=solver or SolverOptions(),
        mc=mc or MonteCarloConfig(),
        description=description,
        reference=reference,
    )


def double_target(
    threshold: float = 1.0,
    window: TimeWindow | None = None,
    eps: float = 0.1,
    sigma: float = 1.0,
    mean: float = 0.0,
    variance: float = 1.0,
    solver: SolverOptions | None = None,
    mc: MonteCarloConfig | None = None,
    name: str = "double_target",
    description: str = "",
) -> Scenario:
    """Zero drift with D = {|x| >= L}: two mirror-image most likely paths from 0."""
    window = window or TimeWindow.fixed(1.0)
    gap = max(threshold - abs(mean), 0.0)
    reference = {"quasipotential": gap**2 / (2.0 * sigma**2 * window.t_max)}
    return Scenario(
        name=name,
        family=ScenarioFamily.DOUBLE_TARGET,
        model=DynamicsModel.first_order(_zero_drift, sigma, _zero_jacobian, name="brownian"),
        unsafe_set=outside_band(threshold),
        dist=_one_dimensional_prior(mean, variance),
        eps=eps,
        window=window,
        solver=solver or SolverOptions(),
        mc=mc or MonteCarloConfig(),
        description=description,
        reference=reference,
    )


def two_body_conjunction(
    config: ConjunctionModelConfig | None = None,
    safety_distance: float = 50.0,
    window: TimeWindow | None = None,
    position_std: float = 100.0,
    velocity_std: float = 0.1,
    mean: NDArray[np.float64] | None = None,
    variance: NDArray[np.float64] | None = None,
    solver: SolverOptions | None = None,
    mc: MonteCarloConfig | None = None,
    name: str = "two_body_conjunction",
    description: str = "",
) -> Scenario:
    """Two objects under point-mass gravity with isotropic velocity noise on each."""
    config = config or ConjunctionModelConfig()
    window = window or TimeWindow(t_min=3600.0, t_max=5400.0)
    gm = config.gm
    r1, r2 = np.asarray(config.r1), np.asarray(config.r2)
    v1 = np.asarray(config.v1) if config.v1 is not None else circular_velocity(r1, gm)
    if config.v2 is not None:
        v2 = np.asarray(config.v2)
    else:
        v2 = encounter_velocity(
            r1, v1, r2, gm, config.encounter_time, config.miss_distance, window.t_min, window.t_max
        )

    state = np.concatenate([r1, v1, r2, v2]) if mean is None else np.asarray(mean, dtype=float)
    if variance is None:
        block = [position_std**2] * 3 + [velocity_std**2] * 3
        variance = np.array(block * 2)

    model = DynamicsModel.mechanical(
        lambda positions: two_body_acceleration(positions, gm),
        config.sigma * np.eye(6),
        lambda positions: two_body_acceleration_jacobian(positions, gm),
        position_index=POSITION_INDEX,
        velocity_index=VELOCITY_INDEX,
        name="two_body",
    )
    return Scenario(
        name=name,
        family=ScenarioFamily.TWO_BODY_CONJUNCTION,
        model=model,
        unsafe_set=separation_below(safety_distance**2, (0, 1, 2), (6, 7, 8)),
        dist=InitialDistribution.diagonal(state, variance),
        eps=config.eps,
        window=window,
        solver=solver or SolverOptions(),
        mc=mc or MonteCarloConfig(dt=1.0, horizon=window.t_max),
        description=description,
        gm=gm,
    )


def closest_approach(scenario: Scenario) -> tuple[float, float]:
    """Time and distance of the deterministic closest approach inside the window."""
    if scenario.family != ScenarioFamily.TWO_BODY_CONJUNCTION or scenario.gm is None:
        raise ValueError(f"Scenario {scenario.name} is not a conjunction")
    return closest_approach_of(scenario.start, scenario.gm, scenario.window.t_min, scenario.window.t_max)
