"""TOML scenario files: parse, validate, fingerprint and build."""

import hashlib
import logging
import tomllib
from pathlib import Path

import numpy as np

from app.schemas.scenario import (
    BrownianModelConfig,
    ConjunctionModelConfig,
    DoubleTargetModelConfig,
    LinearModelConfig,
    ScenarioConfig,
)
from app.schemas.solver import SolverOptions, TimeWindow

from .catalog import Scenario, brownian_1d, double_target, linear_1d, two_body_conjunction

logger = logging.getLogger(__name__)


def load_config(path: str | Path) -> ScenarioConfig:
    """Parse and validate a scenario file; unknown keys raise ValidationError."""
    with open(path, "rb") as handle:
        raw = tomllib.load(handle)
    return ScenarioConfig.model_validate(raw)


def config_hash(config: ScenarioConfig) -> str:
    """sha256 of the canonical JSON of the validated config."""
    return hashlib.sha256(config.model_dump_json().encode("utf-8")).hexdigest()


def resolve_scenario_path(name: str, scenario_dir: str | Path) -> Path:
    """Use `name` as a path when it exists, else look it up among the bundled files."""
    candidate = Path(name)
    if candidate.is_file():
        return candidate
    bundled = Path(scenario_dir) / (name if name.endswith(".toml") else f"{name}.toml")
    if bundled.is_file():
        return bundled
    raise FileNotFoundError(f"Scenario {name!r} not found as a file or in {scenario_dir}")


def bundled_scenarios(scenario_dir: str | Path) -> list[Path]:
    directory = Path(scenario_dir)
    if not directory.is_dir():
        return []
    return sorted(directory.glob("*.toml"))


def _solver_options(config: ScenarioConfig, threads: int) -> SolverOptions:
    solver = config.solver
    return SolverOptions(
        nodes=solver.nodes,
        gradient_tol=solver.gradient_tol,
        constraint_tol=solver.constraint_tol,
        residual_tol=solver.residual_tol,
        max_iterations=solver.max_iterations,
        max_outer_iterations=solver.max_outer_iterations,
        scan_points=solver.scan_points,
        n_starts=solver.n_starts,
        start_spread=solver.start_spread,
        threads=threads,
    )


def _scalar_prior(config: ScenarioConfig) -> tuple[float, float]:
    mean = config.prior.mean or [0.0]
    variance = config.prior.variance or [1.0]
    if len(mean) != 1 or len(variance) != 1:
        raise ValueError("One-dimensional scenarios take a single prior mean and variance")
    return mean[0], variance[0]


def build_scenario(config: ScenarioConfig, threads: int = 1) -> Scenario:
    """Scenario for a validated config; solver threads come from the caller."""
    window = TimeWindow(t_min=config.solver.t_min, t_max=config.solver.t_max)
    solver = _solver_options(config, threads)
    model = config.model
    common = {
        "window": window,
        "solver": solver,
        "mc": config.mc,
        "name": config.scenario.name,
        "description": config.scenario.description,
    }

    match model:
        case BrownianModelConfig():
            mean, variance = _scalar_prior(config)
            scenario = brownian_1d(
                config.unsafe_set.threshold, eps=model.eps, sigma=model.sigma,
                mean=mean, variance=variance, **common,
            )
        case LinearModelConfig():
            mean, variance = _scalar_prior(config)
            scenario = linear_1d(
                model.decay, config.unsafe_set.threshold, eps=model.eps, sigma=model.sigma,
                mean=mean, variance=variance, **common,
            )
        case DoubleTargetModelConfig():
            mean, variance = _scalar_prior(config)
            scenario = double_target(
                config.unsafe_set.threshold, eps=model.eps, sigma=model.sigma,
                mean=mean, variance=variance, **common,
            )
        case ConjunctionModelConfig():
            prior = config.prior
            for label, values in (("mean", prior.mean), ("variance", prior.variance)):
                if values is not None and len(values) != 12:
                    raise ValueError(f"Conjunction prior {label} needs 12 entries, got {len(values)}")
            scenario = two_body_conjunction(
                model,
                safety_distance=config.unsafe_set.threshold,
                position_std=prior.position_std,
                velocity_std=prior.velocity_std,
                mean=None if prior.mean is None else np.asarray(prior.mean),
                variance=None if prior.variance is None else np.asarray(prior.variance),
                **common,
            )
        case _:
            raise ValueError(f"Unsupported model family {model.family!r}")

    logger.info("Built scenario %s (%s, n=%d)", scenario.name, scenario.family.value, scenario.model.dimension)
    return scenario


def load_scenario(path: str | Path, threads: int = 1) -> tuple[ScenarioConfig, Scenario]:
    config = load_config(path)
    return config, build_scenario(config, threads)
