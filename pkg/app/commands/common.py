"""Shared CLI options, run context and exit-code mapping."""

import functools
import logging
import time
import tomllib
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, ParamSpec, TypeVar

import typer
from pydantic import ValidationError

from app.config import configure_logging, get_settings
from app.schemas.report import RunReport
from app.schemas.scenario import ScenarioConfig, SolverConfig
from app.services.instanton.engine import ConvergenceError
from app.services.scenarios import Scenario, build_scenario, config_hash, load_config, resolve_scenario_path

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2
EXIT_INTERNAL = 3

ScenarioOption = Annotated[
    str, typer.Option("--scenario", "-s", help="Scenario TOML path or bundled scenario name")
]
SeedOption = Annotated[int | None, typer.Option("--seed", min=0, help="Random seed (default from settings)")]
ThreadsOption = Annotated[int | None, typer.Option("--threads", min=1, help="Worker threads")]
OutOption = Annotated[Path | None, typer.Option("--out", help="Output directory")]
TolOption = Annotated[
    float | None,
    typer.Option("--tol", help="Constraint tolerance for solves, residual tolerance for verification"),
]
NodesOption = Annotated[int | None, typer.Option("--nodes", min=2, help="Grid intervals N")]
DebugOption = Annotated[bool, typer.Option("--debug", help="Verbose logging")]

P = ParamSpec("P")
R = TypeVar("R")


class ConfigError(ValueError):
    """Scenario, settings or input files that cannot be used as given."""


def fail(code: int, message: str) -> typer.Exit:
    """Print a diagnostic line on stderr and build the matching exit."""
    typer.echo(f"error: {message}", err=True)
    return typer.Exit(code)


def handle_errors(command: Callable[P, R]) -> Callable[P, R]:
    """Map exceptions to exit codes: 1 config, 2 non-convergence, 3 anything else."""

    @functools.wraps(command)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> R:
        try:
            return command(*args, **kwargs)
        except typer.Exit:
            raise
        except ConfigError as exc:
            logger.debug("Configuration error", exc_info=True)
            raise fail(EXIT_CONFIG, str(exc)) from exc
        except ConvergenceError as exc:
            raise fail(EXIT_NOT_CONVERGED, str(exc)) from exc
        except Exception as exc:
            logger.exception("Command failed")
            raise fail(EXIT_INTERNAL, f"{type(exc).__name__}: {exc}") from exc

    return wrapper


@dataclass
class RunContext:
    """Everything a command needs from its options and the scenario file."""

    command: str
    config: ScenarioConfig
    scenario: Scenario
    seed: int
    threads: int
    out_dir: Path
    tolerance: float | None = None
    timings: dict[str, float] = field(default_factory=dict)

    def new_report(self) -> RunReport:
        return RunReport(
            command=self.command,
            scenario_name=self.scenario.name,
            config_hash=config_hash(self.config),
            seed=self.seed,
            reference=dict(self.scenario.reference),
        )

    @contextmanager
    def timed(self, stage: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[stage] = time.perf_counter() - start


def prepare(
    command: str,
    scenario: str,
    seed: int | None,
    threads: int | None,
    out: Path | None,
    tol: float | None,
    nodes: int | None,
    debug: bool,
) -> RunContext:
    """Load settings and the scenario, applying command-line overrides.

    Raises:
        ConfigError: If settings, the scenario file or the overrides are unusable.
    """
    try:
        settings = get_settings()
        configure_logging(debug or settings.DEBUG)
        path = resolve_scenario_path(scenario, settings.SCENARIO_DIR)
        config = load_config(path)

        solver_updates: dict[str, float | int] = {}
        if nodes is not None:
            solver_updates["nodes"] = nodes
        if tol is not None and command != "verify-pmp":
            solver_updates["constraint_tol"] = tol
        if solver_updates:
            solver = SolverConfig.model_validate(config.solver.model_dump() | solver_updates)
            config = config.model_copy(update={"solver": solver})

        threads = threads or settings.DEFAULT_THREADS
        built = build_scenario(config, threads=threads)
    except (tomllib.TOMLDecodeError, ValidationError, OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    logger.info("Command %s on scenario %s (%s)", command, built.name, path)
    return RunContext(
        command=command,
        config=config,
        scenario=built,
        seed=settings.DEFAULT_SEED if seed is None else seed,
        threads=threads,
        out_dir=out or Path(settings.OUTPUT_DIR),
        tolerance=tol,
    )
