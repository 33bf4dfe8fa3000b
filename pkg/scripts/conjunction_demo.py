#!/usr/bin/env python3
"""Most likely collision path for the bundled two-body conjunction.

Builds the encounter geometry, reports the deterministic closest approach,
solves for the minimum-action velocity perturbations that bring the objects
within the safety distance (ML from the nominal state, MAP with the initial
state free under the prior) and writes both path tables.

Usage:
    uv run python scripts/conjunction_demo.py
    uv run python scripts/conjunction_demo.py --out out/conjunction --nodes 80
"""

import os
import sys
from pathlib import Path

import numpy as np
import typer
from numpy.typing import NDArray
from rich.console import Console
from rich.table import Table

# Add project root to path so we can import the engine
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.config import configure_logging
from app.services.instanton.engine import solve_map, solve_ml
from app.services.probability import ldt_log_probability
from app.services.reporting import export_solution
from app.services.scenarios import build_scenario, closest_approach, load_config

SCENARIO_FILE = Path(__file__).resolve().parents[1] / "scenarios" / "conjunction.toml"


def main(
    out: Path = typer.Option(Path("out/conjunction"), help="Output directory"),
    nodes: int | None = typer.Option(None, help="Override the grid size"),
    threads: int = typer.Option(1, help="Worker threads for the time scan"),
    debug: bool = typer.Option(False, help="Verbose logging"),
) -> None:
    configure_logging(debug)
    config = load_config(SCENARIO_FILE)
    if nodes is not None:
        config = config.model_copy(update={"solver": config.solver.model_copy(update={"nodes": nodes})})
    scenario = build_scenario(config, threads=threads)

    encounter_time, miss = closest_approach(scenario)
    console = Console()
    console.print(f"Deterministic closest approach: {miss:.1f} m at t = {encounter_time:.1f} s")

    solutions = {
        "ML": solve_ml(scenario.model, scenario.unsafe_set, scenario.start, scenario.window, scenario.solver),
        "MAP": solve_map(
            scenario.model, scenario.unsafe_set, scenario.dist, scenario.eps, scenario.window, scenario.solver
        ),
    }
    for label, solution in solutions.items():
        if solution.path is not None:
            export_solution(solution, out, f"path_{label.lower()}.csv")
    failed = [label for label, solution in solutions.items() if not solution.success]
    if failed:
        for label in failed:
            solution = solutions[label]
            typer.echo(f"{label} solve ended with {solution.status.value}: {solution.error_message}", err=True)
        raise typer.Exit(2)

    table = Table(title="Most likely conjunction")
    table.add_column("Quantity")
    for label in solutions:
        table.add_column(label, justify="right")

    def row(name: str, fn) -> None:
        table.add_row(name, *(fn(solution) for solution in solutions.values()))

    def separation(solution) -> NDArray[np.float64]:
        states = solution.path.states
        return np.linalg.norm(states[:, 0:3] - states[:, 6:9], axis=1)

    row("Hitting time (s)", lambda s: f"{s.final_time:.1f}")
    row("Final separation (m)", lambda s: f"{separation(s)[-1]:.3f}")
    row("Initial offset, object 1 (m)", lambda s: f"{np.linalg.norm(s.path.initial_state[:3] - scenario.start[:3]):.2f}")
    row("Action S_T", lambda s: f"{s.action:.6g}")
    row("Objective", lambda s: f"{s.objective:.6g}")
    row("log P (leading order)", lambda s: f"{ldt_log_probability(s.objective, scenario.eps):.6g}")
    row("Peak |w|", lambda s: f"{np.linalg.norm(s.path.deviations, axis=1).max():.4g}")
    console.print(table)
    console.print(f"Path tables in {out}")


if __name__ == "__main__":
    typer.run(main)
