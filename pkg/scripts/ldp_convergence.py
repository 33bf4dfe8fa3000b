#!/usr/bin/env python3
"""Small-noise convergence of eps log P towards -Q for the Brownian crossing.

Solves the most likely path once (Q does not depend on eps), then for a
decreasing sequence of noise levels compares the importance-sampling estimate
of P(hit x >= 1 by T = 1) with exp(-Q/eps) and the discretely monitored
reflection formula.

Usage:
    uv run python scripts/ldp_convergence.py
    uv run python scripts/ldp_convergence.py --paths 50000 --dt 1e-3
"""

import math
import os
import sys

import typer
from rich.console import Console
from rich.table import Table

# Add project root to path so we can import the engine
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.config import configure_logging
from app.services.instanton.engine import solve_ml
from app.services.montecarlo import importance_sampling_hitting
from app.services.probability import ldt_hitting_probability
from app.services.scenarios import brownian_1d
from app.services.scenarios.analytic import discrete_hitting_probability

NOISE_LEVELS = (0.25, 0.1, 0.05, 0.025, 0.0125)


def main(
    paths: int = typer.Option(20_000, help="Paths per noise level"),
    dt: float = typer.Option(1e-2, help="Euler-Maruyama step"),
    seed: int = typer.Option(0, help="Random seed"),
    debug: bool = typer.Option(False, help="Verbose logging"),
) -> None:
    configure_logging(debug)
    scenario = brownian_1d()
    solution = solve_ml(scenario.model, scenario.unsafe_set, scenario.start, scenario.window, scenario.solver)
    if not solution.success:
        typer.echo(f"ML solve failed: {solution.error_message}", err=True)
        raise typer.Exit(2)
    q = solution.action

    table = Table(title=f"Brownian crossing, Q = {q:.6f}")
    for column in ("eps", "IS estimate", "rel. error", "exp(-Q/eps)", "reference", "eps log P"):
        table.add_column(column, justify="right")
    for eps in NOISE_LEVELS:
        estimate = importance_sampling_hitting(
            scenario.model, solution, scenario.unsafe_set, eps, scenario.horizon, dt, paths, seed
        )
        reference = discrete_hitting_probability(0.0, 1.0, scenario.horizon, eps, dt)
        log_p = eps * math.log(estimate.estimate) if estimate.estimate > 0.0 else -math.inf
        table.add_row(
            f"{eps:g}",
            f"{estimate.estimate:.4e}",
            f"{estimate.standard_error / max(estimate.estimate, 1e-300):.2%}",
            f"{ldt_hitting_probability(q, eps):.4e}",
            f"{reference:.4e}",
            f"{log_p:.4f}",
        )
    Console().print(table)


if __name__ == "__main__":
    typer.run(main)
