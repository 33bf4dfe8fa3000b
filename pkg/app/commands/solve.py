"""Variational commands: most likely and MAP paths, and their verification."""

import logging
from pathlib import Path
from typing import Annotated

import typer
from pydantic import ValidationError

from app.schemas.report import SolutionSummary
from app.schemas.results import SolveMode
from app.services.instanton.engine import VariationalSolution, multi_start, solve_map, solve_ml, verify_solution
from app.services.probability import ldt_hitting_probability, ldt_log_probability
from app.services.reporting import (
    export_adjoint,
    export_solution,
    load_report,
    restore_solution,
    write_report,
)
from app.services.scenarios import config_hash

from .common import (
    EXIT_NOT_CONVERGED,
    ConfigError,
    DebugOption,
    NodesOption,
    OutOption,
    RunContext,
    ScenarioOption,
    SeedOption,
    ThreadsOption,
    TolOption,
    fail,
    handle_errors,
    prepare,
)

logger = logging.getLogger(__name__)

DEFAULT_RESIDUAL_TOL = 1e-6


def _solve(ctx: RunContext, mode: SolveMode) -> list[VariationalSolution]:
    """Single solve, or multi-start when the scenario asks for several starts."""
    sc = ctx.scenario
    if sc.solver.n_starts > 1:
        if mode == SolveMode.ML:
            return multi_start(sc.model, sc.unsafe_set, sc.window, sc.solver, y=sc.start, seed=ctx.seed)
        return multi_start(
            sc.model, sc.unsafe_set, sc.window, sc.solver, dist=sc.dist, eps=sc.eps, seed=ctx.seed
        )
    if mode == SolveMode.ML:
        return [solve_ml(sc.model, sc.unsafe_set, sc.start, sc.window, sc.solver)]
    return [solve_map(sc.model, sc.unsafe_set, sc.dist, sc.eps, sc.window, sc.solver)]


def _export(ctx: RunContext, solutions: list[VariationalSolution], stem: str):
    summaries = []
    for index, solution in enumerate(solutions):
        if solution.path is None:
            continue
        filename = f"{stem}.csv" if index == 0 else f"{stem}_{index}.csv"
        summaries.append(export_solution(solution, ctx.out_dir, filename))
    return summaries


def _finish(ctx: RunContext, solution: VariationalSolution) -> None:
    if solution.success:
        typer.echo(
            f"{solution.mode.value.upper()} {solution.status.value}: objective={solution.objective:.10g} "
            f"T={solution.final_time:.6g} alpha={solution.multiplier:.6g} -> {ctx.out_dir}"
        )
        return
    raise fail(
        EXIT_NOT_CONVERGED,
        f"{solution.mode.value.upper()} solve ended with {solution.status.value} "
        f"({solution.error_code}): {solution.error_message}",
    )


@handle_errors
def solve_ml_command(
    scenario: ScenarioOption,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    tol: TolOption = None,
    nodes: NodesOption = None,
    debug: DebugOption = False,
) -> None:
    """Most likely path from the prior mean into the unsafe set.

    Writes report.json (with Q and the exp(-Q/eps) estimate) and path_ml.csv.
    Exits with code 2 when the solve does not converge.
    """
    ctx = prepare("solve-ml", scenario, seed, threads, out, tol, nodes, debug)
    with ctx.timed("solve"):
        solutions = _solve(ctx, SolveMode.ML)
    best = solutions[0]

    report = ctx.new_report()
    report.solutions = _export(ctx, solutions, "path_ml")
    if best.success:
        log_p = ldt_log_probability(best.action, ctx.scenario.eps)
        report.ldp = {
            "quasipotential": best.action,
            "log_probability": log_p,
            "probability": ldt_hitting_probability(best.action, ctx.scenario.eps),
        }
    report.timings = ctx.timings
    write_report(report, ctx.out_dir)
    _finish(ctx, best)


@handle_errors
def solve_map_command(
    scenario: ScenarioOption,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    tol: TolOption = None,
    nodes: NodesOption = None,
    debug: DebugOption = False,
) -> None:
    """MAP path with a free initial state weighted by the prior.

    Writes report.json (with y*, J* and the maximum-principle residuals), path_map.csv
    and adjoint.csv.
    """
    ctx = prepare("solve-map", scenario, seed, threads, out, tol, nodes, debug)
    sc = ctx.scenario
    with ctx.timed("solve"):
        solutions = _solve(ctx, SolveMode.MAP)
    best = solutions[0]

    report = ctx.new_report()
    report.solutions = _export(ctx, solutions, "path_map")
    if best.success:
        report.ldp = {"objective": best.objective, "log_posterior_peak": -best.objective / sc.eps}
        with ctx.timed("verify"):
            report.residuals = verify_solution(sc.model, sc.unsafe_set, best, sc.dist, DEFAULT_RESIDUAL_TOL)
        export_adjoint(sc.model, best, ctx.out_dir)
    report.timings = ctx.timings
    write_report(report, ctx.out_dir)
    _finish(ctx, best)


def _restore(ctx: RunContext, from_dir: Path) -> tuple[SolutionSummary, VariationalSolution]:
    """The MAP solution (else the first one) of a previous run in from_dir."""
    try:
        previous = load_report(from_dir)
    except (ValidationError, OSError) as exc:
        raise ConfigError(f"Cannot read the report in {from_dir}: {exc}") from exc
    if previous.config_hash != config_hash(ctx.config):
        raise ConfigError(f"{from_dir} was produced from a different scenario configuration")
    if not previous.solutions:
        raise ConfigError(f"{from_dir} holds no solutions to verify")
    summary = next((s for s in previous.solutions if s.mode == SolveMode.MAP), previous.solutions[0])
    try:
        return summary, restore_solution(summary, from_dir)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


@handle_errors
def verify_pmp_command(
    scenario: ScenarioOption,
    from_dir: Annotated[
        Path | None, typer.Option("--from", help="Directory of a previous solve-map run to re-verify")
    ] = None,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    tol: TolOption = None,
    nodes: NodesOption = None,
    debug: DebugOption = False,
) -> None:
    """Check a MAP solution against the maximum principle.

    Without --from the MAP problem is solved first. Writes report.json and adjoint.csv
    (the solver costate next to the re-integrated one). Exits with code 2 when any
    applicable residual exceeds its tolerance.
    """
    ctx = prepare("verify-pmp", scenario, seed, threads, out, tol, nodes, debug)
    sc = ctx.scenario
    report = ctx.new_report()

    if from_dir is not None:
        summary, solution = _restore(ctx, from_dir)
        report.solutions = [summary]
    else:
        with ctx.timed("solve"):
            solution = solve_map(sc.model, sc.unsafe_set, sc.dist, sc.eps, sc.window, sc.solver)
        if not solution.success:
            _finish(ctx, solution)
        report.solutions = _export(ctx, [solution], "path_map")

    with ctx.timed("verify"):
        residuals = verify_solution(
            sc.model, sc.unsafe_set, solution, sc.dist, ctx.tolerance or DEFAULT_RESIDUAL_TOL
        )
    report.residuals = residuals
    export_adjoint(sc.model, solution, ctx.out_dir)
    report.timings = ctx.timings
    write_report(report, ctx.out_dir)

    if not residuals.passed:
        raise fail(
            EXIT_NOT_CONVERGED,
            f"Maximum-principle check failed: final={residuals.final_transversality:.2e} "
            f"w-consistency={residuals.deviation_consistency:.2e} "
            f"reintegration={residuals.adjoint_reintegration}",
        )
    typer.echo(f"PMP check passed (tolerance {residuals.tolerance:g}) -> {ctx.out_dir}")
