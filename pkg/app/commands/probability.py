"""Probability commands: weak p-safety, the quasi-potential map and the Monte Carlo cross-check."""

import logging

import numpy as np
import typer
from numpy.typing import NDArray
from rich.console import Console
from rich.table import Table

from app.config import get_settings
from app.schemas.report import PSafetyReport
from app.schemas.results import EstimateWithCI, PosteriorEvaluation
from app.services.instanton.engine import InitialGuess, solve_ml
from app.services.montecarlo import (
    estimate_hitting_probability,
    importance_sampling_hitting,
    tube_probability,
)
from app.services.probability import evaluate_probe, ldt_hitting_probability, weak_psafety
from app.services.probability.psafety import PRIOR_HALF_WIDTH, QUADRATURE_MAX_DIMENSION
from app.services.reporting import (
    PSAFETY_FILE,
    export_solution,
    write_psafety,
    write_quasipotential_csv,
    write_report,
)

from .common import (
    EXIT_NOT_CONVERGED,
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

QUASIPOTENTIAL_FILE = "quasipotential.csv"


@handle_errors
def psafety_command(
    scenario: ScenarioOption,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    tol: TolOption = None,
    nodes: NodesOption = None,
    debug: DebugOption = False,
) -> None:
    """Weak p-safety: the prior-averaged large-deviation hitting probability.

    Writes psafety.json and report.json.
    """
    ctx = prepare("psafety", scenario, seed, threads, out, tol, nodes, debug)
    sc = ctx.scenario
    with ctx.timed("psafety"):
        result = weak_psafety(
            sc.model,
            sc.unsafe_set,
            sc.dist,
            sc.eps,
            sc.window,
            sc.solver,
            intervals=sc.mc.quadrature_intervals,
            samples=sc.mc.importance_samples,
            seed=ctx.seed,
            threads=ctx.threads,
        )
    report = ctx.new_report()
    report.psafety = result
    report.timings = ctx.timings
    write_report(report, ctx.out_dir)
    write_psafety(
        PSafetyReport(
            scenario_name=sc.name,
            config_hash=report.config_hash,
            seed=ctx.seed,
            eps=sc.eps,
            t_min=sc.window.t_min,
            t_max=sc.window.t_max,
            result=result,
        ),
        ctx.out_dir,
    )
    typer.echo(
        f"p-safety ({result.method}): {result.estimate:.6g} +/- {result.error:.2g} -> {ctx.out_dir / PSAFETY_FILE}"
    )


def _probe_points(ctx: RunContext) -> NDArray[np.float64]:
    """Tensor grid over the prior's bulk for n <= 2, prior samples otherwise."""
    sc = ctx.scenario
    count = sc.mc.probe_nodes
    if sc.model.dimension <= QUADRATURE_MAX_DIMENSION:
        std = np.sqrt(np.diag(sc.dist.covariance))
        axes = [
            np.linspace(m - PRIOR_HALF_WIDTH * s, m + PRIOR_HALF_WIDTH * s, count + 1)
            for m, s in zip(sc.dist.mean, std, strict=True)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)
    rng = np.random.default_rng(np.random.SeedSequence(ctx.seed))
    return sc.dist.sample(rng, count)


@handle_errors
def quasipotential_map_command(
    scenario: ScenarioOption,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    tol: TolOption = None,
    nodes: NodesOption = None,
    debug: DebugOption = False,
) -> None:
    """Tabulate Q(y), eps S0(y) and the unnormalised log-posterior over initial states.

    Probes are solved in order, each warm-started from the previous converged one.
    """
    ctx = prepare("quasipotential-map", scenario, seed, threads, out, tol, nodes, debug)
    sc = ctx.scenario
    probes = _probe_points(ctx)

    evaluations: list[PosteriorEvaluation] = []
    guess: InitialGuess | None = None
    with ctx.timed("probes"):
        for y in probes:
            evaluation, solution = evaluate_probe(
                sc.model, sc.unsafe_set, sc.dist, sc.eps, y, sc.window, sc.solver, guess
            )
            evaluations.append(evaluation)
            if solution is not None and solution.success:
                guess = InitialGuess.from_solution(solution)
    write_quasipotential_csv(evaluations, ctx.out_dir / QUASIPOTENTIAL_FILE)

    report = ctx.new_report()
    report.posterior = evaluations
    report.timings = ctx.timings
    write_report(report, ctx.out_dir)
    failed = sum(1 for e in evaluations if not np.isfinite(e.quasipotential))
    typer.echo(f"{len(evaluations)} probes ({failed} without a finite Q) -> {ctx.out_dir / QUASIPOTENTIAL_FILE}")


def _estimate_row(table: Table, label: str, estimate: EstimateWithCI) -> None:
    ess = "" if estimate.effective_sample_size is None else f"{estimate.effective_sample_size:.1f}"
    table.add_row(label, f"{estimate.estimate:.6g}", f"{estimate.standard_error:.2g}", ess)


@handle_errors
def mc_validate_command(
    scenario: ScenarioOption,
    seed: SeedOption = None,
    threads: ThreadsOption = None,
    out: OutOption = None,
    tol: TolOption = None,
    nodes: NodesOption = None,
    debug: DebugOption = False,
) -> None:
    """Compare exp(-Q/eps) with crude, importance-sampling and tube Monte Carlo.

    All simulations start from the prior mean. Exits with code 2 when the ML solve
    needed for the tilt and the tube does not converge.
    """
    ctx = prepare("mc-validate", scenario, seed, threads, out, tol, nodes, debug)
    sc = ctx.scenario
    batch_size = get_settings().MC_BATCH_SIZE
    mc = sc.mc
    report = ctx.new_report()

    with ctx.timed("solve"):
        solution = solve_ml(sc.model, sc.unsafe_set, sc.start, sc.window, sc.solver)
    if solution.path is not None:
        report.solutions = [export_solution(solution, ctx.out_dir, "path_ml.csv")]

    with ctx.timed("crude"):
        report.estimates["crude"] = estimate_hitting_probability(
            sc.model, sc.start, sc.unsafe_set, sc.eps, sc.horizon, mc.dt, mc.paths, ctx.seed,
            batch_size=batch_size, threads=ctx.threads,
        )

    if solution.success:
        report.ldp = {
            "quasipotential": solution.action,
            "probability": ldt_hitting_probability(solution.action, sc.eps),
        }
        with ctx.timed("importance"):
            report.estimates["importance"] = importance_sampling_hitting(
                sc.model, solution, sc.unsafe_set, sc.eps, sc.horizon, mc.dt, mc.paths, ctx.seed,
                batch_size=batch_size, threads=ctx.threads,
            )
        if solution.final_time > 0.0:
            with ctx.timed("tube"):
                report.estimates["tube"] = tube_probability(
                    sc.model, solution.path, mc.tube_delta, sc.eps, mc.dt, mc.paths, ctx.seed,
                    batch_size=batch_size, threads=ctx.threads,
                )

    report.timings = ctx.timings
    write_report(report, ctx.out_dir)

    table = Table(title=f"{sc.name}: hitting probability (eps={sc.eps:g}, T={sc.horizon:g})")
    table.add_column("Estimator")
    table.add_column("P", justify="right")
    table.add_column("Std. error", justify="right")
    table.add_column("ESS", justify="right")
    for label, estimate in report.estimates.items():
        _estimate_row(table, label, estimate)
    if "probability" in report.ldp:
        table.add_row("exp(-Q/eps)", f"{report.ldp['probability']:.6g}", "", "")
    if "hitting_probability" in report.reference:
        table.add_row("reference", f"{report.reference['hitting_probability']:.6g}", "", "")
    Console().print(table)

    if not solution.success:
        raise fail(
            EXIT_NOT_CONVERGED,
            f"ML solve ended with {solution.status.value} ({solution.error_code}); "
            "importance sampling and tube estimates skipped",
        )
