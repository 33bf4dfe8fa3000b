"""Run reports: summaries of solves, JSON export and reload for re-verification."""

import logging
from pathlib import Path as FilePath

from app.schemas.report import PSafetyReport, RunReport, SolutionSummary
from app.schemas.solver import TimeWindow
from app.services.instanton.engine import DynamicsModel, VariationalSolution, integrate_adjoint

from .paths_csv import read_path_csv, write_adjoint_csv, write_path_csv

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
ADJOINT_FILE = "adjoint.csv"
PSAFETY_FILE = "psafety.json"


def summarize_solution(solution: VariationalSolution, path_file: str | None = None) -> SolutionSummary:
    if solution.path is None:
        raise ValueError(f"Solution has no path ({solution.error_code}: {solution.error_message})")
    return SolutionSummary(
        mode=solution.mode,
        status=solution.status,
        t_min=solution.window.t_min,
        t_max=solution.window.t_max,
        final_time=solution.final_time,
        action=solution.action,
        initial_cost=solution.initial_cost,
        objective=solution.objective,
        multiplier=solution.multiplier,
        eps=solution.eps,
        initial_state=solution.path.initial_state.tolist(),
        final_state=solution.path.final_state.tolist(),
        iterations=solution.iterations,
        residuals=solution.residuals,
        error_code=solution.error_code,
        error_message=solution.error_message,
        path_file=path_file,
    )


def export_solution(solution: VariationalSolution, directory: str | FilePath, filename: str) -> SolutionSummary:
    """Write the path CSV (with adjoint) and return the summary pointing at it."""
    write_path_csv(solution.path, FilePath(directory) / filename, solution.adjoint)
    return summarize_solution(solution, path_file=filename)


def export_adjoint(model: DynamicsModel, solution: VariationalSolution, directory: str | FilePath) -> FilePath:
    """Write adjoint.csv: the solver costate next to the one re-integrated from its lam(0)."""
    adjoint = solution.adjoint_path
    if adjoint is None:
        raise ValueError(f"Solution carries no costate (status {solution.status.value})")
    return write_adjoint_csv(adjoint, FilePath(directory) / ADJOINT_FILE, integrate_adjoint(model, solution))


def restore_solution(summary: SolutionSummary, directory: str | FilePath) -> VariationalSolution:
    """Rebuild a solution from its summary and path CSV."""
    if summary.path_file is None:
        raise ValueError("Summary does not reference a path file")
    path, adjoint = read_path_csv(FilePath(directory) / summary.path_file)
    if adjoint is None:
        raise ValueError(f"{summary.path_file} carries no adjoint columns")
    return VariationalSolution(
        mode=summary.mode,
        status=summary.status,
        window=TimeWindow(t_min=summary.t_min, t_max=summary.t_max),
        path=path,
        adjoint=adjoint,
        multiplier=summary.multiplier,
        action=summary.action,
        initial_cost=summary.initial_cost,
        eps=summary.eps,
        residuals=dict(summary.residuals),
        iterations=summary.iterations,
        error_code=summary.error_code,
        error_message=summary.error_message,
    )


def write_report(report: RunReport, directory: str | FilePath) -> FilePath:
    directory = FilePath(directory)
    directory.mkdir(parents=True, exist_ok=True)
    destination = directory / REPORT_FILE
    destination.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    logger.info("Report written to %s", destination)
    return destination


def load_report(directory: str | FilePath) -> RunReport:
    source = FilePath(directory) / REPORT_FILE
    return RunReport.model_validate_json(source.read_text(encoding="utf-8"))


def write_psafety(record: PSafetyReport, directory: str | FilePath) -> FilePath:
    directory = FilePath(directory)
    directory.mkdir(parents=True, exist_ok=True)
    destination = directory / PSAFETY_FILE
    destination.write_text(record.model_dump_json(indent=2), encoding="utf-8")
    logger.info("p-safety written to %s", destination)
    return destination
