"""Plot-ready CSV tables for paths and quasi-potential probes."""

import logging
from pathlib import Path as FilePath

import numpy as np
from numpy.typing import NDArray

from app.schemas.results import PosteriorEvaluation
from app.services.instanton.engine import AdjointPath, Path, TimeGrid, cumulative_action

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _columns(n: int, k: int, with_adjoint: bool) -> list[str]:
    names = ["t"] + [f"x_{i}" for i in range(n)] + [f"w_{j}" for j in range(k)]
    if with_adjoint:
        names += [f"lam_{i}" for i in range(n)]
    return names + ["w_norm", "action"]


def write_path_csv(
    path: Path, destination: str | FilePath, adjoint: NDArray[np.float64] | None = None
) -> FilePath:
    """Columns t, x_i, w_j, lam_i (when given), |w| and the running action."""
    if path.deviations is None:
        raise ValueError("Only paths with deviations can be exported")
    if adjoint is not None and adjoint.shape != path.states.shape:
        raise ValueError(f"Adjoint shape {adjoint.shape} does not match states {path.states.shape}")
    blocks = [path.times[:, None], path.states, path.deviations]
    if adjoint is not None:
        blocks.append(adjoint)
    blocks += [np.linalg.norm(path.deviations, axis=1)[:, None], cumulative_action(path)[:, None]]

    destination = FilePath(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    header = ",".join(_columns(path.dimension, path.deviations.shape[1], adjoint is not None))
    np.savetxt(destination, np.hstack(blocks), delimiter=",", header=header, comments="", fmt=FLOAT_FORMAT)
    logger.debug("Wrote %d path nodes to %s", len(path.grid), destination)
    return destination


def read_path_csv(source: str | FilePath) -> tuple[Path, NDArray[np.float64] | None]:
    """Inverse of write_path_csv: the Path (with deviations) and the adjoint if present."""
    source = FilePath(source)
    with open(source, encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
    table = np.loadtxt(source, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[1] != len(header):
        raise ValueError(f"{source}: {table.shape[1]} columns for a header of {len(header)}")

    def pick(prefix: str) -> NDArray[np.float64]:
        index = [i for i, name in enumerate(header) if name.startswith(prefix) and name != "w_norm"]
        return table[:, index]

    states, deviations, adjoint = pick("x_"), pick("w_"), pick("lam_")
    path = Path(grid=TimeGrid(table[:, 0]), states=states, deviations=deviations)
    return path, (adjoint if adjoint.shape[1] else None)


def write_adjoint_csv(
    adjoint: AdjointPath, destination: str | FilePath, reintegrated: AdjointPath | None = None
) -> FilePath:
    """Columns t, lam_i and, when given, lam_reintegrated_i on the same grid."""
    blocks = [adjoint.times[:, None], adjoint.values]
    names = ["t"] + [f"lam_{i}" for i in range(adjoint.values.shape[1])]
    if reintegrated is not None:
        if reintegrated.values.shape != adjoint.values.shape:
            raise ValueError(
                f"Re-integrated costate shape {reintegrated.values.shape} does not match {adjoint.values.shape}"
            )
        blocks.append(reintegrated.values)
        names += [f"lam_reintegrated_{i}" for i in range(adjoint.values.shape[1])]

    destination = FilePath(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(destination, np.hstack(blocks), delimiter=",", header=",".join(names), comments="", fmt=FLOAT_FORMAT)
    logger.debug("Wrote %d costate nodes to %s", len(adjoint), destination)
    return destination


def write_quasipotential_csv(
    evaluations: list[PosteriorEvaluation], destination: str | FilePath
) -> FilePath:
    """One row per probe: y_i, Q, eps S0, Gamma, log-posterior, inside-D flag."""
    if not evaluations:
        raise ValueError("No probes to write")
    n = len(evaluations[0].probe)
    rows = [
        [*e.probe, e.quasipotential, e.weighted_initial_cost, e.gamma, e.log_posterior, float(e.inside_unsafe_set)]
        for e in evaluations
    ]
    header = ",".join(
        [f"y_{i}" for i in range(n)]
        + ["quasipotential", "weighted_initial_cost", "gamma", "log_posterior", "inside_unsafe_set"]
    )
    destination = FilePath(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(destination, np.array(rows), delimiter=",", header=header, comments="", fmt=FLOAT_FORMAT)
    return destination
