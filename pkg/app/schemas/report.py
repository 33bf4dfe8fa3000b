from pydantic import BaseModel, Field

from app.schemas.results import (
    EstimateWithCI,
    PosteriorEvaluation,
    PSafetyEstimate,
    ResidualReport,
    SolveMode,
    SolveStatus,
)

REPORT_VERSION = "1.0"


class SolutionSummary(BaseModel):
    """Scalar outcome of one ML or MAP solve."""

    mode: SolveMode
    status: SolveStatus
    t_min: float
    t_max: float
    final_time: float
    action: float
    initial_cost: float | None = None
    objective: float
    multiplier: float = Field(..., description="alpha, the terminal constraint multiplier")
    eps: float | None = None
    initial_state: list[float]
    final_state: list[float]
    iterations: int = 0
    residuals: dict[str, float] = Field(default_factory=dict)
    error_code: str | None = None
    error_message: str | None = None
    path_file: str | None = None


class RunReport(BaseModel):
    """Everything one CLI command computed; reproducible from (config, seed) except `timings`."""

    report_version: str = REPORT_VERSION
    command: str
    scenario_name: str
    config_hash: str
    seed: int
    solutions: list[SolutionSummary] = Field(default_factory=list)
    residuals: ResidualReport | None = None
    estimates: dict[str, EstimateWithCI] = Field(default_factory=dict)
    ldp: dict[str, float] = Field(default_factory=dict)
    psafety: PSafetyEstimate | None = None
    posterior: list[PosteriorEvaluation] = Field(default_factory=list)
    reference: dict[str, float] = Field(default_factory=dict)
    timings: dict[str, float] = Field(
        default_factory=dict, description="Wall-clock seconds per stage; not reproducible"
    )

    def reproducible_json(self) -> str:
        return self.model_dump_json(exclude={"timings"}, indent=2)


class PSafetyReport(BaseModel):
    """Contents of psafety.json: the weak p-safety estimate and what it was computed for."""

    report_version: str = REPORT_VERSION
    scenario_name: str
    config_hash: str
    seed: int
    eps: float
    t_min: float
    t_max: float
    result: PSafetyEstimate
