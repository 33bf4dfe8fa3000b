from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator


# Dynamics structure
class ModelKind(str, Enum):
    FIRST_ORDER = "first_order"
    MECHANICAL = "mechanical"


# Variational solve outcome
class SolveStatus(str, Enum):
    CONVERGED = "converged"
    TRIVIAL = "trivial"  # Deterministic flow already reaches the unsafe set
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"
    FAILED = "failed"


class SolveMode(str, Enum):
    ML = "ml"
    MAP = "map"


class SimulationResult(BaseModel):
    """Outcome of one Euler-Maruyama path."""

    terminal_state: list[float]
    hit: bool
    hitting_time: float | None = Field(
        None, description="First grid time with f <= 0, None when the path stayed safe"
    )
    trajectory: list[list[float]] | None = None

    @model_validator(mode="after")
    def check_hit_consistency(self) -> "SimulationResult":
        if self.hit != (self.hitting_time is not None):
            raise ValueError("hit flag must agree with the presence of a hitting time")
        return self


class EstimateWithCI(BaseModel):
    """Probability estimate with its standard error."""

    estimate: float = Field(..., ge=0.0, le=1.0)
    standard_error: float = Field(..., ge=0.0)
    samples: int
    effective_sample_size: float | None = Field(
        None, description="Kish effective sample size, importance sampling only"
    )
    warning: str | None = None

    def agrees_with(self, other: "EstimateWithCI", n_sigma: float = 3.0) -> bool:
        combined = (self.standard_error**2 + other.standard_error**2) ** 0.5
        return abs(self.estimate - other.estimate) <= n_sigma * combined


class PosteriorEvaluation(BaseModel):
    """Unnormalised posterior over initial states at one probe point."""

    # Failed probes carry Q = inf; keep it through report.json round trips
    model_config = ConfigDict(ser_json_inf_nan="constants")

    probe: list[float]
    quasipotential: float = Field(..., ge=0.0)
    weighted_initial_cost: float = Field(..., ge=0.0, description="eps * S0(y)")
    gamma: float = Field(..., ge=0.0, description="Q(y) + eps * S0(y)")
    log_posterior: float = Field(..., description="-gamma / eps, normalising constant dropped")
    inside_unsafe_set: bool = False
    status: SolveStatus = SolveStatus.CONVERGED


class PSafetyEstimate(BaseModel):
    """Weak p-safety integral estimate."""

    estimate: float = Field(..., ge=0.0, le=1.0)
    error: float = Field(..., ge=0.0)
    raw_estimate: float
    method: str
    probes: int
    failed_probes: int = 0


class ResidualReport(BaseModel):
    """Maximum-principle residuals for a candidate solution.

    All residuals are scaled by (1 + magnitude of their terms).
    """

    initial_transversality: float | None = Field(
        None, description="|lam(0) - eps grad S0(phi(0))|, MAP solves only"
    )
    final_transversality: float
    complementary_slackness: float = Field(..., description="|alpha f(phi(T))|")
    terminal_hamiltonian: float = Field(..., description="|H(T)|")
    deviation_consistency: float = Field(
        ..., description="max_k |w_k - u_k|, u the piecewise-linear maximiser of H for lam(T)"
    )
    nodal_deviation_gap: float | None = Field(None, description="max_k |w_k - sigma^T lam_nu,k|")
    adjoint_reintegration: float | None = None
    hamiltonian_variation: float | None = None
    initial_state_free: bool
    final_time_interior: bool
    tolerance: float = 1e-6
    hamiltonian_tolerance: float = 1e-5
    reintegration_tolerance: float = 1e-3
    passed: bool = False
