"""Shared fixtures for engine, estimator and CLI tests."""

from pathlib import Path

import numpy as np
import pytest

from app.schemas.solver import SolverOptions, TimeWindow
from app.services.instanton.engine import (
    DynamicsModel,
    InitialDistribution,
    UnsafeSet,
    upper_half_line,
)

REPO_ROOT = Path(__file__).resolve().parents[1]
SCENARIO_DIR = REPO_ROOT / "scenarios"

# Closed-form values at eps = 0.1, L = 1, T = 1, prior N(0, 1)
BROWNIAN_Q = 0.5
OU_Q = 1.0 / (1.0 - np.exp(-2.0))  # 1.1565 for a = 1
MAP_INITIAL_STATE = 1.0 / 1.1  # 0.90909
MAP_OBJECTIVE = 0.5 * (1.0 - 1.0 / 1.1) ** 2 + 0.05 * (1.0 / 1.1) ** 2  # 0.045455


def create_brownian_model(sigma: float = 1.0) -> DynamicsModel:
    """Helper to create dX = sqrt(eps) sigma dW in one dimension."""
    return DynamicsModel.first_order(
        lambda x: np.zeros_like(x), sigma, lambda x: np.zeros((1, 1)), name="brownian"
    )


def create_ou_model(decay: float = 1.0, sigma: float = 1.0) -> DynamicsModel:
    """Helper to create the Ornstein-Uhlenbeck drift b(x) = -a x."""
    return DynamicsModel.first_order(
        lambda x: -decay * x, sigma, lambda x: np.array([[-decay]]), name="ornstein_uhlenbeck"
    )


def create_constant_drift_model(rate: float = 1.0) -> DynamicsModel:
    """Helper to create b(x) = rate, whose unperturbed flow drifts into x >= L."""
    return DynamicsModel.first_order(
        lambda x: np.full_like(x, rate), 1.0, lambda x: np.zeros((1, 1)), name="constant"
    )


def create_nonlinear_model() -> DynamicsModel:
    """Helper to create a coupled 2-D field with a non-trivial Jacobian."""

    def drift_fn(x):
        return np.stack([-x[..., 0] + x[..., 1] ** 2, -x[..., 1] + np.sin(x[..., 0])], axis=-1)

    def jacobian_fn(x):
        return np.array([[-1.0, 2.0 * x[1]], [np.cos(x[0]), -1.0]])

    return DynamicsModel.first_order(drift_fn, np.array([[1.0, 0.0], [0.3, 0.8]]), jacobian_fn, name="coupled")


def create_oscillator_model() -> DynamicsModel:
    """Helper to create the mechanical oscillator eta'' = -eta with noise on the velocity."""
    return DynamicsModel.mechanical(lambda eta: -eta, 1.0, lambda eta: np.array([[-1.0]]), name="oscillator")


@pytest.fixture
def brownian_model() -> DynamicsModel:
    return create_brownian_model()


@pytest.fixture
def ou_model() -> DynamicsModel:
    return create_ou_model()


@pytest.fixture
def unit_threshold() -> UnsafeSet:
    """D = {x >= 1}."""
    return upper_half_line(1.0)


@pytest.fixture
def standard_prior() -> InitialDistribution:
    """N(0, 1) in one dimension."""
    return InitialDistribution.diagonal([0.0], [1.0])


@pytest.fixture
def unit_window() -> TimeWindow:
    return TimeWindow.fixed(1.0)


@pytest.fixture
def fast_options() -> SolverOptions:
    """Coarse grid; exact for Brownian paths, which have constant deviations."""
    return SolverOptions(nodes=50)
