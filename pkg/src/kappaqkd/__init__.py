"""Simulator for the kappa-switched entangled-state key distribution protocol under Bohmian hidden variables."""

__version__ = "0.1.0"

from .dynamics import (  # noqa: E402
    BACKEND,
    HiddenState,
    IntegratorConfig,
    Kappa,
    PhysicalParams,
    TrajectoryResult,
    analytic_outcome,
    epsilon,
    integrate_batch,
    integrate_pair,
    single_particle_outcome,
    velocity,
)
from .errors import (  # noqa: E402
    CommitmentFailure,
    ConfigError,
    InsufficientData,
    LengthMismatch,
    NotCommitted,
    TieError,
)
