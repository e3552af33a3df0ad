"""Deterministic solver for a viscous fluid drag-coupled to a kinetic phase.

The fluid is advanced in mild (Duhamel) form by a pseudo-spectral method with
exact heat-semigroup quadrature; the distribution function rides backward
characteristics with a conservative-clip semi-Lagrangian gather; the two are
coupled window by window through a contracting fixed-point iteration.
"""

from .config import ConfigError, RunConfig, normalize_config, parse_config, render_config
from .coupling import (
    ConvergenceError,
    PicardConfig,
    SimState,
    StepReport,
    advance,
    picard_solve,
)
from .diagnostics import (
    ConservationReport,
    EnergyLedger,
    conservation_report,
    energy_identity_residual,
    monotonicity_slack,
    sobolev_norms,
    vorticity_residual,
)
from .initial_data import InitialReport, make_initial_data
from .runner import RunResult, resume, run
from .snapshot import Snapshot, SnapshotError, read_snapshot, write_snapshot
from .spectral import SpectralGrid, VelocityField, leray_project, taylor_green
from .verify import VerifyReport, run_verification
from .vlasov import (
    DistributionFunction,
    PhaseGrid,
    compute_moments,
    exact_free_solution,
    semi_lagrangian_step,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConservationReport",
    "ConvergenceError",
    "DistributionFunction",
    "EnergyLedger",
    "InitialReport",
    "PhaseGrid",
    "PicardConfig",
    "RunConfig",
    "RunResult",
    "SimState",
    "Snapshot",
    "SnapshotError",
    "SpectralGrid",
    "StepReport",
    "VelocityField",
    "VerifyReport",
    "advance",
    "compute_moments",
    "conservation_report",
    "energy_identity_residual",
    "exact_free_solution",
    "leray_project",
    "make_initial_data",
    "monotonicity_slack",
    "normalize_config",
    "parse_config",
    "picard_solve",
    "read_snapshot",
    "render_config",
    "resume",
    "run",
    "run_verification",
    "semi_lagrangian_step",
    "sobolev_norms",
    "taylor_green",
    "vorticity_residual",
    "write_snapshot",
    "__version__",
]
