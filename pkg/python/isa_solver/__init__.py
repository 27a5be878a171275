"""
isa_solver - infeasible-point subgradient methods with inexact projections

Predetermined and dynamic (Polyak-type) step-size variants, truncated-CG
projections for Basis Pursuit, and a reproducible instance generator.
"""

__version__ = '1.0.0'

from .errors import (  # noqa: E402
    ConfigError,
    DegenerateInstanceError,
    DegenerateSupportError,
    IsaError,
    NumericalBreakdownError,
    UsageError,
)
from .oracles import L1Oracle, PolyhedralObjective, CallableOracle, eps_subgradient_wrap  # noqa: E402
from .projections import AffineProjector, BoxProjector, perturbed_exact_projector  # noqa: E402
from .schedules import DynamicConfig, harmonic_pair_schedule  # noqa: E402
from .solver import SolveStatus, StoppingConfig, restart_with_lower_phi, solve_dynamic, solve_predetermined  # noqa: E402
from .instances import BpInstance, desk_instance  # noqa: E402
