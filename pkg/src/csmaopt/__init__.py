"""Optimal carrier-sensing threshold for spatially random CSMA/CA networks
with binary exponential backoff.

The analytic chain (access-probability fixed point, mean sensing range,
hard-core active density, success probability) composes into the area
spectral efficiency, which the optimizer maximizes over the threshold.
Two Monte Carlo simulators, a spatial snapshot model and a slotted
contention model, validate the chain empirically.
"""

from .errors import (
    CsmaOptError,
    DegenerateDenominator,
    Divergence,
    InsufficientNodes,
    InsufficientRetained,
    InvalidAlpha,
    NoBracket,
    NoConvergence,
    ThresholdAbovePower,
    UnsupportedAlpha,
)
from .geometry import (
    SimOutcome,
    SimRegion,
    Snapshot,
    estimate_busy_prob,
    estimate_success_and_ase,
    matern_thin,
    sample_ppp,
)
from .macsim import MacSimStats, TauTableRow, run_mac_sim, simulate_slots, tau_table
from .model import (
    BackoffParams,
    ContentionState,
    LinkBudget,
    SpatialState,
    active_density,
    ase,
    busy_prob,
    collision_prob,
    evaluate_threshold,
    sensing_range,
    solve_tau,
    success_prob_closed,
    success_prob_general,
    tau_residual_rhs,
)
from .numerics import (
    SolverConfig,
    adaptive_simpson,
    central_diff,
    erf,
    golden_section_max,
    integrate_semi_infinite,
    newton_safeguarded,
)
from .optimizer import (
    OptimizerReport,
    grid_search_threshold,
    no_beb_optimal_range,
    no_beb_optimal_threshold,
    optimize_threshold,
)
from .units import db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm

__version__ = "0.1.0"

__all__ = [
    "BackoffParams",
    "ContentionState",
    "CsmaOptError",
    "DegenerateDenominator",
    "Divergence",
    "InsufficientNodes",
    "InsufficientRetained",
    "InvalidAlpha",
    "LinkBudget",
    "MacSimStats",
    "NoBracket",
    "NoConvergence",
    "OptimizerReport",
    "SimOutcome",
    "SimRegion",
    "Snapshot",
    "SolverConfig",
    "SpatialState",
    "TauTableRow",
    "ThresholdAbovePower",
    "UnsupportedAlpha",
    "active_density",
    "adaptive_simpson",
    "ase",
    "busy_prob",
    "central_diff",
    "collision_prob",
    "db_to_linear",
    "dbm_to_watts",
    "erf",
    "estimate_busy_prob",
    "estimate_success_and_ase",
    "evaluate_threshold",
    "golden_section_max",
    "grid_search_threshold",
    "integrate_semi_infinite",
    "linear_to_db",
    "matern_thin",
    "newton_safeguarded",
    "no_beb_optimal_range",
    "no_beb_optimal_threshold",
    "optimize_threshold",
    "run_mac_sim",
    "sample_ppp",
    "sensing_range",
    "simulate_slots",
    "solve_tau",
    "success_prob_closed",
    "success_prob_general",
    "tau_residual_rhs",
    "tau_table",
    "watts_to_dbm",
]
