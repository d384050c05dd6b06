"""Extragradient fractional programming (EG-FP) for max-min fair RSMA beamforming.

Submodules
----------
model
    Channels, beamformers, SINRs and rates.
fp
    Concave rate surrogates and their closed-form auxiliaries.
extragradient
    Lagrangian, variational-inequality map and the extragradient solver.
egfp
    Outer loop, low-dimensional variant and solution recovery.
csit
    Imperfect-CSIT lower bounds, robust and SDMA solvers.
oracle
    Independent verification tools.
bench
    Seeded experiment runner behind the ``rsma-egfp`` command.
"""

__version__ = "0.1.0"

from .allocation import max_min_value, optimal_c_given_P
from .csit import (
    ImperfectChannelSet,
    egfp_solve_imperfect,
    gen_imperfect_channel,
    rate_lb_common,
    rate_lb_private,
    sdma_solve,
)
from .egfp import (
    EgfpConfig,
    LowDimProblem,
    SolverReport,
    build_lowdim,
    egfp_solve,
    lowdim_egfp_solve,
    mrt_init,
    recover_beams,
    solve,
)
from .extragradient import DivergenceError, DualState, EgConfig, solve_subproblem
from .fp import FpAuxiliaries, update_aux
from .model import (
    BeamformingState,
    ChannelSet,
    RateVector,
    SystemConfig,
    gen_channel,
    load_channel,
    normalize_power,
    rates,
    save_channel,
    sinrs,
    tx_power,
)

__all__ = [
    "__version__",
    "BeamformingState",
    "ChannelSet",
    "DivergenceError",
    "DualState",
    "EgConfig",
    "EgfpConfig",
    "FpAuxiliaries",
    "ImperfectChannelSet",
    "LowDimProblem",
    "RateVector",
    "SolverReport",
    "SystemConfig",
    "build_lowdim",
    "egfp_solve",
    "egfp_solve_imperfect",
    "gen_channel",
    "gen_imperfect_channel",
    "load_channel",
    "lowdim_egfp_solve",
    "max_min_value",
    "mrt_init",
    "normalize_power",
    "optimal_c_given_P",
    "rate_lb_common",
    "rate_lb_private",
    "rates",
    "recover_beams",
    "save_channel",
    "sdma_solve",
    "sinrs",
    "solve",
    "solve_subproblem",
    "tx_power",
    "update_aux",
]
