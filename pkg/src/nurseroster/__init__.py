"""Nurse rostering with direct and indirect genetic algorithms, and an
infeasibility-aware statistical method for comparing stochastic solvers."""

from .ga_direct import GaConfig, TrialResult, run_direct_ga
from .ga_indirect import DecoderConfig, decode, run_indirect_ga
from .instances import GeneratorConfig, generate_instance, generator_preset, read_instance, write_instance
from .problem import (
    INFEASIBLE,
    Contract,
    ExtendedCost,
    Feasible,
    Nurse,
    ProblemInstance,
    ShiftPattern,
    exact_solve,
    penalty_fitness,
    roster_cost,
)
from .stats import (
    TrialSet,
    compute_E,
    friedman,
    overall_comparison,
    pair_D,
    rank_instance,
    sign_test,
    wilcoxon_signed_rank,
)

__version__ = "0.1.0"
