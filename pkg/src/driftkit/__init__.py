"""Drift-analysis toolkit: potentials, expectation and tail bounds, exact
Markov-chain oracles and seeded Monte Carlo for benchmark processes."""
from .errors import (ConvergenceError, DomainError, DriftkitError, EstimationError, PreconditionError,
                     StateSpaceError)

__version__ = "0.1.0"

from .potential import HSpec, PotentialFunction, build_potential, integrate_reciprocal  # noqa: E402
from .oracle import (MarkovChain, build_leadingones_chain, build_onemax_chain, exact_drift_profile,  # noqa: E402
                     exact_expectation, exact_tail, parse_chain)
from .theorems import (BoundResult, FitnessPartition, additive_lower, additive_upper,  # noqa: E402
                       fitness_levels_lower, fitness_levels_upper, general_expected_bound, multiplicative_lower,
                       multiplicative_upper, nonmonotone_variable_upper, variable_lower, variable_upper)
from .tails import (SimplifiedTailParams, TailParams, TailResult, corollary_bounds, general_tail_lower,  # noqa: E402
                    general_tail_upper, multiplicative_tail, simplified_tail)
from .processes import ProcessSpec  # noqa: E402
from .montecarlo import EmpiricalStats, run_trials  # noqa: E402

__all__ = [
    "__version__", "DriftkitError", "DomainError", "ConvergenceError", "PreconditionError", "StateSpaceError",
    "EstimationError", "HSpec", "PotentialFunction", "build_potential", "integrate_reciprocal", "MarkovChain",
    "build_onemax_chain", "build_leadingones_chain", "exact_expectation", "exact_tail", "exact_drift_profile",
    "parse_chain", "BoundResult", "FitnessPartition", "additive_upper", "additive_lower", "general_expected_bound",
    "variable_upper", "variable_lower", "nonmonotone_variable_upper", "multiplicative_upper",
    "multiplicative_lower", "fitness_levels_upper", "fitness_levels_lower", "TailParams",
    "SimplifiedTailParams", "TailResult", "general_tail_upper", "general_tail_lower", "corollary_bounds",
    "simplified_tail", "multiplicative_tail", "ProcessSpec", "run_trials", "EmpiricalStats",
]
