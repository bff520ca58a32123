"""SLIR(T)R(P)D endemic model with distributed delays.

Discrete-lag simulation, continuous-kernel reference solvers, and a
convergence/benchmark harness for the six-compartment endemic model with
distributed latency and temporary-immunity delays.
"""

from .kernels import (
    DiracComb,
    KernelDensity,
    build_grid,
    comb_integrate,
    discretize,
    mean_delay,
    truncation_bound,
)
from .model import (
    COMPARTMENTS,
    CompartmentState,
    HistoryData,
    ModelParams,
    default_history,
    derive_mu,
    initial_conditions,
    rhs_discrete,
)
from .trajectory import Trajectory, eval_history
from .integrators import SolverError, solve_discrete
from .reference import eval_G, eval_H, solve_chain_oracle, solve_reference
from .harness import ConvergenceReport, SweepEntry, benchmark, convergence_sweep, sup_norm_error

__version__ = "0.1.0"

__all__ = [
    "COMPARTMENTS",
    "CompartmentState",
    "ConvergenceReport",
    "DiracComb",
    "HistoryData",
    "KernelDensity",
    "ModelParams",
    "SolverError",
    "SweepEntry",
    "Trajectory",
    "benchmark",
    "build_grid",
    "comb_integrate",
    "convergence_sweep",
    "default_history",
    "derive_mu",
    "discretize",
    "eval_G",
    "eval_H",
    "eval_history",
    "initial_conditions",
    "mean_delay",
    "rhs_discrete",
    "solve_chain_oracle",
    "solve_discrete",
    "solve_reference",
    "sup_norm_error",
    "truncation_bound",
]
