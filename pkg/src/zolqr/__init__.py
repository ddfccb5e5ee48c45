"""Derivative-free policy gradient solvers for the discrete-time LQR problem.

Exact (model-based) policy gradient, one-point and two-point zeroth-order
policy gradient, and a variance-reduced dual-loop optimizer that needs
two-point cost queries only once per epoch -- all with per-iteration
stability auditing and exact query accounting.
"""

from zolqr.backend import BACKEND_NAME
from zolqr.cost_oracle import (
    CostOracle,
    DivergencePolicy,
    FunctionOracle,
    OracleMode,
    QueryLedger,
)
from zolqr.lqr_core import (
    LinearQuadraticSystem,
    cost,
    cost_from_initial_state,
    exact_gradient,
    is_stabilizing,
    normalized_gap,
    optimal_gain,
    value_matrix,
)
from zolqr.pg_algorithms import (
    RunConfig,
    Trace,
    run,
    run_exact_pg,
    run_pg_zo1p,
    run_pg_zo2p,
    run_svrpg,
)
from zolqr.zeroth_order import (
    GradientEstimate,
    sample_sphere,
    zo1p_estimate,
    zo1p_pair_estimate,
    zo2p_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "CostOracle",
    "DivergencePolicy",
    "FunctionOracle",
    "GradientEstimate",
    "LinearQuadraticSystem",
    "OracleMode",
    "QueryLedger",
    "RunConfig",
    "Trace",
    "cost",
    "cost_from_initial_state",
    "exact_gradient",
    "is_stabilizing",
    "normalized_gap",
    "optimal_gain",
    "run",
    "run_exact_pg",
    "run_pg_zo1p",
    "run_pg_zo2p",
    "run_svrpg",
    "sample_sphere",
    "value_matrix",
    "zo1p_estimate",
    "zo1p_pair_estimate",
    "zo2p_estimate",
]
