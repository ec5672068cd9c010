"""Parity-constrained MAP solvers: ILP encodings, LP relaxation, branch and bound, message passing."""

from .bnb import Budget, branch_and_bound, solve_root_lp
from .ilp import (
    EncodingError,
    IlpModel,
    build_ilp,
    build_objective_and_marginal_polytope,
    encode_feldman,
    encode_jeroslow,
    encode_yannakakis,
)
from .lp import LpNumericalError, LpResult, solve_lp
from .message_passing import message_passing_decode, parity_message_table, parity_message_update

__all__ = [
    "Budget",
    "EncodingError",
    "IlpModel",
    "LpNumericalError",
    "LpResult",
    "branch_and_bound",
    "build_ilp",
    "build_objective_and_marginal_polytope",
    "encode_feldman",
    "encode_jeroslow",
    "encode_yannakakis",
    "message_passing_decode",
    "parity_message_table",
    "parity_message_update",
    "solve_lp",
    "solve_root_lp",
]
