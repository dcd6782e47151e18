"""Classical and quantum multi-row Kaczmarz iteration.

Solvers for A x = b with non-square A: the randomized one-row and
weighted multi-row protocols, a desk-scale circuit realization of the
quantum multi-row iteration (statevector simulator, reversible
arithmetic, amplitude trees, block-encodings), and a benchmark harness
reproducing the convergence experiments.
"""
from .classical import (
    IterationSchedule,
    SamplingWeights,
    bound_evaluate,
    check_condition,
    draw_schedule,
    expectation_check,
    multi_row_step,
    one_row_step,
    run_classical,
    sgd_step,
)
from .linalg import (
    IterationError,
    LinearSystem,
    SolutionBundle,
    frobenius_and_kappa,
    gen_gaussian_system,
    least_squares_solve,
    normalize_rows,
)
from .blockenc import BlockEncoding, build_uk, build_weight_block, verify_block_encoding
from .driver import run_quantum
from .simulator import CircuitOp, RegisterLayout, StateVector, apply, circuit_unitary, extract_real_vector, postselect

__all__ = [
    "BlockEncoding",
    "CircuitOp",
    "IterationError",
    "IterationSchedule",
    "LinearSystem",
    "RegisterLayout",
    "SamplingWeights",
    "SolutionBundle",
    "StateVector",
    "apply",
    "bound_evaluate",
    "build_uk",
    "build_weight_block",
    "check_condition",
    "circuit_unitary",
    "draw_schedule",
    "expectation_check",
    "extract_real_vector",
    "frobenius_and_kappa",
    "gen_gaussian_system",
    "least_squares_solve",
    "multi_row_step",
    "normalize_rows",
    "one_row_step",
    "postselect",
    "run_classical",
    "run_quantum",
    "sgd_step",
    "verify_block_encoding",
]
