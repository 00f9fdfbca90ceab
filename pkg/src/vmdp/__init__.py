"""Finite-horizon vector-valued MDP solver.

Converts the multi-objective control problem into an equivalent vector
linear program over state-action frequencies, enumerates all efficient
deterministic policies with scalarization-weight certificates, and ships
an independent brute-force oracle for verification.
"""

from .model import (
    DesignInstance,
    Model,
    build_design_model,
    generate_random_instance,
    load_model,
    save_model,
    validate_model,
)
from .dynamics import (
    FrequencyVector,
    Policy,
    evaluate_policy,
    frequencies_to_policy,
    policy_frequencies,
    regularity_report,
    regularize,
)
from .vlp import build_program, certify_full_rank, enumerate_regular_bases, regular_basis_solve
from .pareto import (
    EnumerationResult,
    VertexRecord,
    brute_force_oracle,
    efficiency_test,
    enumerate_efficient,
    initial_efficient_vertex,
    recover_weights,
)

__version__ = "0.1.0"
