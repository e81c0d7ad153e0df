"""Crowdsourcing objective functions: evaluation, convexity checks and inference."""

from .core import (
    FAMILIES,
    ZETA,
    DomainError,
    ModelHandle,
    ParamPoint,
    ResponseMatrix,
    ValidationError,
    validate_responses,
)
from .infer import (
    InferenceResult,
    confidence,
    infer_alternating,
    infer_subgradient,
    round_deterministic,
    round_probabilistic,
    solve_convex,
)
from .models import crossing_g, evaluate, full_objective, reduced_gradient, reduced_objective
from .simulate import GroundTruth, SimConfig, generate, prng_stream
from .verify import (
    Battery,
    PropertyReport,
    WitnessReport,
    check_axiom1,
    check_p1,
    check_p2,
    check_p3,
    find_axiom1_eps,
    hyperplane_identity,
    jensen_probe,
    run_battery,
    theorem1_witness,
)

__version__ = "0.1.0"
