from .primitives import (
    DomainError,
    NonSmoothError,
    SmoothingConfig,
    smoothing,
    current_smoothing,
    exp,
    log,
    sqrt,
    sin,
    cos,
    sincos,
    ramp,
    heaviside,
    dirac,
    dirac_a,
)
from .dual import Dual, forward_directional, forward_jacobian, derivative
from .tape import Tape, Node, Var, record, reverse_sweep, reverse_jacobian, gradient
from .baselines import complex_step_derivative, central_difference, central_second_difference, central_gradient

__all__ = [
    "DomainError", "NonSmoothError", "SmoothingConfig", "smoothing", "current_smoothing",
    "exp", "log", "sqrt", "sin", "cos", "sincos", "ramp", "heaviside", "dirac", "dirac_a",
    "Dual", "forward_directional", "forward_jacobian", "derivative",
    "Tape", "Node", "Var", "record", "reverse_sweep", "reverse_jacobian", "gradient",
    "complex_step_derivative", "central_difference", "central_second_difference", "central_gradient",
]
