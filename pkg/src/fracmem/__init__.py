"""Pseudospectral simulation of the damped fractional Klein-Gordon equation
with nonlinear memory, plus numerical checks of its decay estimates."""

__version__ = "0.1.0"

from .params import (  # noqa: F401
    AdmissibleRange,
    ModelParams,
    ParameterError,
    admissible_exponent_interval,
    gn_theta,
    linear_decay_rate,
    validate_params,
)
from .spectral import Field, TorusGrid  # noqa: F401
