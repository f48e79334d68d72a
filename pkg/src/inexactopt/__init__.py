"""Adaptive first-order methods under inexact model oracles.

Solvers adapt simultaneously to the curvature and to the declared
inexactness of their model; every convergence statement they rely on is
exposed as a runtime-checkable inequality along the solver trace.
"""

from .geometry import (FeasibleSet, LinearModel, ProxSetup, bregman, diameter_bound,
                       dual_norm, mirror_step, prox_step)
from .oracles import (ModelOracle, ModelParams, exact_oracle, perturb_gradient,
                      perturb_value, perturbed_oracle, validate_model)
from .problems import ProblemSpec, generate_problem

__all__ = [
    "FeasibleSet", "LinearModel", "ProxSetup", "bregman", "diameter_bound",
    "dual_norm", "mirror_step", "prox_step",
    "ModelOracle", "ModelParams", "exact_oracle", "perturb_gradient",
    "perturb_value", "perturbed_oracle", "validate_model",
    "ProblemSpec", "generate_problem",
]

__version__ = "0.1.0"
