"""Sherman-Morrison-Woodbury updates with approximate inverses.

Exact and perturbed low-rank inverse updates, the forward and backward error
bounds that govern them, engineered capacitance-matrix families, and seeded
sweeps that measure actual errors against the bounds.
"""

from .bounds import (
    BoundInputs,
    BoundReport,
    backward_bound,
    forward_bound,
    measure_inputs,
)
from .core import ProblemInstance, capacitance, smw_inverse_approx, smw_inverse_exact
from .experiments import ExperimentConfig, SweepResult, run_sweep
from .linalg import SingularMatrixError, invert, two_norm
from .perturbation import PerturbationSpec, perturb_instance

__all__ = [
    "BoundInputs",
    "BoundReport",
    "ExperimentConfig",
    "PerturbationSpec",
    "ProblemInstance",
    "SingularMatrixError",
    "SweepResult",
    "backward_bound",
    "capacitance",
    "forward_bound",
    "invert",
    "measure_inputs",
    "perturb_instance",
    "run_sweep",
    "smw_inverse_approx",
    "smw_inverse_exact",
    "two_norm",
]
__version__ = "0.1.0"
