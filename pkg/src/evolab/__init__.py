"""evolab: passivity analysis and simulation of evolutionary dynamics in population games."""
__version__ = "0.1.0"

from .edm import (EdmDescriptor, bnn, ept, logit, pairwise, pbr, perturbed, replicator, smith)
from .engine import LoopConfig, TrigPayoffPath, Trajectory, converged, integrate, integrate_batch, scalar_monotone
from .games import (GameDescriptor, anti_coordination, extended_hypnodisk, hypnodisk, jacobian_bound_estimate,
                    linear, perturbed_hypnodisk, perturbed_potential)
from .perturbations import choice, entropy, log_barrier
from .reports import CheckReport
from .state import (DomainError, ValidationError, best_response_set, excess_payoff, is_nash, make_state,
                    ternary_coords)
from .storage import (REPLICATOR_CANDIDATE, energy_function, ept_storage, kl_energy, pairwise_storage,
                      pbr_storage, perturbed_storage)

__all__ = [
    "CheckReport", "DomainError", "EdmDescriptor", "GameDescriptor", "LoopConfig", "REPLICATOR_CANDIDATE",
    "Trajectory", "TrigPayoffPath", "ValidationError", "anti_coordination", "best_response_set", "bnn",
    "choice", "converged", "energy_function", "entropy", "ept", "ept_storage", "excess_payoff",
    "extended_hypnodisk", "hypnodisk", "integrate", "integrate_batch", "is_nash", "jacobian_bound_estimate",
    "kl_energy", "linear", "log_barrier", "logit", "make_state", "pairwise", "pairwise_storage", "pbr",
    "pbr_storage", "perturbed", "perturbed_hypnodisk", "perturbed_potential", "perturbed_storage",
    "replicator", "scalar_monotone", "smith", "ternary_coords",
]
