"""Evolutionary dynamic models: vector fields ``V(p, x)`` on the simplex tangent space."""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .perturbations import Perturbation, choice, entropy
from .protocols import BNN, SMITH, RevisionProtocol
from .state import excess_payoff, require_interior
from .storage import StorageFunction, ept_storage, pairwise_storage, pbr_storage, perturbed_storage

NON_PASSIVE = "non-passive"
DELTA_PASSIVE = "delta-passive"
STRICT_OUTPUT = "strict-output"


@dataclass(frozen=True)
class EdmDescriptor:
    """A named vector field with its storage function and passivity class.

    ``eta`` is the strict-output index for ``declared_class == "strict-output"``.
    ``switching`` marks EPT / pairwise dynamics, the family that can be
    perturbed through :func:`perturbed`.
    """

    name: str
    field: Callable
    storage: Optional[StorageFunction] = None
    declared_class: str = NON_PASSIVE
    eta: float = 0.0
    interior_only: bool = False
    payoff_monotonic: bool = False
    switching: bool = False
    perturbation: Optional[Perturbation] = None
    kernel: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __call__(self, p, x):
        return self.field(p, x)


def replicator_field(p, x):
    x = np.asarray(x, dtype=float)
    return x * excess_payoff(p, x)


def ept_field(p, x, protocol: RevisionProtocol = BNN):
    x = np.asarray(x, dtype=float)
    r = protocol.rates(excess_payoff(p, x))
    return r - x * np.sum(r, axis=-1, keepdims=True)


def bnn_field(p, x):
    return ept_field(p, x, BNN)


def pairwise_field(p, x, protocol: RevisionProtocol = SMITH):
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    rates = protocol.rates(p[..., :, None] - p[..., None, :])  # rates[..., i, j] = rho_i(p_i - p_j)
    inflow = np.einsum("...ij,...j->...i", rates, x)
    return inflow - x * rates.sum(axis=-2)


def smith_field(p, x):
    return pairwise_field(p, x, SMITH)


def pbr_field(p, x, v: Perturbation):
    return choice(p, v) - np.asarray(x, dtype=float)


def logit_field(p, x, eta=1.0):
    return pbr_field(p, x, entropy(eta))


def perturbed_field(p, x, base, v: Perturbation):
    """Base field at the shifted payoff ``p - grad v(x)``."""
    return base(np.asarray(p, dtype=float) - v.grad(x), x)


def replicator():
    return EdmDescriptor("replicator", replicator_field,
                         kernel=(_kernels.REPLICATOR, np.zeros(1)))


def ept(protocol: RevisionProtocol):
    kernel = (_kernels.BNN, np.zeros(1)) if protocol is BNN else None
    name = "bnn" if protocol is BNN else f"ept({protocol.name})"
    return EdmDescriptor(name, lambda p, x: ept_field(p, x, protocol), ept_storage(protocol),
                         DELTA_PASSIVE, payoff_monotonic=True, switching=True, kernel=kernel)


def bnn():
    return ept(BNN)


def pairwise(protocol: RevisionProtocol):
    kernel = (_kernels.SMITH, np.zeros(1)) if protocol is SMITH else None
    name = "smith" if protocol is SMITH else f"pairwise({protocol.name})"
    return EdmDescriptor(name, lambda p, x: pairwise_field(p, x, protocol), pairwise_storage(protocol),
                         DELTA_PASSIVE, payoff_monotonic=True, switching=True, kernel=kernel)


def smith():
    return pairwise(SMITH)


def pbr(v: Perturbation, name=None):
    kernel = None
    if v.entropy_scale is not None:
        kernel = (_kernels.LOGIT, np.array([v.entropy_scale]))
    return EdmDescriptor(name or f"pbr({v.name})", lambda p, x: pbr_field(p, x, v), pbr_storage(v),
                         STRICT_OUTPUT, eta=v.modulus, perturbation=v, kernel=kernel)


def logit(eta=1.0):
    return pbr(entropy(eta), name=f"logit({eta:g})")


def perturbed(base: EdmDescriptor, v: Perturbation):
    """Total-payoff perturbation of an EPT or pairwise EDM.

    With a strongly convex ``v`` (modulus > 0) the result is strictly output
    passive with index ``v.modulus``; the storage is the base storage at the
    shifted payoff.
    """
    if not base.switching or base.storage is None:
        raise ValueError(f"{base.name!r} is not an EPT/pairwise dynamic with a storage function")
    kernel = None
    if v.entropy_scale is not None and base.kernel is not None:
        fid = {_kernels.BNN: _kernels.PERTURBED_BNN, _kernels.SMITH: _kernels.PERTURBED_SMITH}[base.kernel[0]]
        kernel = (fid, np.array([v.entropy_scale]))
    strict = v.modulus > 0

    def field(p, x):
        return perturbed_field(p, require_interior(x), base.field, v)

    return EdmDescriptor(
        f"perturbed({base.name},{v.name})", field, perturbed_storage(base.storage, v),
        STRICT_OUTPUT if strict else base.declared_class, eta=v.modulus if strict else base.eta,
        interior_only=True, switching=True, kernel=kernel)
