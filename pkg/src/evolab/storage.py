"""Storage functions, the closed-loop energy function and the KL-style energy."""
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .games import perturbed_potential_objective, quadratic_potential
from .perturbations import Perturbation, choice
from .state import excess_payoff, require_interior

QUAD_ABS_TOL = 1e-10


@dataclass(frozen=True)
class StorageFunction:
    name: str
    func: Callable
    is_strict: bool = True
    interior_only: bool = False

    def __call__(self, p, x):
        return self.func(p, x)


def _gamma_by_quadrature(rates, p_hat):
    # gamma(p_hat) = int_0^1 p_hat . rho(s p_hat) ds, the potential with gamma(0) = 0
    p_hat = np.asarray(p_hat, dtype=float)
    flat = p_hat.reshape(-1, p_hat.shape[-1])
    out = np.array([integrate.quad(lambda s: float(q @ rates(s * q)), 0.0, 1.0,
                                   epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200)[0]
                    for q in flat])
    return out.reshape(p_hat.shape[:-1])


def ept_storage(protocol):
    """``S(p, x) = gamma(p_hat)``; ``gamma`` falls back to a line integral of the rates."""
    if protocol.kind != "ept":
        raise ValueError("ept_storage needs an ept protocol")
    if protocol.gamma is not None:
        gamma = protocol.gamma
    else:
        def gamma(p_hat):
            return _gamma_by_quadrature(protocol.rates, p_hat)
    return StorageFunction(f"ept[{protocol.name}]", lambda p, x: gamma(excess_payoff(p, x)))


def _differences(p):
    p = np.asarray(p, dtype=float)
    return p[..., :, None] - p[..., None, :]


def _integral_by_quadrature(rates, d):
    n = d.shape[-1]
    out = np.empty_like(d)
    for idx in np.ndindex(*d.shape):
        j = idx[-2]
        out[idx] = integrate.quad(lambda s: float(rates(np.full((n, n), s))[j, 0]), 0.0, d[idx],
                                  epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200)[0]
    return out


def pairwise_storage(protocol):
    """``S(p, x) = sum_i x_i sum_j int_0^{p_j - p_i} rho_j(s) ds``."""
    if protocol.kind != "pairwise":
        raise ValueError("pairwise_storage needs a pairwise protocol")

    def func(p, x):
        d = _differences(p)  # d[..., j, i] = p_j - p_i
        if protocol.integral is not None:
            inner = protocol.integral(d)
        else:
            inner = _integral_by_quadrature(protocol.rates, d)
        return np.sum(np.asarray(x, dtype=float) * inner.sum(axis=-2), axis=-1)

    return StorageFunction(f"pairwise[{protocol.name}]", func)


def pbr_storage(v: Perturbation):
    """Gap between the perturbed best value and the value at x."""
    def func(p, x):
        p = np.asarray(p, dtype=float)
        x = require_interior(x)
        at_x = np.sum(p * x, axis=-1) - v.value(x)
        if v.entropy_scale is not None:
            eta = v.entropy_scale
            best = eta * logsumexp(p / eta, axis=-1)
        else:
            y = choice(p, v)
            best = np.sum(p * y, axis=-1) - v.value(y)
        return best - at_x

    return StorageFunction(f"pbr[{v.name}]", func, interior_only=True)


def perturbed_storage(storage, v: Perturbation):
    """Base storage evaluated at the shifted payoff ``p - grad v(x)``."""
    return StorageFunction(
        f"perturbed[{storage.name},{v.name}]",
        lambda p, x: storage(np.asarray(p, dtype=float) - v.grad(x), x),
        is_strict=storage.is_strict,
        interior_only=True,
    )


def replicator_candidate_storage(p, x):
    """``(1/4) sum_ij x_i x_j (p_i - p_j)^2``: the storage candidate forced by (P1)
    for replicator dynamics (taking the free x-only term to be zero).
    """
    x = np.asarray(x, dtype=float)
    d = _differences(p)
    return 0.25 * np.einsum("...i,...j,...ij->...", x, x, d * d)


REPLICATOR_CANDIDATE = StorageFunction("replicator-candidate", replicator_candidate_storage,
                                       is_strict=False)


@dataclass(frozen=True)
class EnergyFunction:
    """``E(p, x) = S(p, x) + max f~ - f~(x)`` for the mean-removed smoothed loop."""

    storage: StorageFunction
    ftilde: Callable
    ftilde_max: float
    maximizer: np.ndarray

    def __call__(self, p, x):
        return self.storage(p, x) + self.ftilde_max - self.ftilde(x)


def energy_function(storage, f=None, a=None, n=3):
    """Build the energy for ``f~(x) = f(x) + sum x_i ln(a_i / x_i)``.

    The maximum of ``f~`` is found once with the interior Newton solver
    (maximizing ``0'y - (-f~(y))``) and cached.
    """
    f = quadratic_potential(n=n) if f is None else f
    value, grad, hess = perturbed_potential_objective(f, a)
    negated = Perturbation(lambda x: -value(x), lambda x: -grad(x), lambda x: -hess(x),
                           modulus=1.0, name="-ftilde")
    n = len(np.atleast_1d(f.grad(np.full(n, 1.0 / n))))
    y = choice(np.zeros(n), negated)
    y.flags.writeable = False
    return EnergyFunction(storage, value, float(value(y)), y)


def kl_energy(x, x_ne):
    """``sum_i x_i ln(x_ne_i / x_i)``.

    Note the sign: this is minus the KL divergence of x from x_ne, so it is
    non-positive and vanishes only at ``x == x_ne``.
    """
    x = require_interior(x)
    x_ne = require_interior(x_ne)
    return np.sum(x * np.log(x_ne / x), axis=-1)
