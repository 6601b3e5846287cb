"""Revision protocols for excess-payoff (EPT) and pairwise-comparison dynamics."""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

_VALIDATION_SEED = 20170301


def positive_part(a):
    return np.maximum(a, 0.0)


@dataclass(frozen=True)
class RevisionProtocol:
    """Switch-rate functions.

    ``kind == "ept"``: ``rates(p_hat)`` maps excess payoffs (..., n) to
    non-negative rates (..., n); ``gamma`` is an optional potential with
    ``grad gamma = rates`` and ``gamma(0) = 0``.

    ``kind == "pairwise"``: ``rates(d)`` acts on a difference matrix with
    ``d[..., i, j] = p_i - p_j`` and returns ``rho_i(d[..., i, j])``
    entry-wise; ``integral(d)`` is the matching antiderivative from 0.

    Protocols are checked by sampling on construction (non-negativity plus
    acuteness/integrability or sign preservation).
    """

    kind: str
    rates: Callable
    gamma: Optional[Callable] = None
    integral: Optional[Callable] = None
    name: str = "custom"
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("ept", "pairwise"):
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if self.validate:
            problems = protocol_problems(self)
            if problems:
                raise ValueError(f"invalid {self.kind} protocol {self.name!r}: " + "; ".join(problems))


def acuteness_holds(rates, p_hat):
    """(A): ``p_hat . rho(p_hat) > 0`` wherever ``p_hat`` has a positive entry."""
    p_hat = np.asarray(p_hat, dtype=float)
    inner = np.sum(p_hat * rates(p_hat), axis=-1)
    applicable = np.any(p_hat > 0, axis=-1)
    return ~applicable | (inner > 0)


def sign_preservation_holds(rates, d):
    """(SP): ``sgn(rho(d)) == sgn([d]_+)`` for scalar differences ``d``."""
    d = np.asarray(d, dtype=float)
    return np.sign(rates(d)) == np.sign(positive_part(d))


def integrability_error(rates, gamma, p_hat, h=1e-6):
    """Relative gap between the finite-difference gradient of ``gamma`` and ``rates``."""
    p_hat = np.asarray(p_hat, dtype=float)
    n = p_hat.shape[-1]
    grad = np.empty_like(p_hat)
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        grad[..., k] = (gamma(p_hat + e) - gamma(p_hat - e)) / (2 * h)
    r = rates(p_hat)
    return np.abs(grad - r).max(axis=-1) / np.maximum(1.0, np.abs(r).max(axis=-1))


def protocol_problems(protocol, samples=500, seed=_VALIDATION_SEED):
    rng = np.random.default_rng(seed)
    problems = []
    if protocol.kind == "ept":
        for n in (3, 4):
            p_hat = rng.normal(size=(samples, n)) * rng.choice([1e-3, 1.0, 10.0], size=(samples, 1))
            r = np.asarray(protocol.rates(p_hat))
            if r.shape != p_hat.shape:
                problems.append("rates must map (..., n) to (..., n)")
                break
            if np.any(r < 0):
                problems.append("negative rates")
            if not np.all(acuteness_holds(protocol.rates, p_hat)):
                problems.append("acuteness (A) fails")
            if protocol.gamma is not None:
                if np.any(integrability_error(protocol.rates, protocol.gamma, p_hat) > 1e-6):
                    problems.append("integrability (I): grad gamma != rates")
                if abs(float(protocol.gamma(np.zeros(n)))) > 1e-12:
                    problems.append("gamma(0) != 0")
    else:
        d = np.concatenate([rng.normal(size=samples) * 10.0 ** rng.integers(-4, 2, size=samples), [0.0]])
        r = np.asarray(protocol.rates(d))
        if np.any(r < 0):
            problems.append("negative rates")
        if not np.all(sign_preservation_holds(protocol.rates, d)):
            problems.append("sign preservation (SP) fails")
    return problems


def _half_square_positive(a):
    return 0.5 * positive_part(a) ** 2


BNN = RevisionProtocol(
    "ept", positive_part,
    gamma=lambda p_hat: np.sum(_half_square_positive(p_hat), axis=-1),
    name="bnn")

SMITH = RevisionProtocol("pairwise", positive_part, integral=_half_square_positive, name="smith")


def power_ept(k):
    """EPT protocol ``rho_i = [p_hat_i]_+^k`` with potential ``sum [p_hat]_+^(k+1) / (k+1)``."""
    return RevisionProtocol(
        "ept", lambda p_hat: positive_part(p_hat) ** k,
        gamma=lambda p_hat: np.sum(positive_part(p_hat) ** (k + 1), axis=-1) / (k + 1),
        name=f"ept-power-{k}")


def power_pairwise(k):
    return RevisionProtocol(
        "pairwise", lambda d: positive_part(d) ** k,
        integral=lambda d: positive_part(d) ** (k + 1) / (k + 1),
        name=f"pairwise-power-{k}")
