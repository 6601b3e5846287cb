"""Population states, tangent vectors, excess payoffs and Nash tests.

States, payoffs and tangent vectors are plain float arrays whose last axis
indexes strategies; most functions broadcast over leading batch axes.
Strategy indices are 0-based.
"""
from dataclasses import dataclass

import numpy as np

SUM_TOL = 1e-12
NEG_TOL = 1e-12
TANGENT_TOL = 1e-10
BR_TOL = 1e-9


class ValidationError(ValueError):
    """Input cannot be turned into a valid population state."""


class DomainError(ValueError):
    """A map was evaluated outside its domain (e.g. log terms on the boundary)."""


def make_state(weights, strict=False):
    """Normalize non-negative weights onto the simplex.

    Entries in ``[-1e-12, 0)`` are treated as round-off and zeroed. With
    ``strict=True`` the input must already be a state: normalization may not
    move any entry by more than 1e-6 relative.

    >>> make_state([2, 6, 0])
    array([0.25, 0.75, 0.  ])
    """
    w = np.array(weights, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise ValidationError(f"expected a 1-d vector with n >= 2, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValidationError("weights must be finite")
    if np.any(w < -NEG_TOL):
        raise ValidationError(f"negative weight {w.min():.3g} beyond tolerance")
    w[w < 0] = 0.0
    total = w.sum()
    if total <= 0:
        raise ValidationError("weights must have a positive entry")
    x = w / total
    if strict and np.any(np.abs(x - w) > 1e-6 * np.abs(w)):
        raise ValidationError("weights are not normalized (strict mode)")
    x.flags.writeable = False
    return x


def clamp_to_simplex(x, strict=False):
    """Zero negative shares and renormalize along the last axis.

    Integrator drift is expected to be tiny; ``strict=True`` rejects any
    share below ``-1e-12``.
    """
    x = np.array(x, dtype=float)
    if strict and np.any(x < -NEG_TOL):
        raise ValidationError(f"share {x.min():.3g} below -{NEG_TOL}")
    x[x < 0] = 0.0
    return x / x.sum(axis=-1, keepdims=True)


def is_state(x, tol=SUM_TOL):
    x = np.asarray(x, dtype=float)
    return bool(np.all(x >= -NEG_TOL) and np.all(np.abs(x.sum(axis=-1) - 1) <= tol))


def is_tangent(z, tol=TANGENT_TOL):
    """True if every vector along the last axis sums to zero (scaled by its max-norm)."""
    z = np.asarray(z, dtype=float)
    scale = np.maximum(1.0, np.abs(z).max(axis=-1))
    return bool(np.all(np.abs(z.sum(axis=-1)) <= tol * scale))


def require_interior(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("state must lie in the interior of the simplex")
    return x


def excess_payoff(p, x):
    """Return ``p - (p.x) 1``."""
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    if p.shape[-1] != x.shape[-1]:
        raise ValueError(f"dimension mismatch: p has {p.shape[-1]}, x has {x.shape[-1]}")
    return p - np.sum(p * x, axis=-1, keepdims=True)


def best_response_set(p, tol=BR_TOL):
    """Indices whose payoff is within ``tol`` of the maximum."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = np.asarray(p, dtype=float)
    return frozenset(np.flatnonzero(p >= p.max() - tol).tolist())


@dataclass(frozen=True)
class NashReport:
    is_nash: bool
    # (strategy, share, payoff gap to the best response) for each offending strategy
    violations: tuple
    max_gap: float

    def __bool__(self):
        return self.is_nash


def is_nash(game, x, tol=BR_TOL):
    """Check that every strategy in use (share > tol) is a best response."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(game(x), dtype=float)
    br = best_response_set(p, tol)
    top = p.max()
    violations = tuple((int(i), float(x[i]), float(top - p[i]))
                       for i in np.flatnonzero(x > tol) if i not in br)
    gap = max((v[2] for v in violations), default=0.0)
    return NashReport(not violations, violations, gap)


def ternary_coords(x):
    """Embed 3-strategy states into the plane: vertex 1 -> (0, 0), vertex 2 -> (1, 0)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError("ternary coordinates need n = 3")
    u = x[..., 1] + 0.5 * x[..., 2]
    v = np.sqrt(3) / 2 * x[..., 2]
    return u, v


def tangent_basis(n):
    """Orthonormal basis (n x (n-1)) of the tangent space {z : sum(z) = 0}."""
    q, _ = np.linalg.qr(np.eye(n)[:, :-1] - 1.0 / n)
    return q


def random_interior_states(rng, size, n=3, alpha=1.0):
    """Dirichlet samples; alpha=1 is uniform on the simplex."""
    x = rng.dirichlet(np.full(n, alpha), size=size)
    # guard against exact zeros from underflow for small alpha
    return clamp_to_simplex(np.maximum(x, 1e-300))
