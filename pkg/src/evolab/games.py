"""Static payoff functions: Hypnodisk and its variants, anti-coordination,
perturbed concave-potential payoffs and linear games.
"""
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .state import DomainError, random_interior_states, tangent_basis

LOG_FLOOR = 1e-12
THIRD = 1.0 / 3.0
_ROT = np.array([[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]])


class FlooredEvaluationWarning(RuntimeWarning):
    """A log payoff term was evaluated with a share floored at 1e-12."""


@dataclass(frozen=True)
class GameDescriptor:
    name: str
    payoff: Callable
    n: Optional[int] = None
    jacobian: Optional[Callable] = None
    known_equilibria: tuple = ()
    interior_only: bool = False
    # (game id, parameter vector) for the compiled integrator, if supported
    kernel: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __call__(self, x):
        return self.payoff(x)


@dataclass(frozen=True)
class BumpFunction:
    """Decreasing C^1 bump on squared radius: 1 inside ``r_inner``, 0 beyond ``r_outer``.

    The transition uses the smoothstep ``3u^2 - 2u^3``.
    """

    r_inner: float = 0.01
    r_outer: float = 0.16

    def __post_init__(self):
        if not 0 <= self.r_inner < self.r_outer:
            raise ValueError("need 0 <= r_inner < r_outer")

    @classmethod
    def from_radii(cls, inner=0.1, outer=0.4):
        return cls(inner ** 2, outer ** 2)

    def _u(self, r):
        return np.clip((np.asarray(r, dtype=float) - self.r_inner) / (self.r_outer - self.r_inner), 0.0, 1.0)

    def __call__(self, r):
        u = self._u(r)
        return 1.0 - u * u * (3.0 - 2.0 * u)

    def derivative(self, r):
        u = self._u(r)
        return -6.0 * u * (1.0 - u) / (self.r_outer - self.r_inner)


DEFAULT_BUMP = BumpFunction()


def _log_terms(x):
    """Component-wise ``-ln x_i - 1`` with the boundary guard."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("log payoff terms need an interior state")
    if np.any(x < LOG_FLOOR):
        warnings.warn("share floored at 1e-12 in a log payoff term", FlooredEvaluationWarning, stacklevel=3)
        x = np.maximum(x, LOG_FLOOR)
    return -np.log(x) - 1.0


def _hypnodisk_angle(x, bump):
    d = np.asarray(x, dtype=float) - THIRD
    r = np.sum(d * d, axis=-1)
    return d, r, np.pi * (1.0 - bump(r))


def hypnodisk_payoff(x, bump=DEFAULT_BUMP):
    """Hypnodisk payoff: coordination (H(x) = x) inside the inner disk,
    anti-coordination (H(x) = 2/3 - x) outside the outer one, rotating between.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError("the Hypnodisk game has 3 strategies")
    d, _, theta = _hypnodisk_angle(x, bump)
    c = np.cos(theta)[..., None]
    s = (np.sqrt(3) / 3 * np.sin(theta))[..., None]
    return c * d + s * (x @ _ROT.T) + THIRD


def hypnodisk_jacobian(x, bump=DEFAULT_BUMP):
    x = np.asarray(x, dtype=float)
    d, r, theta = _hypnodisk_angle(x, bump)
    c, s = np.cos(theta), np.sin(theta)
    k = np.sqrt(3) / 3
    dtheta = (-np.pi * bump.derivative(r))[..., None] * 2.0 * d
    rot_d = d @ _ROT.T
    outer = -s[..., None] * d + (k * c)[..., None] * rot_d
    eye = np.eye(3)
    return (c[..., None, None] * eye + (k * s)[..., None, None] * _ROT
            + outer[..., :, None] * dtheta[..., None, :])


def hypnodisk(bump=DEFAULT_BUMP):
    return GameDescriptor(
        "hypnodisk",
        lambda x: hypnodisk_payoff(x, bump),
        n=3,
        jacobian=lambda x: hypnodisk_jacobian(x, bump),
        known_equilibria=(np.full(3, THIRD),),
        kernel=(_kernels.HYPNODISK, np.array([bump.r_inner, bump.r_outer, 0.0])),
    )


def perturbed_hypnodisk_payoff(x, bump=DEFAULT_BUMP):
    return hypnodisk_payoff(x, bump) + _log_terms(x)


def perturbed_hypnodisk(bump=DEFAULT_BUMP):
    return GameDescriptor(
        "hypnodisk-perturbed",
        lambda x: perturbed_hypnodisk_payoff(x, bump),
        n=3,
        jacobian=lambda x: hypnodisk_jacobian(x, bump) - _diag(1.0 / np.asarray(x, dtype=float)),
        known_equilibria=(np.full(3, THIRD),),
        interior_only=True,
        kernel=(_kernels.HYPNODISK, np.array([bump.r_inner, bump.r_outer, 1.0])),
    )


def _diag(v):
    return v[..., :, None] * np.eye(v.shape[-1])


def anti_coordination_payoff(x, x_o):
    return -(np.asarray(x, dtype=float) - np.asarray(x_o, dtype=float))


def anti_coordination(x_o):
    """Game ``F(x) = -(x - x_o)`` whose unique Nash equilibrium is ``x_o``."""
    x_o = np.array(x_o, dtype=float)
    n = x_o.size
    game = linear(-np.eye(n), x_o, name="anti-coordination")
    return GameDescriptor(
        game.name, lambda x: anti_coordination_payoff(x, x_o), n=n,
        jacobian=game.jacobian, known_equilibria=(x_o,), kernel=game.kernel)


def linear(A, c=None, name="linear"):
    """Linear game ``F(x) = A x + c``."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    c = np.zeros(n) if c is None else np.array(c, dtype=float)
    return GameDescriptor(
        name,
        lambda x: np.asarray(x, dtype=float) @ A.T + c,
        n=n,
        jacobian=lambda x: np.broadcast_to(A, np.shape(x)[:-1] + A.shape),
        kernel=(_kernels.LINEAR, np.concatenate([[n], A.ravel(), c, [0.0]])),
    )


@dataclass(frozen=True)
class Potential:
    """A concave potential ``f`` with gradient and Hessian.

    ``quadratic`` holds ``(Q, b)`` when ``f(x) = x'Qx/2 + b'x``; such
    potentials can run on the compiled integrator.
    """

    value: Callable
    grad: Callable
    hessian: Callable
    quadratic: Optional[tuple] = field(default=None, repr=False, compare=False)


def quadratic_potential(Q=None, b=None, n=3):
    """``f(x) = x'Qx/2 + b'x``; the default ``Q = -I`` gives ``f = -|x|^2/2``."""
    Q = -np.eye(n) if Q is None else np.array(Q, dtype=float)
    n = Q.shape[0]
    b = np.zeros(n) if b is None else np.array(b, dtype=float)
    return Potential(
        value=lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, Q, x) + np.asarray(x) @ b,
        grad=lambda x: np.asarray(x, dtype=float) @ Q.T + b,
        hessian=lambda x: np.broadcast_to(Q, np.shape(x)[:-1] + Q.shape),
        quadratic=(Q, b),
    )


def perturbed_potential_payoff(x, f_grad, a=None):
    """Gradient of ``f(x) + sum_i x_i ln(a_i / x_i)``."""
    x = np.asarray(x, dtype=float)
    log_a = 0.0 if a is None else np.log(np.asarray(a, dtype=float))
    return f_grad(x) + log_a + _log_terms(x)


def perturbed_potential(f=None, a=None, n=3):
    """Entropy-perturbed concave potential game; ``f`` defaults to ``-|x|^2/2``."""
    f = quadratic_potential(n=n) if f is None else f
    if a is not None:
        a = np.array(a, dtype=float)
        if np.any(a <= 0):
            raise ValueError("a must be positive")
    kernel = None
    if f.quadratic is not None:
        Q, b = f.quadratic
        m = Q.shape[0]
        log_a = np.zeros(m) if a is None else np.log(a)
        kernel = (_kernels.LINEAR, np.concatenate([[m], Q.ravel(), b + log_a, [1.0]]))
        n = m
    equilibria = ()
    if f.quadratic is not None and a is None and np.allclose(f.quadratic[0], -np.eye(n)) \
            and not np.any(f.quadratic[1]):
        equilibria = (np.full(n, 1.0 / n),)
    return GameDescriptor(
        "perturbed-potential",
        lambda x: perturbed_potential_payoff(x, f.grad, a),
        n=n,
        jacobian=lambda x: f.hessian(x) - _diag(1.0 / np.asarray(x, dtype=float)),
        known_equilibria=equilibria,
        interior_only=True,
        kernel=kernel,
    )


def perturbed_potential_objective(f, a=None):
    """Return ``(value, grad, hessian)`` of ``f(x) + sum_i x_i ln(a_i / x_i)``."""
    def value(x):
        x = np.asarray(x, dtype=float)
        log_a = 0.0 if a is None else np.log(a)
        return f.value(x) + np.sum(x * (log_a - np.log(x)), axis=-1)

    def grad(x):
        return perturbed_potential_payoff(x, f.grad, a)

    def hessian(x):
        return f.hessian(x) - _diag(1.0 / np.asarray(x, dtype=float))

    return value, grad, hessian


def _aggregate(x):
    x = np.asarray(x, dtype=float)
    return np.stack([x[..., 0], x[..., 1], x[..., 2:].sum(axis=-1)], axis=-1)


def extended_hypnodisk_payoff(x, scale=1.0, bump=DEFAULT_BUMP):
    """Hypnodisk on ``(x_1, x_2, x_3 + ... + x_n)``; strategies 3..n share the third payoff."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n < 3:
        raise ValueError("need n >= 3")
    h = hypnodisk_payoff(_aggregate(x), bump)
    idx = np.minimum(np.arange(n), 2)
    return scale * h[..., idx]


def extended_hypnodisk(n, nu=None, bump=DEFAULT_BUMP, samples=10_000, seed=0):
    """Extended Hypnodisk for ``n >= 3``; with ``nu`` the payoff is rescaled by
    ``nu / delta`` where ``delta`` is 1.1 times the sampled Jacobian bound.
    """
    if n < 3:
        raise ValueError("need n >= 3")
    idx = np.minimum(np.arange(n), 2)
    agg = np.zeros((3, n))
    agg[0, 0] = agg[1, 1] = 1.0
    agg[2, 2:] = 1.0

    def jac(x, scale=1.0):
        return scale * hypnodisk_jacobian(_aggregate(x), bump)[..., idx, :] @ agg

    base = GameDescriptor("extended-hypnodisk", lambda x: extended_hypnodisk_payoff(x, 1.0, bump),
                          n=n, jacobian=jac)
    if nu is None:
        return base
    delta = 1.1 * jacobian_bound_estimate(base, samples, np.random.default_rng(seed))
    scale = nu / delta
    return GameDescriptor("extended-hypnodisk",
                          lambda x: extended_hypnodisk_payoff(x, scale, bump),
                          n=n, jacobian=lambda x: jac(x, scale))


def numerical_jacobian(payoff, x, h=1e-6):
    """Central-difference Jacobian ``J[..., i, k] = dF_i / dx_k``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        cols.append((np.asarray(payoff(x + e)) - np.asarray(payoff(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def jacobian_bound_estimate(game, samples=10_000, rng=None, h=1e-6):
    """Sampled estimate of ``sup z'DF(x)z / z'z`` over interior x and tangent z.

    This is a lower bound on the true supremum. Points where the Jacobian is
    not finite (or where finite differences would leave the domain) are
    skipped and reported through a ``RuntimeWarning``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n = game.n
    x = random_interior_states(rng, samples, n)
    skipped = 0
    if game.jacobian is None:
        keep = x.min(axis=-1) > 10 * h
        skipped += int((~keep).sum())
        x = x[keep]
        J = numerical_jacobian(game.payoff, x, h)
    else:
        J = np.asarray(game.jacobian(x))
    finite = np.all(np.isfinite(J), axis=(-2, -1))
    skipped += int((~finite).sum())
    J = J[finite]
    if skipped:
        warnings.warn(f"jacobian_bound_estimate skipped {skipped} points", RuntimeWarning, stacklevel=2)
    if J.shape[0] == 0:
        raise ValueError("no usable samples")
    q = tangent_basis(n)
    sym = 0.5 * (J + np.swapaxes(J, -1, -2))
    restricted = q.T @ sym @ q
    return float(np.linalg.eigvalsh(restricted)[..., -1].max())
