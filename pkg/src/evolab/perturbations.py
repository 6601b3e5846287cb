"""Deterministic perturbations and the perturbed best-response choice function."""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import softmax

from .state import require_interior

CHOICE_TOL = 1e-10
CHOICE_MAX_ITER = 100


class ChoiceConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (KKT residual {residual:.3g})")
        self.residual = residual


@dataclass(frozen=True)
class Perturbation:
    """Strictly convex ``v`` on the simplex interior with ``|grad v| -> inf`` at the boundary.

    ``modulus`` is a strong-convexity constant on the tangent space:
    ``z' hess v(x) z >= modulus * z'z``. ``entropy_scale`` is set for
    ``v = eta * sum x ln x``, whose choice function is a softmax.
    """

    value: Callable
    grad: Callable
    hessian: Callable
    modulus: float
    name: str = "custom"
    entropy_scale: Optional[float] = None

    def hessian_quadform(self, x, z):
        z = np.asarray(z, dtype=float)
        return np.einsum("...i,...ij,...j->...", z, self.hessian(x), z)


def _diag(v):
    return v[..., :, None] * np.eye(v.shape[-1])


def entropy(eta=1.0):
    """``v(x) = eta * sum_i x_i ln x_i``; the associated PBR dynamics is logit."""
    if eta <= 0:
        raise ValueError("eta must be positive")

    def value(x):
        x = np.asarray(x, dtype=float)
        return eta * np.sum(x * np.log(np.where(x > 0, x, 1.0)), axis=-1)

    def grad(x):
        return eta * (np.log(require_interior(x)) + 1.0)

    def hessian(x):
        return _diag(eta / require_interior(x))

    return Perturbation(value, grad, hessian, modulus=eta, name=f"entropy({eta:g})", entropy_scale=eta)


def log_barrier(eta=1.0):
    """``v(x) = -eta * sum_i ln x_i``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return Perturbation(
        value=lambda x: -eta * np.sum(np.log(require_interior(x)), axis=-1),
        grad=lambda x: -eta / require_interior(x),
        hessian=lambda x: _diag(eta / require_interior(x) ** 2),
        modulus=eta,
        name=f"log-barrier({eta:g})",
    )


def zero():
    """``v = 0``: leaves perturbed dynamics equal to their base dynamics."""
    return Perturbation(
        value=lambda x: np.zeros(np.shape(x)[:-1]),
        grad=lambda x: np.zeros(np.shape(x)),
        hessian=lambda x: np.zeros(np.shape(x) + np.shape(x)[-1:]),
        modulus=0.0,
        name="zero",
    )


def choice(p, v, tol=CHOICE_TOL, max_iter=CHOICE_MAX_ITER):
    """Unique interior maximizer of ``p'y - v(y)`` over the simplex."""
    p = np.asarray(p, dtype=float)
    if v.entropy_scale is not None:
        return softmax(p / v.entropy_scale, axis=-1)
    if v.modulus <= 0:
        raise ValueError(f"perturbation {v.name!r} is not strictly convex")
    if p.ndim == 1:
        return _newton_choice(p, v, tol, max_iter)
    flat = p.reshape(-1, p.shape[-1])
    return np.stack([_newton_choice(row, v, tol, max_iter) for row in flat]).reshape(p.shape)


def _warm_start(p, v):
    # Floored softmax candidates, best objective wins. A tiny floor is nearly
    # exact for entropy-like perturbations; barrier-like ones need the larger
    # floor to keep their Hessians finite and the iteration count low.
    best, best_f = np.full(p.size, 1.0 / p.size), -np.inf
    base = softmax(p / v.modulus)
    for floor in (1e-150, 1e-8):
        y = np.maximum(base, floor)
        y /= y.sum()
        with np.errstate(all="ignore"):
            f = p @ y - v.value(y)
        if np.isfinite(f) and f > best_f:
            best, best_f = y, f
    return best


def _newton_choice(p, v, tol, max_iter):
    # Damped Newton on the KKT system of max p'y - v(y) s.t. 1'y = 1,
    # keeping y strictly positive with a fraction-to-boundary rule.
    n = p.size
    y = _warm_start(p, v)
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, n] = kkt[n, :n] = 1.0
    scale = max(1.0, np.abs(p).max())
    residual = np.inf
    for _ in range(max_iter):
        g = p - v.grad(y)
        residual = np.abs(g - g.mean()).max()
        if residual <= tol * scale:
            return y
        kkt[:n, :n] = v.hessian(y)
        dy = np.linalg.solve(kkt, np.concatenate([g, [0.0]]))[:n]
        dy -= dy.mean()
        # Newton decrement g'dy at roundoff level: y is as exact as the
        # dominant shares allow, even if the log-scale residual of a tiny share is not
        if g @ dy <= 1e-24 * scale:
            return y
        step = 1.0
        shrinking = dy < 0
        if np.any(shrinking):
            step = min(1.0, 0.99 * np.min(y[shrinking] / -dy[shrinking]))
        f0 = p @ y - v.value(y)
        slope = g @ dy
        trial = y + step * dy
        # near the optimum the predicted gain is below the resolution of f0;
        # then the undamped step is taken and the residual decides convergence
        if slope * step > 1e3 * np.finfo(float).eps * max(1.0, abs(f0)):
            while step > 1e-16:
                if p @ trial - v.value(trial) >= f0 + 1e-4 * step * slope:
                    break
                step *= 0.5
                trial = y + step * dy
        y = trial / trial.sum()
    raise ChoiceConvergenceError("choice solver did not converge", residual)
