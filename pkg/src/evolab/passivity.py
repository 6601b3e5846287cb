"""Numeric auditors for storage functions and passivity-related conditions.

All checks work on batches of ``(p, x)`` samples. Gradients in ``p`` use
central differences along the coordinate axes; derivatives in ``x`` are taken
along the field itself (``V`` is tangent, so ``x + hV`` stays on the affine
hull of the simplex and no parameterization is needed).
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.stats import norm, qmc

from .perturbations import choice
from .protocols import RevisionProtocol, acuteness_holds, integrability_error, sign_preservation_holds
from .reports import CheckReport
from .state import DomainError, excess_payoff

log = logging.getLogger(__name__)

P1_TOL = 1e-5
P2_TOL = 1e-8
CONDITION_TOL = 1e-10
REST_TOL = 1e-10
STRICT_V_TOL = 1e-6
ZERO_STORAGE_TOL = 1e-10
# x samples are mixed with the centroid by this weight so that x +- hV stays interior
INTERIOR_MIX = 1e-3
# quadrature defect / (dt^2 * window) measured at about 0.11 on BNN with the
# anti-coordination game; the default keeps a 10x margin
RESIDUAL_TOL_C = 1.0
CONDITIONS = ("NS", "PC", "SPC", "A", "SP", "I")


# ---------------------------------------------------------------- sampling

def sample_pairs(rng, size, n=3, scale=(1e-2, 10.0), mix=INTERIOR_MIX):
    """Random interior ``x`` (uniform on the simplex, pulled slightly inward) and
    Gaussian payoffs whose overall scale is log-uniform in ``scale``.
    """
    x = rng.dirichlet(np.ones(n), size=size)
    x = (1 - mix) * x + mix / n
    s = np.exp(rng.uniform(np.log(scale[0]), np.log(scale[1]), size=(size, 1)))
    p = s * rng.normal(size=(size, n))
    return p, x


def argmax_states(p, rng, tol=1e-9):
    """For each payoff row, a random state supported on its best-response set."""
    p = np.asarray(p, dtype=float)
    br = p >= p.max(axis=-1, keepdims=True) - tol
    w = rng.uniform(0.05, 1.0, size=p.shape) * br
    return w / w.sum(axis=-1, keepdims=True)


def structured_samples(n=3, rng=None, repeats=4):
    """Vertices, edge points, the centroid and tied payoffs.

    Payoffs come in three flavours for every state: uniform (all tie), a
    unique best response at a vertex in the support, and a unique best
    response outside the support.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    eye = np.eye(n)
    states = [eye[i] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            for w in (0.5, 0.2):
                states.append(w * eye[i] + (1 - w) * eye[j])
    states.append(np.full(n, 1.0 / n))
    ps, xs = [], []
    for x in states:
        support = np.flatnonzero(x > 0)
        outside = np.flatnonzero(x == 0)
        for _ in range(repeats):
            c = rng.normal()
            ps.append(np.full(n, c))
            k = rng.choice(support)
            ps.append(c - rng.uniform(0.1, 2.0, size=n) * (np.arange(n) != k))
            if outside.size:
                k = rng.choice(outside)
                ps.append(c - rng.uniform(0.1, 2.0, size=n) * (np.arange(n) != k))
            # ties across the whole support: x is a best response
            q = np.full(n, c) - rng.uniform(0.1, 2.0, size=n)
            q[support] = c
            ps.append(q)
            xs.extend([x] * (len(ps) - len(xs)))
    return np.array(ps), np.array(xs)


def _needs_interior(*objs):
    return any(getattr(o, "interior_only", False) for o in objs)


def _evaluate(fn, p, x):
    """Evaluate ``fn`` on the batch; on a domain error fall back to rows and mark failures NaN."""
    try:
        return np.asarray(fn(p, x), dtype=float)
    except DomainError:
        out = []
        for pi, xi in zip(p, x):
            try:
                out.append(np.asarray(fn(pi, xi), dtype=float))
            except DomainError:
                out.append(None)
        shape = next((o.shape for o in out if o is not None), ())
        return np.array([np.full(shape, np.nan) if o is None else o for o in out])


def _points(sampler_args, points, interior, h):
    p, x = sampler_args
    if points is not None:
        pp, xx = (np.atleast_2d(np.asarray(a, dtype=float)) for a in points)
        p, x = np.concatenate([p, pp]), np.concatenate([x, xx])
    skipped = 0
    if interior:
        keep = x.min(axis=-1) > 2 * h
        skipped = int((~keep).sum())
        p, x = p[keep], x[keep]
    return p, x, skipped


# ---------------------------------------------------------------- derivatives

def payoff_gradient(storage, p, x, h=1e-5):
    """Central-difference gradient of ``S`` with respect to ``p``."""
    p = np.asarray(p, dtype=float)
    n = p.shape[-1]
    grad = np.empty(np.broadcast_shapes(p.shape, np.shape(x)))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        grad[..., k] = (_evaluate(storage, p + e, x) - _evaluate(storage, p - e, x)) / (2 * h)
    return grad


def state_derivative_along(storage, p, x, v, h=1e-6):
    """``grad_x S . v`` by a central difference along the unit vector ``v / |v|``."""
    v = np.asarray(v, dtype=float)
    length = np.linalg.norm(v, axis=-1, keepdims=True)
    u = np.divide(v, length, out=np.zeros_like(v), where=length > 0)
    d = (_evaluate(storage, p, x + h * u) - _evaluate(storage, p, x - h * u)) / (2 * h)
    return d * length[..., 0]


# ---------------------------------------------------------------- (P1) / (P2)

def check_p1(storage, edm, samples=1000, h=1e-5, rng=None, points=None, tol=P1_TOL):
    """Compare the p-gradient of ``storage`` with the field ``edm``.

    Violation: ``max|grad_p S - V| / max(1, |V|) > tol``.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ValueError("h must lie in [1e-7, 1e-3]")
    rng = np.random.default_rng() if rng is None else rng
    n = _dim(points, 3)
    p, x, skipped = _points(sample_pairs(rng, samples, n), points, _needs_interior(storage, edm), h)
    v = _evaluate(edm, p, x)
    g = payoff_gradient(storage, p, x, h)
    err = np.abs(g - v).max(axis=-1) / np.maximum(1.0, np.linalg.norm(v, axis=-1))
    ok = np.isfinite(err)
    skipped += int((~ok).sum())
    return CheckReport.from_margins(f"p1:{storage.name}~{edm.name}", p[ok], x[ok], err[ok], tol,
                                    details={"h": h, "skipped": skipped,
                                             "max_relative_error": float(err[ok].max(initial=0.0))})


def p2_margins(storage, edm, p, x, eta=0.0, h=1e-6):
    """Return ``(derivative, threshold, |V|)`` for the (P2) inequality at each sample."""
    v = _evaluate(edm, p, x)
    d = state_derivative_along(storage, p, x, v, h)
    vv = np.sum(v * v, axis=-1)
    threshold = -eta * vv + P2_TOL * np.maximum(1.0, vv)
    return d, threshold, np.sqrt(vv)


def check_p2(storage, edm, eta=0.0, samples=1000, h=1e-6, rng=None, points=None, structured=False,
             scale=(1e-2, 10.0)):
    """(P2): ``grad_x S . V <= -eta |V|^2`` up to ``1e-8 max(1, |V|^2)``.

    Strictness is reported in ``details``: samples where the derivative is
    within 1e-8 of zero while ``|V| > 1e-6``. For switching dynamics the
    derivative is cubic in the payoff scale, so this count is only
    meaningful when ``scale`` keeps payoffs away from zero.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    rng = np.random.default_rng() if rng is None else rng
    n = _dim(points, 3)
    base = sample_pairs(rng, samples, n, scale)
    if structured:
        sp, sx = structured_samples(n, rng)
        points = (sp, sx) if points is None else (np.concatenate([np.atleast_2d(points[0]), sp]),
                                                  np.concatenate([np.atleast_2d(points[1]), sx]))
    p, x, skipped = _points(base, points, _needs_interior(storage, edm), h)
    d, threshold, vnorm = p2_margins(storage, edm, p, x, eta, h)
    ok = np.isfinite(d)
    skipped += int((~ok).sum())
    flat = (np.abs(d) <= P2_TOL) & (vnorm > STRICT_V_TOL)
    return CheckReport.from_margins(
        f"p2:{storage.name}~{edm.name}", p[ok], x[ok], d[ok], threshold[ok],
        details={"eta": eta, "h": h, "skipped": skipped,
                 "strictness_violations": int(flat[ok].sum()), "storage_is_strict": storage.is_strict})


def _dim(points, default):
    if points is None:
        return default
    return np.atleast_2d(points[1]).shape[-1]


# ---------------------------------------------------------------- trajectories

@dataclass(frozen=True)
class PassivityResidual:
    """Supplied minus stored energy over ``[t0, t1]``.

    ``supplied`` is the integral of ``p' x' - eta |x'|^2``; for a passive
    pair the residual is non-negative up to the quadrature tolerance ``tol``.
    """

    t0: float
    t1: float
    supplied: float
    stored_delta: float
    residual: float
    tol: float

    @property
    def ok(self):
        return self.residual >= -self.tol


def _windows(times, window, stride):
    dt = times[1] - times[0]
    k = max(1, int(round(window / dt)))
    s = max(1, int(round((stride if stride is not None else window) / dt)))
    starts = np.arange(0, times.size - k, s)
    return starts, starts + k


def trajectory_passivity(traj, storage, eta=0.0, window=1.0, stride=None, tol_c=RESIDUAL_TOL_C):
    """Windowed residuals of the passivity inequality along a recorded trajectory."""
    if traj.payoff_rates is None:
        raise ValueError("trajectory has no payoff rates; cannot compute supplied energy")
    if traj.times.size < 2:
        raise ValueError("trajectory too short")
    v = traj.velocities
    integrand = np.sum(traj.payoff_rates * v, axis=-1) - eta * np.sum(v * v, axis=-1)
    supplied = cumulative_trapezoid(integrand, traj.times, initial=0.0)
    stored = _evaluate(storage, traj.payoffs, traj.states)
    dt = traj.times[1] - traj.times[0]
    i0, i1 = _windows(traj.times, window, stride)
    out = []
    for a, b in zip(i0, i1):
        sup = supplied[b] - supplied[a]
        sd = stored[b] - stored[a]
        span = traj.times[b] - traj.times[a]
        out.append(PassivityResidual(float(traj.times[a]), float(traj.times[b]), float(sup), float(sd),
                                     float(sup - sd), float(tol_c * dt * dt * span)))
    return out


def storage_balance_defects(traj, storage, eta=0.0, window=1.0, stride=None, h=1e-6):
    """Residual minus the integrated dissipation ``-(grad_x S . V) - eta |V|^2``.

    Along an exact solution the residual equals the integrated dissipation,
    so the defect measures quadrature and integration error only. It shrinks
    like ``dt^2`` for the trapezoid rule used here.
    """
    res = trajectory_passivity(traj, storage, eta, window, stride)
    v = traj.velocities
    diss = -state_derivative_along(storage, traj.payoffs, traj.states, v, h) - eta * np.sum(v * v, axis=-1)
    cum = cumulative_trapezoid(diss, traj.times, initial=0.0)
    i0, i1 = _windows(traj.times, window, stride)
    return np.array([r.residual - (cum[b] - cum[a]) for r, a, b in zip(res, i0, i1)])


# ---------------------------------------------------------------- conditions

def _rest(v):
    return np.abs(v).max(axis=-1) <= REST_TOL


def _is_best_response(p, x, tol=1e-9):
    gap = p.max(axis=-1, keepdims=True) - p
    return np.all((x <= 1e-12) | (gap <= tol), axis=-1)


def check_conditions(obj, which, samples=1000, rng=None, tol=CONDITION_TOL):
    """Test NS, PC or SPC for an EDM, or A, SP or I for a revision protocol."""
    if which not in CONDITIONS:
        raise ValueError(f"unknown condition {which!r}; expected one of {CONDITIONS}")
    rng = np.random.default_rng() if rng is None else rng
    if isinstance(obj, RevisionProtocol):
        return _protocol_condition(obj, which, samples, rng, tol)
    if which in ("A", "SP", "I"):
        raise ValueError(f"condition {which} applies to revision protocols")
    n = 3
    p, x = sample_pairs(rng, samples, n)
    sp, sx = structured_samples(n, rng)
    p, x = np.concatenate([p, sp]), np.concatenate([x, sx])
    if _needs_interior(obj):
        keep = x.min(axis=-1) > 0
        p, x = p[keep], x[keep]
    v = _evaluate(obj, p, x)
    name = f"{which}:{obj.name}"
    if which == "NS":
        rest_pts = _rest_points(obj, rng, samples // 4 + 1, n)
        if rest_pts is not None:
            p, x = np.concatenate([p, rest_pts[0]]), np.concatenate([x, rest_pts[1]])
            v = _evaluate(obj, p, x)
        rest, br = _rest(v), _is_best_response(p, x)
        return CheckReport.from_mask(name, p, x, rest != br, np.abs(v).max(axis=-1), REST_TOL,
                                     details={"rest_not_best_response": int((rest & ~br).sum()),
                                              "best_response_not_rest": int((br & ~rest).sum())})
    pv = np.sum(p * v, axis=-1)
    if which == "PC":
        return CheckReport.from_margins(name, p, x, -pv, tol)
    vn = np.linalg.norm(v, axis=-1)
    bad = (vn > STRICT_V_TOL) & ~(pv > 0)
    return CheckReport.from_mask(name, p, x, bad, pv, 0.0, details={"moving_samples": int((vn > STRICT_V_TOL).sum())})


def _rest_points(edm, rng, size, n):
    """Interior rest points ``x = C(p)`` of perturbed best-response fields."""
    v = getattr(edm, "perturbation", None)
    if v is None:
        return None
    p = rng.normal(size=(size, n))
    return p, choice(p, v)


def _protocol_condition(protocol, which, samples, rng, tol):
    name = f"{which}:{protocol.name}"
    n = 3
    if which == "SP":
        if protocol.kind != "pairwise":
            raise ValueError("SP applies to pairwise protocols")
        d = np.concatenate([rng.normal(size=samples) * 10.0 ** rng.uniform(-4, 1, size=samples), [0.0]])
        ok = sign_preservation_holds(protocol.rates, d[:, None, None] * np.ones((1, n, n)))
        ok = np.all(ok, axis=(-2, -1))
        pts = np.zeros((d.size, n))
        return CheckReport.from_mask(name, pts, pts, ~ok, d, 0.0)
    if protocol.kind != "ept":
        raise ValueError(f"{which} applies to ept protocols")
    p, x = sample_pairs(rng, samples, n, scale=(1e-4, 10.0))
    p_hat = excess_payoff(p, x)
    if which == "A":
        inner = np.sum(p_hat * protocol.rates(p_hat), axis=-1)
        return CheckReport.from_mask(name, p, x, ~acuteness_holds(protocol.rates, p_hat), -inner, 0.0)
    if which == "I":
        if protocol.gamma is None:
            raise ValueError("protocol has no potential to check")
        err = integrability_error(protocol.rates, protocol.gamma, p_hat)
        return CheckReport.from_margins(name, p, x, err, 1e-6)
    raise ValueError(f"{which} applies to EDMs, not protocols")


# ---------------------------------------------------------------- zero sets

def storage_on_best_responses(storage, samples=1000, n=3, rng=None):
    """Storage at states supported on the best-response set must vanish (within 1e-10)."""
    rng = np.random.default_rng() if rng is None else rng
    p = rng.normal(size=(samples, n)) * np.exp(rng.uniform(np.log(1e-2), np.log(10.0), size=(samples, 1)))
    # include tied payoffs so that mixed best responses are exercised
    tied = rng.random(samples) < 0.25
    p[tied, 1] = p[tied, 0]
    x = argmax_states(p, rng)
    s = _evaluate(storage, p, x)
    return CheckReport.from_margins(f"zero-storage-on-best-response:{storage.name}", p, x, s, ZERO_STORAGE_TOL)


def zero_storage_implies_rest(storage, edm, samples=1000, n=3, rng=None, points=None):
    """Wherever ``S <= 1e-10``, the field must be at rest (``|V| <= 1e-6``).

    Random pairs rarely land on the zero set, so structured points are
    added: best-response states (for storages defined on the boundary),
    interior rest points ``x = C(p)`` of perturbed best-response fields and
    any caller-supplied ``points``.
    """
    rng = np.random.default_rng() if rng is None else rng
    p, x = sample_pairs(rng, samples, n)
    extra = []
    if not _needs_interior(storage, edm):
        q = rng.normal(size=(samples // 2, n))
        extra.append((q, argmax_states(q, rng)))
        sp, sx = structured_samples(n, rng)
        extra.append((sp, sx))
    c = rng.normal(size=(samples // 4, 1))
    extra.append((np.broadcast_to(c, (c.shape[0], n)), sample_pairs(rng, c.shape[0], n)[1]))
    rest_pts = _rest_points(edm, rng, samples // 4 + 1, n)
    if rest_pts is not None:
        extra.append(rest_pts)
    if points is not None:
        extra.append(tuple(np.atleast_2d(np.asarray(a, dtype=float)) for a in points))
    for ep, ex in extra:
        p, x = np.concatenate([p, ep]), np.concatenate([x, ex])
    s = _evaluate(storage, p, x)
    v = np.linalg.norm(_evaluate(edm, p, x), axis=-1)
    zero = s <= ZERO_STORAGE_TOL
    return CheckReport.from_mask(f"zero-storage-implies-rest:{storage.name}~{edm.name}", p, x,
                                 zero & (v > STRICT_V_TOL), v, STRICT_V_TOL,
                                 details={"zero_storage_samples": int(zero.sum())})


# ---------------------------------------------------------------- strict output search

def _lhs_pairs(rng, size, n, log_scale):
    u = qmc.LatinHypercube(d=2 * n + 1, seed=rng).random(size)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    e = -np.log(u[:, :n])
    x = e / e.sum(axis=-1, keepdims=True)
    x = (1 - INTERIOR_MIX) * x + INTERIOR_MIX / n
    direction = norm.ppf(u[:, n:2 * n])
    scale = np.exp(log_scale[0] + (log_scale[1] - log_scale[0]) * u[:, 2 * n:])
    return scale * direction, x


def strict_output_violation_search(edm, storage, eta_grid, budget=100_000, rng=None, n=3,
                                   scale=(1e-4, 10.0), batch=2000, pass_margin=-1e-3):
    """Search for (P2) violations at each ``eta`` in ``eta_grid``.

    Latin-hypercube seeding over the state, the payoff direction and a
    log-uniform payoff scale, followed by a hill-climb on the normalized
    margin ``(grad_x S . V + eta |V|^2) / |V|^2`` from the best seeds.
    Verdict per ``eta``: ``fail`` once a witness is found; ``pass`` if the
    budget is spent and the worst normalized margin is below ``pass_margin``;
    ``inconclusive`` otherwise.
    """
    rng = np.random.default_rng() if rng is None else rng
    if any(e <= 0 for e in eta_grid):
        raise ValueError("eta values must be positive")
    log_scale = (np.log(scale[0]), np.log(scale[1]))
    results = {}
    for eta in eta_grid:
        used = 0
        seed_budget = budget // 2
        best_p = best_x = best_norm = None
        report = None
        while used < seed_budget:
            m = min(batch, seed_budget - used)
            p, x = _lhs_pairs(rng, m, n, log_scale)
            used += m
            d, thr, vn = p2_margins(storage, edm, p, x, eta)
            if np.any(d > thr):
                report = CheckReport.from_margins(f"strict-output:{edm.name}", p, x, d, thr,
                                                  details={"eta": eta, "evaluated": used, "phase": "seeding"})
                break
            norm_m = _normalized(d, eta, vn)
            best_p, best_x, best_norm = _keep_best(best_p, best_x, best_norm, p, x, norm_m)
        if report is None:
            report = _hill_climb(edm, storage, eta, rng, best_p, best_x, best_norm, budget - used, used,
                                 log_scale, pass_margin)
        report.samples = int(report.details.get("evaluated", report.samples))
        results[eta] = report
    return results


def _normalized(d, eta, vn):
    vv = vn * vn
    out = np.full(d.shape, -np.inf)
    big = vv > 1e-20
    out[big] = (d[big] + eta * vv[big]) / vv[big]
    return out


def _keep_best(bp, bx, bn, p, x, norm_m, k=32):
    if bp is not None:
        p, x, norm_m = np.concatenate([bp, p]), np.concatenate([bx, x]), np.concatenate([bn, norm_m])
    order = np.argsort(-norm_m)[:k]
    return p[order], x[order], norm_m[order]


def _hill_climb(edm, storage, eta, rng, p, x, score, budget, used, log_scale, pass_margin):
    n = x.shape[-1]
    step = 0.3
    k = p.shape[0]
    while budget >= k:
        scale = np.linalg.norm(p, axis=-1, keepdims=True)
        direction = p / np.maximum(scale, 1e-300) + step * rng.normal(size=p.shape)
        new_scale = np.clip(scale * np.exp(step * rng.normal(size=scale.shape)), *np.exp(log_scale))
        new_p = new_scale * direction / np.linalg.norm(direction, axis=-1, keepdims=True)
        new_x = x * np.exp(step * rng.normal(size=x.shape))
        new_x /= new_x.sum(axis=-1, keepdims=True)
        new_x = np.maximum(new_x, INTERIOR_MIX / n)
        new_x /= new_x.sum(axis=-1, keepdims=True)
        d, thr, vn = p2_margins(storage, edm, new_p, new_x, eta)
        budget -= k
        used += k
        if np.any(d > thr):
            return CheckReport.from_margins(f"strict-output:{edm.name}", new_p, new_x, d, thr,
                                            details={"eta": eta, "evaluated": used, "phase": "hill-climb"})
        new_score = _normalized(d, eta, vn)
        better = new_score > score
        p[better], x[better], score[better] = new_p[better], new_x[better], new_score[better]
        step = max(0.02, step * 0.995)
    worst = float(score.max()) if score.size else float("-inf")
    return CheckReport("strict-output:" + edm.name, used, [], worst,
                       "pass" if worst <= pass_margin else "inconclusive", 0,
                       {"eta": eta, "evaluated": used, "worst_normalized_margin": worst})
