"""Compiled RK4 driver for the built-in dynamics and games.

The numpy implementations in :mod:`evolab.edm` and :mod:`evolab.games` are the
reference; these kernels duplicate the built-in cases so that long closed-loop
runs (10^5 to 10^6 steps) stay fast. ``tests/test_kernels.py`` checks that both
paths agree.
"""
import math

import numpy as np
from numba import njit

# field ids
REPLICATOR = 0
BNN = 1
SMITH = 2
LOGIT = 3
PERTURBED_BNN = 4
PERTURBED_SMITH = 5

# game ids
HYPNODISK = 0
LINEAR = 1

# loop kinds
STATIC = 0
SMOOTHED = 1
MEAN_REMOVED = 2

# status codes
OK = 0
DOMAIN = 1
NONFINITE = 2

LOG_FLOOR = 1e-12
INTERIOR_MIN = 1e-10
MAX_HALVINGS = 5


@njit(cache=True, nogil=True)
def _bnn(p, x, out):
    n = x.shape[0]
    avg = 0.0
    for i in range(n):
        avg += p[i] * x[i]
    total = 0.0
    for i in range(n):
        r = p[i] - avg
        out[i] = r if r > 0.0 else 0.0
        total += out[i]
    for i in range(n):
        out[i] -= x[i] * total


@njit(cache=True, nogil=True)
def _smith(p, x, out):
    n = x.shape[0]
    for i in range(n):
        inflow = 0.0
        outflow = 0.0
        for j in range(n):
            d = p[i] - p[j]
            if d > 0.0:
                inflow += x[j] * d
            elif d < 0.0:
                outflow -= d
        out[i] = inflow - x[i] * outflow


@njit(cache=True, nogil=True)
def _field(fid, fprm, p, x, out, work):
    n = x.shape[0]
    if fid == REPLICATOR:
        avg = 0.0
        for i in range(n):
            avg += p[i] * x[i]
        for i in range(n):
            out[i] = x[i] * (p[i] - avg)
    elif fid == BNN:
        _bnn(p, x, out)
    elif fid == SMITH:
        _smith(p, x, out)
    elif fid == LOGIT:
        eta = fprm[0]
        top = p[0]
        for i in range(1, n):
            if p[i] > top:
                top = p[i]
        z = 0.0
        for i in range(n):
            work[i] = math.exp((p[i] - top) / eta)
            z += work[i]
        for i in range(n):
            out[i] = work[i] / z - x[i]
    else:
        # perturbed BNN / Smith with entropy perturbation of weight fprm[0]
        w = fprm[0]
        for i in range(n):
            if x[i] > 0.0:
                work[i] = p[i] - w * (math.log(x[i]) + 1.0)
            else:
                work[i] = np.nan
        if fid == PERTURBED_BNN:
            _bnn(work, x, out)
        else:
            _smith(work, x, out)


@njit(cache=True, nogil=True)
def _game(gid, gprm, x, out):
    """Evaluate a built-in payoff; returns the number of floored log terms."""
    n = x.shape[0]
    if gid == HYPNODISK:
        r_in = gprm[0]
        r_out = gprm[1]
        w = gprm[2]
        third = 1.0 / 3.0
        r = 0.0
        for i in range(3):
            d = x[i] - third
            r += d * d
        u = (r - r_in) / (r_out - r_in)
        if u < 0.0:
            u = 0.0
        elif u > 1.0:
            u = 1.0
        bump = 1.0 - u * u * (3.0 - 2.0 * u)
        theta = math.pi * (1.0 - bump)
        c = math.cos(theta)
        s = math.sin(theta) * math.sqrt(3.0) / 3.0
        out[0] = c * (x[0] - third) + s * (x[1] - x[2]) + third
        out[1] = c * (x[1] - third) + s * (x[2] - x[0]) + third
        out[2] = c * (x[2] - third) + s * (x[0] - x[1]) + third
    else:
        w = gprm[1 + n * n + n]
        for i in range(n):
            acc = gprm[1 + n * n + i]
            for j in range(n):
                acc += gprm[1 + i * n + j] * x[j]
            out[i] = acc
    floors = 0
    if w != 0.0:
        for i in range(n):
            xi = x[i]
            if xi <= 0.0:
                out[i] = np.nan
                continue
            if xi < LOG_FLOOR:
                xi = LOG_FLOOR
                floors += 1
            out[i] -= w * (math.log(xi) + 1.0)
    return floors


@njit(cache=True, nogil=True)
def _rhs(kind, fid, fprm, gid, gprm, lam, y, n, out, pbuf, work):
    if kind == STATIC:
        floors = _game(gid, gprm, y, pbuf)
        _field(fid, fprm, pbuf, y, out, work)
        return floors
    p = y[:n]
    x = y[n:]
    floors = _game(gid, gprm, x, pbuf)
    if kind == SMOOTHED:
        for i in range(n):
            out[i] = lam * (pbuf[i] - p[i])
    else:
        mean = 0.0
        for i in range(n):
            mean += p[i]
        mean /= n
        for i in range(n):
            out[i] = pbuf[i] - mean
    _field(fid, fprm, p, x, out[n:], work)
    return floors


@njit(cache=True, nogil=True)
def _rk4(kind, fid, fprm, gid, gprm, lam, y, n, h, ynew, k, stage, pbuf, work):
    floors = _rhs(kind, fid, fprm, gid, gprm, lam, y, n, k[0], pbuf, work)
    for s in range(1, 4):
        c = h if s == 3 else 0.5 * h
        for i in range(y.shape[0]):
            stage[i] = y[i] + c * k[s - 1, i]
        floors += _rhs(kind, fid, fprm, gid, gprm, lam, stage, n, k[s], pbuf, work)
    for i in range(y.shape[0]):
        ynew[i] = y[i] + h / 6.0 * (k[0, i] + 2.0 * k[1, i] + 2.0 * k[2, i] + k[3, i])
    return floors


@njit(cache=True, nogil=True)
def _acceptable(ynew, off, n, interior):
    for i in range(ynew.shape[0]):
        if not math.isfinite(ynew[i]):
            return False
    if interior:
        for i in range(n):
            if ynew[off + i] < INTERIOR_MIN:
                return False
    return True


@njit(cache=True, nogil=True)
def integrate(kind, fid, fprm, gid, gprm, lam, y0, n, dt, steps, interior, record_every):
    """Fixed-step RK4 on x (static) or (p, x) (smoothed kinds).

    Returns (records, status, steps_done, min_share, max_sum_dev, floors).
    Shares below zero are zeroed and x renormalized after every step; the
    pre-clamp drift is reported through ``min_share`` and ``max_sum_dev``.
    """
    m = y0.shape[0]
    off = 0 if kind == STATIC else n
    nrec = steps // record_every + 1
    records = np.empty((nrec, m))
    y = y0.copy()
    ynew = np.empty(m)
    ysub = np.empty(m)
    k = np.empty((4, m))
    stage = np.empty(m)
    pbuf = np.empty(n)
    work = np.empty(n)
    records[0] = y
    rec = 1
    status = OK
    min_share = np.inf
    max_sum_dev = 0.0
    floors = 0
    done = 0
    for step in range(steps):
        floors += _rk4(kind, fid, fprm, gid, gprm, lam, y, n, dt, ynew, k, stage, pbuf, work)
        if not _acceptable(ynew, off, n, interior):
            accepted = False
            if interior:
                for halving in range(1, MAX_HALVINGS + 1):
                    sub = 2 ** halving
                    h = dt / sub
                    ysub[:] = y
                    good = True
                    for _ in range(sub):
                        floors += _rk4(kind, fid, fprm, gid, gprm, lam, ysub, n, h,
                                       ynew, k, stage, pbuf, work)
                        if not _acceptable(ynew, off, n, interior):
                            good = False
                            break
                        ysub[:] = ynew
                    if good:
                        accepted = True
                        break
            if not accepted:
                finite = True
                for i in range(m):
                    if not math.isfinite(ynew[i]):
                        finite = False
                status = DOMAIN if (interior or finite) else NONFINITE
                break
        total = 0.0
        for i in range(n):
            v = ynew[off + i]
            if v < min_share:
                min_share = v
            total += v
        if abs(total - 1.0) > max_sum_dev:
            max_sum_dev = abs(total - 1.0)
        total = 0.0
        for i in range(n):
            if ynew[off + i] < 0.0:
                ynew[off + i] = 0.0
            total += ynew[off + i]
        for i in range(n):
            ynew[off + i] /= total
        y[:] = ynew
        done = step + 1
        if done % record_every == 0:
            records[rec] = y
            rec += 1
    return records[:rec], status, done, min_share, max_sum_dev, floors
