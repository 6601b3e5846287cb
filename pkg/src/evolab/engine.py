"""Fixed-step RK4 integration of open- and closed-loop population dynamics.

Loop kinds:

* ``open``: ``x' = V(p(t), x)`` for a given payoff signal ``p(t)``.
* ``static``: ``x' = V(F(x), x)``.
* ``smoothed``: ``p' = lam (F(x) - p)``, ``x' = V(p, x)``.
* ``mean_removed``: ``p' = F(x) - mean(p) 1``, ``x' = V(p, x)``.

After every step negative shares are zeroed and x is renormalized. For
dynamics or games that need interior states, a step that would put a share
below 1e-10 is retried with 2, 4, ..., 32 substeps before the run is stopped.
"""
import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .games import GameDescriptor
from .reports import CheckReport
from .state import DomainError, ValidationError

log = logging.getLogger(__name__)

LOOP_KINDS = ("open", "static", "smoothed", "mean_removed")
_KERNEL_KINDS = {"static": _kernels.STATIC, "smoothed": _kernels.SMOOTHED,
                 "mean_removed": _kernels.MEAN_REMOVED}
INTERIOR_MIN = _kernels.INTERIOR_MIN
MAX_HALVINGS = _kernels.MAX_HALVINGS


@dataclass(frozen=True)
class TrigPayoffPath:
    """``p(t) = p0 + sum_k a_k sin(w_k t + phi_k)`` with its exact derivative.

    Arrays may carry leading batch axes: ``p0`` (..., n), ``amplitudes`` and
    ``phases`` (..., K, n), ``omegas`` (..., K).
    """

    p0: np.ndarray
    amplitudes: np.ndarray
    omegas: np.ndarray
    phases: np.ndarray

    def _arg(self, t):
        t = np.asarray(t, dtype=float)
        w = self.omegas[..., :, None]
        return w * t.reshape(t.shape + (1,) * (w.ndim)) + self.phases, w

    def __call__(self, t):
        arg, _ = self._arg(t)
        return self.p0 + np.sum(self.amplitudes * np.sin(arg), axis=-2)

    def derivative(self, t):
        arg, w = self._arg(t)
        return np.sum(self.amplitudes * w * np.cos(arg), axis=-2)

    @classmethod
    def random(cls, rng, n=3, batch=(), terms=3, amplitude=0.5, omega=(0.2, 3.0), offset=1.0):
        batch = tuple(np.atleast_1d(batch)) if batch != () else ()
        return cls(
            p0=rng.uniform(-offset, offset, size=batch + (n,)),
            amplitudes=rng.uniform(-amplitude, amplitude, size=batch + (terms, n)),
            omegas=rng.uniform(*omega, size=batch + (terms,)),
            phases=rng.uniform(0, 2 * np.pi, size=batch + (terms, n)),
        )


@dataclass(frozen=True)
class ConstantPayoff:
    p: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.p, t.shape + np.shape(self.p)).copy()

    def derivative(self, t):
        return np.zeros_like(self(t))


@dataclass(frozen=True)
class LoopConfig:
    kind: str
    x0: np.ndarray
    T: float
    dt: float = 1e-3
    game: Optional[GameDescriptor] = None
    signal: Optional[Callable] = None
    p0: Optional[np.ndarray] = None
    lam: float = 1.0
    record_every: int = 1

    def __post_init__(self):
        if self.kind not in LOOP_KINDS:
            raise ValidationError(f"unknown loop kind {self.kind!r}")
        if not self.dt > 0 or not self.T >= self.dt:
            raise ValidationError("need dt > 0 and T >= dt")
        if self.kind == "smoothed" and not self.lam > 0:
            raise ValidationError("lam must be positive")
        if self.kind == "open" and self.signal is None:
            raise ValidationError("open loop needs a payoff signal")
        if self.kind != "open" and self.game is None:
            raise ValidationError(f"{self.kind} loop needs a game")
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape[-1] < 2 or np.any(x0 < 0) or np.any(np.abs(x0.sum(axis=-1) - 1) > 1e-9):
            raise ValidationError("x0 must be population state(s)")
        if self.record_every < 1:
            raise ValidationError("record_every must be >= 1")

    @property
    def steps(self):
        return int(round(self.T / self.dt))

    @property
    def smoothed(self):
        return self.kind in ("smoothed", "mean_removed")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    payoffs: np.ndarray
    velocities: np.ndarray
    payoff_rates: Optional[np.ndarray] = None
    scalars: dict = field(default_factory=dict)
    error: Optional[str] = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.states.shape[-1]

    @property
    def ok(self):
        return self.error is None

    def column(self, name):
        return self.scalars[name]

    def to_csv(self, path=None):
        """Write ``t,x1..xn,p1..pn,v1..vn[,scalars]`` with 17 significant digits."""
        n = self.n
        names = list(self.scalars)
        header = (["t"] + [f"x{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)]
                  + [f"v{i + 1}" for i in range(n)] + names)
        cols = [self.times[:, None], self.states, self.payoffs, self.velocities]
        cols += [np.asarray(self.scalars[k], dtype=float)[:, None] for k in names]
        table = np.hstack(cols)
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for row in table:
            buf.write(",".join(format(v, ".17g") for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
        return text


def read_trajectory_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n = sum(1 for h in header if h.startswith("x") and h[1:].isdigit())
    scalars = {h: body[:, 1 + 3 * n + k] for k, h in enumerate(header[1 + 3 * n:])}
    return Trajectory(body[:, 0], body[:, 1:1 + n], body[:, 1 + n:1 + 2 * n],
                      body[:, 1 + 2 * n:1 + 3 * n], scalars=scalars, meta={"source": str(path)})


def _interior(edm, loop):
    return bool(edm.interior_only or (loop.game is not None and loop.game.interior_only))


def _kernel_usable(edm, loop):
    return (edm.kernel is not None and loop.game is not None and loop.game.kernel is not None
            and loop.kind in _KERNEL_KINDS)


def _initial_payoff(loop, x0):
    if loop.p0 is not None:
        return np.broadcast_to(np.asarray(loop.p0, dtype=float), x0.shape).copy()
    return np.asarray(loop.game(x0), dtype=float)


def _run_kernel(edm, loop, x0):
    n = x0.size
    fid, fprm = edm.kernel
    gid, gprm = loop.game.kernel
    if loop.smoothed:
        y0 = np.concatenate([_initial_payoff(loop, x0), x0])
    else:
        y0 = x0.copy()
    records, status, done, min_share, max_dev, floors = _kernels.integrate(
        _KERNEL_KINDS[loop.kind], fid, np.asarray(fprm, dtype=float), gid, np.asarray(gprm, dtype=float),
        float(loop.lam), y0, n, float(loop.dt), loop.steps, _interior(edm, loop), loop.record_every)
    return records[:, None, :], int(status), int(done), float(min_share), float(max_dev), int(floors)


def _run_python(edm, loop, x0):
    """Reference driver; ``x0`` has shape (m, n) and all rows step together."""
    m, n = x0.shape
    interior = _interior(edm, loop)
    smoothed = loop.smoothed
    off = n if smoothed else 0

    def rhs(t, y):
        if loop.kind == "open":
            return edm(np.asarray(loop.signal(t), dtype=float), y)
        if loop.kind == "static":
            return edm(loop.game(y), y)
        p, x = y[:, :n], y[:, n:]
        fx = loop.game(x)
        if loop.kind == "smoothed":
            dp = loop.lam * (fx - p)
        else:
            dp = fx - p.mean(axis=-1, keepdims=True)
        return np.concatenate([dp, edm(p, x)], axis=-1)

    def rk4(t, y, h):
        try:
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
        except DomainError:
            return None
        return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def acceptable(y):
        return y is not None and np.all(np.isfinite(y)) and (not interior or y[:, off:].min() >= INTERIOR_MIN)

    y = np.concatenate([_initial_payoff(loop, x0), x0], axis=-1) if smoothed else x0.copy()
    steps, dt = loop.steps, loop.dt
    records = np.empty((steps // loop.record_every + 1,) + y.shape)
    records[0] = y
    rec, status, done = 1, _kernels.OK, 0
    min_share, max_dev = np.inf, 0.0
    for step in range(steps):
        t = step * dt
        ynew = rk4(t, y, dt)
        if not acceptable(ynew):
            accepted = False
            if interior:
                for halving in range(1, MAX_HALVINGS + 1):
                    sub = 2 ** halving
                    ys = y
                    for j in range(sub):
                        ys = rk4(t + j * dt / sub, ys, dt / sub)
                        if not acceptable(ys):
                            break
                    else:
                        ynew, accepted = ys, True
                        break
            if not accepted:
                finite = ynew is None or np.all(np.isfinite(ynew))
                status = _kernels.DOMAIN if (interior or finite) else _kernels.NONFINITE
                break
        x = ynew[:, off:]
        min_share = min(min_share, float(x.min()))
        max_dev = max(max_dev, float(np.abs(x.sum(axis=-1) - 1).max()))
        x = np.where(x < 0, 0.0, x)
        ynew = ynew.copy()
        ynew[:, off:] = x / x.sum(axis=-1, keepdims=True)
        y = ynew
        done = step + 1
        if done % loop.record_every == 0:
            records[rec] = y
            rec += 1
    return records[:rec], status, done, min_share, max_dev, 0


def _assemble(edm, loop, records, status, done, min_share, max_dev, floors, scalars, used_kernel):
    n = records.shape[-1] // 2 if loop.smoothed else records.shape[-1]
    times = np.arange(records.shape[0]) * loop.dt * loop.record_every
    error = None
    if status != _kernels.OK:
        kind = "domain error" if status == _kernels.DOMAIN else "non-finite state"
        error = f"{kind} at t={done * loop.dt:.6g} (step {done + 1})"
        log.warning("%s: integration stopped: %s", edm.name, error)
    batched = _batched_signal(loop)
    sig = sig_rate = None
    if loop.kind == "open":
        sig = np.asarray(loop.signal(times), dtype=float)
        dp = getattr(loop.signal, "derivative", None)
        sig_rate = None if dp is None else np.asarray(dp(times), dtype=float)
    out = []
    for b in range(records.shape[1]):
        rec = records[:, b, :].copy()
        if loop.smoothed:
            p, x = rec[:, :n], rec[:, n:]
        elif loop.kind == "open":
            x = rec
            p = sig[:, b].copy() if batched else sig
        else:
            x = rec
            p = np.asarray(loop.game(x), dtype=float)
        v = np.asarray(edm(p, x), dtype=float)
        if loop.kind == "open":
            p_rate = None
            if sig_rate is not None:
                p_rate = sig_rate[:, b].copy() if batched else sig_rate
        elif loop.kind == "static":
            p_rate = (np.einsum("kij,kj->ki", loop.game.jacobian(x), v)
                      if loop.game.jacobian is not None else None)
        elif loop.kind == "smoothed":
            p_rate = loop.lam * (loop.game(x) - p)
        else:
            p_rate = loop.game(x) - p.mean(axis=-1, keepdims=True)
        columns = {name: np.asarray(fn(p, x), dtype=float) for name, fn in (scalars or {}).items()}
        meta = {"edm": edm.name, "game": loop.game.name if loop.game is not None else "signal",
                "loop": loop.kind, "dt": loop.dt, "steps": done, "min_share": min_share,
                "max_sum_dev": max_dev, "floored_evaluations": floors, "compiled": used_kernel}
        out.append(Trajectory(times, x, p, v, p_rate, columns, error, meta))
    return out


def _batched_signal(loop):
    x0 = np.asarray(loop.x0)
    return x0.ndim == 2


def integrate(edm, loop: LoopConfig, scalars=None, use_kernel=True):
    """Integrate one initial condition; returns a :class:`Trajectory`.

    ``scalars`` maps column names to vectorized ``fn(p, x)`` evaluated on the
    recorded samples. Built-in dynamics and games run on the compiled driver
    unless ``use_kernel`` is false.
    """
    x0 = np.asarray(loop.x0, dtype=float)
    if x0.ndim != 1:
        raise ValidationError("integrate takes a single x0; use integrate_batch")
    used = bool(use_kernel and _kernel_usable(edm, loop))
    if used:
        result = _run_kernel(edm, loop, x0)
    else:
        result = _run_python(edm, loop, x0[None, :])
    return _assemble(edm, loop, *result, scalars, used)[0]


def integrate_batch(edm, loop: LoopConfig, scalars=None):
    """Integrate the rows of a 2-d ``loop.x0`` together (vectorized reference driver).

    For open loops the signal may carry the same batch axis. If any row needs
    a step retry, the whole batch takes the smaller substeps.
    """
    x0 = np.asarray(loop.x0, dtype=float)
    if x0.ndim != 2:
        raise ValidationError("integrate_batch needs x0 of shape (m, n)")
    return _assemble(edm, loop, *_run_python(edm, loop, x0), scalars, False)


@dataclass(frozen=True)
class ConvergenceResult:
    converged: bool
    first_hit: Optional[float]
    final_distance: float

    def __bool__(self):
        return self.converged


def converged(traj: Trajectory, target, tol, window=None):
    """True iff ``|x(t) - target| <= tol`` over the trailing window (default: last 10% of T).

    ``first_hit`` is the start of the final stretch that stays within ``tol``.
    """
    dist = np.linalg.norm(traj.states - np.asarray(target, dtype=float), axis=-1)
    span = traj.times[-1] - traj.times[0]
    window = 0.1 * span if window is None else window
    if window > span + 1e-12:
        raise ValueError("window longer than the trajectory")
    tail = traj.times >= traj.times[-1] - window - 1e-12
    ok = bool(np.all(dist[tail] <= tol)) and traj.ok
    first = None
    outside = np.flatnonzero(dist > tol)
    if outside.size == 0:
        first = float(traj.times[0])
    elif outside[-1] + 1 < dist.size:
        first = float(traj.times[outside[-1] + 1])
    return ConvergenceResult(ok, first, float(dist[-1]))


def scalar_monotone(traj: Trajectory, column, direction="nonincreasing", tol=1e-6):
    """Check that a scalar column never moves the wrong way by more than ``tol`` per step."""
    values = np.asarray(traj.column(column), dtype=float)
    steps = np.diff(values)
    if direction == "nondecreasing":
        steps = -steps
    elif direction != "nonincreasing":
        raise ValueError("direction must be 'nonincreasing' or 'nondecreasing'")
    idx = np.arange(1, values.size)
    report = CheckReport.from_margins(
        f"monotone:{column}", traj.payoffs[idx], traj.states[idx], steps, tol,
        details={"largest_uphill_step": float(steps.max()) if steps.size else 0.0,
                 "direction": direction})
    return report


def sign_changes(values, times=None, after=0.0, noise=1e-12):
    """Number of sign changes of the discrete time derivative of ``values`` after ``after``.

    Increments smaller than ``noise`` in magnitude are ignored.
    """
    values = np.asarray(values, dtype=float)
    if times is not None:
        values = values[np.asarray(times) >= after]
    d = np.diff(values)
    s = np.sign(d[np.abs(d) > noise])
    return int(np.count_nonzero(s[1:] != s[:-1]))
