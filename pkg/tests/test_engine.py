import numpy as np
import pytest

from evolab import edm
from evolab.edm import EdmDescriptor
from evolab.engine import (
    ConstantPayoff,
    LoopConfig,
    TrigPayoffPath,
    Trajectory,
    converged,
    integrate,
    integrate_batch,
    read_trajectory_csv,
    scalar_monotone,
    sign_changes,
)
from evolab.games import anti_coordination, hypnodisk, perturbed_potential
from evolab.perturbations import entropy
from evolab.protocols import BNN
from evolab.state import DomainError, ValidationError
from evolab.storage import ept_storage, kl_energy

C = np.full(3, 1 / 3)
X_O = np.array([0.5, 0.3, 0.2])


# --- payoff signals

def test_trig_path_derivative_matches_finite_difference(rng):
    path = TrigPayoffPath.random(rng, batch=4)
    t = np.linspace(0, 10, 101)
    h = 1e-6
    fd = (path(t + h) - path(t - h)) / (2 * h)
    np.testing.assert_allclose(path.derivative(t), fd, atol=1e-8)
    assert path(t).shape == (101, 4, 3)


def test_constant_payoff():
    sig = ConstantPayoff(np.array([1.0, 0.0, 0.0]))
    assert sig(np.linspace(0, 1, 5)).shape == (5, 3)
    np.testing.assert_array_equal(sig.derivative(np.zeros(2)), 0)


# --- configuration validation

@pytest.mark.parametrize("kwargs", [
    dict(kind="bogus", x0=C, T=1.0, game=hypnodisk()),
    dict(kind="static", x0=C, T=1.0),
    dict(kind="open", x0=C, T=1.0),
    dict(kind="static", x0=C, T=1.0, dt=0.0, game=hypnodisk()),
    dict(kind="static", x0=[0.5, 0.6, -0.1], T=1.0, game=hypnodisk()),
    dict(kind="smoothed", x0=C, T=1.0, game=hypnodisk(), lam=0.0),
    dict(kind="static", x0=C, T=1.0, game=hypnodisk(), record_every=0),
])
def test_loop_config_rejects_bad_input(kwargs):
    with pytest.raises(ValidationError):
        LoopConfig(**kwargs)


# --- worked examples

def test_logit_open_loop_contracts_to_centroid():
    loop = LoopConfig("open", np.array([0.7, 0.2, 0.1]), T=20.0, signal=ConstantPayoff(np.zeros(3)))
    traj = integrate(edm.logit(1.0), loop)
    # x' = 1/3 - x, so the gap decays like exp(-t)
    exact = C + (loop.x0 - C) * np.exp(-traj.times[:, None])
    np.testing.assert_allclose(traj.states, exact, atol=1e-12)
    assert np.linalg.norm(traj.states[-1] - C) < 1e-6


def test_replicator_constant_payoff_monotone_to_argmax():
    p = np.array([0.2, 1.0, -0.5])
    loop = LoopConfig("open", np.array([0.4, 0.2, 0.4]), T=30.0, signal=ConstantPayoff(p))
    traj = integrate(edm.replicator(), loop)
    share = traj.states[:, 1]
    assert np.all(np.diff(share) >= 0)
    assert share[-1] > 1 - 1e-6
    # closed form: x_i(t) proportional to x_i(0) exp(p_i t)
    w = loop.x0 * np.exp(p * traj.times[:, None])
    np.testing.assert_allclose(traj.states, w / w.sum(axis=1, keepdims=True), atol=1e-9)


def test_bnn_anti_coordination_reaches_interior_equilibrium():
    game = anti_coordination(X_O)
    for dt in (1e-3, 5e-4):
        traj = integrate(edm.bnn(), LoopConfig("static", np.array([0.6, 0.3, 0.1]), T=30.0, dt=dt, game=game))
        assert np.linalg.norm(traj.states[-1] - X_O) < 1e-4
    # at T=20 the distance is 1.45e-4: the approach rate is about 0.33 per unit time
    short = integrate(edm.bnn(), LoopConfig("static", np.array([0.6, 0.3, 0.1]), T=20.0, game=game))
    assert np.linalg.norm(short.states[-1] - X_O) < 2e-4


def test_kernel_and_python_drivers_agree():
    game = anti_coordination(X_O)
    for dyn in (edm.bnn(), edm.smith(), edm.logit(0.5)):
        for kind in ("static", "smoothed", "mean_removed"):
            loop = LoopConfig(kind, np.array([0.6, 0.3, 0.1]), T=3.0, game=game, record_every=10)
            fast, slow = integrate(dyn, loop), integrate(dyn, loop, use_kernel=False)
            assert fast.meta["compiled"] and not slow.meta["compiled"]
            np.testing.assert_allclose(fast.states, slow.states, atol=1e-12)
            np.testing.assert_allclose(fast.payoffs, slow.payoffs, atol=1e-12)


def test_rk4_is_fourth_order():
    game = anti_coordination(X_O)
    x0 = np.array([0.6, 0.3, 0.1])
    finals = [integrate(edm.logit(0.5), LoopConfig("static", x0, T=2.0, dt=dt, game=game)).states[-1]
              for dt in (0.1, 0.05, 0.025)]
    e1 = np.linalg.norm(finals[0] - finals[1])
    e2 = np.linalg.norm(finals[1] - finals[2])
    assert e1 / e2 >= 8


def test_simplex_preserved(rng):
    game = hypnodisk()
    for dyn in (edm.replicator(), edm.bnn(), edm.smith(), edm.logit(1.0)):
        x0 = rng.dirichlet(np.ones(3))
        traj = integrate(dyn, LoopConfig("static", x0, T=5.0, game=game))
        assert traj.ok
        assert traj.states.min() >= 0
        np.testing.assert_allclose(traj.states.sum(axis=1), 1, atol=1e-12)
        assert traj.meta["max_sum_dev"] < 1e-9


def test_batch_matches_single_runs(rng):
    x0 = rng.dirichlet(np.ones(3), size=5)
    sig = TrigPayoffPath.random(rng, batch=5)
    loop = LoopConfig("open", x0, T=2.0, signal=sig)
    trajs = integrate_batch(edm.smith(), loop)
    assert len(trajs) == 5
    for b, traj in enumerate(trajs):
        single_sig = TrigPayoffPath(sig.p0[b], sig.amplitudes[b], sig.omegas[b], sig.phases[b])
        single = integrate(edm.smith(), LoopConfig("open", x0[b], T=2.0, signal=single_sig))
        np.testing.assert_allclose(traj.states, single.states, atol=1e-14)
        np.testing.assert_allclose(traj.payoff_rates, single_sig.derivative(traj.times), atol=1e-14)


def test_integrate_rejects_batch_shape():
    loop = LoopConfig("open", np.tile(C, (2, 1)), T=1.0, signal=ConstantPayoff(np.zeros(3)))
    with pytest.raises(ValidationError):
        integrate(edm.bnn(), loop)
    with pytest.raises(ValidationError):
        integrate_batch(edm.bnn(), LoopConfig("open", C, T=1.0, signal=ConstantPayoff(np.zeros(3))))


def test_velocities_are_field_values():
    game = hypnodisk()
    traj = integrate(edm.bnn(), LoopConfig("static", np.array([0.5, 0.3, 0.2]), T=1.0, game=game))
    np.testing.assert_allclose(traj.velocities, edm.bnn_field(game(traj.states), traj.states), atol=0)
    np.testing.assert_allclose(traj.velocities.sum(axis=1), 0, atol=1e-14)


# --- failure handling

def _failing(kind):
    def field(p, x):
        x = np.asarray(x, dtype=float)
        if kind == "domain" and np.any(x[..., 0] < 0.3):
            raise DomainError("left the admissible region")
        v = edm.replicator_field(p, x)
        return v * np.nan if kind == "nan" and np.any(x[..., 0] < 0.3) else v
    return EdmDescriptor(f"failing-{kind}", field)


@pytest.mark.parametrize("kind, marker", [("domain", "domain error"), ("nan", "non-finite")])
def test_failure_truncates_trajectory(kind, marker):
    loop = LoopConfig("open", np.array([0.5, 0.25, 0.25]), T=10.0, signal=ConstantPayoff(np.array([0.0, 1.0, 0.0])))
    traj = integrate(_failing(kind), loop)
    assert not traj.ok
    assert marker in traj.error
    assert traj.times[-1] < 10.0
    assert traj.states[:, 0].min() >= 0.3
    assert not converged(traj, [0.0, 1.0, 0.0], tol=1.0, window=0.0).converged


def test_interior_runs_stay_off_the_boundary():
    v = edm.perturbed(edm.bnn(), entropy(0.05))
    loop = LoopConfig("open", np.array([0.98, 0.01, 0.01]), T=5.0,
                      signal=ConstantPayoff(np.array([40.0, 0.0, 0.0])))
    traj = integrate(v, loop)
    assert traj.ok
    assert traj.states.min() >= 1e-10


# --- CSV

def test_csv_round_trip(tmp_path):
    game = anti_coordination(X_O)
    storage = ept_storage(BNN)
    traj = integrate(edm.bnn(), LoopConfig("static", np.array([0.6, 0.3, 0.1]), T=1.0, game=game, record_every=50),
                     scalars={"storage": storage})
    text = traj.to_csv(tmp_path / "t.csv")
    assert text.splitlines()[0] == "t,x1,x2,x3,p1,p2,p3,v1,v2,v3,storage"
    assert "\r" not in (tmp_path / "t.csv").read_bytes().decode()
    back = read_trajectory_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.times, traj.times)
    np.testing.assert_array_equal(back.states, traj.states)
    np.testing.assert_array_equal(back.payoffs, traj.payoffs)
    np.testing.assert_array_equal(back.velocities, traj.velocities)
    np.testing.assert_array_equal(back.column("storage"), traj.column("storage"))


# --- convergence and scalar checks

def _const_traj(x, m=11):
    x = np.asarray(x, dtype=float)
    return Trajectory(np.linspace(0, 1, m), np.tile(x, (m, 1)), np.zeros((m, x.size)), np.zeros((m, x.size)))


def test_converged_constant_trajectory():
    res = converged(_const_traj(C), C, tol=1e-12)
    assert res.converged and res.first_hit == 0.0 and res.final_distance == 0.0
    assert not converged(_const_traj([0.5, 0.5, 0.0]), C, tol=0.1)
    with pytest.raises(ValueError):
        converged(_const_traj(C), C, tol=1e-3, window=5.0)


def test_converged_first_hit():
    t = np.linspace(0, 10, 101)
    x = C + np.outer(np.exp(-t), [0.2, -0.1, -0.1])
    traj = Trajectory(t, x, np.zeros_like(x), np.zeros_like(x))
    res = converged(traj, C, tol=1e-2)
    dist = np.linalg.norm(x - C, axis=1)
    assert res.converged
    assert res.first_hit == pytest.approx(t[np.argmax(dist <= 1e-2)])


def test_scalar_monotone_and_sign_changes():
    t = np.linspace(0, 20, 2001)
    traj = Trajectory(t, np.tile(C, (t.size, 1)), np.zeros((t.size, 3)), np.zeros((t.size, 3)),
                      scalars={"down": np.exp(-t), "wave": np.exp(-0.1 * t) * np.cos(t)})
    assert scalar_monotone(traj, "down").passed
    assert not scalar_monotone(traj, "down", direction="nondecreasing").passed
    report = scalar_monotone(traj, "wave")
    assert report.verdict == "fail" and report.worst_margin > 0
    # derivative of e^{-0.1 t} cos t changes sign about once per half period
    assert sign_changes(traj.column("wave"), t, after=10.0) == 3
    assert sign_changes(traj.column("down"), t) == 0
    with pytest.raises(ValueError):
        scalar_monotone(traj, "down", direction="sideways")


def test_hypnodisk_bnn_cycles_and_logit_converges():
    game = hypnodisk()
    x0 = np.array([0.35, 0.33, 0.32])
    cyc = integrate(edm.bnn(), LoopConfig("static", x0, T=100.0, game=game, record_every=10))
    assert not converged(cyc, C, tol=0.05, window=20.0)
    conv = integrate(edm.logit(1.65), LoopConfig("static", x0, T=100.0, game=game, record_every=10))
    assert converged(conv, C, tol=1e-3, window=20.0)


def test_replicator_mean_removed_oscillates():
    game = perturbed_potential()
    loop = LoopConfig("mean_removed", np.array([0.6, 0.3, 0.1]), T=60.0, game=game, p0=np.zeros(3),
                      record_every=10)
    traj = integrate(edm.replicator(), loop, scalars={"kl": lambda p, x: kl_energy(x, np.full(x.shape, 1 / 3))})
    assert sign_changes(traj.column("kl"), traj.times, after=10.0) >= 3
    assert np.linalg.norm(traj.states[-1] - C) > 1e-2


def test_logit_mean_removed_reaches_stationary_point():
    game = perturbed_potential()
    loop = LoopConfig("mean_removed", np.array([0.6, 0.3, 0.1]), T=60.0, game=game, p0=np.zeros(3))
    traj = integrate(edm.logit(1.0), loop)
    assert traj.ok
    # rest of the closed loop: x' = 0 and p' = F(x) - mean(p) 1 = 0
    assert np.abs(traj.velocities[-1]).max() < 1e-8
    assert np.abs(traj.payoff_rates[-1]).max() < 1e-8
    np.testing.assert_allclose(traj.states[-1], C, atol=1e-8)
