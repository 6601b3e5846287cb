import json

import numpy as np
import pytest

from evolab import edm
from evolab.engine import ConstantPayoff, LoopConfig, TrigPayoffPath, integrate, integrate_batch
from evolab.games import anti_coordination
from evolab.passivity import (
    RESIDUAL_TOL_C,
    check_conditions,
    check_p1,
    check_p2,
    p2_margins,
    payoff_gradient,
    sample_pairs,
    storage_balance_defects,
    storage_on_best_responses,
    strict_output_violation_search,
    structured_samples,
    trajectory_passivity,
    zero_storage_implies_rest,
)
from evolab.perturbations import entropy
from evolab.protocols import BNN, SMITH, power_ept, power_pairwise
from evolab.reports import CheckReport
from evolab.storage import REPLICATOR_CANDIDATE, ept_storage

E1 = np.array([1.0, 0.0, 0.0])
WITNESS_X = np.array([0.2, 0.8, 0.0])

PASSIVE = {
    "bnn": (edm.bnn(), 0.0),
    "smith": (edm.smith(), 0.0),
    "logit": (edm.logit(1.0), 0.0),
    "logit-strict": (edm.logit(1.0), 1.0),
    "perturbed-bnn": (edm.perturbed(edm.bnn(), entropy(1.0)), 1.0),
    "perturbed-smith": (edm.perturbed(edm.smith(), entropy(1.0)), 1.0),
    "ept-power-2": (edm.ept(power_ept(2)), 0.0),
    "pairwise-power-2": (edm.pairwise(power_pairwise(2)), 0.0),
}


# --- (P1) / (P2)

@pytest.mark.parametrize("name", list(PASSIVE))
def test_p1_and_p2_pass_for_passive_pairs(name, rng):
    dyn, eta = PASSIVE[name]
    r1 = check_p1(dyn.storage, dyn, samples=1000, rng=rng)
    r2 = check_p2(dyn.storage, dyn, eta=eta, samples=1000, rng=rng)
    assert r1.passed, r1.summary()
    assert r2.passed, r2.summary()
    assert r1.details["max_relative_error"] <= 1e-5


def test_p1_holds_for_replicator_candidate(rng):
    assert check_p1(REPLICATOR_CANDIDATE, edm.replicator(), samples=1000, rng=rng).passed


def test_replicator_candidate_fails_p2_at_hand_witness(rng):
    d, thr, _ = p2_margins(REPLICATOR_CANDIDATE, edm.replicator(), E1[None], WITNESS_X[None])
    assert d[0] == pytest.approx(0.048, abs=1e-9)
    report = check_p2(REPLICATOR_CANDIDATE, edm.replicator(), samples=1000, rng=rng,
                      points=(E1, WITNESS_X))
    assert report.verdict == "fail"
    assert report.worst_margin >= 0.04
    assert report.violations[0].value > report.violations[0].threshold


def test_p2_structured_points_keep_boundary_samples(rng):
    report = check_p2(ept_storage(BNN), edm.bnn(), samples=10, rng=rng, structured=True)
    p, x = structured_samples(3, np.random.default_rng(0))
    assert report.samples >= 10 + len(x) - 1
    assert report.passed


def test_p2_strictness_statistics(rng):
    # with payoffs kept away from zero the derivative vanishes only at rest points
    for dyn in (edm.bnn(), edm.smith()):
        report = check_p2(dyn.storage, dyn, samples=1000, rng=rng, scale=(0.1, 10.0))
        assert report.details["strictness_violations"] == 0
        assert report.details["storage_is_strict"]


def test_p2_detects_too_large_eta(rng):
    # entropy modulus is 1 on the simplex, so eta = 50 must fail for logit
    dyn = edm.logit(1.0)
    assert check_p2(dyn.storage, dyn, eta=50.0, samples=500, rng=rng).verdict == "fail"


def test_check_argument_validation(rng):
    dyn = edm.bnn()
    with pytest.raises(ValueError):
        check_p1(dyn.storage, dyn, h=1e-2)
    with pytest.raises(ValueError):
        check_p2(dyn.storage, dyn, eta=-1.0)
    with pytest.raises(ValueError):
        strict_output_violation_search(dyn, dyn.storage, [0.0])
    with pytest.raises(ValueError):
        check_conditions(dyn, "XYZ")
    with pytest.raises(ValueError):
        check_conditions(dyn, "A")
    with pytest.raises(ValueError):
        check_conditions(SMITH, "A")
    with pytest.raises(ValueError):
        check_conditions(BNN, "SP")


def test_payoff_gradient_skips_domain_errors():
    # boundary x is outside the logit storage's domain: gradient comes back NaN, not an exception
    g = payoff_gradient(edm.logit(1.0).storage, np.zeros((2, 3)), np.array([[0.5, 0.5, 0.0], [0.4, 0.3, 0.3]]))
    assert np.all(np.isnan(g[0])) and np.all(np.isfinite(g[1]))


# --- trajectory residuals

def test_constant_payoff_residual_is_dissipation(rng):
    dyn = edm.bnn()
    loop = LoopConfig("open", np.array([0.2, 0.5, 0.3]), T=5.0, signal=ConstantPayoff(np.array([1.0, 0.0, -0.5])))
    traj = integrate(dyn, loop)
    res = trajectory_passivity(traj, dyn.storage)
    assert len(res) == 5
    for r in res:
        assert r.supplied == 0.0
        assert r.stored_delta <= 0
        assert r.ok


@pytest.mark.parametrize("name", ["bnn", "smith", "logit"])
def test_random_paths_give_nonnegative_residuals(name, rng):
    dyn, _ = PASSIVE[name]
    x0 = 0.9 * rng.dirichlet(np.ones(3), size=8) + 0.1 / 3
    loop = LoopConfig("open", x0, T=4.0, signal=TrigPayoffPath.random(rng, batch=8))
    worst = min(r.residual for traj in integrate_batch(dyn, loop) for r in trajectory_passivity(traj, dyn.storage))
    assert worst >= -1e-4


def test_replicator_witness_path_violates_inequality():
    loop = LoopConfig("open", np.array([0.2, 0.79, 0.01]), T=2.0, signal=ConstantPayoff(E1))
    traj = integrate(edm.replicator(), loop)
    res = trajectory_passivity(traj, REPLICATOR_CANDIDATE, window=1.0)
    assert min(r.residual for r in res) < -1e-3
    assert not all(r.ok for r in res)


def test_balance_defect_is_second_order(rng):
    dyn = edm.bnn()
    sig = TrigPayoffPath.random(rng, batch=4)
    x0 = 0.9 * rng.dirichlet(np.ones(3), size=4) + 0.1 / 3
    worst = []
    for dt in (2e-3, 1e-3):
        trajs = integrate_batch(dyn, LoopConfig("open", x0, T=3.0, dt=dt, signal=sig))
        worst.append(max(np.abs(storage_balance_defects(t, dyn.storage)).max() for t in trajs))
    assert worst[0] / worst[1] >= 3


def test_residual_tolerance_calibration():
    # the stored constant must cover the quadrature defect on the calibration pair
    dyn = edm.bnn()
    game = anti_coordination(np.array([0.5, 0.3, 0.2]))
    dt = 1e-2
    traj = integrate(dyn, LoopConfig("static", np.array([0.8, 0.1, 0.1]), T=10.0, dt=dt, game=game),
                     use_kernel=False)
    defects = storage_balance_defects(traj, dyn.storage, window=1.0)
    measured = np.abs(defects).max() / (dt * dt * 1.0)
    assert 0 < measured <= RESIDUAL_TOL_C


def test_trajectory_needs_payoff_rates():
    dyn = edm.bnn()
    traj = integrate(dyn, LoopConfig("open", np.full(3, 1 / 3), T=1.0, signal=lambda t: np.zeros(np.shape(t) + (3,))))
    with pytest.raises(ValueError):
        trajectory_passivity(traj, dyn.storage)


# --- conditions

@pytest.mark.parametrize("dyn", [edm.bnn(), edm.smith()])
def test_payoff_monotonic_dynamics(dyn, rng):
    for which in ("NS", "PC", "SPC"):
        report = check_conditions(dyn, which, samples=1000, rng=rng)
        assert report.passed, report.summary()


def test_logit_fails_nash_stationarity(rng):
    report = check_conditions(edm.logit(1.0), "NS", samples=1000, rng=rng)
    assert report.verdict == "fail"
    # interior rest points x = C(p) are never exact best responses
    assert report.details["rest_not_best_response"] > 0


def test_replicator_pc_holds_but_ns_fails(rng):
    assert check_conditions(edm.replicator(), "PC", samples=1000, rng=rng).passed
    # vertices are rest points without being best responses
    assert check_conditions(edm.replicator(), "NS", samples=1000, rng=rng).verdict == "fail"


@pytest.mark.parametrize("protocol, which", [(BNN, "A"), (BNN, "I"), (power_ept(2), "A"), (power_ept(3), "I"),
                                             (SMITH, "SP"), (power_pairwise(2), "SP")])
def test_protocol_conditions(protocol, which, rng):
    assert check_conditions(protocol, which, samples=1000, rng=rng).passed


def test_spc_for_ept_family(rng):
    for k in (1.5, 2.0, 3.0):
        assert check_conditions(edm.ept(power_ept(k)), "SPC", samples=1000, rng=rng).passed


# --- zero sets

@pytest.mark.parametrize("dyn", [edm.bnn(), edm.smith()])
def test_storage_vanishes_on_best_responses(dyn, rng):
    report = storage_on_best_responses(dyn.storage, samples=1000, rng=rng)
    assert report.passed and report.worst_margin <= 0


@pytest.mark.parametrize("name", list(PASSIVE))
def test_zero_storage_implies_rest(name, rng):
    dyn, _ = PASSIVE[name]
    points = None
    if name.startswith("perturbed"):
        # the zero set of the shifted storage: p - grad v(x) constant
        x = sample_pairs(rng, 200)[1]
        points = (entropy(1.0).grad(x) + rng.normal(size=(200, 1)), x)
    report = zero_storage_implies_rest(dyn.storage, dyn, samples=1000, rng=rng, points=points)
    assert report.passed, report.summary()
    assert report.details["zero_storage_samples"] > 0


# --- strict output search

@pytest.mark.parametrize("dyn", [edm.bnn(), edm.smith()])
def test_switching_dynamics_are_not_strictly_output_passive(dyn):
    results = strict_output_violation_search(dyn, dyn.storage, [0.01, 0.1, 1.0], budget=20_000,
                                             rng=np.random.default_rng(7))
    for eta, report in results.items():
        assert report.verdict == "fail", (eta, report.summary())
        assert report.samples <= 20_000


def test_logit_strict_output_passes_below_modulus():
    dyn = edm.logit(1.0)
    results = strict_output_violation_search(dyn, dyn.storage, [0.5], budget=20_000, rng=np.random.default_rng(7))
    assert results[0.5].verdict == "pass"
    assert results[0.5].details["worst_normalized_margin"] <= -1e-3


def test_replicator_fails_any_eta():
    dyn = edm.replicator()
    results = strict_output_violation_search(dyn, REPLICATOR_CANDIDATE, [0.1], budget=10_000,
                                             rng=np.random.default_rng(7))
    assert results[0.1].verdict == "fail"


# --- reports

def test_report_json_shape(rng):
    report = check_p2(REPLICATOR_CANDIDATE, edm.replicator(), samples=200, rng=rng, points=(E1, WITNESS_X))
    doc = json.loads(report.to_json())
    assert {"check", "samples", "verdict", "worst_margin", "witnesses"} <= set(doc)
    assert {"p", "x", "value"} <= set(doc["witnesses"][0])
    assert doc["verdict"] == "fail"


def test_report_verdict_matches_violations():
    p, x = sample_pairs(np.random.default_rng(0), 10)
    ok = CheckReport.from_margins("t", p, x, np.full(10, -1.0), 0.0)
    bad = CheckReport.from_margins("t", p, x, np.r_[np.full(9, -1.0), 2.0], 0.0)
    assert ok.verdict == "pass" and not ok.violations and ok.worst_margin == -1.0
    assert bad.verdict == "fail" and len(bad.violations) == 1 and bad.worst_margin == 2.0
    masked = CheckReport.from_mask("m", p, x, np.zeros(10, bool), np.zeros(10), 0.0)
    assert masked.passed and masked.worst_margin == 0.0
