import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from evolab.perturbations import ChoiceConvergenceError, Perturbation, choice, entropy, log_barrier, zero
from evolab.protocols import (BNN, SMITH, RevisionProtocol, acuteness_holds, integrability_error, power_ept,
                              power_pairwise, sign_preservation_holds)
from evolab.state import DomainError, random_interior_states, tangent_basis

C = np.full(3, 1 / 3)
payoffs = arrays(float, 3, elements=st.floats(-20, 20, allow_nan=False))


# --- protocols

def test_builtin_protocols_satisfy_their_conditions(rng):
    p_hat = rng.normal(size=(2000, 3))
    assert np.all(BNN.rates(p_hat) >= 0)
    assert np.all(acuteness_holds(BNN.rates, p_hat))
    assert integrability_error(BNN.rates, BNN.gamma, p_hat).max() < 1e-6
    d = rng.normal(size=2000)
    assert np.all(sign_preservation_holds(SMITH.rates, d))


@pytest.mark.parametrize("k", [1.5, 2, 3])
def test_power_protocols_validate(k):
    assert power_ept(k).kind == "ept"
    assert power_pairwise(k).kind == "pairwise"


def test_invalid_protocols_rejected_at_construction():
    with pytest.raises(ValueError, match="acuteness"):
        RevisionProtocol("ept", lambda p: np.zeros_like(p), name="lazy")
    with pytest.raises(ValueError, match="negative"):
        RevisionProtocol("ept", lambda p: p, name="signed")
    with pytest.raises(ValueError, match="integrability"):
        RevisionProtocol("ept", lambda p: np.maximum(p, 0), gamma=lambda p: np.sum(np.maximum(p, 0), axis=-1),
                         name="wrong-gamma")
    with pytest.raises(ValueError, match="sign preservation"):
        RevisionProtocol("pairwise", lambda d: np.abs(d), name="abs")


# --- perturbations

@pytest.mark.parametrize("v", [entropy(1.0), entropy(0.3), log_barrier(0.5)])
def test_perturbation_gradient_and_convexity(v, rng):
    x = random_interior_states(rng, 500, alpha=2.0)
    h = 1e-7
    fd = np.stack([(v.value(x + h * e) - v.value(x - h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
    np.testing.assert_allclose(v.grad(x), fd, rtol=1e-6, atol=1e-6)
    q = tangent_basis(3)
    z = rng.normal(size=(500, 2)) @ q.T
    assert np.all(v.hessian_quadform(x, z) >= v.modulus * np.sum(z * z, axis=-1) * (1 - 1e-12))


@pytest.mark.parametrize("v", [entropy(1.0), log_barrier(1.0)])
def test_perturbation_gradient_blows_up_at_boundary(v):
    norms = [np.linalg.norm(v.grad(np.array([1 - 10.0 ** -k, 10.0 ** -k / 2, 10.0 ** -k / 2])))
             for k in range(2, 14, 2)]
    assert np.all(np.diff(norms) > 0)
    assert norms[-1] > 20


def test_perturbation_rejects_boundary_and_bad_scale():
    with pytest.raises(DomainError):
        entropy(1.0).grad([0.5, 0.5, 0.0])
    with pytest.raises(ValueError):
        entropy(0.0)
    with pytest.raises(ValueError):
        log_barrier(-1.0)


# --- choice

def test_choice_entropy_examples():
    np.testing.assert_allclose(choice(np.zeros(3), entropy(1.0)), C, atol=1e-15)
    e = np.e
    np.testing.assert_allclose(choice(np.array([1.0, 0, 0]), entropy(1.0)), np.array([e, 1, 1]) / (e + 2),
                               atol=1e-15)
    np.testing.assert_allclose(choice(np.array([1.0, 0, 0]), entropy(1.0)), [0.5761, 0.2119, 0.2119], atol=1e-4)


@given(payoffs, st.floats(-50, 50))
def test_choice_shift_invariance(p, c):
    v = entropy(1.0)
    np.testing.assert_allclose(choice(p + c, v), choice(p, v), atol=1e-12)


def entropy_without_closed_form(eta):
    v = entropy(eta)
    return Perturbation(v.value, v.grad, v.hessian, v.modulus, name="entropy-newton")


@settings(max_examples=60, deadline=None)
@given(payoffs)
def test_newton_choice_agrees_with_softmax(p):
    ref = choice(p, entropy(0.7))
    got = choice(p, entropy_without_closed_form(0.7))
    np.testing.assert_allclose(got, ref, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(payoffs)
def test_log_barrier_choice_satisfies_kkt(p):
    v = log_barrier(0.5)
    y = choice(p, v)
    assert np.all(y > 0) and abs(y.sum() - 1) < 1e-12
    g = p - v.grad(y)
    assert np.abs(g - g.mean()).max() <= 1e-10 * max(1, np.abs(p).max()) * 10


def test_choice_batches_and_errors(rng):
    p = rng.normal(size=(4, 3))
    v = log_barrier(1.0)
    np.testing.assert_allclose(choice(p, v), np.stack([choice(row, v) for row in p]))
    with pytest.raises(ValueError):
        choice(p[0], zero())
    with pytest.raises(ChoiceConvergenceError) as info:
        choice(np.array([1.0, 0, 0]), v, max_iter=1, tol=1e-16)
    assert info.value.residual > 0
