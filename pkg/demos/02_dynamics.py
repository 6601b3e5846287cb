"""Evolutionary dynamics as vector fields V(p, x) on the tangent space of the simplex.

Run: python3 demos/02_dynamics.py
"""
import numpy as np

from evolab import bnn, choice, entropy, log_barrier, logit, pbr, perturbed, replicator, smith
from evolab.passivity import check_conditions

p = np.array([1.0, 0.0, 0.0])
x = np.full(3, 1 / 3)
for dyn in (replicator(), bnn(), smith(), logit(1.0), pbr(log_barrier(0.5)), perturbed(bnn(), entropy(1.0))):
    v = dyn(p, x)
    print(f"{dyn.name:32s} V = {np.round(v, 6)}  sum = {v.sum():+.1e}  class = {dyn.declared_class}")

# Perturbed best responses go through the choice function C(p) = argmax p'y - v(y).
print("softmax choice:", choice(p, entropy(1.0)))
print("log-barrier choice:", choice(p, log_barrier(0.5)))

# Payoff monotonicity: Nash stationarity plus positive correlation.
rng = np.random.default_rng(0)
for dyn in (bnn(), smith(), logit(1.0), replicator()):
    verdicts = {c: check_conditions(dyn, c, samples=500, rng=rng).verdict for c in ("NS", "PC")}
    print(f"{dyn.name:10s} {verdicts}")
