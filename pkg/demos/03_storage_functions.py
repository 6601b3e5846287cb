"""Storage functions, the closed-loop energy and the KL-style energy.

Run: python3 demos/03_storage_functions.py
"""
import numpy as np

from evolab import REPLICATOR_CANDIDATE, bnn, energy_function, kl_energy, logit, smith
from evolab.games import quadratic_potential

p = np.array([1.0, 0.0, 0.0])
x = np.full(3, 1 / 3)
for dyn in (bnn(), smith(), logit(1.0)):
    print(f"{dyn.storage.name:24s} S(p, x) = {dyn.storage(p, x):.6f}")
print(f"{'replicator candidate':24s} S(p, x) = {REPLICATOR_CANDIDATE(p, x):.6f}")

# At a best response the switching storages vanish.
e1 = np.array([1.0, 0.0, 0.0])
print("BNN storage at a best response:", bnn().storage(p, e1))

# Energy for the mean-removed smoothed loop: storage plus the gap of f~.
energy = energy_function(bnn().storage, quadratic_potential(n=3))
print("max f~ = %.6f at %s" % (energy.ftilde_max, np.round(energy.maximizer, 6)))
print("energy at (p, centroid):", energy(p, x))

# kl_energy is sum x ln(x_ne / x): minus the KL divergence, so it is <= 0.
print("kl_energy:", kl_energy(np.array([0.5, 0.25, 0.25]), x))
