"""Closed-loop runs: limit cycles versus convergence, and a simplex plot.

Run: python3 demos/05_closed_loops.py [output.svg]
"""
import sys

import numpy as np

from evolab import LoopConfig, bnn, converged, hypnodisk, integrate, jacobian_bound_estimate, logit
from evolab import perturbed_potential, replicator
from evolab.engine import sign_changes
from evolab.storage import kl_energy
from evolab.svg import emit_simplex_svg

game = hypnodisk()
centroid = np.full(3, 1 / 3)
x0 = np.array([0.7, 0.2, 0.1])

cycle = integrate(bnn(), LoopConfig("static", x0, T=100.0, game=game, record_every=10))
eta = 1.1 * jacobian_bound_estimate(game)
calm = integrate(logit(eta), LoopConfig("static", x0, T=100.0, game=game, record_every=10))
print("BNN reaches the centroid:", bool(converged(cycle, centroid, tol=0.05)))
print(f"logit({eta:.3f}) reaches the centroid:", bool(converged(calm, centroid, tol=1e-3)))

# Mean-removed smoothed payoffs: the replicator keeps oscillating.
loop = LoopConfig("mean_removed", np.array([0.6, 0.3, 0.1]), T=100.0, game=perturbed_potential(),
                  p0=np.zeros(3), record_every=10)
rep = integrate(replicator(), loop, scalars={"kl": lambda p, x: kl_energy(x, np.full(x.shape, 1 / 3))})
print("replicator kl derivative sign changes after t=10:", sign_changes(rep.column("kl"), rep.times, after=10))

path = sys.argv[1] if len(sys.argv) > 1 else "closed_loops.svg"
emit_simplex_svg([cycle, calm, rep], markers=[centroid], path=path, title="BNN, logit, replicator")
print("wrote", path)
