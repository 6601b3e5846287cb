"""Auditing (P1)/(P2), the trajectory inequality and strict output passivity.

Run: python3 demos/04_passivity_audit.py
"""
import numpy as np

from evolab import REPLICATOR_CANDIDATE, LoopConfig, TrigPayoffPath, bnn, entropy, integrate, logit, perturbed
from evolab import replicator, smith
from evolab.passivity import check_p1, check_p2, strict_output_violation_search, trajectory_passivity

rng = np.random.default_rng(1)

# (P1) says the p-gradient of S is V; (P2) says S decreases along V in x.
for dyn, eta in ((bnn(), 0.0), (smith(), 0.0), (logit(1.0), 1.0), (perturbed(smith(), entropy(1.0)), 1.0)):
    r1 = check_p1(dyn.storage, dyn, samples=1000, rng=rng)
    r2 = check_p2(dyn.storage, dyn, eta=eta, samples=1000, rng=rng)
    print(r1.summary())
    print(r2.summary())

# The replicator candidate satisfies (P1) but not (P2).
witness = (np.array([1.0, 0.0, 0.0]), np.array([0.2, 0.8, 0.0]))
report = check_p2(REPLICATOR_CANDIDATE, replicator(), samples=1000, rng=rng, points=witness)
print(report.summary())
print("worst witness:", report.violations[0])

# Along a smooth payoff path, the supplied energy bounds the change in storage.
traj = integrate(bnn(), LoopConfig("open", np.array([0.5, 0.3, 0.2]), T=10.0, signal=TrigPayoffPath.random(rng)))
residuals = trajectory_passivity(traj, bnn().storage)
print("BNN window residuals (supplied - stored):", np.round([r.residual for r in residuals], 5))

# Switching dynamics are passive but never strictly output passive.
for eta, rep in strict_output_violation_search(bnn(), bnn().storage, [0.01, 1.0], budget=20_000, rng=rng).items():
    print(f"BNN strict output eta={eta}: {rep.verdict} after {rep.samples} evaluations")
rep = strict_output_violation_search(logit(1.0), logit(1.0).storage, [0.5], budget=20_000, rng=rng)[0.5]
print(f"logit(1) strict output eta=0.5: {rep.verdict}")
