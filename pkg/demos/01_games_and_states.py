"""Population states, payoffs and the Hypnodisk game.

Run: python3 demos/01_games_and_states.py
"""
import numpy as np

from evolab import anti_coordination, best_response_set, excess_payoff, hypnodisk, is_nash, jacobian_bound_estimate
from evolab import make_state, perturbed_potential

# A population state is a point on the simplex; make_state normalizes weights.
x = make_state([2, 1, 1])
p = np.array([1.0, 0.0, 0.0])
print("state", x, "payoff", p)
print("excess payoff p - (p'x) 1:", excess_payoff(p, x))
print("best responses to p:", best_response_set(p))

# Hypnodisk: coordination near the centroid, anti-coordination further out.
game = hypnodisk()
centroid = np.full(3, 1 / 3)
print("Hypnodisk payoff at the centroid:", game(centroid))
print("centroid is Nash:", bool(is_nash(game, centroid)))

# The sampled Jacobian bound tells how strongly the game pushes back on the
# tangent space; a logit dynamic with eta above it converges to equilibrium.
print("Jacobian bound estimate (Hypnodisk): %.4f" % jacobian_bound_estimate(game))

# Anti-coordination has a single interior equilibrium at x_o.
x_o = np.array([0.5, 0.3, 0.2])
print("anti-coordination equilibrium is Nash:", bool(is_nash(anti_coordination(x_o), x_o)))

# The perturbed potential game used by the mean-removed smoothed loop.
print("perturbed potential payoff at", x, ":", perturbed_potential()(x))
