"""
Renyi divergences and loss guarantees
=====================================

How far a target sits from the family of source mixtures controls how much
a guarantee for the sources transfers to it.
"""

import math

import numpy as np

from dwcomb.renyi import d_alpha, d_alpha_to_family, guarantee_bound, renyi_divergence

P = np.array([0.5, 0.5])
Q = np.array([0.25, 0.75])
for alpha in (1, 2, 8, math.inf):
    print(f"alpha={alpha:>4}: D = {renyi_divergence(P, Q, alpha):.6f}  d = {d_alpha(P, Q, alpha):.6f}")

# A target inside the mixture family has d = 1; one outside pays more.
rng = np.random.default_rng(0)
D = rng.dirichlet(np.ones(20), size=3).T
inside = D @ np.array([0.2, 0.5, 0.3])
outside = rng.dirichlet(np.ones(20))
for label, target in (("inside", inside), ("outside", outside)):
    fit = d_alpha_to_family(target, D, 2.0)
    print(f"{label:>8}: d_2 to family = {fit.value:.4f} at lambda = {np.round(fit.lam, 3)}")

# Source losses at most eps + delta = 0.1, pointwise loss at most M = 4.
fit = d_alpha_to_family(outside, D, 2.0)
for alpha in (1.5, 2.0, 4.0, math.inf):
    d = d_alpha_to_family(outside, D, alpha).value
    print(f"alpha={alpha:>4}: target loss <= {guarantee_bound(0.1, d, 4.0, alpha):.4f}")
