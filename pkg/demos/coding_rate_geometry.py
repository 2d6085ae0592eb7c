"""
Coding rate as a diversity score
================================

How the coding rate of a small set of unit vectors responds to angle,
duplication and set size.
"""

import numpy as np

from rubriclearn import CodingRateParams, coding_rate, marginal_gain

params = CodingRateParams(epsilon=1.0)

# Two unit vectors in the plane, swept from identical to orthogonal.
u = np.array([1.0, 0.0])
for degrees in (0, 15, 30, 45, 60, 75, 90):
    theta = np.radians(degrees)
    v = np.array([np.cos(theta), np.sin(theta)])
    print(f"angle {degrees:2d} deg  C = {coding_rate(np.column_stack([u, v]), params):.6f}")

# The orthogonal pair is the maximum: ln(1.5) at epsilon = 1.
print("ln 1.5 =", np.log(1.5))

# %%
# Marginal gains
# --------------
# Adding a new direction helps. Adding a copy of a direction that is already
# present never helps and here costs a little, because the 1/n scaling
# dilutes the other axes.
E = np.eye(3)[:, :2]
print("gain of e3:", marginal_gain(E, np.eye(3)[:, 2], params))
print("gain of e1 copy:", marginal_gain(E, np.eye(3)[:, 0], params))

# %%
# Epsilon sets the resolution
# ---------------------------
# Smaller epsilon magnifies every direction, so the rate grows with it.
rng = np.random.default_rng(0)
X = rng.standard_normal((16, 8))
X /= np.linalg.norm(X, axis=0)
for eps in (0.25, 0.5, 1.0, 2.0):
    print(f"eps {eps:4.2f}  C = {coding_rate(X, CodingRateParams(eps)):.4f}")
