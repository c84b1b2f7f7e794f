# %% [markdown]
# # Expected Euler characteristic as a tail approximation
#
# For a smooth unit-variance Gaussian process the probability that its
# supremum exceeds a high level is well approximated by the expected Euler
# characteristic of the excursion set. This script tabulates the per-dimension
# terms for an interval, a rectangle and a disc.

# %%
import math

import numpy as np

from echeuristic import box, convex_planar, ec_approximation, interval

levels = np.arange(1.0, 4.01, 0.5)

# %% An interval of length 5 (unit second spectral moment)
print(f"{'u':>5} {'P(Z>=u)':>12} {'boundary':>12} {'total':>12}")
for u in levels:
    a = ec_approximation(interval(5.0), u)
    print(f"{u:5.2f} {a.terms[0]:12.4e} {a.terms[1]:12.4e} {a.total:12.4e}")

# %% [markdown]
# In two dimensions the area term dominates at high levels.

# %%
rect = box(2.0, 3.0)
disc = convex_planar(math.pi, 2 * math.pi)
for u in (2.0, 3.0, 4.0):
    print(f"u={u}: rectangle {ec_approximation(rect, u).total:.4e}  unit disc {ec_approximation(disc, u).total:.4e}")

# %% [markdown]
# Doubling the correlation length is the same as halving the domain in
# normalized units.

# %%
wide = interval(10.0, lambda2=0.25)
print(ec_approximation(wide, 2.5).total, ec_approximation(interval(5.0), 2.5).total)
