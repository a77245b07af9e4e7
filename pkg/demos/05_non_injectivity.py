# %% [markdown]
# # Non-injectivity near a conjugate covector
#
# Any ball around (1, 0, 2 pi) contains two distinct covectors with the same
# image under exp.  The search is a Latin hypercube sample, a k-d tree of
# near collisions, and a Newton polish.

# %%
import math

import numpy as np

from subriem import builtin, exp_map, injectivity_witness

s = builtin("heisenberg")
lam0 = [1, 0, 2 * math.pi]

# %%
for radius in (0.1, 0.01):
    w = injectivity_witness(s, np.zeros(3), lam0, radius, budget=2000, seed=7)
    print(f"radius {radius}: separation {w.separation:.3e}  image gap {w.image_gap:.1e}")
    print("   ", exp_map(s, np.zeros(3), w.lam1), exp_map(s, np.zeros(3), w.lam2))
