# %% [markdown]
# # Cut time
#
# The geodesic stops minimizing once another extremal reaches the same point
# with smaller action.  For Heisenberg at unit speed this happens at the first
# conjugate time 2 pi/|w|; the Euclidean plane never cuts.
#
# Each call shoots from a grid of covectors and takes a few seconds.

# %%
import math

from subriem import builtin, cut_time

rec = cut_time(builtin("heisenberg"), [0, 0, 0], [1, 0, math.pi], t_max=3.0)
print("Heisenberg w = pi :", rec.t_cut, "in Cut^1:", rec.in_cut1)

euc = cut_time(builtin("euclidean2"), [0, 0], [1, 0], t_max=10.0, shoot_grid=(8, 4, 8, 1))
print("Euclidean          :", euc.t_cut)
