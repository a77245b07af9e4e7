# %% [markdown]
# # Heisenberg geodesics
#
# Normal extremals of the Heisenberg structure from the origin.  The
# covector (a, b, w) fixes a circle of radius sqrt(a^2 + b^2)/|w| in the
# horizontal plane; the height gained is the area it sweeps.

# %%
import math

import numpy as np

from subriem import builtin, exp_map, integrate_extremal

s = builtin("heisenberg")
origin = np.zeros(3)

# %% [markdown]
# One full turn: w = 2 pi at unit speed closes the circle at t = 1 and lands
# on the vertical axis at height 1/(4 pi).

# %%
tr = integrate_extremal(s, origin, [1, 0, 2 * math.pi], 1.0)
print("final point", tr.q[-1])
print("1/(4 pi)   ", 1 / (4 * math.pi))
print("energy drift", tr.energy_drift)

# %% [markdown]
# Rotating (a, b) does not move the endpoint when the loop is closed, which is
# the symmetry every non-injectivity witness below exploits.

# %%
for th in (0.0, 0.3, 1.1, 2.5):
    print(f"theta={th:.1f}", exp_map(s, origin, [math.cos(th), math.sin(th), 2 * math.pi]))

# %% [markdown]
# With w = 0 the geodesic is a straight horizontal line.

# %%
print(exp_map(s, origin, [1, 0, 0]))
