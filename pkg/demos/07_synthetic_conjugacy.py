# %% [markdown]
# # Synthetic conjugacy
#
# Near a conjugate geodesic there are pairs of distinct geodesics with common
# endpoints whose geodesic distance to the central one shrinks with the
# radius.  ONE_SIDED keeps the initial point fixed; SYMMETRIC moves both ends.

# %%
import math

import numpy as np

from subriem import ONE_SIDED, SYMMETRIC, builtin, synthetic_witness

s = builtin("heisenberg")

# %%
for kind in (ONE_SIDED, SYMMETRIC):
    sw = synthetic_witness(s, np.zeros(3), [1, 0, 2 * math.pi], kind=kind, n_levels=3)
    print(kind, "decreasing:", sw.decreasing)
    for lv in sw.levels:
        print(f"   radius {lv.radius:.3g}: d_Geo {lv.d1:.4f} {lv.d2:.4f}  gap {lv.image_gap:.1e}")
