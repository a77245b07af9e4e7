# %% [markdown]
# # Conjugate times and their order
#
# The Jacobian determinant D(t) = det dq(t)/dlam0 vanishes at conjugate
# times.  On Heisenberg the first zero sits at 2 pi/|w|.

# %%
import math

import numpy as np

from subriem import (builtin, estimate_order, find_conjugate_times, integrate_variational,
                     abnormal_segments)

s = builtin("heisenberg")
origin = np.zeros(3)

# %%
for w in (math.pi, 2 * math.pi, 4 * math.pi):
    track = integrate_variational(s, origin, [1, 0, w], 1.5 * 2 * math.pi / w)
    recs = find_conjugate_times(track)
    print(f"w={w:.4f}  first t*={recs[0].t_star:.10f}  2pi/|w|={2 * math.pi / w:.10f}  "
          f"order={recs[0].order}")

# %% [markdown]
# The order is read off two ways (log-log slope of |D| and the first
# non-vanishing derivative); a disagreement raises instead of guessing.

# %%
track = integrate_variational(s, origin, [1, 0, 2 * math.pi], 1.2, tol=1e-12)
m, c = estimate_order(track, 1.0)
print("order", m, "leading coefficient", c)

# %% [markdown]
# Martinet along (0, 1, 0) is abnormal: D vanishes identically, and the
# whole interval is flagged.

# %%
mart = integrate_variational(builtin("martinet"), origin, [0, 1, 0], 1.0)
print("max |D|", np.max(np.abs(mart.D)), "segments", abnormal_segments(mart))
