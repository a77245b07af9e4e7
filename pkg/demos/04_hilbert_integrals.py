# %% [markdown]
# # Hilbert invariant integrals
#
# On the augmented cotangent fibre the form eta* is exact, so its integral
# along a ray is H times the elapsed time and closed loops integrate to zero
# up to quadrature error.

# %%
import math

import numpy as np

from subriem import (FieldInverse, builtin, gauss_defect, graph_curve, hilbert_base, hilbert_star,
                     integrate_extremal, ray_curve)
from subriem.hilbert import hilbert_star_many, random_star_loop

s = builtin("heisenberg")
origin = np.zeros(3)

# %%
print("ray  :", hilbert_star(s, origin, ray_curve([1, 0, 2 * math.pi], 0.0, 1.0)).value, "(H = 0.5)")

rng = np.random.default_rng(0)
loops = [random_star_loop(rng, 0.8, [0.5, 0.2, 3.0], 0.2) for _ in range(5)]
for r in hilbert_star_many(s, origin, loops):
    print(f"loop : {r.value: .2e}  error estimate {r.error:.2e}")

# %% [markdown]
# The same quantity on the base: the graph of a non-conjugate geodesic is
# pulled back through the inverse of the field of extremals.

# %%
lam0 = np.array([0.5, 0, math.pi])
traj = integrate_extremal(s, origin, lam0, 1.0, tol=1e-12)
base = hilbert_base(s, origin, graph_curve(traj, 0.0, 1.0), FieldInverse(origin, 1.0, lam0))
star = hilbert_star(s, origin, ray_curve(lam0, 0.0, 1.0))
print("base", base.value, "star", star.value)

# %% [markdown]
# The Gauss lemma pairing holds to finite-difference round-off.

# %%
print(gauss_defect(s, origin, lambda x: np.array([math.cos(x), math.sin(x), 2 * math.pi]), 0.7))
