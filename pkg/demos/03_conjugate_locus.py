# %% [markdown]
# # A slice of the conjugate locus
#
# Sample covectors of energy 1/2 on a (direction, fibre) grid and ask which
# of them are conjugate at time one.  On Heisenberg they all sit on |w| = 2 pi.

# %%
import math

import numpy as np

from subriem import builtin, energy_grid, locus_slice
from subriem.conjugate import radial_transversal

s = builtin("heisenberg")
grid = energy_grid(s, np.zeros(3), 0.5, n_dir=12, n_fibre=12)
sl = locus_slice(s, np.zeros(3), 0.5, grid, t_max=2.0)
pts = sl.locus_points()

# %%
print(len(pts), "of", len(sl.entries), "grid rays reach a conjugate time by t = 2")
print("max ||w| - 2 pi| :", np.max(np.abs(np.abs(pts[:, 2]) - 2 * math.pi)))
print("radially transversal:", all(radial_transversal(e) for e in sl.present))
