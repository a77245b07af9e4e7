"""Batched Dormand-Prince 5(4) stepper with dense output.

Many trajectories (exponential-map samples, shooting grids, quadrature
nodes) are advanced together on a shared step sequence.  The step is accepted
only when every member of the batch meets its own error tolerance, so
batching never loosens the accuracy of an individual trajectory.

The Butcher tableau and the dense-output matrix are taken from
:class:`scipy.integrate.RK45`.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import RK45

from .errors import IntegrationError

_A = RK45.A
_B = RK45.B
_C = RK45.C
_E = RK45.E
_P = RK45.P
_ORDER = RK45.error_estimator_order  # 4
_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


class DenseSolution:
    """Piecewise quartic interpolant of a batched solution.

    States are stored batch-last: ``ts`` holds the accepted step boundaries,
    ``ys[i]`` the (d, B) state at ``ts[i]`` and ``Q[i]`` the (d, B, 4)
    interpolation coefficients on step i.
    """

    def __init__(self, ts, ys, Q, keep=None):
        self.ts = np.asarray(ts)
        self.ys = ys
        self.Q = Q
        self.keep = keep

    @property
    def t_final(self):
        return float(self.ts[-1])

    def _locate(self, t):
        idx = np.searchsorted(self.ts, t, side="right") - 1
        return np.clip(idx, 0, len(self.ts) - 2)

    def __call__(self, t):
        """State of every member at a common time, shape (d, B)."""
        t = float(t)
        if len(self.ts) == 1:
            return self.ys[0].copy()
        i = int(self._locate(t))
        h = self.ts[i + 1] - self.ts[i]
        x = (t - self.ts[i]) / h
        pw = x ** np.arange(1, 5)
        return self.ys[i] + h * (self.Q[i] @ pw)

    def at_times(self, times, members=None):
        """Member ``members[j]`` (default j) at ``times[j]``, shape (d, len(times))."""
        times = np.asarray(times, dtype=float)
        members = np.arange(times.shape[0]) if members is None else np.asarray(members)
        if len(self.ts) == 1:
            return self.ys[0][:, members].copy()
        idx = self._locate(times)
        h = self.ts[idx + 1] - self.ts[idx]
        x = (times - self.ts[idx]) / h
        y0 = self.ys[idx, :, members].T                     # (d, B)
        Q = self.Q[idx, :, members]                         # (B, d, 4)
        val = Q[:, :, 3]
        for j in (2, 1, 0):
            val = val * x[:, None] + Q[:, :, j]
        return y0 + (h * x)[None, :] * val.T

    def sample(self, grid):
        """Evaluate on a common grid, shape (len(grid), d, B)."""
        grid = np.asarray(grid, dtype=float)
        if len(self.ts) == 1:
            return np.repeat(self.ys[:1], len(grid), axis=0)
        idx = self._locate(grid)
        h = self.ts[idx + 1] - self.ts[idx]
        x = (grid - self.ts[idx]) / h
        pw = x[:, None] ** np.arange(1, 5)[None, :]
        return self.ys[idx] + h[:, None, None] * np.einsum("gdbj,gj->gdb", self.Q[idx], pw)


def _rms(err, scale):
    r = err / scale
    return np.sqrt(np.mean(r * r, axis=0))


def dopri5(f, t0, y0, t1, rtol=1e-10, atol=None, keep=None, dense=True,
           t_eval=None, max_steps=200000, first_step=None):
    """Integrate ``y' = f(t, y)`` for a batch ``y0`` of shape (d, B).

    Members are columns.

    Parameters
    ----------
    f : callable
        ``f(t, y) -> dy`` acting on (d, B) arrays.
    keep : slice or index array, optional
        Rows stored for dense output and samples (all by default).
    dense : bool
        Store the interpolant.  When False only ``t_eval`` samples and the
        final state are returned.
    t_eval : array, optional
        Times at which to record the (kept) state.

    Returns
    -------
    y_final : (d, B) array
    samples : (len(t_eval), d_keep, B) array or None
    dense : DenseSolution or None
    """
    y = np.array(y0, dtype=float)
    if y.ndim != 2:
        raise ValueError("y0 must have shape (d, B)")
    if atol is None:
        atol = rtol
    t = float(t0)
    t1 = float(t1)
    if t1 <= t:
        raise ValueError("t1 must exceed t0")
    kp = slice(None) if keep is None else keep

    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        samples = np.empty((len(t_eval),) + y[kp].shape)
        ev = 0
        while ev < len(t_eval) and t_eval[ev] <= t:
            samples[ev] = y[kp]
            ev += 1
    else:
        samples = None
        ev = 0

    ts = [t]
    ys = [y[kp].copy()] if dense else None
    Qs = [] if dense else None

    fy = f(t, y)
    if first_step is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.max(_rms(y, scale))
        d1 = np.max(_rms(fy, scale))
        h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h = min(h, abs(t1 - t0))
    else:
        h = first_step

    K = np.empty((7,) + y.shape)
    steps = 0
    while t < t1:
        if steps >= max_steps:
            raise IntegrationError("maximum number of steps exceeded", last_time=t)
        min_h = 16 * np.spacing(max(abs(t), 1.0))
        h = min(h, t1 - t)
        accepted = False
        while not accepted:
            if h < min_h:
                raise IntegrationError("step size underflow", last_time=t)
            K[0] = fy
            for s in range(1, 6):
                dy = np.tensordot(_A[s, :s], K[:s], axes=(0, 0)) * h
                K[s] = f(t + _C[s] * h, y + dy)
            y_new = y + h * np.tensordot(_B, K[:6], axes=(0, 0))
            f_new = f(t + h, y_new)
            K[6] = f_new
            err = h * np.tensordot(_E, K, axes=(0, 0))
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            norms = _rms(err, scale)
            if not np.all(np.isfinite(y_new)):
                norms = np.full_like(norms, np.inf)
            en = float(np.max(norms))
            if en <= 1.0:
                accepted = True
                factor = _MAX_FACTOR if en == 0 else min(_MAX_FACTOR, _SAFETY * en ** (-1 / (_ORDER + 1)))
            else:
                if not np.isfinite(en):
                    factor = _MIN_FACTOR
                else:
                    factor = max(_MIN_FACTOR, _SAFETY * en ** (-1 / (_ORDER + 1)))
                h *= factor
        t_new = t + h
        if t1 - t_new < 4 * np.spacing(t1):
            t_new = t1
        if dense or (t_eval is not None and ev < len(t_eval)):
            Q = np.einsum("sdb,sj->dbj", K[:, kp] if keep is not None else K, _P)
        if t_eval is not None:
            while ev < len(t_eval) and t_eval[ev] <= t_new:
                x = (t_eval[ev] - t) / h
                samples[ev] = y[kp] + h * (Q @ (x ** np.arange(1, 5)))
                ev += 1
        if dense:
            Qs.append(Q)
            ys.append(y_new[kp].copy())
            ts.append(t_new)
        t = t_new
        y = y_new
        fy = f_new
        h *= factor
        steps += 1

    sol = None
    if dense:
        Q = np.stack(Qs) if Qs else np.zeros((0,) + ys[0].shape + (4,))
        sol = DenseSolution(np.array(ts), np.stack(ys), Q, keep)
    return y, samples, sol
