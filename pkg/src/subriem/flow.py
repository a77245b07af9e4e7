"""Normal Hamiltonian flow, exponential map and variational equations.

The variational equations are co-integrated with the extremal in one state
vector ``[q, lam, Phi]`` where ``Phi`` is the fundamental matrix of the
linearised Hamiltonian system (``Phi(0) = I``).  The block of ``Phi`` that maps
an initial covector perturbation ``(0, dlam0)`` to the base displacement
``dq(t)`` is ``M(t) = dq(t)/dlam0``; its determinant is the curve ``D(t)``.

Because ``exp_p(t lam0) = q(t; lam0)``, differentiating in ``lam0`` gives

    d_{t lam0} exp_p = M(t) / t,     det d_{t lam0} exp_p = D(t) / t^n,

which is what :func:`det_exp_along_ray` returns.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InputError, IntegrationError
from .integrate import DenseSolution, dopri5
from .structures import Structure, _point

SAMPLES_PER_UNIT = 512
# global error of the 5(4) pair is ~10x its local tolerance; sampled trajectories
# carry a hard energy invariant, so their controller runs a decade tighter
_TRAJ_LOCAL = 0.1
TOL_RANGE = (1e-13, 1e-3)


def _check_tol(tol):
    if not (TOL_RANGE[0] <= tol <= TOL_RANGE[1]):
        raise InputError(f"tol must lie in [{TOL_RANGE[0]:g}, {TOL_RANGE[1]:g}]", tol=tol)


def _check_T(T):
    if not (T > 0 and math.isfinite(T)):
        raise InputError("final time must be positive", T=T)


def uniform_grid(T, density=SAMPLES_PER_UNIT):
    n = max(2, int(math.ceil(density * T)) + 1)
    return np.linspace(0.0, T, n)


# ----------------------------------------------------------------------
# batched primitives


def _extremal_rhs(s: Structure):
    n = s.n

    def f(t, y):
        qd, ld = s.rhs_T(y[:n], y[n:])
        return np.concatenate([qd, ld], axis=0)

    return f


def _variational_rhs(s: Structure, ncols: int):
    """Column state: [q, lam, Phi (2n x ncols) row-major], shape (d, B)."""
    n = s.n

    def f(t, y):
        B = y.shape[1]
        qd, ld, A = s.rhs_and_jacobian_T(y[:n], y[n:2 * n])
        Phi = y[2 * n:].reshape(2 * n, ncols, B)
        dPhi = np.matmul(A.transpose(2, 0, 1), Phi.transpose(2, 0, 1)).transpose(1, 2, 0)
        return np.concatenate([qd, ld, dPhi.reshape(-1, B)], axis=0)

    return f


def _variational_init(s, p, lams, full):
    """Initial column state for covectors given as rows of ``lams``."""
    n = s.n
    B = lams.shape[0]
    ncols = 2 * n if full else n
    Phi0 = np.zeros((2 * n, ncols))
    if full:
        Phi0[:] = np.eye(2 * n)
    else:
        Phi0[n:, :] = np.eye(n)
    y0 = np.concatenate([np.repeat(p[:, None], B, axis=1), lams.T,
                         np.repeat(Phi0.reshape(-1, 1), B, axis=1)], axis=0)
    return y0, ncols


def _as_batch(s, lams):
    lams = np.asarray(lams, dtype=float)
    if lams.ndim == 1:
        lams = lams[None]
    if lams.ndim != 2 or lams.shape[1] != s.n:
        raise InputError(f"covectors must have dimension {s.n}")
    return lams


def _unpack(s, y, ncols):
    """(q, lam, M) row-major from a column state."""
    n = s.n
    B = y.shape[1]
    Phi = y[2 * n:].reshape(2 * n, ncols, B)
    M = np.transpose(Phi[:n, ncols - n:], (2, 0, 1))
    return y[:n].T, y[n:2 * n].T, M


def exp_batch(s: Structure, p, lams, t=1.0, tol=1e-11):
    """``exp_p(t * lam)`` for every row of ``lams``; returns (B, n)."""
    p = _point(s, p, "p")
    lams = _as_batch(s, lams)
    y0 = np.concatenate([np.repeat(p[:, None], len(lams), axis=1), lams.T], axis=0)
    if t == 0:
        return y0[:s.n].T.copy()
    y, _, _ = dopri5(_extremal_rhs(s), 0.0, y0, float(t), rtol=tol, dense=False)
    return y[:s.n].T


def endpoint_batch(s: Structure, p, lams, t=1.0, tol=1e-11):
    """``(q(t), lam(t), M(t))`` for a batch of initial covectors (rows)."""
    p = _point(s, p, "p")
    lams = _as_batch(s, lams)
    y0, ncols = _variational_init(s, p, lams, full=False)
    if t == 0:
        y = y0
    else:
        y, _, _ = dopri5(_variational_rhs(s, ncols), 0.0, y0, float(t), rtol=tol, dense=False)
    return _unpack(s, y, ncols)


def _time_scaled(f, speeds):
    """Autonomous ``f`` reparametrised so member j covers ``[0, speeds[j]]`` on ``[0, 1]``."""
    sp = np.asarray(speeds, dtype=float)[None, :]

    def g(tau, y):
        return f(tau, y) * sp

    return g


def endpoint_batch_times(s: Structure, p, lams, times, tol=1e-11):
    """Like :func:`endpoint_batch` but member j is evaluated at ``times[j]``.

    The flow is autonomous, so member j is integrated on the rescaled clock
    ``t = times[j] * tau``, ``tau`` in [0, 1]; every member ends exactly at its
    own time without interpolation.
    """
    p = _point(s, p, "p")
    lams = _as_batch(s, lams)
    times = np.broadcast_to(np.asarray(times, dtype=float), (len(lams),))
    if np.any(times < 0):
        raise DomainError("times must be non-negative")
    y0, ncols = _variational_init(s, p, lams, full=False)
    if np.max(times) <= 0:
        y = y0
    else:
        y, _, _ = dopri5(_time_scaled(_variational_rhs(s, ncols), times), 0.0, y0, 1.0,
                         rtol=tol, dense=False)
    return _unpack(s, y, ncols)


class RayBatch:
    """Dense variational data along many rays ``t -> t lam`` at once.

    Member j follows the extremal from ``(p, lams[j])``; ``at`` evaluates
    arbitrary (member, time) pairs from the shared interpolant.
    """

    def __init__(self, s: Structure, p, lams, T, tol=1e-10):
        self.structure = s
        self.p = _point(s, p, "p")
        self.lams = _as_batch(s, lams)
        self.T = float(T)
        self.tol = tol
        y0, self._ncols = _variational_init(s, self.p, self.lams, full=False)
        _, _, self._sol = dopri5(_variational_rhs(s, self._ncols), 0.0, y0, self.T, rtol=tol)

    def __len__(self):
        return len(self.lams)

    def at(self, members, times):
        """``(q, lam, M)`` for member ``members[k]`` at ``times[k]``."""
        times = np.asarray(times, dtype=float)
        members = np.broadcast_to(np.asarray(members), times.shape)
        if np.any(times < 0) or np.any(times > self.T * (1 + 1e-14)):
            raise DomainError("time outside [0, T]", T=self.T)
        y = self._sol.at_times(np.minimum(times, self.T), members)
        return _unpack(self.structure, y, self._ncols)

    def D(self, members, times):
        return np.linalg.det(self.at(members, times)[2])

    def sample_M(self, grid):
        """M on a common grid, shape (G, B, n, n)."""
        n = self.structure.n
        Y = self._sol.sample(grid)
        B = Y.shape[2]
        Phi = Y[:, 2 * n:].reshape(len(grid), 2 * n, self._ncols, B)
        return np.transpose(Phi[:, :n, self._ncols - n:], (0, 3, 1, 2))


def det_samples_batch(s: Structure, p, lams, T, tol=1e-10, density=SAMPLES_PER_UNIT):
    """Sample ``D(t) = det M(t)`` on the uniform grid for a batch.

    Returns ``(grid, D, M)`` with D of shape (G, B) and M of shape (G, B, n, n).
    """
    p = _point(s, p, "p")
    lams = _as_batch(s, lams)
    n = s.n
    y0, ncols = _variational_init(s, p, lams, full=False)
    grid = uniform_grid(T, density)
    keep = np.arange(2 * n, 2 * n + n * n)  # rows of Phi belonging to q
    _, samples, _ = dopri5(_variational_rhs(s, ncols), 0.0, y0, T, rtol=tol,
                           keep=keep, dense=False, t_eval=grid)
    M = np.transpose(samples.reshape(len(grid), n, n, len(lams)), (0, 3, 1, 2))
    return grid, np.linalg.det(M), M


# ----------------------------------------------------------------------
# trajectory objects


@dataclass(frozen=True, eq=False)
class ExtremalTrajectory:
    """A sampled normal extremal with dense output."""

    structure: Structure
    p: np.ndarray
    lam0: np.ndarray
    T: float
    t: np.ndarray
    q: np.ndarray
    lam: np.ndarray
    energy: float
    tol: float
    _dense: DenseSolution = field(repr=False)

    def at(self, t):
        """``(q(t), lam(t))`` from the interpolant."""
        if not (0.0 <= t <= self.T):
            raise DomainError("time outside [0, T]", t=t, T=self.T)
        y = self._dense(t)[:, 0]
        n = self.structure.n
        return y[:n], y[n:2 * n]

    def states(self, times):
        """``(q, lam)`` at an array of times, each (len(times), n)."""
        times = np.asarray(times, dtype=float)
        if np.any(times < 0) or np.any(times > self.T):
            raise DomainError("time outside [0, T]", T=self.T)
        Y = self._dense.sample(times)[:, :, 0]
        n = self.structure.n
        return Y[:, :n], Y[:, n:2 * n]

    @property
    def energy_drift(self):
        H = self.structure.energy_batch(self.q, self.lam)
        return float(np.max(np.abs(H - self.energy)))

    def qdot(self):
        return self.structure.rhs_batch(self.q, self.lam)[0]

    def to_csv(self, path, D=None):
        write_trajectory_csv(path, self.t, self.q, self.lam, D)


@dataclass(frozen=True, eq=False)
class JacobianTrack:
    """Fundamental matrix, vertical block and determinant curve along an extremal."""

    trajectory: ExtremalTrajectory
    t: np.ndarray
    Phi: np.ndarray
    M: np.ndarray
    D: np.ndarray
    _dense: DenseSolution = field(repr=False)

    @property
    def T(self):
        return self.trajectory.T

    @property
    def n(self):
        return self.trajectory.structure.n

    @property
    def tol(self):
        return self.trajectory.tol

    def state_at(self, t):
        """``(q, lam, Phi)`` at time t."""
        if not (0.0 <= t <= self.T):
            raise DomainError("time outside [0, T]", t=t, T=self.T)
        y = self._dense(t)[:, 0]
        n = self.n
        return y[:n], y[n:2 * n], y[2 * n:].reshape(2 * n, 2 * n)

    def M_at(self, t):
        n = self.n
        return self.state_at(t)[2][:n, n:]

    def D_at(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return float(np.linalg.det(self.M_at(float(t))))
        if np.any(t < 0) or np.any(t > self.T):
            raise DomainError("time outside [0, T]", T=self.T)
        n = self.n
        Y = self._dense.sample(t)[:, :, 0]
        Phi = Y[:, 2 * n:].reshape(-1, 2 * n, 2 * n)
        return np.linalg.det(Phi[:, :n, n:])

    def __call__(self, t):
        return self.D_at(t)


def integrate_extremal(s: Structure, p, lam0, T, tol=1e-10, density=SAMPLES_PER_UNIT):
    """Normal extremal from (p, lam0) on [0, T]."""
    _check_T(T)
    _check_tol(tol)
    p = _point(s, p, "p")
    lam0 = _point(s, lam0, "lam0")
    n = s.n
    y0 = np.concatenate([p, lam0])[:, None]
    _, _, sol = dopri5(_extremal_rhs(s), 0.0, y0, T, rtol=_TRAJ_LOCAL * tol)
    grid = uniform_grid(T, density)
    Y = sol.sample(grid)[:, :, 0]
    Y[0] = y0[:, 0]
    energy = float(s.energy_batch(p[None], lam0[None])[0])
    traj = ExtremalTrajectory(s, p, lam0, float(T), grid, Y[:, :n], Y[:, n:], energy, tol, sol)
    _check_energy(traj)
    return traj


def _check_energy(traj):
    bound = max(1e-9, 10 * traj.tol) * (1 + traj.energy)
    drift = traj.energy_drift
    if drift > bound:
        raise IntegrationError("energy drift exceeds bound", last_time=traj.T,
                               drift=drift, bound=bound)


def exp_map(s: Structure, p, lam0, tol=1e-11):
    """``exp_p(lam0)``: base point of the time-1 flow."""
    p = _point(s, p, "p")
    lam0 = _point(s, lam0, "lam0")
    return exp_batch(s, p, lam0[None], 1.0, tol)[0]


def integrate_variational(s: Structure, p, lam0, T, tol=1e-10, density=SAMPLES_PER_UNIT):
    """Extremal plus fundamental matrix on [0, T]."""
    _check_T(T)
    _check_tol(tol)
    p = _point(s, p, "p")
    lam0 = _point(s, lam0, "lam0")
    n = s.n
    y0, ncols = _variational_init(s, p, lam0[None], full=True)
    _, _, sol = dopri5(_variational_rhs(s, ncols), 0.0, y0, T, rtol=_TRAJ_LOCAL * tol)
    grid = uniform_grid(T, density)
    Y = sol.sample(grid)[:, :, 0]
    Y[0] = y0[:, 0]
    energy = float(s.energy_batch(p[None], lam0[None])[0])
    traj = ExtremalTrajectory(s, p, lam0, float(T), grid, Y[:, :n], Y[:, n:2 * n],
                              energy, tol, sol)
    _check_energy(traj)
    Phi = Y[:, 2 * n:].reshape(-1, 2 * n, 2 * n)
    M = Phi[:, :n, n:]
    D = np.linalg.det(M)
    return JacobianTrack(traj, grid, Phi, M, D, sol)


def det_exp_along_ray(track: JacobianTrack, t) -> float:
    """``det d_{t lam0} exp_p = t^-n D(t)``."""
    if t <= 0:
        raise DomainError("det d exp along a ray needs t > 0", t=t)
    if t > track.T:
        raise DomainError("t beyond the integrated horizon", t=t, T=track.T)
    return track.D_at(float(t)) / t ** track.n


def det_exp(s: Structure, p, lam, tol=1e-11) -> float:
    """``det d_lam exp_p`` computed directly at the covector ``lam``."""
    _, _, M = endpoint_batch(s, p, _point(s, lam)[None], 1.0, tol)
    return float(np.linalg.det(M[0]))


def degeneracy(M):
    """Relative smallest singular value ``sigma_min / sigma_max`` of M.

    Scale-free measure of how close M is to singular; 0 for M = 0.  Used for
    abnormality flags, kernel dimensions and singularity checks.
    """
    sv = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    top = sv[..., 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(top > 0, sv[..., -1] / np.where(top > 0, top, 1.0), 0.0)


def write_trajectory_csv(path, t, q, lam, D=None):
    n = q.shape[1]
    header = ["t"] + [f"q{i + 1}" for i in range(n)] + [f"lam{i + 1}" for i in range(n)]
    if D is not None:
        header.append("D")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(t)):
            row = [t[i], *q[i], *lam[i]] + ([D[i]] if D is not None else [])
            w.writerow([format(float(v), ".17g") for v in row])
