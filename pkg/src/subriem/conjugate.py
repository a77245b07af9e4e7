"""Conjugate times, vanishing orders, regularity and conjugate-locus slices.

A covector ``t lam0`` is conjugate when ``d_{t lam0} exp_p`` is singular,
i.e. when ``D(t) = det M(t)`` vanishes.  Zeros with a sign change are
bracketed and refined with Brent's method; zeros without one (even order)
show up as minima of ``|D|`` and are accepted only if ``M`` is numerically
rank deficient there.

Degeneracy is measured scale-free by ``sigma_min / sigma_max`` of ``M``
(see :func:`subriem.flow.degeneracy`).  An abnormal segment is a run of grid
samples on which ``M`` is singular to that tolerance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError, InconclusiveOrder, InputError
from .fd import central_offsets, fd_weights
from .flow import (SAMPLES_PER_UNIT, JacobianTrack, RayBatch, degeneracy, endpoint_batch,
                   integrate_variational, uniform_grid)
from .structures import Structure, _point

INFINITE = math.inf

ABNORMAL_TOL = 1e-10
KERNEL_TOL = 1e-6
# a run of singular samples touching t = 0 must last this fraction of T to
# count as abnormal; shorter ones are the small-time nonholonomic degeneracy
MIN_START_FRACTION = 0.05


@dataclass(frozen=True)
class ConjugateRecord:
    """One conjugate time along a ray.

    ``order`` is a positive integer, :data:`INFINITE`, or None when the two
    order estimators could not be reconciled.  ``regular`` is None unless a
    regularity check was run.
    """

    t_star: float
    order: object
    kernel_dim: int
    regular: object = None
    residual: float = 0.0
    leading_coeff: float | None = None

    def to_dict(self):
        return {
            "t_star": self.t_star,
            "order": _order_json(self.order),
            "kernel_dim": self.kernel_dim,
            "regular": self.regular,
            "residual": self.residual,
            "leading_coeff": self.leading_coeff,
        }


def _order_json(order):
    if order is None:
        return None
    if order == INFINITE:
        return "INFINITE"
    return int(order)


# ----------------------------------------------------------------------
# abnormal runs


def _singular_runs(t, deg, tol, T, min_start_fraction=MIN_START_FRACTION):
    """Maximal runs of samples (t > 0) with ``deg <= tol``, as intervals."""
    flagged = np.asarray(deg) <= tol
    flagged = flagged & (np.asarray(t) > 0)
    runs = []
    i, G = 0, len(t)
    while i < G:
        if not flagged[i]:
            i += 1
            continue
        j = i
        while j + 1 < G and flagged[j + 1]:
            j += 1
        touches_zero = i == 0 or t[i - 1] == 0.0
        if j - i + 1 >= 3 and (not touches_zero or t[j] >= min_start_fraction * T):
            runs.append((0.0 if touches_zero else float(t[i]), float(t[j])))
        i = j + 1
    return runs


def abnormal_segments(track: JacobianTrack, tol=ABNORMAL_TOL):
    """Intervals of (0, T] on which the determinant curve vanishes identically.

    A sample is singular when ``sigma_min(M) <= tol * sigma_max(M)``; runs of at
    least three consecutive singular samples are reported.

    Examples
    --------
    >>> from subriem.structures import martinet
    >>> from subriem.flow import integrate_variational
    >>> tr = integrate_variational(martinet(), [0, 0, 0], [0, 1, 0], 1.0)
    >>> abnormal_segments(tr)
    [(0.0, 1.0)]
    """
    return _singular_runs(track.t, degeneracy(track.M), tol, track.T)


def _in_segments(t, segs, pad=0.0):
    return any(a - pad <= t <= b + pad for a, b in segs)


# ----------------------------------------------------------------------
# zero search shared by single tracks and batches


def _zero_candidates(t, D, t_min):
    """Grid brackets for sign changes and indices of |D| minima on t > t_min."""
    sel = np.nonzero(t > t_min)[0]
    brackets, minima, exact = [], [], []
    if len(sel) == 0:
        return brackets, minima, exact
    idx = sel
    sgn = np.sign(D[idx])
    for a in range(len(idx)):
        if sgn[a] == 0:
            exact.append(idx[a])
    for a in range(len(idx) - 1):
        if sgn[a] * sgn[a + 1] < 0:
            brackets.append((idx[a], idx[a + 1]))
    absD = np.abs(D)
    for a in range(1, len(idx) - 1):
        i = idx[a]
        if absD[i] <= absD[i - 1] and absD[i] < absD[i + 1] and sgn[a - 1] == sgn[a] == sgn[a + 1] != 0:
            minima.append((i - 1, i, i + 1))
    last = idx[-1]
    if len(idx) >= 2 and absD[last] < absD[last - 1] and sgn[-1] == sgn[-2] != 0:
        minima.append((last - 1, last, None))
    return brackets, minima, exact


def _refine_sign(Dfun, a, b):
    return brentq(Dfun, a, b, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)


def _refine_min(Dfun, ta, tm, tb):
    f = lambda x: abs(Dfun(x))
    if tb is None:
        res = minimize_scalar(f, bounds=(ta, tm), method="bounded",
                              options={"xatol": 1e-12})
        return float(res.x)
    res = minimize_scalar(f, bracket=(ta, tm, tb), method="golden", tol=1e-10)
    return float(min(max(res.x, ta), tb))


def _locate_zeros(t, D, Dfun, degfun, t_min, tol_det, segs):
    """Refined zeros of D on (t_min, T]; even-order ones gated by degeneracy."""
    brackets, minima, exact = _zero_candidates(t, D, t_min)
    found = []
    for i in exact:
        found.append(float(t[i]))
    for i, j in brackets:
        found.append(_refine_sign(Dfun, float(t[i]), float(t[j])))
    for i, k, j in minima:
        ts = _refine_min(Dfun, float(t[i]), float(t[k]), None if j is None else float(t[j]))
        if degfun(ts) <= tol_det:
            found.append(ts)
    found = sorted(x for x in found if x > t_min and not _in_segments(x, segs))
    out = []
    for x in found:
        if not out or x - out[-1] > 1e-9:
            out.append(x)
    return out


def _kernel_dim(M, tol=KERNEL_TOL):
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0:
        return M.shape[0]
    return int(np.sum(sv <= tol * sv[0]))


def find_conjugate_times(track: JacobianTrack, t_min=1e-2, tol_det=1e-8, estimate=True,
                         window=None, max_order=8):
    """Conjugate times along the ray of ``track`` on (t_min, T].

    Parameters
    ----------
    track : JacobianTrack
    t_min : float
        Strictly positive lower bound; ``D(0) = 0`` for every ray.
    tol_det : float
        Degeneracy threshold accepting minima of ``|D|`` as even-order zeros.
    estimate : bool
        Also estimate the vanishing order of every zero.

    Returns
    -------
    list of ConjugateRecord
        Zeros inside abnormal segments are not reported individually.
    """
    if not t_min > 0:
        raise InputError("t_min must be positive", t_min=t_min)
    segs = abnormal_segments(track)
    n = track.n
    zeros = _locate_zeros(track.t, track.D, track.D_at,
                          lambda x: float(degeneracy(track.M_at(x))), t_min, tol_det, segs)
    records = []
    for k, ts in enumerate(zeros):
        M = track.M_at(ts)
        order, coeff = None, None
        if estimate:
            w = 0.05 * ts if window is None else window
            # keep other zeros out of the window
            if k > 0:
                w = min(w, 0.45 * (ts - zeros[k - 1]))
            if k + 1 < len(zeros):
                w = min(w, 0.45 * (zeros[k + 1] - ts))
            try:
                order, coeff = estimate_order(track, ts, window=w, max_order=max_order)
            except InconclusiveOrder:
                order = None
        records.append(ConjugateRecord(
            t_star=float(ts), order=order, kernel_dim=_kernel_dim(M),
            residual=abs(float(np.linalg.det(M))) / ts ** n, leading_coeff=coeff))
    return records


# ----------------------------------------------------------------------
# order of vanishing


def _extended(track, t_end):
    traj = track.trajectory
    return integrate_variational(traj.structure, traj.p, traj.lam0, t_end * 1.001 + 1e-9,
                                 tol=traj.tol)


def _as_D_function(track, t_star, window):
    if isinstance(track, JacobianTrack):
        if t_star + window > track.T:
            track = _extended(track, t_star + window)
        return track.D_at, 10 * track.tol
    f = track

    def D(tt):
        tt = np.asarray(tt, dtype=float)
        out = f(tt)
        out = np.asarray(out, dtype=float)
        if out.shape != tt.shape:
            out = np.array([f(x) for x in tt.ravel()], dtype=float).reshape(tt.shape)
        return out

    return D, 1e-14


def _loglog_order(D, t_star, window, noise, max_order):
    deltas = window * 2.0 ** -np.arange(0, 16)
    g = 0.5 * (np.abs(D(t_star + deltas)) + np.abs(D(t_star - deltas)))
    ok = g > 100 * noise
    if ok.sum() < 3:
        return INFINITE
    d, g = deltas[ok], g[ok]
    slopes = np.log2(g[:-1] / g[1:])
    s = slopes[-1]
    m = int(round(s))
    if abs(s - m) > 0.25 or m < 1:
        return None
    if m > max_order:
        return INFINITE
    return m


def _derivative_order(D, t_star, window, noise, max_order):
    for k in range(1, max_order + 1):
        off = central_offsets(k)
        w = fd_weights(k, off)
        half = off[-1]
        h = window / half
        d1 = float(w @ D(t_star + h * off)) / h ** k
        d2 = float(w @ D(t_star + 0.5 * h * off)) / (0.5 * h) ** k
        acc = len(off) - k + (1 if (len(off) - k) % 2 else 0)  # even accuracy order
        extr = d2 + (d2 - d1) / (2 ** acc - 1)
        floor = noise * np.sum(np.abs(w)) / (0.5 * h) ** k
        if abs(extr) > 10 * floor and abs(d1 - d2) <= 0.5 * abs(d2):
            return k, extr / math.factorial(k)
    return INFINITE, 0.0


def estimate_order(track, t_star, window=0.05, max_order=8, noise=None):
    """Vanishing order of D at ``t_star`` and its leading coefficient.

    Two estimators must agree: the slope of ``log|D|`` against
    ``log|t - t_star|`` on dyadically shrinking offsets, and the first central
    finite-difference derivative that is resolved above the noise floor and
    stable under halving of the step.

    Parameters
    ----------
    track : JacobianTrack or callable
        A callable must map an array of times to D values.
    window : float
        Half-width of the neighbourhood; no other zero may lie inside.
    noise : float, optional
        Absolute noise level of D; estimated from the integration tolerance
        (or 1e-14 relative for callables) by default.

    Returns
    -------
    (order, leading_coeff)
        order is an int or :data:`INFINITE`; ``D ~ c (t - t*)^order``.

    Raises
    ------
    InconclusiveOrder
        When the estimators disagree.
    """
    if not window > 0:
        raise InputError("window must be positive", window=window)
    if t_star - window <= 0:
        window = 0.5 * t_star
    D, rel = _as_D_function(track, t_star, window)
    probe = D(t_star + window * np.linspace(-1, 1, 9))
    scale = float(np.max(np.abs(probe)))
    if noise is None:
        noise = rel * scale + 1e-300
    if abs(float(D(np.array([t_star]))[0])) > max(1e3 * noise, 1e-6 * scale):
        raise InputError("t_star is not a zero of the determinant curve", t_star=t_star)
    m_a = _loglog_order(D, t_star, window, noise, max_order)
    m_b, c = _derivative_order(D, t_star, window, noise, max_order)
    if m_a != m_b:
        raise InconclusiveOrder("order estimators disagree", loglog=m_a, derivative=m_b)
    return m_b, c


# ----------------------------------------------------------------------
# Delta^{m-1}


def _delta_from_D(Dfun, c, k, h, n):
    """k-th t-derivative at t=1 of ``f(t) = D(c t) / (c t)^n``."""
    if k == 0:
        return float(Dfun(np.array([c]))[0]) / c ** n
    off = central_offsets(k, (k + 1) // 2)
    w = fd_weights(k, off)
    tau = c * (1 + h * off)
    return float(w @ (Dfun(tau) / tau ** n)) / h ** k


def delta_map(s: Structure, p, lam, m: int, h=1e-2, tol=1e-11):
    """``Delta^{m-1}``: (m-1)-th derivative at t=1 of ``t -> det d_{t lam} exp_p``.

    Uses a central stencil on ``[1 - m h, 1 + m h]`` (or narrower).
    """
    if m < 1:
        raise InputError("m must be at least 1", m=m)
    lam = _point(s, lam, "lam")
    k = m - 1
    half = (k + 1) // 2
    if 1 - half * h <= 0:
        raise DomainError("stencil leaves t > 0", m=m, h=h)
    if k == 0:
        _, _, M = endpoint_batch(s, p, lam[None], 1.0, tol)
        return float(np.linalg.det(M[0]))
    tr = integrate_variational(s, p, lam, 1 + half * h * 1.0001, tol)
    return _delta_from_D(tr.D_at, 1.0, k, h, s.n)


# ----------------------------------------------------------------------
# regularity


@dataclass(frozen=True)
class RegularityResult:
    """Outcome of :func:`check_regular`; ``regular`` is None when unknown."""

    regular: object
    counterexample: np.ndarray | None
    counts: list
    excluded: list
    radius: float
    seed: int
    note: str = ""

    def to_dict(self):
        return {
            "regular": self.regular,
            "counterexample": None if self.counterexample is None else list(self.counterexample),
            "counts": self.counts,
            "excluded": self.excluded,
            "radius": self.radius,
            "seed": self.seed,
            "note": self.note,
        }


def _ball_samples(rng, center, radius, count):
    n = len(center)
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / n)
    return center + d * r[:, None]


def _segment_in_ball(mu, center, radius):
    a = mu @ mu
    b = -2 * (mu @ center)
    c = center @ center - radius ** 2
    disc = max(b * b - 4 * a * c, 0.0)
    r = math.sqrt(disc)
    return (-b - r) / (2 * a), (-b + r) / (2 * a)


def conjugate_at_one(s: Structure, p, lam0, conj_tol=1e-6, tol=1e-10, horizon=1.25):
    """(is_conjugate, track, records, abnormal) for the ray through ``lam0`` at t=1."""
    tr = integrate_variational(s, p, lam0, horizon, tol)
    segs = abnormal_segments(tr)
    if _in_segments(1.0, segs):
        return True, tr, [], segs
    recs = find_conjugate_times(tr, t_min=1e-2, estimate=False)
    hit = any(abs(r.t_star - 1.0) <= conj_tol for r in recs)
    return hit, tr, recs, segs


def check_regular(s: Structure, p, lam0_conj, radius=0.1, n_rays=64, seed=0, tol=1e-10,
                  tol_det=1e-8, conj_tol=1e-6, density=SAMPLES_PER_UNIT):
    """Sample rays through ``B(lam0_conj, radius)`` and count conjugate covectors.

    The covector is regular (empirically) when no sampled ray carries more
    than one conjugate covector inside the ball.  Rays with an abnormal
    segment inside the ball are excluded and listed; if the central ray itself
    is abnormal the answer is unknown (None).
    """
    p = _point(s, p, "p")
    lam0 = _point(s, lam0_conj, "lam0")
    if not radius > 0 or radius >= np.linalg.norm(lam0):
        raise InputError("radius must be positive and smaller than |lam0|", radius=radius)
    conj, _, _, segs = conjugate_at_one(s, p, lam0, conj_tol, tol)
    if not conj:
        raise InputError("covector is not conjugate", lam0=list(lam0))
    rng = np.random.default_rng(seed)
    mus = _ball_samples(rng, lam0, radius, n_rays)
    spans = np.array([_segment_in_ball(mu, lam0, radius) for mu in mus])
    T = float(spans[:, 1].max()) * 1.001
    grid = uniform_grid(T, density)
    rb = RayBatch(s, p, mus, T, tol)
    Ms = rb.sample_M(grid)
    Ds = np.linalg.det(Ms)
    degs = degeneracy(Ms)
    counts, excluded, counter = [], [], None
    for j in range(n_rays):
        lo, hi = spans[j]
        runs = _singular_runs(grid, degs[:, j], ABNORMAL_TOL, T)
        if any(a <= hi and b >= lo for a, b in runs):
            excluded.append(j)
            counts.append(None)
            continue
        Dj = lambda x, j=j: float(rb.D([j], [x])[0])
        degj = lambda x, j=j: float(degeneracy(rb.at([j], [x])[2][0]))
        zs = _locate_zeros(grid, Ds[:, j], Dj, degj, max(lo, 1e-9) * (1 - 1e-12), tol_det, runs)
        c = sum(1 for z in zs if lo <= z <= hi)
        counts.append(c)
        if c > 1 and counter is None:
            counter = mus[j]
    if segs:
        return RegularityResult(None, None, counts, excluded, radius, seed,
                                note="central ray carries an abnormal segment")
    valid = [c for c in counts if c is not None]
    if not valid:
        return RegularityResult(None, None, counts, excluded, radius, seed,
                                note="every sampled ray was excluded")
    return RegularityResult(counter is None, counter, counts, excluded, radius, seed)


# ----------------------------------------------------------------------
# locus slices


@dataclass(frozen=True)
class EnergyGrid:
    """Covectors on ``{H_p = energy}``: horizontal directions times fibre values."""

    covectors: np.ndarray
    shape: tuple
    energy: float


@dataclass(frozen=True)
class CovectorFrame:
    """Splitting of ``T*_p`` into a horizontal part and the fibre over it.

    ``lift(u)`` is the least-norm covector with ``X(p) lam = u`` (u in the
    range of X(p)); ``K`` spans the annihilator of the distribution.
    """

    Ur: np.ndarray
    sv: np.ndarray
    Vr: np.ndarray
    K: np.ndarray

    @property
    def rank(self):
        return len(self.sv)

    def lift(self, u):
        u = np.atleast_2d(u)
        return ((u @ self.Ur) / self.sv) @ self.Vr.T

    def directions(self, n_dir, seed=0):
        """Unit vectors in the horizontal range, in range coordinates."""
        r = self.rank
        if r == 1:
            return np.array([[1.0], [-1.0]])
        if r == 2:
            th = 2 * np.pi * np.arange(n_dir) / n_dir
            return np.stack([np.cos(th), np.sin(th)], axis=1)
        g = np.random.default_rng(seed).standard_normal((n_dir, r))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def horizontal(self, dirs, energy):
        """Covectors with ``H = energy`` and zero fibre part, one per direction."""
        u = math.sqrt(2 * energy) * dirs @ self.Ur.T
        return self.lift(u)


def covector_frame(s: Structure, p) -> CovectorFrame:
    p = _point(s, p, "p")
    X = s.fields_batch(p[None])[0]                     # (m, n)
    U, sv, Vt = np.linalg.svd(X)
    r = int(np.sum(sv > 1e-12 * max(sv[0], 1.0)))
    if r == 0:
        raise InputError("distribution is trivial at p")
    return CovectorFrame(U[:, :r], sv[:r], Vt[:r].T, Vt[r:].T)


def fibre_mesh(k, values):
    if k == 0:
        return np.zeros((1, 0))
    return np.stack(np.meshgrid(*([values] * k), indexing="ij"), axis=-1).reshape(-1, k)


def energy_grid(s: Structure, p, energy=0.5, n_dir=32, n_fibre=32, fibre_range=(-4 * np.pi, 4 * np.pi),
                seed=0):
    """Grid on the energy level set of ``H_p``.

    The horizontal part ``u = X(p) lam`` runs over the sphere ``|u|^2 = 2E``
    (angles for rank 2, deterministic pseudo-random directions above); the
    component in the annihilator of the distribution runs over a uniform grid
    of ``fibre_range`` in each of its dimensions.
    """
    if not energy > 0:
        raise InputError("energy must be positive", energy=energy)
    fr = covector_frame(s, p)
    horiz = fr.horizontal(fr.directions(n_dir, seed), energy)
    k = fr.K.shape[1]
    if k == 0:
        return EnergyGrid(horiz, (len(horiz),), energy)
    mesh = fibre_mesh(k, np.linspace(fibre_range[0], fibre_range[1], n_fibre))
    cov = (horiz[:, None, :] + (mesh @ fr.K.T)[None, :, :]).reshape(-1, s.n)
    return EnergyGrid(cov, (len(horiz),) + (n_fibre,) * k, energy)


@dataclass
class LocusEntry:
    index: int
    lam0: np.ndarray
    t_conj: float | None
    order: object = None
    regular: object = None
    delta_signs: tuple | None = None
    delta_values: tuple | None = None
    abnormal: bool = False

    @property
    def locus_point(self):
        return None if self.t_conj is None else self.t_conj * self.lam0

    def to_dict(self):
        return {
            "lam0": list(map(float, self.lam0)),
            "t_conj": self.t_conj,
            "order": _order_json(self.order),
            "regular": self.regular,
            "delta_signs": None if self.delta_signs is None else list(self.delta_signs),
        }


@dataclass
class LocusSlice:
    """First conjugate times over an energy grid at p."""

    p: np.ndarray
    energy: float
    grid_shape: tuple
    entries: list
    excluded: list = field(default_factory=list)

    @property
    def present(self):
        return [e for e in self.entries if e.t_conj is not None]

    def locus_points(self):
        pts = [e.locus_point for e in self.present]
        return np.array(pts) if pts else np.zeros((0, len(self.p)))

    def to_dict(self):
        return {
            "p": list(map(float, self.p)),
            "energy": self.energy,
            "grid_shape": list(self.grid_shape),
            "entries": [e.to_dict() for e in self.entries],
            "excluded": self.excluded,
        }

    def to_json(self, path):
        from .report import dumps
        with open(path, "w") as fh:
            fh.write(dumps(self.to_dict()))

    def to_csv(self, path):
        n = len(self.p)
        head = ["index"] + [f"lam{i + 1}" for i in range(n)] + ["t_conj", "order"] + \
            [f"locus{i + 1}" for i in range(n)] + ["sign_minus", "sign_plus"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(head)
            for e in self.entries:
                lp = e.locus_point
                row = [e.index] + [format(float(v), ".17g") for v in e.lam0]
                row.append("" if e.t_conj is None else format(e.t_conj, ".17g"))
                row.append("" if e.order is None else _order_json(e.order))
                row += [""] * n if lp is None else [format(float(v), ".17g") for v in lp]
                row += ["", ""] if e.delta_signs is None else list(e.delta_signs)
                w.writerow(row)


def locus_slice(s: Structure, p, energy=0.5, grid=None, t_max=2.0, tol=1e-10, eps=0.05,
                tol_det=1e-8, h=1e-2, chunk=128, t_min=1e-2, regular_rays=0, seed=0,
                density=SAMPLES_PER_UNIT):
    """First conjugate time for every covector of an energy grid.

    For each detected locus point ``t* lam0`` the entry also records the
    estimated order m and the signs of ``Delta^{m-1}`` at the radial offsets
    ``(1 - eps) t* lam0`` and ``(1 + eps) t* lam0``.

    Parameters
    ----------
    grid : EnergyGrid, optional
        Defaults to ``energy_grid(s, p, energy)``.
    regular_rays : int
        When positive, run :func:`check_regular` with that many rays at every
        locus point (expensive); otherwise ``regular`` stays None.
    """
    p = _point(s, p, "p")
    if grid is None:
        grid = energy_grid(s, p, energy)
    lams = np.asarray(grid.covectors, dtype=float)
    n = s.n
    T_int = t_max * (1 + eps) * (1 + 3 * h) + 1e-6
    tg = uniform_grid(T_int, density)
    entries = [None] * len(lams)
    excluded = []
    # similar speeds share a chunk so step sizes stay balanced
    order_idx = np.argsort(np.linalg.norm(lams, axis=1), kind="stable")
    for c0 in range(0, len(lams), chunk):
        idx = order_idx[c0:c0 + chunk]
        rb = RayBatch(s, p, lams[idx], T_int, tol)
        Ms = rb.sample_M(tg)
        Ds = np.linalg.det(Ms)
        degs = degeneracy(Ms)
        for jj, gi in enumerate(idx):
            lam0 = lams[gi]
            Dfun = lambda x, jj=jj: rb.D(np.full(np.shape(x), jj), x)
            runs = _singular_runs(tg, degs[:, jj], ABNORMAL_TOL, T_int)
            if runs and runs[0][0] <= t_max:
                excluded.append(int(gi))
                entries[gi] = LocusEntry(int(gi), lam0, None, abnormal=True)
                continue
            Dj = lambda x, jj=jj: float(rb.D([jj], [x])[0])
            degj = lambda x, jj=jj: float(degeneracy(rb.at([jj], [x])[2][0]))
            keep = tg <= t_max
            zs = _locate_zeros(tg[keep], Ds[keep, jj], Dj, degj, t_min, tol_det, runs)
            if not zs:
                entries[gi] = LocusEntry(int(gi), lam0, None)
                continue
            ts = zs[0]
            w = 0.05 * ts
            if len(zs) > 1:
                w = min(w, 0.45 * (zs[1] - ts))
            w = min(w, 0.9 * (T_int - ts))
            try:
                m, _ = estimate_order(Dfun, ts, window=w, noise=10 * tol * float(
                    np.max(np.abs(Ds[:, jj]))))
            except InconclusiveOrder:
                m = None
            signs = vals = None
            if m is not None and m != INFINITE:
                k = m - 1
                lo = _delta_from_D(Dfun, (1 - eps) * ts, k, h, n)
                hi = _delta_from_D(Dfun, (1 + eps) * ts, k, h, n)
                vals = (lo, hi)
                signs = (int(np.sign(lo)), int(np.sign(hi)))
            reg = None
            if regular_rays > 0:
                reg = check_regular(s, p, ts * lam0, radius=0.01 * ts * np.linalg.norm(lam0),
                                    n_rays=regular_rays, seed=seed, tol=tol).regular
            entries[gi] = LocusEntry(int(gi), lam0, float(ts), m, reg, signs, vals)
    return LocusSlice(p, float(grid.energy), tuple(grid.shape), entries, sorted(excluded))


def radial_transversal(entry: LocusEntry, tol=1e-8):
    """Sign change of Delta^{m-1} across the locus point, or a strict minimum of |Delta| there."""
    if entry.delta_signs is None:
        return False
    a, b = entry.delta_signs
    if a * b < 0:
        return True
    lo, hi = entry.delta_values
    return min(abs(lo), abs(hi)) > tol
