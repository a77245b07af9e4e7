"""Numerical witnesses: non-injectivity, cut times, Cut^1 pairs, synthetic conjugacy.

Everything here is a search with a certificate: a returned object carries the
residuals that make it a witness, and failure to find one is reported as
:class:`~subriem.errors.NotFound`, never as a refutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.spatial import cKDTree
from scipy.special import ndtri
from scipy.stats import qmc

from .conjugate import conjugate_at_one, covector_frame, fibre_mesh, find_conjugate_times
from .errors import InputError, NotFound, NotStronglyNormal, Unresolved
from .flow import endpoint_batch, exp_batch, integrate_extremal, integrate_variational
from .hilbert import FieldInverse, _newton_batch
from .structures import Structure, _point

SENTINEL_INF = math.inf
ONE_SIDED = "ONE_SIDED"
SYMMETRIC = "SYMMETRIC"

GAP_TOL = 1e-8
SEP_TOL = 1e-6


# ----------------------------------------------------------------------
# non-injectivity


@dataclass(frozen=True)
class WitnessPair:
    """Two distinct covectors in ``B(center, radius)`` with the same image."""

    lam1: np.ndarray
    lam2: np.ndarray
    image_gap: float
    separation: float
    radius: float
    center: np.ndarray | None = None
    image: np.ndarray | None = None
    seed: int | None = None
    tol: float | None = None

    @property
    def valid(self):
        return self.image_gap <= GAP_TOL and self.separation >= SEP_TOL

    def to_dict(self):
        return {"lam1": self.lam1, "lam2": self.lam2, "image_gap": self.image_gap,
                "separation": self.separation, "radius": self.radius, "center": self.center,
                "image": self.image, "seed": self.seed, "tol": self.tol}


def _gate_conjugate(s, p, lam0, what):
    conj, _, _, segs = conjugate_at_one(s, p, lam0)
    if segs:
        raise NotStronglyNormal(f"{what}: the ray carries an abnormal segment",
                                lam0=list(lam0), segments=segs)
    if not conj:
        raise InputError(f"{what}: covector is not conjugate at t = 1", lam0=list(lam0))


def _ball_lhs(center, radius, budget, seed):
    """Latin-hypercube points in the ball: Gaussian directions and a radial coordinate."""
    n = len(center)
    u = qmc.LatinHypercube(d=n + 1, seed=seed).random(budget)
    g = ndtri(np.clip(u[:, :n], 1e-12, 1 - 1e-12))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * u[:, n] ** (1.0 / n)
    return center + r[:, None] * g


def _exp_chunks(s, p, lams, tol, chunk=4096):
    return np.vstack([exp_batch(s, p, lams[i:i + chunk], 1.0, tol)
                      for i in range(0, len(lams), chunk)])


def _near_collisions(lams, images, min_sep, n_keep, k=8):
    """Index pairs with small image gap relative to covector separation."""
    k = min(k + 1, len(lams))
    dist, idx = cKDTree(images).query(images, k=k)
    i = np.repeat(np.arange(len(lams)), k - 1)
    j = idx[:, 1:].ravel()
    gap = dist[:, 1:].ravel()
    sep = np.linalg.norm(lams[i] - lams[j], axis=1)
    ok = sep >= min_sep
    i, j, gap, sep = i[ok], j[ok], gap[ok], sep[ok]
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    _, first = np.unique(lo * len(lams) + hi, return_index=True)
    lo, hi, score = lo[first], hi[first], (gap / sep)[first]
    order = np.lexsort((hi, lo, score))[:n_keep]
    return lo[order], hi[order]


def _polish_pairs(s, p, L1, L2, center, radius, tol, max_iter, equal_energy=False):
    """Gauss-Newton (min-norm) on ``exp(l1) - exp(l2)`` for a batch of pairs.

    With ``equal_energy`` the residual also carries ``H(l1) - H(l2)``; a last
    row keeps ``|l1 - l2|`` at its starting value.  Early
    iterations integrate at a looser tolerance; pairs drop out once their
    residual is at the integration noise.  Returns polished pairs, image gaps
    (``inf`` for pairs that left the ball) and images.
    """
    n = s.n
    L1, L2 = L1.copy(), L2.copy()
    sep0 = np.linalg.norm(L1 - L2, axis=1)
    active = np.arange(len(L1))
    loose = max(tol, 1e-10)
    for it in range(max_iter):
        if len(active) == 0:
            break
        itol = tol if it >= max_iter - 3 or loose == tol else loose
        B = len(active)
        q, _, M = endpoint_batch(s, p, np.vstack([L1[active], L2[active]]), 1.0, itol)
        F = q[:B] - q[B:]
        J = np.concatenate([M[:B], -M[B:]], axis=2)
        if equal_energy:
            pp = np.repeat(p[None], B, axis=0)
            X = s.fields_batch(pp)                          # (B, m, n)
            g1 = np.einsum("bmn,bm->bn", X, np.einsum("bmn,bn->bm", X, L1[active]))
            g2 = np.einsum("bmn,bm->bn", X, np.einsum("bmn,bn->bm", X, L2[active]))
            dH = s.energy_batch(pp, L1[active]) - s.energy_batch(pp, L2[active])
            F = np.concatenate([F, dH[:, None]], axis=1)
            J = np.concatenate([J, np.concatenate([g1, -g2], axis=1)[:, None, :]], axis=1)
        # hold the separation fixed so the pair cannot drift onto the diagonal
        d = L1[active] - L2[active]
        s0 = sep0[active]
        Fs = (np.sum(d * d, axis=1) - s0 * s0) / s0
        Js = np.concatenate([2 * d, -2 * d], axis=1) / s0[:, None]
        F = np.concatenate([F, Fs[:, None]], axis=1)
        J = np.concatenate([J, Js[:, None, :]], axis=1)
        res = np.linalg.norm(F[:, :n], axis=1)
        done = res <= 10 * itol * (1 + np.linalg.norm(q[:B], axis=1))
        if itol == loose and loose != tol:
            # a loose solve cannot certify; switch everything to the final tolerance
            if np.all(done):
                loose = tol
            done[:] = False
        step = np.einsum("bij,bj->bi", np.linalg.pinv(J, rcond=1e-13), F)
        # keep each step inside a fraction of the ball
        sn = np.linalg.norm(step, axis=1)
        step *= np.minimum(1.0, 0.25 * radius / np.maximum(sn, 1e-300))[:, None]
        go = ~done
        idx = active[go]
        L1[idx] -= step[go, :n]
        L2[idx] -= step[go, n:]
        active = idx
    B = len(L1)
    q = exp_batch(s, p, np.vstack([L1, L2]), 1.0, tol)
    gap = np.linalg.norm(q[:B] - q[B:], axis=1)
    inside = (np.linalg.norm(L1 - center, axis=1) <= radius) & (np.linalg.norm(L2 - center, axis=1) <= radius)
    gap[~inside] = np.inf
    return L1, L2, gap, q[:B]


def _search_pairs(s, p, center, radius, budget, seed, tol, n_polish, max_iter, equal_energy=False):
    lams = _ball_lhs(center, radius, int(budget), seed)
    images = _exp_chunks(s, p, lams, max(tol, 1e-9))
    i, j = _near_collisions(lams, images, 0.1 * radius, n_polish)
    if len(i) == 0:
        return [], None
    L1, L2, gap, q = _polish_pairs(s, p, lams[i], lams[j], center, radius, tol, max_iter,
                                   equal_energy)
    sep = np.linalg.norm(L1 - L2, axis=1)
    out = []
    valid = (gap <= GAP_TOL) & (sep >= SEP_TOL)
    # certified pairs first, widest separation first; then the rest by gap
    for k in np.lexsort((gap, np.where(valid, -sep, 0.0), ~valid)):
        out.append(WitnessPair(L1[k], L2[k], float(gap[k]), float(sep[k]), radius, center,
                               q[k], seed, tol))
    return out, out[0]


def injectivity_witness(s: Structure, p, lam0_conj, radius, budget=10 ** 4, seed=0, tol=1e-12,
                        n_polish=32, max_iter=12) -> WitnessPair:
    """Two distinct covectors near a conjugate covector with equal images.

    Parameters
    ----------
    lam0_conj : covector conjugate at t = 1 (checked).
    radius : radius of the search ball.
    budget : number of Latin-hypercube samples of the ball.

    Raises
    ------
    InputError
        ``lam0_conj`` is not conjugate at t = 1.
    NotStronglyNormal
        The ray through ``lam0_conj`` has an abnormal segment.
    NotFound
        No pair reached ``image_gap <= 1e-8`` with ``separation >= 1e-6``;
        ``best`` holds the closest near-collision.
    """
    p = _point(s, p, "p")
    center = _point(s, lam0_conj, "lam0")
    if not radius > 0:
        raise InputError("radius must be positive", radius=radius)
    if budget < 2:
        raise InputError("budget must be at least 2", budget=budget)
    _gate_conjugate(s, p, center, "injectivity_witness")
    pairs, best = _search_pairs(s, p, center, radius, budget, seed, tol, n_polish, max_iter)
    for w in pairs:
        if w.valid:
            return w
    raise NotFound("no collision of exp_p found in the ball", best=best)


# ----------------------------------------------------------------------
# cut time


@dataclass(frozen=True)
class CutRecord:
    """Cut time of the geodesic from ``(p, lam0)``.

    ``competitor`` is a covector ``mu`` with ``exp_p(t mu) = gamma(t)`` and
    smaller action at the first time ``t`` found beaten.  ``partner`` is set
    when the cut covector ``t_cut lam0`` shares its image with another
    covector of equal action.
    """

    t_cut: float
    competitor: np.ndarray | None
    in_cut1: bool
    partner: np.ndarray | None
    lam0: np.ndarray
    t_max: float
    tol: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {"t_cut": self.t_cut, "competitor": self.competitor, "in_cut1": self.in_cut1,
                "partner": self.partner, "lam0": self.lam0, "t_max": self.t_max, "tol": self.tol,
                "diagnostics": self.diagnostics}


@dataclass(frozen=True)
class ShootingCloud:
    """Covectors spread over energies up to ``t_max^2 H0`` and their time-1 images."""

    covectors: np.ndarray
    images: np.ndarray
    tree: cKDTree
    energies: np.ndarray


def shooting_cloud(s: Structure, p, lam0, t_max, shoot_grid=(8, 16, 16), tol=1e-8,
                   fibre_margin=1.25, t_min=None) -> ShootingCloud:
    """Horizontal directions x energy scales x fibre values, exponentiated once.

    Scales are geometric in ``[t_min, t_max]`` so that every ladder time has
    cloud points of comparable action.
    """
    p = _point(s, p, "p")
    lam0 = _point(s, lam0, "lam0")
    n_scale, n_dir, n_fibre = shoot_grid
    H0 = float(s.energy_batch(p[None], lam0[None])[0])
    fr = covector_frame(s, p)
    horiz = fr.horizontal(fr.directions(n_dir, seed=0), H0)
    scales = np.geomspace(t_min or t_max / 16, t_max, n_scale)
    cov = (scales[:, None, None] * horiz[None]).reshape(-1, s.n)
    k = fr.K.shape[1]
    if k:
        F = fibre_margin * t_max * max(float(np.linalg.norm(fr.K.T @ lam0)), math.sqrt(2 * H0))
        mesh = fibre_mesh(k, np.linspace(-F, F, n_fibre)) @ fr.K.T
        cov = (cov[:, None, :] + mesh[None]).reshape(-1, s.n)
    images = _exp_chunks(s, p, cov, tol)
    H = s.energy_batch(np.repeat(p[None], len(cov), axis=0), cov)
    return ShootingCloud(cov, images, cKDTree(images), H)


def _starts(cloud, lam0, H0, t, target, n_starts):
    """Cloud covectors landing near ``target`` with action below 1.5 x gamma's, scaled to time t."""
    if n_starts <= 0:
        return np.zeros((0, len(lam0)))
    kq = min(16 * n_starts, len(cloud.covectors))
    _, idx = cloud.tree.query(target, k=kq)
    cand = cloud.covectors[idx]
    keep = (np.linalg.norm(cand - t * lam0, axis=1) > 0.05 * t * np.linalg.norm(lam0)) & \
        (cloud.energies[idx] <= 1.5 * t * t * H0)
    return cand[keep][:n_starts] / t


def _shoot(s, p, lam0, times, targets, cloud, fi, n_starts, extra=None):
    """Multi-start Newton towards ``targets[j]`` at time ``times[j]``.

    Returns per-time lists of converged covectors ``mu`` (time-``t``
    convention, ``exp_p(t mu) = target``) other than ``lam0``, and per-time
    counts of converged starts of any kind.
    """
    H0 = float(s.energy_batch(p[None], lam0[None])[0])
    starts, owner = [], []
    for j, t in enumerate(times):
        cand = _starts(cloud, lam0, H0, t, targets[j], n_starts)
        if extra is not None and extra[j] is not None:
            cand = np.vstack([np.atleast_2d(extra[j]), cand])
        starts.append(cand)
        owner += [j] * len(cand)
    owner = np.array(owner, dtype=int)
    conv = np.zeros(len(times), dtype=int)
    found = [[] for _ in times]
    if len(owner) == 0:
        return found, conv
    G = np.vstack(starts)
    mu, _, st = _newton_batch(s, fi, np.asarray(times, dtype=float)[owner], targets[owner], G)
    scale = 1 + np.linalg.norm(lam0)
    for k in range(len(G)):
        if st[k] != 0:
            continue
        j = owner[k]
        conv[j] += 1
        if np.linalg.norm(mu[k] - lam0) > 1e-6 * scale:
            found[j].append(mu[k])
    return found, conv


def _best_competitor(s, p, H0, t, mus):
    if not mus:
        return None, -np.inf
    mus = np.array(mus)
    H = s.energy_batch(np.repeat(p[None], len(mus), axis=0), mus)
    k = int(np.argmin(H))
    return mus[k], float(t * (H0 - H[k]))


def cut_time(s: Structure, p, lam0, t_max=3.0, shoot_grid=(16, 8, 16, 16), tol=1e-6,
             resolution=1e-4, n_starts=4, cloud: ShootingCloud | None = None,
             find_partner=True) -> CutRecord:
    """Cut time by comparing actions at fixed time against shooting competitors.

    ``shoot_grid = (n_ladder, n_scale, n_dir, n_fibre)``: the ladder of test
    times in ``(0, t_max]`` and the shape of the shooting cloud.  At each
    ladder time ``t`` the cloud covectors whose images land nearest
    ``gamma(t)`` seed Newton solves of ``exp_p(t mu) = gamma(t)``; ``gamma``
    is beaten when some ``mu`` has ``t (H(lam0) - H(mu)) > tol``.  Being
    beaten is monotone in ``t``, so the first beaten ladder interval is
    bisected down to ``resolution``.  The ladder screens at a loose
    integration tolerance; every beaten verdict is confirmed tightly.

    Raises
    ------
    Unresolved
        At a ladder time below the first beaten one no Newton start converged.
    """
    p = _point(s, p, "p")
    lam0 = _point(s, lam0, "lam0")
    H0 = float(s.energy_batch(p[None], lam0[None])[0])
    if not H0 > 0:
        raise InputError("cut_time needs H(p, lam0) > 0", H=H0)
    if not t_max > 0:
        raise InputError("t_max must be positive", t_max=t_max)
    n_ladder = shoot_grid[0]
    if cloud is None:
        cloud = shooting_cloud(s, p, lam0, t_max, tuple(shoot_grid[1:]), t_min=t_max / n_ladder)
    traj = integrate_extremal(s, p, lam0, t_max, tol=1e-12)
    screen = FieldInverse(p, 1.0, lam0, max_iter=10, tol=1e-7, sing_tol=1e-13, int_tol=1e-8,
                          trust_radius=np.inf, max_backtrack=0, max_step=0.5)
    tight = FieldInverse(p, 1.0, lam0, max_iter=6, tol=1e-10, sing_tol=1e-14, int_tol=1e-11,
                         trust_radius=np.inf, max_backtrack=2)

    def confirm(t, mu):
        """Tight re-solve of a screened competitor; returns it if it still beats gamma."""
        tgt, _ = traj.states(np.array([t]))
        m2, _, st = _newton_batch(s, tight, np.array([t]), tgt, mu[None])
        if st[0] != 0:
            return None, -np.inf
        _, gain = _best_competitor(s, p, H0, t, [m2[0]])
        return (m2[0] if gain > tol else None), gain

    def beaten_at(t, seed_mu, n_extra):
        """Screening verdict at time t, seeded by a known competitor."""
        tgt, _ = traj.states(np.array([t]))
        f, _ = _shoot(s, p, lam0, [t], tgt, cloud, screen, n_extra, extra=[seed_mu])
        mu, gain = _best_competitor(s, p, H0, t, f[0])
        return mu if gain > tol else None

    ladder = t_max * np.arange(1, n_ladder + 1) / n_ladder
    targets, _ = traj.states(ladder)
    found, conv = _shoot(s, p, lam0, ladder, targets, cloud, screen, n_starts)
    diag = {"ladder": ladder, "converged_starts": conv, "shoot_grid": list(shoot_grid),
            "resolution": resolution}
    gains, beaten = [], None
    for j, t in enumerate(ladder):
        # rungs above the first beaten one do not affect the verdict
        if conv[j] == 0:
            raise Unresolved("no shooting start converged; refine the shooting grid",
                             t=float(t), shoot_grid=list(shoot_grid),
                             converged_starts=conv.tolist())
        mu, gain = _best_competitor(s, p, H0, t, found[j])
        if gain > 0.1 * tol:
            mu, gain = confirm(t, mu)
        else:
            mu = None
        gains.append(gain)
        if mu is not None:
            beaten = (j, mu)
            break
    diag["action_gain"] = gains
    if beaten is None:
        return CutRecord(SENTINEL_INF, None, False, None, lam0, t_max, tol, diag)

    # the ladder may miss a competitor that continuation from above still finds
    j, mu_b = beaten
    hi = ladder[j]
    while j > 0:
        mu = beaten_at(ladder[j - 1], mu_b, 0)
        if mu is None:
            break
        j, hi, mu_b = j - 1, ladder[j - 1], mu
    lo = ladder[j - 1] if j > 0 else 0.0
    for _ in range(8):
        # bisection along the continued competitor branch
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            mu = beaten_at(mid, mu_b, 0)
            if mu is not None:
                hi, mu_b = mid, mu
            else:
                lo = mid
        # a full multi-start at the lower end guards against a lost branch
        mu = beaten_at(lo, mu_b, n_starts) if lo > 0 else None
        if mu is None:
            break
        hi, mu_b, lo = lo, mu, max(0.0, lo - (ladder[1] - ladder[0] if n_ladder > 1 else lo))
    t_cut = 0.5 * (lo + hi)
    mu, gain = confirm(hi, mu_b)
    diag["confirmed_gain"] = gain
    if mu is not None:
        mu_b = mu

    # Cut^1: does the competitor branch survive at t_cut with equal action?
    partner, in_cut1 = None, False
    tgt, _ = traj.states(np.array([t_cut]))
    mu, _, st = _newton_batch(s, tight, np.array([t_cut]), tgt, mu_b[None]) if find_partner else (None, None, [1])
    if st[0] == 0:
        gap = abs(t_cut * (H0 - float(s.energy_batch(p[None], mu)[0])))
        if np.linalg.norm(mu[0] - lam0) > 1e-3 * np.linalg.norm(lam0) and gap <= max(tol, resolution):
            partner, in_cut1 = t_cut * mu[0], True
    diag["bracket"] = [lo, hi]
    return CutRecord(t_cut, mu_b, in_cut1, partner, lam0, t_max, tol, diag)


@dataclass(frozen=True)
class Cut1Pair:
    lam1: np.ndarray
    lam2: np.ndarray
    image_gap: float
    separation: float
    t_cut1: float
    t_cut2: float

    def to_dict(self):
        return {"lam1": self.lam1, "lam2": self.lam2, "image_gap": self.image_gap,
                "separation": self.separation, "t_cut1": self.t_cut1, "t_cut2": self.t_cut2}


def cut1_pairs(s: Structure, p, lam0_cut, radius, budget=4000, seed=0, t_max=1.5,
               cut_tol=1e-3, max_pairs=1, max_checks=8, tol=1e-12, record: CutRecord | None = None):
    """Pairs of distinct cut covectors near ``lam0_cut`` sharing their image.

    Candidates come from the same collision search as
    :func:`injectivity_witness`, polished with an extra equal-energy
    condition; each member is then checked to have cut time 1 within
    ``cut_tol``.

    Raises
    ------
    InputError
        ``lam0_cut`` does not have cut time 1 within ``cut_tol``.
    NotFound
        No verified pair; ``best`` is the closest candidate.
    """
    p = _point(s, p, "p")
    center = _point(s, lam0_cut, "lam0")
    if not radius > 0:
        raise InputError("radius must be positive", radius=radius)
    if budget < 2:
        raise InputError("budget must be at least 2", budget=budget)
    cloud = shooting_cloud(s, p, center, t_max)
    if record is None:
        record = cut_time(s, p, center, t_max, cloud=cloud)
    if not abs(record.t_cut - 1.0) <= cut_tol:
        raise InputError("covector is not a cut covector (cut time != 1)", t_cut=record.t_cut)
    pairs, best = _search_pairs(s, p, center, radius, budget, seed, tol, 32, 12, equal_energy=True)
    out, checked = [], 0
    for w in pairs:
        if not w.valid or checked >= max_checks:
            continue
        checked += 1
        t1 = cut_time(s, p, w.lam1, t_max, cloud=cloud, resolution=cut_tol / 4, find_partner=False).t_cut
        t2 = cut_time(s, p, w.lam2, t_max, cloud=cloud, resolution=cut_tol / 4, find_partner=False).t_cut
        if abs(t1 - 1) <= cut_tol and abs(t2 - 1) <= cut_tol:
            out.append(Cut1Pair(w.lam1, w.lam2, w.image_gap, w.separation, t1, t2))
            if len(out) >= max_pairs:
                break
    if not out:
        raise NotFound("no verified Cut^1 pair near the covector", best=best)
    return out


# ----------------------------------------------------------------------
# geodesic metric and synthetic conjugacy


@dataclass(frozen=True)
class SampledGeodesic:
    """Trace of a geodesic on [0, 1] and its length."""

    t: np.ndarray
    q: np.ndarray
    length: float

    @classmethod
    def from_points(cls, t, q, length=None):
        t = np.asarray(t, dtype=float)
        q = np.asarray(q, dtype=float)
        if length is None:
            length = float(np.sum(np.linalg.norm(np.diff(q, axis=0), axis=1)))
        return cls(t, q, float(length))

    def to_dict(self):
        return {"t": self.t, "q": self.q, "length": self.length}


def sampled_geodesic(s: Structure, p, lam0, n_samples=257, tol=1e-11) -> SampledGeodesic:
    """Sample the geodesic from ``(p, lam0)`` on [0, 1]; length from its controls."""
    traj = integrate_extremal(s, p, lam0, 1.0, tol)
    t = np.linspace(0.0, 1.0, n_samples)
    q, lam = traj.states(t)
    X = s.fields_batch(q)
    u = np.einsum("bmn,bn->bm", X, lam)
    return SampledGeodesic(t, q, float(simpson(np.linalg.norm(u, axis=1), x=t)))


def geo_distance(g1: SampledGeodesic, g2: SampledGeodesic) -> float:
    """``sup_t |g1(t) - g2(t)| + |L(g1) - L(g2)|``; g2 is interpolated if grids differ.

    >>> a = SampledGeodesic.from_points([0, 1], [[0, 0], [1, 0]])
    >>> b = SampledGeodesic.from_points([0, 1], [[0, 0], [0, 1]])
    >>> round(geo_distance(a, b), 12)
    1.414213562373
    """
    q2 = g2.q
    if len(g1.t) != len(g2.t) or np.any(g1.t != g2.t):
        q2 = np.stack([np.interp(g1.t, g2.t, g2.q[:, i]) for i in range(g2.q.shape[1])], axis=1)
    sup = float(np.max(np.linalg.norm(g1.q - q2, axis=1)))
    return sup + abs(g1.length - g2.length)


@dataclass(frozen=True)
class SyntheticLevel:
    radius: float
    p: np.ndarray
    q: np.ndarray
    lam1: np.ndarray
    lam2: np.ndarray
    d1: float
    d2: float
    d12: float
    image_gap: float
    seed: int

    def to_dict(self):
        return {"radius": self.radius, "p": self.p, "q": self.q, "lam1": self.lam1,
                "lam2": self.lam2, "d_geo": [self.d1, self.d2], "d_between": self.d12,
                "image_gap": self.image_gap, "seed": self.seed}


@dataclass(frozen=True)
class SyntheticWitness:
    kind: str
    lam0: np.ndarray
    levels: list
    truncated: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def decreasing(self):
        d = [sorted((L.d1, L.d2)) for L in self.levels]
        return all(b[0] < a[0] and b[1] < a[1] for a, b in zip(d, d[1:]))

    def to_dict(self):
        return {"kind": self.kind, "lam0": self.lam0, "levels": self.levels,
                "truncated": self.truncated, "decreasing": self.decreasing,
                "diagnostics": self.diagnostics}


def _conjugate_scaling(s, p, lam, horizon=1.5, tol=1e-10):
    """Rescale ``lam`` so that its conjugate time nearest 1 becomes 1."""
    tr = integrate_variational(s, p, lam, horizon, tol)
    recs = find_conjugate_times(tr, estimate=False)
    if not recs:
        return None
    t = min((r.t_star for r in recs), key=lambda x: abs(x - 1))
    return t * lam


def synthetic_witness(s: Structure, p, lam0_conj, kind=ONE_SIDED, n_levels=3, seed=0, r0=0.1,
                      budget=3000, retries=3) -> SyntheticWitness:
    """Sequences of distinct geodesic pairs converging to the central geodesic.

    Level n uses a witness pair in the ball of radius ``r0 2^-n``.  For
    SYMMETRIC the base point is moved by ``r_n / 2`` in a seeded random
    direction and the covector is rescaled to stay conjugate at t = 1.
    A level whose pair is not strictly closer (both members) to the central
    geodesic than the previous level is retried with another seed; failure
    truncates the sequence.
    """
    if kind not in (ONE_SIDED, SYMMETRIC):
        raise InputError("kind must be ONE_SIDED or SYMMETRIC", kind=kind)
    p = _point(s, p, "p")
    lam0 = _point(s, lam0_conj, "lam0")
    _gate_conjugate(s, p, lam0, "synthetic_witness")
    g0 = sampled_geodesic(s, p, lam0)
    rng = np.random.default_rng(seed)
    levels, diag = [], {"failures": []}
    prev = (np.inf, np.inf)
    for n in range(n_levels):
        r = r0 * 2.0 ** -n
        pn, ln = p, lam0
        if kind == SYMMETRIC:
            v = rng.standard_normal(s.n)
            pn = p + 0.5 * r * v / np.linalg.norm(v)
            ln = _conjugate_scaling(s, pn, lam0)
            if ln is None:
                diag["failures"].append({"level": n, "reason": "no conjugate time at moved base"})
                break
            segs = conjugate_at_one(s, pn, ln)[3]
            if segs:
                diag["failures"].append({"level": n, "reason": "abnormal segment at moved base"})
                break
        level = None
        for attempt in range(retries):
            sd = seed + 1000 * n + 7919 * attempt
            try:
                pairs, _ = _search_pairs(s, pn, ln, r, budget, sd, 1e-12, 32, 12)
            except Exception as exc:  # numerical trouble at this level
                diag["failures"].append({"level": n, "attempt": attempt, "reason": str(exc)})
                continue
            for w in pairs:
                if not w.valid:
                    continue
                g1 = sampled_geodesic(s, pn, w.lam1)
                g2 = sampled_geodesic(s, pn, w.lam2)
                d1, d2 = sorted((geo_distance(g1, g0), geo_distance(g2, g0)))
                d12 = geo_distance(g1, g2)
                if d12 >= SEP_TOL and d1 < prev[0] and d2 < prev[1]:
                    level = SyntheticLevel(r, pn, w.image, w.lam1, w.lam2, d1, d2, d12,
                                           w.image_gap, sd)
                    break
            if level is not None:
                break
            diag["failures"].append({"level": n, "attempt": attempt,
                                     "reason": "no pair closer to the central geodesic"})
        if level is None:
            break
        levels.append(level)
        prev = (level.d1, level.d2)
    return SyntheticWitness(kind, lam0, levels, len(levels) < n_levels, diag)
