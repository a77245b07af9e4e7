"""Hilbert invariant integrals on the augmented spaces and the Gauss lemma.

``I*`` integrates the pull-back of the Poincare-Cartan form ``theta - H dt``
by the flow of extremals along curves ``s -> (t(s), lam0(s))``:

    eta*[(w, sdot)] = <lam(t), M(t) w> + sdot (<lam(t), qdot(t)> - H),

where ``M(t) = dq(t)/dlam0`` comes from the variational equations.  ``I``
integrates ``<lam_t, w> - H s`` along curves ``s -> (t(s), q(s))`` in the base,
with ``lam_t`` recovered by inverting the family of extremals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BranchLost, InputError, NoConvergence, SingularJacobian
from .flow import ExtremalTrajectory, degeneracy, endpoint_batch, endpoint_batch_times
from .integrate import dopri5
from .structures import Structure, _point

STAR = "STAR"
BASE = "BASE"

GL_ORDER = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


# ----------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class AugmentedCurve:
    """Parametrised curve ``s -> (t(s), x(s))`` on ``[a, b]``.

    ``x`` is a covector at p for STAR curves and a base point for BASE curves.
    ``value`` and ``derivative`` take an array of parameters and return
    ``(t, x)`` with shapes (N,) and (N, n).
    """

    kind: str
    a: float
    b: float
    value: Callable
    derivative: Callable
    closed: bool = False

    def __post_init__(self):
        if self.kind not in (STAR, BASE):
            raise InputError("curve kind must be STAR or BASE", kind=self.kind)
        if not self.b > self.a:
            raise InputError("empty parameter interval", a=self.a, b=self.b)
        if self.closed:
            ta, xa = self.value(np.array([self.a]))
            tb, xb = self.value(np.array([self.b]))
            gap = abs(ta[0] - tb[0]) + np.max(np.abs(xa[0] - xb[0]))
            if gap > 1e-9:
                raise InputError("closed curve does not return to its start", gap=gap)

    def derivative_error(self, n=16, h=1e-5):
        """Largest mismatch between ``derivative`` and central differences of ``value``."""
        s = np.linspace(self.a + 2 * h, self.b - 2 * h, n)
        tp, xp = self.value(s + h)
        tm, xm = self.value(s - h)
        dt, dx = self.derivative(s)
        return float(max(np.max(np.abs((tp - tm) / (2 * h) - dt)),
                         np.max(np.abs((xp - xm) / (2 * h) - dx))))

    @classmethod
    def from_samples(cls, kind, s, t, x, closed=False):
        """Piecewise-cubic curve through samples (periodic spline when closed)."""
        s = np.asarray(s, dtype=float)
        tx = np.column_stack([np.asarray(t, dtype=float), np.asarray(x, dtype=float)])
        sp = CubicSpline(s, tx, bc_type="periodic" if closed else "not-a-knot")
        dsp = sp.derivative()

        def value(u):
            v = sp(np.asarray(u, dtype=float))
            return v[:, 0], v[:, 1:]

        def deriv(u):
            v = dsp(np.asarray(u, dtype=float))
            return v[:, 0], v[:, 1:]

        return cls(kind, float(s[0]), float(s[-1]), value, deriv, closed)


def ray_curve(lam0, t0=0.0, t1=1.0) -> AugmentedCurve:
    """``t -> (t, lam0)`` on ``[t0, t1]``."""
    lam0 = np.asarray(lam0, dtype=float)

    def value(s):
        s = np.asarray(s, dtype=float)
        return s.copy(), np.repeat(lam0[None], len(s), axis=0)

    def deriv(s):
        s = np.asarray(s, dtype=float)
        return np.ones_like(s), np.zeros((len(s), len(lam0)))

    return AugmentedCurve(STAR, float(t0), float(t1), value, deriv)


def star_loop(t_center, lam_center, t_amp=0.0, lam_cos=None, lam_sin=None, harmonics=None):
    """Closed STAR curve on ``[0, 2 pi]``.

    ``t(s) = t_center + t_amp cos s`` and
    ``lam0(s) = lam_center + lam_cos cos s + lam_sin sin s``; extra
    ``harmonics`` is a list of ``(k, t_c, t_s, lam_c, lam_s)`` terms at
    frequency k.
    """
    lc = np.asarray(lam_center, dtype=float)
    n = len(lc)
    terms = [(1, t_amp, 0.0,
              np.zeros(n) if lam_cos is None else np.asarray(lam_cos, dtype=float),
              np.zeros(n) if lam_sin is None else np.asarray(lam_sin, dtype=float))]
    for k, tc, ts, vc, vs in harmonics or []:
        terms.append((k, tc, ts, np.asarray(vc, dtype=float), np.asarray(vs, dtype=float)))

    def value(s):
        s = np.asarray(s, dtype=float)
        t = np.full(len(s), float(t_center))
        lam = np.repeat(lc[None], len(s), axis=0)
        for k, tc, ts, vc, vs in terms:
            c, sn = np.cos(k * s), np.sin(k * s)
            t = t + tc * c + ts * sn
            lam = lam + np.outer(c, vc) + np.outer(sn, vs)
        return t, lam

    def deriv(s):
        s = np.asarray(s, dtype=float)
        t = np.zeros(len(s))
        lam = np.zeros((len(s), n))
        for k, tc, ts, vc, vs in terms:
            c, sn = np.cos(k * s), np.sin(k * s)
            t = t + k * (-tc * sn + ts * c)
            lam = lam + k * (np.outer(-sn, vc) + np.outer(c, vs))
        return t, lam

    return AugmentedCurve(STAR, 0.0, 2 * np.pi, value, deriv, closed=True)


def random_star_loop(rng, t_center, lam_center, radius=0.2, harmonics=2):
    """Random smooth closed STAR curve within ``radius`` of the centre."""
    n = len(lam_center)
    hs = []
    scale = radius / (2 * harmonics * np.sqrt(n + 1))
    for k in range(1, harmonics + 1):
        tc, ts = scale * rng.uniform(-1, 1, 2)
        vc, vs = scale * rng.uniform(-1, 1, (2, n))
        hs.append((k, tc, ts, vc, vs))
    return star_loop(t_center, lam_center, harmonics=hs)


def graph_curve(traj: ExtremalTrajectory, t0=0.0, t1=None) -> AugmentedCurve:
    """BASE curve ``t -> (t, gamma(t))`` of a computed extremal."""
    t1 = traj.T if t1 is None else t1
    s_ = traj.structure

    def value(u):
        q, _ = traj.states(u)
        return np.asarray(u, dtype=float).copy(), q

    def deriv(u):
        q, lam = traj.states(u)
        return np.ones(len(q)), s_.rhs_batch(q, lam)[0]

    return AugmentedCurve(BASE, float(t0), float(t1), value, deriv)


def base_image(s: Structure, p, curve: AugmentedCurve, tol=1e-11) -> AugmentedCurve:
    """Image ``(t, exp_p(t lam0))`` of a STAR curve under the family of extremals."""
    if curve.kind != STAR:
        raise InputError("base_image needs a STAR curve")
    p = _point(s, p, "p")

    def value(u):
        t, lam = curve.value(u)
        q, _, _ = endpoint_batch_times(s, p, lam, t, tol)
        return t, q

    def deriv(u):
        t, lam = curve.value(u)
        dt, dlam = curve.derivative(u)
        q, lt, M = endpoint_batch_times(s, p, lam, t, tol)
        qdot = s.rhs_batch(q, lt)[0]
        return dt, np.einsum("bij,bj->bi", M, dlam) + dt[:, None] * qdot

    return AugmentedCurve(BASE, curve.a, curve.b, value, deriv, curve.closed)


# ----------------------------------------------------------------------
# eta*


def _eta_star_batch(s, p, t, lam0, w, sdot, tol):
    q, lam, M = endpoint_batch_times(s, p, lam0, t, tol)
    qdot = s.rhs_batch(q, lam)[0]
    H = s.energy_batch(q, lam)
    pair = np.einsum("bi,bij,bj->b", lam, M, w)
    return pair + sdot * (np.sum(lam * qdot, axis=1) - H)


def eval_eta_star(s: Structure, p, t, lam0, w, sdot, tol=1e-11) -> float:
    """``eta*`` at ``(t, lam0)`` applied to the tangent ``(w, sdot)``.

    Examples
    --------
    >>> from subriem.structures import euclidean
    >>> round(eval_eta_star(euclidean(2), [0, 0], 1.0, [3, 4], [0, 0], 1.0), 9)
    12.5
    """
    p = _point(s, p, "p")
    lam0 = _point(s, lam0, "lam0")
    w = _point(s, w, "w")
    if t < 0:
        raise InputError("t must be non-negative", t=t)
    return float(_eta_star_batch(s, p, np.array([float(t)]), lam0[None], w[None],
                                 np.array([float(sdot)]), tol)[0])


def _gl_nodes(a, b, n_nodes):
    panels = max(1, int(np.ceil(n_nodes / GL_ORDER)))
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_X[None]).ravel()
    wt = (half[:, None] * _GL_W[None]).ravel()
    return x, wt


@dataclass(frozen=True)
class QuadResult:
    """Quadrature value with an error estimate.

    ``error`` is the difference between the N- and 2N-node rules plus a floor
    of ``10 tol`` times the integral of ``|integrand|``: the integrand itself is
    only known to the integrator's tolerance.
    """

    value: float
    error: float
    nodes: int

    def __iter__(self):
        return iter((self.value, self.error))

    def to_dict(self):
        return {"value": self.value, "error": self.error, "nodes": self.nodes}


def _two_level(integrand, a, b, n_quad, tol):
    x1, w1 = _gl_nodes(a, b, n_quad)
    x2, w2 = _gl_nodes(a, b, 2 * n_quad)
    f1 = integrand(x1)
    f2 = integrand(x2)
    I1, I2 = float(w1 @ f1), float(w2 @ f2)
    floor = 10 * tol * float(w2 @ np.abs(f2))
    return QuadResult(I2, abs(I2 - I1) + floor, len(x2))


def hilbert_star(s: Structure, p, curve: AugmentedCurve, n_quad=64, tol=1e-11) -> QuadResult:
    """``I*`` along a STAR curve by composite Gauss-Legendre quadrature.

    Examples
    --------
    >>> from subriem.structures import euclidean
    >>> res = hilbert_star(euclidean(2), [0, 0], ray_curve([3, 4], 0, 1))
    >>> round(res.value, 9)
    12.5
    """
    if curve.kind != STAR:
        raise InputError("hilbert_star needs a STAR curve")
    p = _point(s, p, "p")

    def integrand(x):
        t, lam = curve.value(x)
        dt, dlam = curve.derivative(x)
        if np.any(t < 0):
            raise InputError("curve leaves t >= 0")
        return _eta_star_batch(s, p, t, lam, dlam, dt, tol)

    return _two_level(integrand, curve.a, curve.b, n_quad, tol)


def hilbert_star_many(s: Structure, p, curves, n_quad=32, tol=1e-11, chunk=4096):
    """:func:`hilbert_star` for many STAR curves sharing one batched integration."""
    p = _point(s, p, "p")
    x1 = [_gl_nodes(c.a, c.b, n_quad) for c in curves]
    x2 = [_gl_nodes(c.a, c.b, 2 * n_quad) for c in curves]
    T, L, W, S = [], [], [], []
    for c, (xa, _), (xb, _) in zip(curves, x1, x2):
        if c.kind != STAR:
            raise InputError("hilbert_star needs STAR curves")
        for x in (xa, xb):
            t, lam = c.value(x)
            dt, dlam = c.derivative(x)
            T.append(t), L.append(lam), W.append(dlam), S.append(dt)
    T, L, W, S = map(np.concatenate, (T, L, W, S))
    if np.any(T < 0):
        raise InputError("curve leaves t >= 0")
    vals = np.concatenate([_eta_star_batch(s, p, T[i:i + chunk], L[i:i + chunk],
                                           W[i:i + chunk], S[i:i + chunk], tol)
                           for i in range(0, len(T), chunk)])
    out, k = [], 0
    for (xa, wa), (xb, wb) in zip(x1, x2):
        fa = vals[k:k + len(xa)]
        k += len(xa)
        fb = vals[k:k + len(xb)]
        k += len(xb)
        I1, I2 = float(wa @ fa), float(wb @ fb)
        out.append(QuadResult(I2, abs(I2 - I1) + 10 * tol * float(wb @ np.abs(fb)), len(xb)))
    return out


# ----------------------------------------------------------------------
# inverting the family of extremals


@dataclass(frozen=True)
class FieldInverse:
    """Settings for the local inverse of ``(t, lam0) -> (t, exp_p(t lam0))``.

    ``trust_radius`` defaults to ``0.1 |anchor_lam|``.  Jacobians whose relative
    smallest singular value falls below ``sing_tol`` are treated as singular.
    ``max_step`` caps each Newton step at that fraction of ``|lam|``;
    ``max_backtrack`` bounds the halvings of the residual line search.
    """

    p: np.ndarray
    anchor_t: float
    anchor_lam: np.ndarray
    max_iter: int = 30
    damping: float = 1.0
    tol: float = 1e-11
    trust_radius: float | None = None
    sing_tol: float = 1e-9
    int_tol: float = 1e-12
    max_backtrack: int = 8
    max_step: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "anchor_lam", np.asarray(self.anchor_lam, dtype=float))
        if self.trust_radius is None:
            object.__setattr__(self, "trust_radius", 0.1 * float(np.linalg.norm(self.anchor_lam)))
        if not (0 < self.damping <= 1):
            raise InputError("damping must lie in (0, 1]", damping=self.damping)

    def to_dict(self):
        return {"p": self.p, "anchor_t": self.anchor_t, "anchor_lam": self.anchor_lam,
                "max_iter": self.max_iter, "damping": self.damping, "tol": self.tol,
                "trust_radius": self.trust_radius, "sing_tol": self.sing_tol}


def _newton_batch(s, fi: FieldInverse, t, q, guess):
    """Damped Newton for ``q(t; lam0) = q`` on a batch.

    Returns ``(lam0, lam_t, status)`` with status 0 converged, 1 singular,
    2 not converged.
    """
    lam = np.array(guess, dtype=float)
    B = len(lam)
    status = np.full(B, 2)
    lam_t = np.zeros_like(lam)
    active = np.arange(B)
    qscale = 1 + np.linalg.norm(q, axis=1)
    best = np.full(B, np.inf)
    for _ in range(fi.max_iter):
        if len(active) == 0:
            break
        qa, la, Ma = endpoint_batch_times(s, fi.p, lam[active], t[active], fi.int_tol)
        r = qa - q[active]
        res = np.linalg.norm(r, axis=1)
        best[active] = np.minimum(best[active], res)
        deg = degeneracy(Ma)
        sing = deg < fi.sing_tol
        done = (~sing) & (res <= fi.tol * qscale[active])
        status[active[sing]] = 1
        status[active[done]] = 0
        lam_t[active[done]] = la[done]
        # members whose residual blew up are abandoned (status stays 2)
        diverged = res > 1e3 * best[active] + 1e3 * qscale[active]
        go = ~(sing | done | diverged)
        idx = active[go]
        if len(idx) == 0:
            active = idx
            break
        step = np.linalg.solve(Ma[go], r[go][:, :, None])[:, :, 0]
        if fi.max_step is not None:
            cap = fi.max_step * np.linalg.norm(lam[idx], axis=1)
            sn = np.linalg.norm(step, axis=1)
            step *= np.minimum(1.0, cap / np.maximum(sn, 1e-300))[:, None]
        # backtracking on the residual norm
        alpha = np.full(len(idx), fi.damping)
        trial = lam[idx] - alpha[:, None] * step
        for _ in range(fi.max_backtrack):
            qt = endpoint_batch_times(s, fi.p, trial, t[idx], fi.int_tol)[0]
            rt = np.linalg.norm(qt - q[idx], axis=1)
            bad = rt > res[go] * (1 - 1e-4 * alpha)
            if not np.any(bad):
                break
            alpha[bad] *= 0.5
            trial[bad] = lam[idx[bad]] - alpha[bad, None] * step[bad]
        lam[idx] = trial
        active = idx
    return lam, lam_t, status


def invert_field(s: Structure, fi: FieldInverse, t, q, lam_guess) -> np.ndarray:
    """Solve ``exp_p(t lam0) = q`` for ``lam0`` starting from ``lam_guess``.

    Raises
    ------
    SingularJacobian
        ``M(t)`` is singular at an iterate: the point is (near) conjugate.
    NoConvergence
        Residual not below ``fi.tol`` after ``fi.max_iter`` iterations.
    """
    q = _point(s, q, "q")
    lam_guess = _point(s, lam_guess, "lam_guess")
    if not t > 0:
        raise InputError("t must be positive", t=t)
    lam, _, st = _newton_batch(s, fi, np.array([float(t)]), q[None], lam_guess[None])
    if st[0] == 1:
        raise SingularJacobian("Jacobian of the exponential map is singular",
                               t=t, lam=list(lam[0]))
    if st[0] == 2:
        raise NoConvergence("Newton iteration did not converge", t=t, lam=list(lam[0]))
    return lam[0]


def _track_branch(s, fi, t, q, block=16):
    """Invert consecutive nodes, each block seeded by the previous solution."""
    N = len(t)
    lam0 = np.zeros((N, s.n))
    lam_t = np.zeros((N, s.n))
    prev = fi.anchor_lam
    for b0 in range(0, N, block):
        sl = slice(b0, min(N, b0 + block))
        guess = np.repeat(prev[None], sl.stop - sl.start, axis=0)
        lam, lt, st = _newton_batch(s, fi, t[sl], q[sl], guess)
        if np.any(st == 1):
            k = b0 + int(np.argmax(st == 1))
            raise SingularJacobian("singular Jacobian on the curve", node=k, t=float(t[k]))
        if np.any(st == 2):
            k = b0 + int(np.argmax(st == 2))
            raise NoConvergence("inversion failed on the curve", node=k, t=float(t[k]))
        chain = np.vstack([prev[None], lam])
        jumps = np.linalg.norm(np.diff(chain, axis=0), axis=1)
        if np.any(jumps > fi.trust_radius):
            k = b0 + int(np.argmax(jumps > fi.trust_radius))
            raise BranchLost("consecutive inversions left the trust radius", node=k,
                             jump=float(jumps.max()), trust_radius=fi.trust_radius)
        lam0[sl], lam_t[sl] = lam, lt
        prev = lam[-1]
    return lam0, lam_t


def _base_integrand(s, curve, fi):
    def integrand(x):
        t, q = curve.value(x)
        dt, dq = curve.derivative(x)
        if np.any(t <= 0):
            raise InputError("BASE curves must stay in t > 0")
        _, lam_t = _track_branch(s, fi, t, q)
        H = s.energy_batch(q, lam_t)
        return np.sum(lam_t * dq, axis=1) - H * dt
    return integrand


def hilbert_base(s: Structure, p, curve: AugmentedCurve, fi: FieldInverse, n_quad=64,
                 max_crossings=4) -> QuadResult:
    """``I`` along a BASE curve, inverting the family of extremals node by node.

    If a node hits a singular Jacobian (a conjugate-locus crossing), a window
    of half-width ``1e-3 (b - a)`` around it is removed and the integral is
    Richardson-extrapolated from windows of half-width w and w/2.
    """
    if curve.kind != BASE:
        raise InputError("hilbert_base needs a BASE curve")
    p = _point(s, p, "p")
    if np.max(np.abs(p - fi.p)) > 0:
        raise InputError("field inverse is based at a different point")
    integrand = _base_integrand(s, curve, fi)
    cuts = []
    for _ in range(max_crossings + 1):
        try:
            if not cuts:
                return _two_level(integrand, curve.a, curve.b, n_quad, fi.int_tol)
            return _excised(integrand, curve, cuts, n_quad, fi.int_tol)
        except SingularJacobian as exc:
            x1, _ = _gl_nodes(curve.a, curve.b, n_quad)
            x2, _ = _gl_nodes(curve.a, curve.b, 2 * n_quad)
            t_sing = exc.details.get("t")
            # locate the parameter of the failing node on either rule
            tv1, _ = curve.value(x1)
            tv2, _ = curve.value(x2)
            cand = np.concatenate([x1[np.isclose(tv1, t_sing)], x2[np.isclose(tv2, t_sing)]])
            if len(cand) == 0 or len(cuts) >= max_crossings:
                raise
            cuts.append(float(cand[0]))
    raise SingularJacobian("too many conjugate-locus crossings on the curve")


def _excised(integrand, curve, cuts, n_quad, tol):
    L = curve.b - curve.a

    def pieces(width):
        edges = [curve.a]
        for c in sorted(cuts):
            edges += [c - width, c + width]
        edges.append(curve.b)
        tot, err = 0.0, 0.0
        for a, b in zip(edges[::2], edges[1::2]):
            if b <= a:
                continue
            r = _two_level(integrand, a, b, max(GL_ORDER, int(n_quad * (b - a) / L)), tol)
            tot += r.value
            err += r.error
        return tot, err

    w = 1e-3 * L
    I1, e1 = pieces(w)
    I2, e2 = pieces(w / 2)
    val = 2 * I2 - I1
    return QuadResult(val, abs(I2 - I1) + e1 + e2, 0)


# ----------------------------------------------------------------------
# Gauss lemma


def gauss_defect(s: Structure, p, delta, t, n_samples=16, h=1e-4, s_range=(0.0, 2 * np.pi),
                 tol=1e-12) -> float:
    """Largest violation of the cotangent Gauss lemma along ``delta``.

    With ``lam(t, s)`` the time-one endpoint covector of the extremal from
    ``(p, t delta(s))`` and ``gamma(t, s) = exp_p(t delta(s))``, the lemma says
    ``<lam, d_s gamma> = d_s H(lam)``; both derivatives are taken by central
    differences with step h.
    """
    p = _point(s, p, "p")
    sv = np.linspace(s_range[0], s_range[1], n_samples)
    S = np.concatenate([sv, sv + h, sv - h])
    cov = float(t) * np.array([np.asarray(delta(x), dtype=float) for x in S])
    if cov.shape[1] != s.n:
        raise InputError("delta must return covectors of dimension n")
    q, lam, _ = endpoint_batch(s, p, cov, 1.0, tol)
    H = s.energy_batch(q, lam)
    N = n_samples
    dgam = (q[N:2 * N] - q[2 * N:]) / (2 * h)
    dH = (H[N:2 * N] - H[2 * N:]) / (2 * h)
    pair = np.sum(lam[:N] * dgam, axis=1)
    return float(np.max(np.abs(pair - dH)))


# ----------------------------------------------------------------------
# action of admissible competitors


def _control_rhs(s, n, controls):
    """Control system plus a running copy of the reference extremal.

    State rows: [q (n), q_ref (n), lam_ref (n), cost (1)].
    """

    def f(t, y):
        q, qr, lr = y[:n], y[n:2 * n], y[2 * n:3 * n]
        Xr = s.fields_T(qr)
        h = np.sum(Xr * lr[None], axis=1)              # reference control (m, B)
        u = h + controls(t)
        X = s.fields_T(q)
        qd = np.sum(u[:, None] * X, axis=0)
        qrd, lrd = s.rhs_T(qr, lr)
        cost = 0.5 * np.sum(u * u, axis=0)
        return np.concatenate([qd, qrd, lrd, cost[None]], axis=0)

    return f


def _modes(t, n_modes):
    k = np.arange(1, n_modes + 1)
    return np.sin(np.pi * k * t)


def competitor_actions(s: Structure, p, lam0, n_competitors=20, amplitude=0.1, n_modes=3,
                       seed=0, tol=1e-12, max_iter=20):
    """Actions of perturbed admissible controls with the endpoints of the extremal.

    Each competitor uses ``u = h_ref(t) + sum_k c_k sin(k pi t)`` per control
    channel with random c of size ``amplitude |u|``; the first n free
    coefficients are then corrected by Gauss-Newton so that the endpoint
    matches ``exp_p(lam0)`` to 1e-12.

    Returns
    -------
    reference : float
        ``int_0^1 (<lam, qdot> - H) dt`` along the extremal.
    actions : (n_competitors,) array
        ``1/2 int_0^1 |u|^2 dt`` of the competitors.
    endpoint_error : (n_competitors,) array
    """
    p = _point(s, p, "p")
    lam0 = _point(s, lam0, "lam0")
    n, m = s.n, s.m
    H0 = float(s.energy_batch(p[None], lam0[None])[0])
    speed = np.sqrt(2 * H0)
    rng = np.random.default_rng(seed)
    # coefficient array (B, m, n_modes); correction uses the first n slots
    slots = [(k, j) for j in range(n_modes) for k in range(m)]
    if len(slots) < n:
        raise InputError("not enough modes to correct the endpoint", n_modes=n_modes)
    corr = slots[:n]
    C = amplitude * speed * rng.uniform(-1, 1, (n_competitors, m, n_modes))

    def run(coeffs):
        B = len(coeffs)

        def controls(t):
            return np.einsum("bkj,j->kb", coeffs, _modes(t, n_modes))

        y0 = np.concatenate([np.repeat(p[:, None], B, 1), np.repeat(p[:, None], B, 1),
                             np.repeat(lam0[:, None], B, 1), np.zeros((1, B))])
        y, _, _ = dopri5(_control_rhs(s, n, controls), 0.0, y0, 1.0, rtol=tol, dense=False)
        return y[:n].T, y[3 * n], y[n:2 * n].T

    # reference: zero perturbation
    q_ref, a_ref, _ = run(np.zeros((1, m, n_modes)))
    target = q_ref[0]
    eps = 1e-6
    for _ in range(max_iter):
        batch = [C]
        for k, j in corr:
            Cp = C.copy()
            Cp[:, k, j] += eps
            batch.append(Cp)
        qs, _, _ = run(np.concatenate(batch))
        B = n_competitors
        q0 = qs[:B]
        r = q0 - target
        if np.max(np.linalg.norm(r, axis=1)) <= 1e-12:
            break
        J = np.stack([(qs[(i + 1) * B:(i + 2) * B] - q0) / eps for i in range(n)], axis=2)
        d = np.linalg.solve(J, -r[:, :, None])[:, :, 0]
        for i, (k, j) in enumerate(corr):
            C[:, k, j] += d[:, i]
    qf, actions, _ = run(C)
    return float(a_ref[0]), actions, np.linalg.norm(qf - target, axis=1)


def extremal_action(traj: ExtremalTrajectory, n_quad=64) -> float:
    """``int_0^T (<lam, qdot> - H) dt`` along a computed extremal."""
    x, w = _gl_nodes(0.0, traj.T, n_quad)
    q, lam = traj.states(x)
    s = traj.structure
    qdot = s.rhs_batch(q, lam)[0]
    return float(w @ (np.sum(lam * qdot, axis=1) - s.energy_batch(q, lam)))
