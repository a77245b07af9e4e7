"""Sub-Riemannian structures given by polynomial generating families.

A structure lives in a single global chart of R^n and is described by m
polynomial vector fields X_1, ..., X_m.  The normal Hamiltonian is

    H(q, lam) = 1/2 * sum_k <lam, X_k(q)>^2

and everything downstream (Hamiltonian vector field, its Jacobian, the
variational equations) uses exact polynomial derivatives of the X_k.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .errors import InputError
from .polynomial import Poly, lie_bracket

BUILTINS = ("euclidean2", "euclidean3", "heisenberg", "martinet", "grushin")


class _Compiled:
    """Dense monomial basis with coefficient tensors for X, dX and d2X.

    The basis is closed under the derivatives that are needed, so a single
    evaluation of the monomials at a batch of points gives all three tensors
    by contraction.
    """

    def __init__(self, n, m, fields):
        polys = {}
        for k in range(m):
            for i in range(n):
                p = fields[k][i]
                polys[(k, i)] = p
                for j in range(n):
                    pj = p.diff(j)
                    polys[(k, i, j)] = pj
                    for l in range(n):
                        polys[(k, i, j, l)] = pj.diff(l)
        monos = sorted({e for p in polys.values() for e in p.terms})
        if not monos:
            monos = [(0,) * n]
        index = {e: r for r, e in enumerate(monos)}
        K = len(monos)
        self.exps = np.array(monos, dtype=float).reshape(K, n)
        self.C0 = np.zeros((m, n, K))
        self.C1 = np.zeros((m, n, n, K))
        self.C2 = np.zeros((m, n, n, n, K))
        for key, p in polys.items():
            target = {2: self.C0, 3: self.C1, 4: self.C2}[len(key)]
            for e, c in p.terms.items():
                target[key + (index[e],)] = float(c)
        self.max_exp = int(self.exps.max()) if self.exps.size else 0
        # flattened for matmul against (K, B) monomial blocks
        self.F0 = self.C0.reshape(m * n, K)
        self.F1 = self.C1.reshape(m * n * n, K)
        self.F2 = self.C2.reshape(m * n * n * n, K)
        self.m, self.n = m, n

    def monomials(self, qT):
        """Monomial values, (K, B), for points given column-wise as (n, B)."""
        n, B = qT.shape
        if self.max_exp == 0:
            return np.ones((self.exps.shape[0], B))
        pw = np.empty((n, self.max_exp + 1, B))
        pw[:, 0] = 1.0
        for e in range(1, self.max_exp + 1):
            pw[:, e] = pw[:, e - 1] * qT
        E = self.exps.astype(int)
        return np.prod(pw[np.arange(n)[None, :], E], axis=1)


@dataclass(frozen=True, eq=False)
class Structure:
    """Sub-Riemannian structure: n chart coordinates and m polynomial fields.

    ``fields[k][i]`` is the i-th chart component of X_{k+1}.
    """

    name: str
    n: int
    m: int
    fields: tuple
    _c: _Compiled = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise InputError("n and m must be positive", n=self.n, m=self.m)
        flds = tuple(tuple(f) for f in self.fields)
        if len(flds) != self.m or any(len(f) != self.n for f in flds):
            raise InputError("fields must be m vectors of n polynomials")
        for f in flds:
            for p in f:
                if not isinstance(p, Poly) or p.nvars != self.n:
                    raise InputError("field components must be polynomials in n variables")
        object.__setattr__(self, "fields", flds)
        object.__setattr__(self, "_c", _Compiled(self.n, self.m, flds))

    # ------------------------------------------------------------------
    # batched kernels; points are columns, arrays of shape (n, B)
    def fields_T(self, qT):
        """X as (m, n, B)."""
        B = qT.shape[1]
        return (self._c.F0 @ self._c.monomials(qT)).reshape(self.m, self.n, B)

    def rhs_T(self, qT, lT):
        """Hamiltonian vector field, returns (qdot, lamdot) each (n, B)."""
        c = self._c
        m, n, B = self.m, self.n, qT.shape[1]
        mono = c.monomials(qT)
        X = (c.F0 @ mono).reshape(m, n, B)
        dX = (c.F1 @ mono).reshape(m, n, n, B)
        h = np.einsum("mib,ib->mb", X, lT)
        qdot = np.einsum("mb,mib->ib", h, X)
        lamdot = -np.einsum("mb,mijb,ib->jb", h, dX, lT)
        return qdot, lamdot

    def rhs_and_jacobian_T(self, qT, lT):
        """Field and its Jacobian A, (2n, 2n, B), in (q, lam) block order."""
        c = self._c
        m, n, B = self.m, self.n, qT.shape[1]
        mono = c.monomials(qT)
        X = (c.F0 @ mono).reshape(m, n, B)
        dX = (c.F1 @ mono).reshape(m, n, n, B)
        d2X = (c.F2 @ mono).reshape(m, n, n * n, B)
        h = np.einsum("mib,ib->mb", X, lT)
        G = np.einsum("mijb,ib->mjb", dX, lT)               # <lam, dX_k/dq_j>
        hS = np.einsum("mb,mikb,ib->kb", h, d2X, lT).reshape(n, n, B)
        hdX = np.einsum("mb,mijb->ijb", h, dX)               # (n, n, B) [i, j]
        qdot = np.einsum("mb,mib->ib", h, X)
        lamdot = -np.einsum("mb,mjb->jb", h, G)
        XG = np.einsum("mib,mjb->ijb", X, G)
        A = np.empty((2 * n, 2 * n, B))
        A[:n, :n] = XG + hdX                                 # d qdot_i / d q_j
        A[:n, n:] = np.einsum("mib,mjb->ijb", X, X)          # d qdot_i / d lam_j
        A[n:, :n] = -(np.einsum("mjb,mlb->jlb", G, G) + hS)  # d lamdot_j / d q_l
        A[n:, n:] = -(np.transpose(XG, (1, 0, 2)) + np.transpose(hdX, (1, 0, 2)))
        return qdot, lamdot, A

    # row-major conveniences, arrays of shape (B, n)
    def fields_batch(self, q):
        return np.transpose(self.fields_T(np.ascontiguousarray(q.T)), (2, 0, 1))

    def rhs_batch(self, q, lam):
        qd, ld = self.rhs_T(np.ascontiguousarray(q.T), np.ascontiguousarray(lam.T))
        return qd.T, ld.T

    def rhs_and_jacobian_batch(self, q, lam):
        qd, ld, A = self.rhs_and_jacobian_T(np.ascontiguousarray(q.T),
                                            np.ascontiguousarray(lam.T))
        return qd.T, ld.T, np.transpose(A, (2, 0, 1))

    def energy_batch(self, q, lam):
        X = self.fields_T(np.ascontiguousarray(q.T))
        h = np.sum(X * np.ascontiguousarray(lam.T)[None], axis=1)
        return 0.5 * np.sum(h * h, axis=0)

    # ------------------------------------------------------------------
    def to_dict(self):
        return {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "fields": [[p.to_monomials() for p in f] for f in self.fields],
        }


@dataclass(frozen=True)
class PhasePoint:
    """A point (q, lam) of the cotangent bundle in chart components."""

    q: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        lam = np.array(self.lam, dtype=float).reshape(-1)
        if q.shape != lam.shape:
            raise InputError("q and lam must have the same dimension",
                             q_dim=q.size, lam_dim=lam.size)
        q.flags.writeable = False
        lam.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "lam", lam)


# ----------------------------------------------------------------------
# builtins


def _field(n, comps):
    return tuple(c if isinstance(c, Poly) else Poly.const(n, c) for c in comps)


def euclidean(n: int) -> Structure:
    fields = []
    for k in range(n):
        fields.append(_field(n, [1 if i == k else 0 for i in range(n)]))
    return Structure(f"euclidean{n}", n, n, tuple(fields))


def heisenberg() -> Structure:
    x = Poly.var(3, 0)
    y = Poly.var(3, 1)
    half = Poly.const(3, "1/2")
    X1 = _field(3, [1, 0, -(half * y)])
    X2 = _field(3, [0, 1, half * x])
    return Structure("heisenberg", 3, 2, (X1, X2))


def martinet() -> Structure:
    x = Poly.var(3, 0)
    X1 = _field(3, [1, 0, 0])
    X2 = _field(3, [0, 1, Poly.const(3, "1/2") * x * x])
    return Structure("martinet", 3, 2, (X1, X2))


def grushin() -> Structure:
    x = Poly.var(2, 0)
    return Structure("grushin", 2, 2, (_field(2, [1, 0]), _field(2, [0, x])))


def builtin(name: str) -> Structure:
    name = name.lower()
    if name.startswith("euclidean") and name[9:].isdigit():
        return euclidean(int(name[9:]))
    table = {"heisenberg": heisenberg, "martinet": martinet, "grushin": grushin}
    if name not in table:
        raise InputError(f"unknown builtin structure {name!r}", known=list(BUILTINS))
    return table[name]()


def structure_from_dict(doc) -> Structure:
    """Parse the JSON structure-file schema."""
    unknown = set(doc) - {"name", "n", "m", "fields"}
    if unknown:
        raise InputError("unknown keys in structure file", keys=sorted(unknown))
    try:
        n, m = int(doc["n"]), int(doc["m"])
        raw = doc["fields"]
    except KeyError as exc:
        raise InputError(f"structure file missing key {exc}") from None
    if len(raw) != m or any(len(f) != n for f in raw):
        raise InputError("structure file: expected m fields of n polynomials", n=n, m=m)
    fields = []
    for f in raw:
        comps = []
        for poly in f:
            for mono in poly:
                if len(mono) != 2 or len(mono[1]) != n:
                    raise InputError("monomial must be [coefficient, [e_1..e_n]]", monomial=mono)
                if any(int(e) != e or e < 0 for e in mono[1]):
                    raise InputError("exponents must be non-negative integers", monomial=mono)
            comps.append(Poly.from_monomials(n, poly))
        fields.append(tuple(comps))
    return Structure(str(doc.get("name", "custom")), n, m, tuple(fields))


def load_structure(source) -> Structure:
    """Builtin name or path to a structure file."""
    if isinstance(source, Structure):
        return source
    src = str(source)
    if src.lower() in BUILTINS or (src.lower().startswith("euclidean") and src[9:].isdigit()):
        return builtin(src)
    path = Path(src)
    if not path.exists():
        raise InputError(f"no builtin or structure file named {src!r}")
    with open(path) as fh:
        return structure_from_dict(json.load(fh))


# ----------------------------------------------------------------------
# operations


def _point(s: Structure, q, what="q"):
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != s.n:
        raise InputError(f"{what} has dimension {q.size}, structure expects {s.n}")
    return q


def _phase(s: Structure, z):
    if not isinstance(z, PhasePoint):
        z = PhasePoint(*z)
    if z.q.size != s.n:
        raise InputError(f"phase point has dimension {z.q.size}, structure expects {s.n}")
    return z


def eval_fields(s: Structure, q) -> np.ndarray:
    """X_1(q), ..., X_m(q) as an (m, n) array."""
    q = _point(s, q)
    return s.fields_batch(q[None])[0]


def hamiltonian(s: Structure, z):
    """Return ``(h, H, u)``: the field pairings, the energy, the minimal control."""
    z = _phase(s, z)
    h = eval_fields(s, z.q) @ z.lam
    return h, 0.5 * float(h @ h), h.copy()


def hamiltonian_rhs(s: Structure, z):
    """(dH/dlam, -dH/dq) at z."""
    z = _phase(s, z)
    qd, ld = s.rhs_batch(z.q[None], z.lam[None])
    return qd[0], ld[0]


def hamiltonian_hessian(s: Structure, z) -> np.ndarray:
    """Jacobian of (q, lam) -> hamiltonian_rhs, in (q, lam) block order."""
    z = _phase(s, z)
    return s.rhs_and_jacobian_batch(z.q[None], z.lam[None])[2][0]


def check_bracket_generating(s: Structure, q, depth: int, rtol: float = 1e-10):
    """Rank of the iterated brackets of length <= depth at q.

    Returns ``(ok, achieved_rank)``; ``ok`` is False when the rank stays below
    n.  This is a diagnostic only.
    """
    if depth < 1:
        raise InputError("depth must be >= 1")
    q = _point(s, q)
    layers = [list(s.fields)]
    for _ in range(depth - 1):
        nxt = []
        for X, Y in product(layers[0], layers[-1]):
            Z = lie_bracket(X, Y)
            if not all(c.is_zero() for c in Z):
                nxt.append(Z)
        layers.append(nxt)
    vecs = [np.array([c(q) for c in V]) for layer in layers for V in layer]
    if not vecs:
        return False, 0
    A = np.array(vecs)
    sv = np.linalg.svd(A, compute_uv=False)
    scale = max(1.0, sv[0]) if sv.size else 1.0
    rank = int(np.sum(sv > rtol * scale))
    return rank == s.n, rank
