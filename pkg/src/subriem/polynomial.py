"""Sparse multivariate polynomials with exact coefficients.

A polynomial is a mapping ``{exponent tuple: coefficient}``.  Coefficients are
kept as :class:`fractions.Fraction` when the input is rational (ints, strings
such as ``"1/2"``) and as floats otherwise, so that differentiation and Lie
brackets of the builtin structures are exact.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Number

import numpy as np


def _coerce(c):
    if isinstance(c, (Fraction, int)) and not isinstance(c, bool):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    if isinstance(c, Number):
        return float(c)
    raise TypeError(f"unsupported coefficient {c!r}")


class Poly:
    """Polynomial in ``nvars`` variables."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms=None):
        self.nvars = int(nvars)
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.nvars or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent vector {exps} for {nvars} variables")
            c = _coerce(c)
            if c != 0:
                clean[exps] = clean.get(exps, 0) + c
        self.terms = {e: c for e, c in clean.items() if c != 0}

    # construction helpers
    @classmethod
    def const(cls, nvars, c):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars, i, c=1):
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): c})

    @classmethod
    def from_monomials(cls, nvars, monomials):
        """Build from ``[[coefficient, [e_1, ..., e_n]], ...]``."""
        p = cls(nvars)
        for coeff, exps in monomials:
            p = p + cls(nvars, {tuple(exps): coeff})
        return p

    def to_monomials(self):
        out = []
        for e, c in sorted(self.terms.items()):
            cc = str(c) if isinstance(c, Fraction) and c.denominator != 1 else (
                int(c) if isinstance(c, Fraction) else c)
            out.append([cc, list(e)])
        return out

    # algebra
    def __add__(self, other):
        other = self._lift(other)
        t = dict(self.terms)
        for e, c in other.terms.items():
            t[e] = t.get(e, 0) + c
        return Poly(self.nvars, t)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        t = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                t[e] = t.get(e, 0) + c1 * c2
        return Poly(self.nvars, t)

    __rmul__ = __mul__

    def _lift(self, other):
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        return Poly.const(self.nvars, other)

    def diff(self, i: int) -> "Poly":
        t = {}
        for e, c in self.terms.items():
            if e[i] > 0:
                ne = list(e)
                ne[i] -= 1
                t[tuple(ne)] = c * e[i]
        return Poly(self.nvars, t)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        total = 0.0
        for e, c in self.terms.items():
            total += float(c) * float(np.prod(q ** np.asarray(e)))
        return total

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        other = self._lift(other)
        return self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items()):
            mono = "*".join(f"q{i + 1}" + (f"^{k}" if k > 1 else "")
                            for i, k in enumerate(e) if k)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


def jacobian(field):
    """``J[i][j] = d field_i / d q_j`` for a vector field given as list of Polys."""
    n = field[0].nvars
    return [[fi.diff(j) for j in range(n)] for fi in field]


def lie_bracket(X, Y):
    """Vector-field bracket ``[X, Y] = DY . X - DX . Y``."""
    n = X[0].nvars
    out = []
    for i in range(n):
        acc = Poly(n)
        for j in range(n):
            acc = acc + Y[i].diff(j) * X[j] - X[i].diff(j) * Y[j]
        out.append(acc)
    return out
