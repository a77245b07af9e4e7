"""Independent reference values for the test suite.

The Heisenberg closed form is built symbolically, checked against Hamilton's
equations, and only then lambdified.  Nothing here imports the integrator or
the variational equations of the package.
"""

from functools import lru_cache

import mpmath
import numpy as np
import sympy as sp

t, a, b, w = sp.symbols("t a b w", real=True)


def heisenberg_symbols():
    """Closed-form extremal from the origin with initial covector (a, b, w)."""
    x = (a * sp.sin(w * t) - b * (1 - sp.cos(w * t))) / w
    y = (a * (1 - sp.cos(w * t)) + b * sp.sin(w * t)) / w
    z = (a**2 + b**2) * (w * t - sp.sin(w * t)) / (2 * w**2)
    # covector recovered from the controls h1 = xdot, h2 = ydot
    lx = sp.diff(x, t) + y * w / 2
    ly = sp.diff(y, t) - x * w / 2
    return (x, y, z), (lx, ly, w)


@lru_cache(maxsize=None)
def heisenberg_residual():
    """Symbolic residual of Hamilton's equations along the closed form (should simplify to 0)."""
    (x, y, z), (lx, ly, lw) = heisenberg_symbols()
    h1 = lx - y / 2 * lw
    h2 = ly + x / 2 * lw
    res = [
        sp.diff(x, t) - h1,
        sp.diff(y, t) - h2,
        sp.diff(z, t) - (-y / 2 * h1 + x / 2 * h2),
        sp.diff(lx, t) + h2 * lw / 2,
        sp.diff(ly, t) - h1 * lw / 2,
    ]
    return tuple(sp.simplify(sp.expand_trig(r)) for r in res)


@lru_cache(maxsize=None)
def _heisenberg_funcs():
    assert all(r == 0 for r in heisenberg_residual())
    (x, y, z), (lx, ly, lw) = heisenberg_symbols()
    q = sp.Matrix([x, y, z])
    J = q.jacobian([a, b, w])
    D = sp.simplify(J.det())
    return (sp.lambdify((t, a, b, w), [x, y, z], "numpy"),
            sp.lambdify((t, a, b, w), [lx, ly, lw], "numpy"),
            sp.lambdify((t, a, b, w), J, "numpy"),
            D)


def heisenberg_q(tt, lam):
    f = _heisenberg_funcs()[0]
    return np.array([np.broadcast_to(v, np.shape(tt)) for v in f(tt, *lam)], dtype=float)


def heisenberg_lam(tt, lam):
    f = _heisenberg_funcs()[1]
    return np.array([np.broadcast_to(v, np.shape(tt)) for v in f(tt, *lam)], dtype=float)


def heisenberg_M(tt, lam):
    """d q(t) / d lam0 from the closed form."""
    return np.array(_heisenberg_funcs()[2](tt, *lam), dtype=float)


def heisenberg_D_derivatives(lam, t0, k_max=4, dps=40):
    """[D(t0), D'(t0), ..., D^(k_max)(t0)] at high precision."""
    D = _heisenberg_funcs()[3]
    subs = {a: sp.Rational(str(lam[0])), b: sp.Rational(str(lam[1]))}
    Dt = D.subs(subs)
    fn = sp.lambdify((t, w), Dt, "mpmath")
    # pass w as a sympy expression (e.g. 2*sp.pi) to keep it exact
    with mpmath.workdps(dps):
        wv = mpmath.mpf(str(sp.N(sp.sympify(lam[2]), dps)))
        t0 = mpmath.mpf(str(sp.N(sp.sympify(t0), dps)))
        return [float(mpmath.diff(lambda s: fn(s, wv), t0, k)) for k in range(k_max + 1)]


def heisenberg_order(lam, t0, k_max=4, floor=1e-20):
    """First k with |D^(k)(t0)| above ``floor``, and D^(k)/k!."""
    ders = heisenberg_D_derivatives(lam, t0, k_max)
    for k, d in enumerate(ders):
        if abs(d) > floor:
            return k, d / float(mpmath.factorial(k))
    return None, 0.0


def heisenberg_first_conjugate(w_):
    return 2 * np.pi / abs(w_)


def fd_jacobian(f, x, eps=1e-6):
    """Central-difference Jacobian of ``f`` at ``x``."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x))
    J = np.zeros((f0.size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        J[:, i] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * eps)
    return J
