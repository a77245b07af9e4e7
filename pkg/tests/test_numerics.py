import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from subriem.fd import central_derivative, fd_weights
from subriem.integrate import dopri5
from subriem.polynomial import Poly, lie_bracket
from subriem.report import dumps, parse_float


def test_dopri5_against_closed_form_oscillator():
    # y'' = -y batched over three initial phases
    f = lambda t, y: np.vstack([y[1], -y[0]])
    phases = np.array([0.0, 0.5, 2.0])
    y0 = np.vstack([np.sin(phases), np.cos(phases)])
    yT, _, sol = dopri5(f, 0.0, y0, 3.0, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(yT[0], np.sin(phases + 3.0), atol=1e-10)
    mid = sol.sample(np.array([1.3]))[0]
    np.testing.assert_allclose(mid[0], np.sin(phases + 1.3), atol=1e-9)


def test_dopri5_matches_scipy_rk45():
    f = lambda t, y: np.vstack([y[1], -np.sin(y[0]) + 0.1 * np.cos(t)])
    y0 = np.array([[1.0], [0.0]])
    yT, _, _ = dopri5(f, 0.0, y0, 5.0, rtol=1e-11, atol=1e-11)
    ref = solve_ivp(lambda t, y: f(t, y[:, None])[:, 0], (0, 5), y0[:, 0], method="DOP853",
                    rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(yT[:, 0], ref.y[:, -1], atol=1e-9)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_fd_weights_are_exact_on_polynomials(k):
    off = np.arange(-(k // 2 + 1), k // 2 + 2)
    w = fd_weights(k, off)
    for deg in range(len(off)):
        vals = off.astype(float) ** deg
        exact = math.factorial(deg) if deg == k else 0.0
        assert abs(w @ vals - exact) < 1e-9


def test_central_derivative_of_exp():
    for k in range(4):
        d = central_derivative(np.exp, 0.3, k, 1e-2, half=k // 2 + 2)
        assert abs(d - math.exp(0.3)) < 1e-6


def test_poly_arithmetic_and_exact_coefficients():
    x = Poly.var(2, 0)
    y = Poly.var(2, 1)
    p = x * x * Fraction(1, 2) + y
    assert p(np.array([2.0, 1.0])) == 3.0
    dp = p.diff(0)
    assert dp(np.array([5.0, 0.0])) == 5.0


def test_lie_bracket_heisenberg():
    x = Poly.var(3, 0)
    y = Poly.var(3, 1)
    one, zero = Poly.const(3, 1), Poly(3)
    X1 = [one, zero, y * Fraction(-1, 2)]
    X2 = [zero, one, x * Fraction(1, 2)]
    br = lie_bracket(X1, X2)
    vals = [c(np.array([0.3, -0.4, 2.0])) for c in br]
    assert vals == [0.0, 0.0, 1.0]


def test_dumps_is_stable_and_round_trips():
    doc = {"a": 0.1, "b": [1.0, math.inf, -math.inf], "c": np.float64(1 / 3), "d": np.arange(2)}
    text = dumps(doc)
    assert text == dumps(doc)
    back = json.loads(text)
    assert back["a"] == 0.1 and back["c"] == 1 / 3
    assert [parse_float(v) for v in back["b"]] == [1.0, math.inf, -math.inf]
    assert "0.33333333333333331" in text
