import math

import numpy as np
import pytest

from subriem import (BASE, AugmentedCurve, FieldInverse, InputError, SingularJacobian, builtin,
                     eval_eta_star, exp_map, gauss_defect, graph_curve, hilbert_base,
                     hilbert_star, integrate_extremal, invert_field, ray_curve, star_loop)
from subriem.hilbert import (competitor_actions, extremal_action, hilbert_star_many,
                             random_star_loop)

TWO_PI = 2 * math.pi
ORIGIN = np.zeros(3)
HEIS = builtin("heisenberg")
E2 = builtin("euclidean2")


def test_eta_star_examples():
    assert eval_eta_star(E2, [0, 0], 1.0, [3, 4], [0, 0], 1.0) == pytest.approx(12.5, abs=1e-12)
    assert eval_eta_star(E2, [0, 0], 1.0, [1, 0], [0, 1], 0.0) == pytest.approx(0, abs=1e-12)


def test_eta_star_matches_fd_of_pairing():
    # with sdot = 0, eta* is <lam(t), d/de q(t; lam0 + e w)>
    lam0 = np.array([1, 0, TWO_PI])
    w = np.array([0, 0, 1.0])
    t, h = 0.5, 1e-5
    lam_t = integrate_extremal(HEIS, ORIGIN, lam0, t, tol=1e-12).at(t)[1]
    qp = integrate_extremal(HEIS, ORIGIN, lam0 + h * w, t, tol=1e-12).at(t)[0]
    qm = integrate_extremal(HEIS, ORIGIN, lam0 - h * w, t, tol=1e-12).at(t)[0]
    ref = lam_t @ (qp - qm) / (2 * h)
    assert abs(eval_eta_star(HEIS, ORIGIN, t, lam0, w, 0.0) - ref) <= 1e-5


def test_ray_values_equal_energy_times_length():
    assert hilbert_star(E2, [0, 0], ray_curve([3, 4])).value == pytest.approx(12.5, abs=1e-10)
    assert hilbert_star(HEIS, ORIGIN, ray_curve([1, 0, TWO_PI])).value == pytest.approx(0.5, abs=1e-8)
    lam = np.array([0.3, -0.7, 2.0])
    res = hilbert_star(builtin("martinet"), ORIGIN, ray_curve(lam, 0.2, 1.4))
    assert res.value == pytest.approx(0.5 * (0.3 ** 2 + 0.7 ** 2) * 1.2, abs=1e-8)


def test_closed_star_loop_integrates_to_zero():
    c = star_loop(1.0, [1, 0, TWO_PI], t_amp=0.1, lam_sin=[0.1, 0, 0])
    assert c.closed
    res = hilbert_star(HEIS, ORIGIN, c)
    assert abs(res.value) <= 10 * res.error


def test_random_loops_batched():
    rng = np.random.default_rng(0)
    loops = [random_star_loop(rng, 0.8, [0.5, 0.2, 3.0], 0.2) for _ in range(10)]
    many = hilbert_star_many(HEIS, ORIGIN, loops, n_quad=32)
    single = hilbert_star(HEIS, ORIGIN, loops[3], n_quad=32)
    assert many[3].value == pytest.approx(single.value, abs=1e-12)
    for r in many:
        assert abs(r.value) <= 10 * r.error


def test_curve_validation():
    with pytest.raises(InputError):
        AugmentedCurve("OTHER", 0, 1, None, None)
    with pytest.raises(InputError):
        ray_curve([1, 0], 1.0, 1.0)
    c = star_loop(1.0, [1, 0, 1], t_amp=0.2, lam_cos=[0, 0.1, 0])
    assert c.derivative_error() <= 1e-6


def test_invert_field_examples():
    fi = FieldInverse([0, 0], 1.0, [1, 2])
    np.testing.assert_allclose(invert_field(E2, fi, 1.0, [1, 2], [0.9, 1.9]), [1, 2], atol=1e-10)
    lam0 = np.array([0.5, 0, math.pi])
    q = exp_map(HEIS, ORIGIN, lam0)
    fi = FieldInverse(ORIGIN, 1.0, lam0)
    got = invert_field(HEIS, fi, 1.0, q, lam0 + [0.01, 0, 0])
    np.testing.assert_allclose(got, lam0, atol=1e-9)
    fi = FieldInverse(ORIGIN, 1.0, [1, 0, TWO_PI])
    with pytest.raises(SingularJacobian):
        invert_field(HEIS, fi, 1.0, [0, 0, 1 / (4 * math.pi)], [1, 0, TWO_PI])


def test_invert_round_trip():
    rng = np.random.default_rng(4)
    for _ in range(5):
        lam0 = np.array([*rng.uniform(-1, 1, 2), rng.uniform(-3, 3)])
        if abs(exp_map(HEIS, ORIGIN, lam0)[2]) < 1e-3:
            continue
        q = exp_map(HEIS, ORIGIN, lam0)
        fi = FieldInverse(ORIGIN, 1.0, lam0)
        got = invert_field(HEIS, fi, 1.0, q, lam0 * 1.01)
        np.testing.assert_allclose(got, lam0, atol=1e-9)


def test_base_graph_matches_star_ray():
    lam0 = np.array([0.5, 0, math.pi])
    traj = integrate_extremal(HEIS, ORIGIN, lam0, 1.0, tol=1e-12)
    fi = FieldInverse(ORIGIN, 1.0, lam0)
    base = hilbert_base(HEIS, ORIGIN, graph_curve(traj, 0.0, 1.0), fi)
    star = hilbert_star(HEIS, ORIGIN, ray_curve(lam0))
    assert abs(base.value - star.value) <= 1e-6
    assert abs(base.value - extremal_action(traj)) <= 1e-8


def test_base_euclidean_graph():
    traj = integrate_extremal(E2, [0, 0], [3, 4], 1.0)
    fi = FieldInverse([0, 0], 1.0, [3, 4])
    assert hilbert_base(E2, [0, 0], graph_curve(traj), fi).value == pytest.approx(12.5, abs=1e-9)


def test_small_closed_base_loop():
    lam0 = np.array([0.5, 0, math.pi])
    q1 = exp_map(HEIS, ORIGIN, lam0)
    e1, e2 = np.array([0.02, 0, 0]), np.array([0, 0.02, 0.005])

    def value(u):
        return 1 + 0.05 * np.cos(u), q1 + np.outer(np.sin(u), e1) + np.outer(np.cos(2 * u), e2)

    def deriv(u):
        return -0.05 * np.sin(u), np.outer(np.cos(u), e1) - 2 * np.outer(np.sin(2 * u), e2)

    loop = AugmentedCurve(BASE, 0.0, TWO_PI, value, deriv, closed=True)
    res = hilbert_base(HEIS, ORIGIN, loop, FieldInverse(ORIGIN, 1.0, lam0), n_quad=8)
    assert abs(res.value) <= 10 * res.error


def test_gauss_defect_examples():
    circle = lambda x: np.array([math.cos(x), math.sin(x)])
    # round-off of the central difference only
    assert gauss_defect(E2, [0, 0], circle, 1.0) <= 1e-10
    rot = lambda x: np.array([math.cos(x), math.sin(x), TWO_PI])
    assert gauss_defect(HEIS, ORIGIN, rot, 0.7) <= 1e-6
    shift = lambda x: np.array([1 + x, 0, TWO_PI])
    assert gauss_defect(HEIS, ORIGIN, shift, 0.3, s_range=(0, 1)) <= 1e-6


def test_gauss_defect_is_second_order_in_the_step():
    fam = lambda x: np.array([math.cos(x), 2 * math.sin(x), TWO_PI + x])
    d = [gauss_defect(HEIS, ORIGIN, fam, 0.7, h=h) for h in (2e-2, 1e-2, 5e-3)]
    for big, small in zip(d, d[1:]):
        assert 3.5 <= big / small <= 4.5


def test_minimality_against_competitors():
    ref, actions, err = competitor_actions(HEIS, ORIGIN, [0.5, 0, math.pi], n_competitors=5)
    assert np.all(err <= 1e-10)
    assert np.all(ref <= actions + 1e-8)
