import json
import math

import numpy as np
import pytest

from subriem import (InputError, PhasePoint, builtin, check_bracket_generating, eval_fields,
                     hamiltonian, hamiltonian_hessian, hamiltonian_rhs, load_structure)
from subriem.structures import structure_from_dict

from oracles import fd_jacobian

TWO_PI = 2 * math.pi


def test_eval_fields_examples():
    np.testing.assert_array_equal(eval_fields(builtin("euclidean2"), [5, -3]), np.eye(2))
    np.testing.assert_array_equal(eval_fields(builtin("heisenberg"), [0, 0, 0]),
                                  [[1, 0, 0], [0, 1, 0]])
    np.testing.assert_array_equal(eval_fields(builtin("martinet"), [2, 0, 0]),
                                  [[1, 0, 0], [0, 1, 2]])


def test_eval_fields_dimension_mismatch():
    with pytest.raises(InputError):
        eval_fields(builtin("heisenberg"), [0, 0])


def test_builtin_fields_at_generic_point():
    x, y, z = 0.3, -1.7, 2.0
    np.testing.assert_allclose(eval_fields(builtin("heisenberg"), [x, y, z]),
                               [[1, 0, -y / 2], [0, 1, x / 2]])
    np.testing.assert_allclose(eval_fields(builtin("martinet"), [x, y, z]),
                               [[1, 0, 0], [0, 1, x * x / 2]])
    np.testing.assert_allclose(eval_fields(builtin("grushin"), [x, y]), [[1, 0], [0, x]])


def test_hamiltonian_examples():
    h, H, u = hamiltonian(builtin("euclidean2"), PhasePoint([0, 0], [3, 4]))
    np.testing.assert_array_equal(h, [3, 4])
    assert H == 12.5
    np.testing.assert_array_equal(u, h)
    h, H, _ = hamiltonian(builtin("heisenberg"), PhasePoint([0, 0, 0], [1, 0, TWO_PI]))
    np.testing.assert_array_equal(h, [1, 0])
    assert H == 0.5
    h, H, _ = hamiltonian(builtin("heisenberg"), PhasePoint([0, 2, 0], [1, 0, 1]))
    np.testing.assert_allclose(h, [0, 0], atol=1e-15)
    assert H == 0


def test_hamiltonian_rhs_examples():
    qd, ld = hamiltonian_rhs(builtin("euclidean2"), PhasePoint([0, 0], [3, 4]))
    np.testing.assert_array_equal(qd, [3, 4])
    np.testing.assert_array_equal(ld, [0, 0])
    # -dH/dy at the origin is h1 * lam_z / 2 = +pi (the hand derivative of H)
    qd, ld = hamiltonian_rhs(builtin("heisenberg"), PhasePoint([0, 0, 0], [1, 0, TWO_PI]))
    np.testing.assert_allclose(qd, [1, 0, 0])
    np.testing.assert_allclose(ld, [0, math.pi, 0], atol=1e-15)
    qd, ld = hamiltonian_rhs(builtin("martinet"), PhasePoint([0, 0, 0], [0, 1, 1]))
    np.testing.assert_allclose(qd, [0, 1, 0])
    np.testing.assert_allclose(ld, [0, 0, 0])


def test_euclidean_hessian_blocks():
    for n in (2, 3, 5):
        A = hamiltonian_hessian(builtin(f"euclidean{n}"), PhasePoint(np.ones(n), np.arange(n)))
        ref = np.zeros((2 * n, 2 * n))
        ref[:n, n:] = np.eye(n)
        np.testing.assert_array_equal(A, ref)


@pytest.mark.parametrize("name,q,lam", [
    ("heisenberg", [0.4, -0.2, 1.0], [0.7, -1.1, 2.5]),
    ("martinet", [1, 0, 0], [0, 1, 0]),
    ("grushin", [0.6, 0.1], [1.2, -0.8]),
])
def test_hessian_matches_fd(name, q, lam):
    s = builtin(name)
    n = s.n
    A = hamiltonian_hessian(s, PhasePoint(q, lam))

    def rhs(zz):
        qd, ld = hamiltonian_rhs(s, PhasePoint(zz[:n], zz[n:]))
        return np.concatenate([qd, ld])

    J = fd_jacobian(rhs, np.concatenate([q, lam]), eps=1e-6)
    assert np.linalg.norm(A - J) <= 1e-6 * (1 + np.linalg.norm(A))


def test_rhs_matches_fd_of_H():
    rng = np.random.default_rng(3)
    for name in ("heisenberg", "martinet", "grushin"):
        s = builtin(name)
        n = s.n
        for _ in range(10):
            q, lam = rng.normal(size=n), rng.normal(size=n)
            qd, ld = hamiltonian_rhs(s, PhasePoint(q, lam))
            H = lambda zz: [hamiltonian(s, PhasePoint(zz[:n], zz[n:]))[1]]
            g = fd_jacobian(H, np.concatenate([q, lam]))[0]
            rhs = np.concatenate([qd, ld])
            assert np.all(np.abs(rhs - np.concatenate([g[n:], -g[:n]])) <= 1e-6 * (1 + np.abs(rhs)))


def test_bracket_generating_examples():
    assert check_bracket_generating(builtin("euclidean2"), [3, 1], 1) == (True, 2)
    assert check_bracket_generating(builtin("heisenberg"), [0, 0, 0], 2) == (True, 3)
    assert check_bracket_generating(builtin("martinet"), [0, 0, 0], 2) == (False, 2)
    assert check_bracket_generating(builtin("martinet"), [0, 0, 0], 3) == (True, 3)
    # off the Martinet plane x = 0 one bracket suffices
    assert check_bracket_generating(builtin("martinet"), [1, 0, 0], 2) == (True, 3)
    # Grushin on the singular line needs one bracket, away from it none
    assert check_bracket_generating(builtin("grushin"), [0, 0], 1) == (False, 1)
    assert check_bracket_generating(builtin("grushin"), [0, 0], 2) == (True, 2)
    assert check_bracket_generating(builtin("grushin"), [1, 0], 1) == (True, 2)


def test_structure_file_roundtrip(tmp_path):
    s = builtin("heisenberg")
    path = tmp_path / "h.json"
    path.write_text(json.dumps(s.to_dict()))
    s2 = load_structure(path)
    assert (s2.n, s2.m) == (3, 2)
    q = [0.3, 0.7, -1.0]
    np.testing.assert_array_equal(eval_fields(s2, q), eval_fields(s, q))


def test_structure_file_rejects_bad_documents():
    with pytest.raises(InputError):
        structure_from_dict({"name": "x", "n": 2, "m": 1, "fields": [[[[1, [0, 0]]]]]})
    with pytest.raises(InputError):
        structure_from_dict({"name": "x", "n": 2, "m": 1, "fields": [[[[1, [0]]], []]]})
    with pytest.raises(InputError):
        load_structure("no_such_structure")


def test_phase_point_dimension_check():
    with pytest.raises(InputError):
        PhasePoint([0, 0, 0], [1, 0])
