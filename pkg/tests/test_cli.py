import json
import math
import subprocess
import sys

import numpy as np
import pytest

from subriem import builtin, exp_map
from subriem.cli import run

LAM = "1,0,6.283185307"


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_geodesic_example(capsys, tmp_path):
    path = tmp_path / "traj.csv"
    code, out, _ = call(capsys, "geodesic", "--structure", "heisenberg", "--p", "0,0,0",
                        "--lam0", LAM, "--T", "1", "--csv", str(path))
    assert code == 0
    doc = json.loads(out)
    np.testing.assert_allclose(doc["final_point"], [0, 0, 0.07957747], atol=1e-8)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,q1,q2,q3,lam1,lam2,lam3"


def test_conjugate_euclidean_example(capsys):
    code, out, _ = call(capsys, "conjugate", "--structure", "euclidean2", "--lam0", "1,2")
    assert code == 0
    assert json.loads(out)["conjugate_times"] == []


def test_witness_example_and_replay(capsys):
    argv = ["witness", "--structure", "heisenberg", "--lam0", LAM, "--radius", "0.1",
            "--seed", "7"]
    code, out, _ = call(capsys, *argv)
    assert code == 0
    w = json.loads(out)["witness"]
    assert w["image_gap"] <= 1e-8 and w["separation"] >= 1e-6
    s = builtin("heisenberg")
    gap = np.linalg.norm(exp_map(s, np.zeros(3), w["lam1"], tol=1e-12)
                         - exp_map(s, np.zeros(3), w["lam2"], tol=1e-12))
    assert abs(gap - w["image_gap"]) <= 1e-12
    # identical inputs give byte-identical documents
    assert call(capsys, *argv)[1] == out


def test_invert_replay(capsys):
    code, out, _ = call(capsys, "invert", "--structure", "heisenberg", "--lam0", "0.5,0,3.14159",
                        "--q", "0.1,0.2,0.01", "--lam-guess", "0.5,0,3")
    assert code == 0
    doc = json.loads(out)
    q = exp_map(builtin("heisenberg"), np.zeros(3), doc["lam0"], tol=1e-12)
    assert np.linalg.norm(q - doc["q"]) <= 1e-10
    assert abs(np.linalg.norm(q - doc["q"]) - doc["residual"]) <= 1e-12


@pytest.mark.parametrize("argv", [
    ["geodesic", "--structure", "nope", "--lam0", "1,2"],
    ["geodesic", "--structure", "heisenberg", "--lam0", "1,2"],
    ["geodesic", "--structure", "heisenberg", "--lam0", "1,0,1", "--tol", "1"],
    ["geodesic", "--lam0", "x"],
    ["no-such-command"],
    ["witness", "--structure", "martinet", "--lam0", "0,1,0"],
    ["witness", "--structure", "euclidean2", "--lam0", "1,0"],
    ["witness", "--structure", "heisenberg", "--lam0", LAM, "--budget", "1"],
])
def test_input_errors_exit_2_with_json(capsys, argv):
    code, out, err = call(capsys, *argv)
    assert code == 2
    assert out == ""
    assert json.loads(err)["error"] in ("INPUT_ERROR", "NOT_STRONGLY_NORMAL")


def test_not_found_exits_4(capsys):
    # inside a ball of radius 1e-7 no two covectors are 1e-6 apart
    code, _, err = call(capsys, "witness", "--structure", "heisenberg", "--lam0", LAM,
                        "--radius", "1e-7", "--budget", "200")
    assert code == 4
    assert json.loads(err)["error"] == "NOT_FOUND"


def test_numerical_failure_exits_3(capsys):
    code, _, err = call(capsys, "invert", "--structure", "heisenberg", "--lam0", LAM,
                        "--q", "0,0,0.0795774715459", "--lam-guess", LAM)
    assert code == 3
    assert json.loads(err)["error"] == "SINGULAR_JACOBIAN"


def test_config_file_layers(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"structure": "heisenberg", "lam0": [1, 0, 2 * math.pi], "T": 0.5}))
    code, out, _ = call(capsys, "geodesic", "--config", str(cfg))
    assert code == 0 and json.loads(out)["T"] == 0.5
    code, out, _ = call(capsys, "geodesic", "--config", str(cfg), "--T", "0.25")
    assert json.loads(out)["T"] == 0.25
    cfg.write_text(json.dumps({"structure": "heisenberg", "colour": "red"}))
    code, _, err = call(capsys, "geodesic", "--config", str(cfg))
    assert code == 2 and "colour" in err


def test_energy_normalize(capsys):
    code, out, _ = call(capsys, "geodesic", "--structure", "heisenberg", "--lam0", "2,0,1",
                        "--energy-normalize")
    doc = json.loads(out)
    assert doc["lam0"][:2] == [1.0, 0.0]
    assert doc["energy"] == pytest.approx(0.5, abs=1e-15)


def test_structure_file(capsys, tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps(builtin("grushin").to_dict()))
    code, out, _ = call(capsys, "check-structure", "--structure", str(path), "--p", "0,0")
    doc = json.loads(out)
    assert code == 0 and doc["bracket_generating"] and doc["rank"] == 2


def _floats(obj):
    if isinstance(obj, float):
        yield obj
    elif isinstance(obj, dict):
        for v in obj.values():
            yield from _floats(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _floats(v)


def test_all_floats_have_17_digits(capsys):
    _, out, _ = call(capsys, "jacobian", "--structure", "heisenberg", "--lam0", LAM, "--T", "0.5")
    vals = [x for x in _floats(json.loads(out)) if x != int(x)]
    assert len(vals) > 10
    for x in vals:
        assert format(x, ".17g") in out


def test_console_entry_point_and_threads(tmp_path):
    env = {"SUBRIEM_THREADS": "1", "PATH": "/usr/bin:/bin"}
    res = subprocess.run([sys.executable, "-m", "subriem", "conjugate", "--structure",
                          "euclidean2", "--lam0", "1,2"], capture_output=True, text=True,
                         env=env, cwd=tmp_path)
    assert res.returncode == 0
    assert json.loads(res.stdout)["conjugate_times"] == []
