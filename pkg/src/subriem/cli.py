"""Command-line front end: ``subriem <subcommand> [options]``.

Every subcommand prints one JSON document on stdout (17 significant digits
per float).  Errors are printed to stderr as JSON and mapped to exit codes:
2 for invalid input, 3 for numerical failure, 4 when a randomized search
found nothing.  Options may also come from ``--config file.json``; flags on
the command line win over the file, unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import conjugate, flow, hilbert, witness
from .errors import InputError, NotFound, NumericalError, SubRiemError
from .report import dumps
from .structures import _point, check_bracket_generating, load_structure

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_NOT_FOUND = 0, 2, 3, 4

TOL_MIN, TOL_MAX = flow.TOL_RANGE


def _vector(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


@dataclass
class RunConfig:
    """Resolved settings of one CLI run."""

    command: str
    structure: str = "heisenberg"
    p: list | None = None
    lam0: list | None = None
    tol: float | None = None
    seed: int = 0
    csv: str | None = None
    energy_normalize: bool = False
    params: dict = field(default_factory=dict)

    COMMON = ("structure", "p", "lam0", "tol", "seed", "csv", "energy_normalize")

    @classmethod
    def from_mapping(cls, command, values: dict, allowed):
        unknown = sorted(set(values) - set(cls.COMMON) - set(allowed))
        if unknown:
            raise InputError("unknown configuration keys", keys=unknown)
        common = {k: values[k] for k in cls.COMMON if k in values}
        params = {k: values[k] for k in allowed if k in values}
        cfg = cls(command, **common, params=params)
        cfg.validate()
        return cfg

    def validate(self):
        if self.tol is not None and not (TOL_MIN <= float(self.tol) <= TOL_MAX):
            raise InputError(f"tol must lie in [{TOL_MIN:g}, {TOL_MAX:g}]", tol=self.tol)
        if int(self.seed) != self.seed or self.seed < 0:
            raise InputError("seed must be a non-negative integer", seed=self.seed)
        for k, v in self.params.items():
            if k.endswith("tol") and v is not None and not (0 < float(v) < 1):
                raise InputError(f"{k} must lie in (0, 1)", **{k: v})


# ----------------------------------------------------------------------
# subcommands: each returns a JSON-ready dict


def _setup(cfg: RunConfig, need_lam=True):
    s = load_structure(cfg.structure)
    p = _point(s, cfg.p if cfg.p is not None else np.zeros(s.n), "p")
    lam = None
    if need_lam:
        if cfg.lam0 is None:
            raise InputError("--lam0 is required")
        lam = _point(s, cfg.lam0, "lam0")
        if cfg.energy_normalize:
            H = float(s.energy_batch(p[None], lam[None])[0])
            if not H > 0:
                raise InputError("cannot normalise a covector with H = 0")
            lam = lam / math.sqrt(2 * H)
    return s, p, lam


def _head(cfg, s, p, lam):
    out = {"command": cfg.command, "structure": s.name, "p": p}
    if lam is not None:
        out["lam0"] = lam
    return out


def cmd_geodesic(cfg):
    s, p, lam = _setup(cfg)
    T = cfg.params["T"]
    tol = cfg.tol or 1e-10
    traj = flow.integrate_extremal(s, p, lam, T, tol)
    if cfg.csv:
        traj.to_csv(cfg.csv)
    H = traj.energy
    out = _head(cfg, s, p, lam)
    out.update({"T": T, "tol": tol, "final_point": traj.q[-1], "final_covector": traj.lam[-1],
                "energy": H, "energy_drift": traj.energy_drift,
                "length": math.sqrt(2 * H) * T, "n_samples": len(traj.t)})
    return out


def cmd_jacobian(cfg):
    s, p, lam = _setup(cfg)
    T = cfg.params["T"]
    tol = cfg.tol or 1e-10
    track = flow.integrate_variational(s, p, lam, T, tol)
    if cfg.csv:
        flow.write_trajectory_csv(cfg.csv, track.t, track.trajectory.q, track.trajectory.lam,
                                  track.D)
    M = track.M_at(T)
    out = _head(cfg, s, p, lam)
    out.update({"T": T, "tol": tol, "M": M, "D": float(np.linalg.det(M)),
                "det_exp": flow.det_exp_along_ray(track, T),
                "degeneracy": float(flow.degeneracy(M))})
    return out


def cmd_conjugate(cfg):
    s, p, lam = _setup(cfg)
    pr = cfg.params
    tol = cfg.tol or 1e-10
    track = flow.integrate_variational(s, p, lam, pr["T"], tol)
    segs = conjugate.abnormal_segments(track)
    recs = conjugate.find_conjugate_times(track, t_min=pr["t_min"], tol_det=pr["tol_det"])
    if cfg.csv:
        flow.write_trajectory_csv(cfg.csv, track.t, track.trajectory.q, track.trajectory.lam,
                                  track.D)
    out = _head(cfg, s, p, lam)
    out.update({"T": pr["T"], "tol": tol, "conjugate_times": recs, "abnormal_segments": segs})
    return out


def cmd_order(cfg):
    s, p, lam = _setup(cfg)
    pr = cfg.params
    tol = cfg.tol or 1e-11
    t_star = pr.get("t_star")
    T = pr["T"] if t_star is None else max(pr["T"], t_star * (1 + 2 * pr["window"]))
    track = flow.integrate_variational(s, p, lam, T, tol)
    if t_star is None:
        recs = conjugate.find_conjugate_times(track, estimate=False)
        if not recs:
            raise InputError("no conjugate time on [t_min, T]; pass --t-star", T=T)
        t_star = recs[0].t_star
    order, coeff = conjugate.estimate_order(track, t_star, window=pr["window"])
    out = _head(cfg, s, p, lam)
    out.update({"t_star": t_star, "order": conjugate._order_json(order), "leading_coeff": coeff,
                "tol": tol})
    return out


def cmd_locus(cfg):
    s, p, _ = _setup(cfg, need_lam=False)
    pr = cfg.params
    grid = conjugate.energy_grid(s, p, pr["energy"], pr["n_dir"], pr["n_fibre"],
                                 (-pr["fibre_max"], pr["fibre_max"]), seed=cfg.seed)
    sl = conjugate.locus_slice(s, p, pr["energy"], grid, t_max=pr["t_max"], tol=cfg.tol or 1e-10,
                               regular_rays=pr["regular_rays"], seed=cfg.seed)
    if cfg.csv:
        sl.to_csv(cfg.csv)
    out = _head(cfg, s, p, None)
    out["slice"] = sl
    return out


def _star_curve(cfg, s, lam):
    pr = cfg.params
    if pr["curve"] == "ray":
        return hilbert.ray_curve(lam, pr["t0"], pr["t1"])
    if pr["curve"] == "loop":
        e1 = np.zeros(s.n)
        e1[0] = 1.0
        lc = np.asarray(pr["lam_cos"], float) if pr.get("lam_cos") is not None else np.zeros(s.n)
        ls = np.asarray(pr["lam_sin"], float) if pr.get("lam_sin") is not None else pr["radius"] * e1
        return hilbert.star_loop(pr["t_center"], lam, pr["t_amp"], lc, ls)
    if pr["curve"] == "random-loop":
        rng = np.random.default_rng(cfg.seed)
        return hilbert.random_star_loop(rng, pr["t_center"], lam, pr["radius"])
    raise InputError("curve must be ray, loop or random-loop", curve=pr["curve"])


def cmd_hilbert_star(cfg):
    s, p, lam = _setup(cfg)
    curve = _star_curve(cfg, s, lam)
    res = hilbert.hilbert_star(s, p, curve, n_quad=cfg.params["n_quad"], tol=cfg.tol or 1e-11)
    out = _head(cfg, s, p, lam)
    out.update({"curve": cfg.params["curve"], "value": res.value, "error": res.error,
                "nodes": res.nodes})
    return out


def cmd_hilbert_base(cfg):
    s, p, lam = _setup(cfg)
    pr = cfg.params
    t0, t1 = pr["t0"], pr["t1"]
    traj = flow.integrate_extremal(s, p, lam, t1, 1e-12)
    curve = hilbert.graph_curve(traj, t0, t1)
    fi = hilbert.FieldInverse(p, t0 if t0 > 0 else t1, lam, tol=cfg.tol or 1e-11)
    res = hilbert.hilbert_base(s, p, curve, fi, n_quad=pr["n_quad"])
    star = hilbert.hilbert_star(s, p, hilbert.ray_curve(lam, t0, t1), n_quad=pr["n_quad"])
    out = _head(cfg, s, p, lam)
    out.update({"t0": t0, "t1": t1, "value": res.value, "error": res.error,
                "star_value": star.value, "difference": res.value - star.value,
                "field_inverse": fi})
    return out


def _family(kind, lam):
    lam = np.asarray(lam, dtype=float)
    if kind == "rotation":
        a, b = lam[0], lam[1]

        def delta(x):
            d = lam.copy()
            d[0], d[1] = a * math.cos(x) - b * math.sin(x), a * math.sin(x) + b * math.cos(x)
            return d
        return delta
    if kind == "shift":
        e1 = np.zeros_like(lam)
        e1[0] = 1.0
        return lambda x: lam + x * e1
    raise InputError("family must be rotation or shift", family=kind)


def cmd_gauss(cfg):
    s, p, lam = _setup(cfg)
    pr = cfg.params
    if s.n < 2 and pr["family"] == "rotation":
        raise InputError("rotation family needs n >= 2")
    delta = _family(pr["family"], lam)
    s_range = (0.0, 2 * math.pi) if pr["family"] == "rotation" else (0.0, 1.0)
    steps = [pr["h"], pr["h"] / 2]
    vals = [hilbert.gauss_defect(s, p, delta, pr["t"], pr["n_samples"], h, s_range,
                                 tol=cfg.tol or 1e-12) for h in steps]
    out = _head(cfg, s, p, lam)
    out.update({"family": pr["family"], "t": pr["t"], "h": steps, "defect": vals})
    return out


def cmd_invert(cfg):
    s, p, _ = _setup(cfg, need_lam=False)
    pr = cfg.params
    if pr.get("q") is None or pr.get("lam_guess") is None:
        raise InputError("--q and --lam-guess are required")
    guess = _point(s, pr["lam_guess"], "lam_guess")
    fi = hilbert.FieldInverse(p, pr["t"], guess, tol=cfg.tol or 1e-11)
    lam = hilbert.invert_field(s, fi, pr["t"], pr["q"], guess)
    q = flow.exp_batch(s, p, lam[None], pr["t"], 1e-13)[0]
    out = _head(cfg, s, p, None)
    out.update({"t": pr["t"], "q": pr["q"], "lam0": lam,
                "residual": float(np.linalg.norm(q - np.asarray(pr["q"], float)))})
    return out


def cmd_witness(cfg):
    s, p, lam = _setup(cfg)
    pr = cfg.params
    w = witness.injectivity_witness(s, p, lam, pr["radius"], pr["budget"], cfg.seed)
    out = _head(cfg, s, p, lam)
    out["witness"] = w
    return out


def cmd_cut(cfg):
    s, p, lam = _setup(cfg)
    pr = cfg.params
    rec = witness.cut_time(s, p, lam, pr["t_max"], tol=cfg.tol or 1e-6)
    out = _head(cfg, s, p, lam)
    out["cut"] = rec
    return out


def cmd_cut1(cfg):
    s, p, lam = _setup(cfg)
    pr = cfg.params
    pairs = witness.cut1_pairs(s, p, lam, pr["radius"], pr["budget"], cfg.seed, t_max=pr["t_max"])
    out = _head(cfg, s, p, lam)
    out["pairs"] = pairs
    return out


def cmd_synthetic(cfg):
    s, p, lam = _setup(cfg)
    pr = cfg.params
    sw = witness.synthetic_witness(s, p, lam, pr["kind"], pr["levels"], cfg.seed, pr["r0"],
                                   pr["budget"])
    out = _head(cfg, s, p, lam)
    out["synthetic"] = sw
    return out


def cmd_check_structure(cfg):
    s, p, _ = _setup(cfg, need_lam=False)
    ok, rank = check_bracket_generating(s, p, cfg.params["depth"])
    out = _head(cfg, s, p, None)
    out.update({"n": s.n, "m": s.m, "bracket_generating": ok, "rank": rank,
                "depth": cfg.params["depth"], "definition": s.to_dict()})
    return out


# name -> (handler, help, [(flag, type, default, help)])
COMMANDS = {
    "geodesic": (cmd_geodesic, "integrate a normal extremal", [
        ("T", float, 1.0, "final time")]),
    "jacobian": (cmd_jacobian, "variational equations, M(T) and det d exp", [
        ("T", float, 1.0, "final time")]),
    "conjugate": (cmd_conjugate, "conjugate times along a ray", [
        ("T", float, 2.0, "search horizon"),
        ("t_min", float, 1e-2, "ignore zeros below this time"),
        ("tol_det", float, 1e-8, "degeneracy threshold for even-order zeros")]),
    "order": (cmd_order, "vanishing order of D at a conjugate time", [
        ("t_star", float, None, "conjugate time (default: first found)"),
        ("T", float, 2.0, "search horizon when --t-star is absent"),
        ("window", float, 0.05, "half-width of the order window")]),
    "locus": (cmd_locus, "conjugate-locus slice on an energy level", [
        ("energy", float, 0.5, "energy level"),
        ("n_dir", int, 16, "horizontal directions"),
        ("n_fibre", int, 16, "fibre values per dimension"),
        ("fibre_max", float, 4 * math.pi, "fibre grid half-range"),
        ("t_max", float, 2.0, "search horizon per ray"),
        ("regular_rays", int, 0, "rays per regularity check (0 skips it)")]),
    "hilbert-star": (cmd_hilbert_star, "I* along a curve in R x T*_p", [
        ("curve", str, "ray", "ray, loop or random-loop"),
        ("t0", float, 0.0, "ray start"),
        ("t1", float, 1.0, "ray end"),
        ("t_center", float, 1.0, "loop centre time"),
        ("t_amp", float, 0.1, "loop amplitude in t"),
        ("radius", float, 0.1, "loop amplitude in the covector"),
        ("lam_cos", _vector, None, "covector cos-amplitude of the loop"),
        ("lam_sin", _vector, None, "covector sin-amplitude of the loop"),
        ("n_quad", int, 64, "Gauss-Legendre nodes")]),
    "hilbert-base": (cmd_hilbert_base, "I along the graph of a geodesic", [
        ("t0", float, 0.0, "start time"),
        ("t1", float, 1.0, "end time"),
        ("n_quad", int, 64, "Gauss-Legendre nodes")]),
    "gauss": (cmd_gauss, "Gauss-lemma pairing defect", [
        ("family", str, "rotation", "rotation or shift"),
        ("t", float, 0.7, "time"),
        ("h", float, 1e-3, "finite-difference step (also reported at h/2)"),
        ("n_samples", int, 16, "samples of the family parameter")]),
    "invert": (cmd_invert, "local inverse of the field of extremals", [
        ("t", float, 1.0, "time"),
        ("q", _vector, None, "target point"),
        ("lam_guess", _vector, None, "initial covector")]),
    "witness": (cmd_witness, "non-injectivity witness near a conjugate covector", [
        ("radius", float, 0.1, "search radius"),
        ("budget", int, 10 ** 4, "number of samples")]),
    "cut": (cmd_cut, "cut time of a geodesic", [
        ("t_max", float, 3.0, "search horizon")]),
    "cut1": (cmd_cut1, "Cut^1 pairs near a cut covector", [
        ("radius", float, 0.1, "search radius"),
        ("budget", int, 4000, "number of samples"),
        ("t_max", float, 1.5, "cut-time horizon")]),
    "synthetic": (cmd_synthetic, "synthetic conjugacy sequence", [
        ("kind", str, "ONE_SIDED", "ONE_SIDED or SYMMETRIC"),
        ("levels", int, 3, "number of radii"),
        ("r0", float, 0.1, "largest radius"),
        ("budget", int, 3000, "samples per level")]),
    "check-structure": (cmd_check_structure, "bracket-generating check at p", [
        ("depth", int, 3, "bracket length")]),
}


class _Parser(argparse.ArgumentParser):
    """Usage errors become InputError so they reach stderr as JSON."""

    def error(self, message):
        raise InputError(message, usage=self.format_usage().strip())


def build_parser():
    common = _Parser(add_help=False)
    g = common.add_argument_group("common options")
    sup = argparse.SUPPRESS
    g.add_argument("--structure", default=sup, help="builtin name or structure file")
    g.add_argument("--p", type=_vector, default=sup, help="base point, e.g. 0,0,0")
    g.add_argument("--lam0", type=_vector, default=sup,
                   help="covector components (use --lam0=-1,0,2 for a leading minus)")
    g.add_argument("--tol", type=float, default=sup, help="integration tolerance")
    g.add_argument("--seed", type=int, default=sup)
    g.add_argument("--csv", default=sup, help="also write plot-ready CSV here")
    g.add_argument("--energy-normalize", action="store_true", default=sup,
                   help="rescale lam0 to H = 1/2")
    g.add_argument("--config", default=None, help="JSON file with option values")

    parser = _Parser(prog="subriem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, hlp, opts) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=hlp, description=hlp)
        for key, typ, _, ohelp in opts:
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=sup,
                            help=ohelp)
    return parser


def resolve(args) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    name = args.command
    opts = COMMANDS[name][2]
    values = {k: d for k, _, d, _ in opts}
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config file: {exc}")
        if not isinstance(doc, dict):
            raise InputError("config file must hold a JSON object")
        values.update({k.replace("-", "_"): v for k, v in doc.items()})
    values.update({k: v for k, v in vars(args).items() if k not in ("command", "config")})
    return RunConfig.from_mapping(name, values, [k for k, *_ in opts])


def _limit_threads():
    n = os.environ.get("SUBRIEM_THREADS")
    if not n:
        return None
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # BLAS keeps its own default
        return None
    return threadpool_limits(int(n))


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help
        return EXIT_INPUT if exc.code else EXIT_OK
    except InputError as exc:
        sys.stderr.write(dumps(exc.to_dict()))
        return EXIT_INPUT
    _limiter = _limit_threads()
    try:
        cfg = resolve(args)
        result = COMMANDS[cfg.command][0](cfg)
    except SubRiemError as exc:
        sys.stderr.write(dumps(exc.to_dict()))
        if isinstance(exc, NotFound):
            return EXIT_NOT_FOUND
        if isinstance(exc, NumericalError):
            return EXIT_NUMERICAL
        return EXIT_INPUT
    except (ValueError, TypeError) as exc:
        sys.stderr.write(dumps({"error": "INPUT_ERROR", "message": str(exc), "details": {}}))
        return EXIT_INPUT
    sys.stdout.write(dumps(result))
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
