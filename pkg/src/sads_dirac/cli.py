"""Command-line front end.

Usage::

    sads-dirac SUBCOMMAND [--config FILE] [--KEY VALUE ...]

Every configuration key has a flag of the same name (``--h_list`` or
``--h-list``).  Values starting with ``-`` that are not plain numbers need
the ``--K=-1.5,-0.2`` form.

Exit codes: 0 ok, 1 I/O error, 2 configuration error, 3 physics-check
failure, 4 numerical failure.  On error a single JSON line is printed to
stderr; on success a single JSON line with the written files goes to
stdout.
"""
import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence

from . import agmon, evolution, geometry, model_spectrum, potentials, quasimodes
from .config import SCHEMA, build_config, read_config_file
from .dirac import RadialGrid, assemble_H, boundary_behavior_check
from .errors import ConfigurationError, NumericalError, PhysicsCheckError

SUBCOMMANDS = ("geometry", "potentials", "spectrum", "quasimode", "sweep", "agmon", "evolve",
               "certify", "report")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_PHYSICS, EXIT_NUMERICAL = 0, 1, 2, 3, 4

# fixed CSV schemas, one per output file
HEADERS = {
    "geometry.csv": ["M", "l", "r_SAdS", "p_plus", "p_minus", "F_at_r_SAdS", "r_plus", "x_plus",
                     "barrier_A2"],
    "tortoise.csv": ["r", "x", "F"],
    "potentials.csv": ["x", "r", "A", "B", "A_prime", "B_prime", "A_squared"],
    "spectrum.csv": ["h", "E0", "E1", "E2", "E_tilde", "bracket_ok", "slack"],
    "quasimode.csv": ["x", "re1", "im1", "re2", "im2", "re3", "im3", "re4", "im4", "density"],
    "quasimode_summary.csv": ["h", "E_plus", "E2", "distance", "flagged", "sqrtE_plus", "lambda_H",
                              "residual", "commutator", "overlap_trial", "pairing_gap",
                              "boundary_exponent", "boundary_consistent"],
    "sweep.csv": ["h", "n", "E_plus", "sqrtE_plus", "residual", "commutator", "floor", "flag"],
    "agmon.csv": ["h", "E", "mass_sigma1", "mass_sigma2", "C_implied", "lemma_margin", "lemma_ratio",
                  "noise_limited", "in_window"],
    "evolve.csv": ["t", "local_energy", "total_norm", "lower_bound", "duhamel_dev"],
    "evolve_summary.csv": ["h", "K_a", "K_b", "lambda", "r_h", "dt", "slack", "bound_ok", "duhamel_ok"],
    "certificate.csv": ["h", "K_a", "K_b", "lambda", "r_h", "D", "C", "t_h", "dt", "steps", "branch",
                        "smallness", "smallness_ok", "envelope_ok", "local_at_t_h", "log_product",
                        "duhamel_ok", "passed", "note"],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


class Output:
    """Writes files atomically into one directory and nowhere else."""

    def __init__(self, root):
        self.root = Path(root)
        self.written = []

    def _path(self, name):
        if Path(name).name != name:
            raise ValueError(f"output name {name!r} must be a bare file name")
        return self.root / name

    def _atomic(self, name, text):
        self.root.mkdir(parents=True, exist_ok=True)
        path = self._path(name)
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.written.append(str(path))

    def csv(self, name, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADERS[name])
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        self._atomic(name, buf.getvalue())

    def json(self, name, obj):
        self._atomic(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _clean(obj):
    """JSON-safe copy with plain Python scalars."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _grid_bounds(cfg, params, default_left):
    left = cfg.x_min * params.l if cfg.x_min is not None else default_left
    return left, cfg.x_cut * params.l


def _n_fixed(cfg, default=4000):
    return default if cfg.n == "auto" else cfg.n


def cmd_geometry(cfg, out):
    p = cfg.params
    hd = geometry.horizon_radius(p)
    r_plus, x_plus = potentials.inner_cutoff_x_plus(p)
    out.csv("geometry.csv", [[p.M, p.l, hd.r_SAdS, hd.p_plus, hd.p_minus,
                              float(geometry.metric_F(hd.r_SAdS, p)), r_plus, x_plus,
                              potentials.barrier_height(p)]])
    r = hd.r_SAdS * (1.0 + np.geomspace(1e-6, 1e4 * p.l / hd.r_SAdS, 64))
    x = geometry.tortoise_from_radius(r, p)
    out.csv("tortoise.csv", zip(r, x, geometry.metric_F(r, p)))


def cmd_potentials(cfg, out):
    p = cfg.params
    _, x_plus = potentials.inner_cutoff_x_plus(p)
    left, right = _grid_bounds(cfg, p, x_plus)
    grid = RadialGrid(left, right, _n_fixed(cfg), grading=cfg.graded)
    out.csv("potentials.csv", potentials.PotentialProfile(p).table(grid.x))


def cmd_spectrum(cfg, out):
    p = cfg.params
    x_min = cfg.x_min if cfg.x_min is not None else -3.0
    rows, bad = [], []
    for h in cfg.h_list:
        ph = p.with_h(h)
        rec = model_spectrum.eigenvalue_bracket(ph, x_min=x_min, x_cut=cfg.x_cut, n=_n_fixed(cfg))
        lv = model_spectrum.model_levels(ph)
        rows.append([h, lv.E0, lv.E1, lv.E2, rec.E_tilde, rec.ok, rec.slack])
        if not rec.ok:
            bad.append(h)
    out.csv("spectrum.csv", rows)
    if bad:
        raise PhysicsCheckError(f"eigenvalue bracket violated at h={bad}")


def _quasimode(cfg, params):
    grid = quasimodes.restricted_grid(params, _n_fixed(cfg), cfg.x_cut)
    return quasimodes.build_quasimode(params, grid, cfg.S, tuple(cfg.chi_band), cfg.margin)


def cmd_quasimode(cfg, out):
    p = cfg.params
    qm = _quasimode(cfg, p)
    H = assemble_H(qm.grid_full, p)
    res = quasimodes.residual_norm(qm.phi_h, qm.lambda_H, H)
    E2 = model_spectrum.model_levels(p).E2
    dist = abs(qm.E_plus - E2)
    bnd = boundary_behavior_check(qm.phi_plus, p)
    out.csv("quasimode_summary.csv", [[p.h, qm.E_plus, E2, dist, dist > 10 * math.sqrt(p.h) / p.l**2,
                                       qm.sqrtE_plus, qm.lambda_H, res, quasimodes.commutator_norm(qm),
                                       qm.overlap_trial, qm.pairing_gap, bnd.exponent, bnd.consistent]])
    v = qm.phi_h.values
    cols = [qm.grid_full.x]
    for c in range(4):
        cols += [v[:, c].real, v[:, c].imag]
    cols.append(qm.phi_h.density())
    out.csv("quasimode.csv", zip(*cols))


def _fit_summary(cfg, fit):
    return _clean({"D": fit.D, "R2": fit.r_squared, "intercept": fit.intercept,
                   "C_envelope": fit.C_envelope, "used_records": [r.h for r in fit.used],
                   "floor_limited": [r.h for r in fit.floor_limited],
                   "M": cfg.M, "l": cfg.l, "m": cfg.m, "n": cfg.n, "x_cut": cfg.x_cut,
                   "chi_band": list(cfg.chi_band), "S": cfg.S, "margin": cfg.margin,
                   "h_list": list(cfg.h_list)})


def _run_sweep(cfg):
    return quasimodes.residual_sweep(list(cfg.h_list), cfg.params, n=cfg.n, x_cut=cfg.x_cut,
                                     S=cfg.S, band=tuple(cfg.chi_band), margin=cfg.margin,
                                     workers=cfg.workers)


def cmd_sweep(cfg, out):
    records, fit = _run_sweep(cfg)
    out.csv("sweep.csv", [[r.h, r.n, r.E_plus, r.sqrtE_plus, r.residual, r.commutator, r.floor,
                           "floor_limited" if r.floor_limited else "ok"] for r in records])
    out.json("sweep_fit.json", _fit_summary(cfg, fit))
    if not fit.D > 0:
        raise PhysicsCheckError(f"fitted D={fit.D:.6g} is not positive")


def cmd_agmon(cfg, out):
    p = cfg.params
    conf = agmon.agmon_config(p, T=cfg.T, delta=cfg.delta, S=cfg.S)
    records, fit = agmon.agmon_sweep(list(cfg.h_list), p, n=_n_fixed(cfg), x_cut=cfg.x_cut,
                                     delta=cfg.delta, config=conf)
    out.csv("agmon.csv", [[r.h, r.E, r.mass_sigma1, r.mass_sigma2, r.C_implied, r.lemma_margin,
                           r.lemma_ratio, r.noise_limited, r.in_window] for r in records])
    out.json("agmon_fit.json", _clean({"epsilon": fit.epsilon, "R2": fit.r_squared,
                                       "C_growth": fit.C_growth, "C_ratio": fit.C_ratio,
                                       "used_records": [r.h for r in fit.used], "c": conf.c, "T": conf.T,
                                       "delta": cfg.delta, "A1": conf.A1, "A2": conf.A2}))
    failed = [r.h for r in records if r.lemma_margin <= 0]
    if failed:
        raise PhysicsCheckError(f"lemma margin not positive at h={failed}")
    if not fit.epsilon > 0:
        raise PhysicsCheckError(f"epsilon_fit={fit.epsilon:.6g} is not positive")


def _window(cfg, qm):
    if cfg.K is None:
        return None
    K = evolution.CompactWindow(*cfg.K)
    K.mask(qm.grid_full)
    return K


def _check_window_early(cfg, params):
    if cfg.K is not None:
        grid = quasimodes.full_grid(params, _n_fixed(cfg), cfg.x_cut, cfg.margin)
        evolution.CompactWindow(*cfg.K).mask(grid)


def cmd_evolve(cfg, out):
    p = cfg.params
    _check_window_early(cfg, p)
    qm = _quasimode(cfg, p)
    exp_ = evolution.decay_experiment(qm, _window(cfg, qm), cfg.t_max, cfg.dt, cfg.snapshots)
    out.csv("evolve.csv", zip(exp_.times, exp_.local, exp_.norms, exp_.lower_bound, exp_.duhamel_dev))
    out.csv("evolve_summary.csv", [[p.h, exp_.K.a, exp_.K.b, exp_.lam, exp_.r_h, exp_.dt, exp_.slack,
                                    exp_.bound_ok, exp_.duhamel_ok]])
    if not (exp_.bound_ok and exp_.duhamel_ok):
        raise PhysicsCheckError(f"Duhamel bound violated near t={exp_.worst_time:.6g}")


def _load_fit(cfg, out):
    path = out.root / "sweep_fit.json"
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            saved = json.load(fh)
        mine = _fit_summary(cfg, quasimodes.SweepFit(0, 0, 0, 0, [], []))
        keys = ("M", "l", "m", "n", "x_cut", "chi_band", "S", "margin")
        if all(saved.get(k) == mine[k] for k in keys) and saved.get("D") is not None:
            return quasimodes.SweepFit(saved["D"], saved["intercept"], saved["R2"], saved["C_envelope"],
                                       [], [])
    _, fit = _run_sweep(cfg)
    return fit


def cmd_certify(cfg, out):
    p = cfg.params
    for h in cfg.certify_h:
        _check_window_early(cfg, p.with_h(h))
    fit = _load_fit(cfg, out)
    rows, withheld = [], []
    for h in cfg.certify_h:
        ph = p.with_h(h)
        K = evolution.CompactWindow(*cfg.K) if cfg.K is not None else None
        c = evolution.log_bound_certificate(ph, fit, K, n=_n_fixed(cfg), x_cut=cfg.x_cut,
                                            margin=cfg.margin, dt=cfg.dt, count=cfg.snapshots)
        rows.append([c.h, c.K[0], c.K[1], c.lam, c.r_h, c.D, c.C, c.t_h, c.dt, c.steps, c.branch,
                     c.smallness, c.smallness_ok, c.envelope_ok, c.local_at_t_h, c.log_product,
                     c.duhamel_ok, c.passed, c.note])
        if not c.passed:
            withheld.append(h)
    out.csv("certificate.csv", rows)
    if withheld:
        raise PhysicsCheckError(f"certificate withheld at h={withheld}")


def _read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_report(cfg, out):
    root = out.root
    if not root.is_dir():
        raise ConfigurationError(f"output directory {root} does not exist; run other subcommands first")
    summary = {"out_dir": str(root)}

    def section(name, fn):
        path = root / name
        summary[name.split(".")[0]] = fn(path) if path.exists() else "missing"

    def spectrum(path):
        rows = _read_csv(path)
        return {"rows": len(rows), "all_in_bracket": all(r["bracket_ok"] == "true" for r in rows),
                "h": [float(r["h"]) for r in rows]}

    def load(path):
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def sweep_fit(path):
        d = load(path)
        return {k: d.get(k) for k in ("D", "R2", "C_envelope", "used_records", "floor_limited")}

    def agmon_fit(path):
        d = load(path)
        return {"epsilon_fit": d.get("epsilon"), "R2": d.get("R2"), "C_ratio": d.get("C_ratio")}

    def certificate(path):
        return [{"h": float(r["h"]), "branch": r["branch"], "passed": r["passed"] == "true",
                 "log_product": float(r["log_product"]), "D_half": float(r["D"]) / 2}
                for r in _read_csv(path)]

    def evolve_summary(path):
        r = _read_csv(path)[0]
        return {"h": float(r["h"]), "bound_ok": r["bound_ok"] == "true",
                "duhamel_ok": r["duhamel_ok"] == "true"}

    def geometry_(path):
        r = _read_csv(path)[0]
        return {"r_SAdS": float(r["r_SAdS"]), "x_plus": float(r["x_plus"])}

    section("geometry.csv", geometry_)
    section("spectrum.csv", spectrum)
    section("sweep_fit.json", sweep_fit)
    section("agmon_fit.json", agmon_fit)
    section("evolve_summary.csv", evolve_summary)
    section("certificate.csv", certificate)
    out.json("report.json", _clean(summary))


HELP = {
    "geometry": "horizon, cube-root terms, x_plus and a tortoise table",
    "potentials": "A, B and their derivatives on a grid",
    "spectrum": "lowest comparison-operator eigenvalue against its bracket",
    "quasimode": "cutoff quasimode at one h",
    "sweep": "residual sweep over h_list and the exponential fit",
    "agmon": "forbidden-region mass and weighted estimates over h_list",
    "evolve": "Cayley evolution of the quasimode and the Duhamel bound",
    "certify": "log lower-bound certificate at each certify_h",
    "report": "summary of the outputs already in out_dir",
}

HANDLERS = {
    "geometry": cmd_geometry,
    "potentials": cmd_potentials,
    "spectrum": cmd_spectrum,
    "quasimode": cmd_quasimode,
    "sweep": cmd_sweep,
    "agmon": cmd_agmon,
    "evolve": cmd_evolve,
    "certify": cmd_certify,
    "report": cmd_report,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="sads-dirac", allow_abbrev=False,
                     description="Quasimodes of the radial Dirac operator on Schwarzschild-AdS.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, allow_abbrev=False, help=HELP[name])
        sp.add_argument("--config", help="flat key = value file")
        for key in SCHEMA:
            names = [f"--{key}"]
            if "_" in key:
                names.append(f"--{key.replace('_', '-')}")
            sp.add_argument(*names, dest=key, default=None, metavar="VALUE")
    return parser


def run(argv=None, environ=None):
    """Parse ``argv``, run one subcommand and return ``(exit_code, payload)``."""
    try:
        args = build_parser().parse_args(argv)
        file_values = read_config_file(args.config) if args.config else {}
        flags = {k: getattr(args, k) for k in SCHEMA}
        cfg = build_config(file_values, flags, environ)
        out = Output(cfg.out_dir)
        HANDLERS[args.command](cfg, out)
        return EXIT_OK, {"status": "ok", "command": args.command, "files": out.written}
    except ConfigurationError as exc:
        return EXIT_CONFIG, _error("config", exc)
    except PhysicsCheckError as exc:
        return EXIT_PHYSICS, _error("physics", exc)
    except (NumericalError, ArpackNoConvergence, ArpackError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        return EXIT_NUMERICAL, _error("numerical", exc)
    except OSError as exc:
        return EXIT_IO, _error("io", exc)


def _error(kind, exc):
    msg = " ".join(str(exc).split())
    return {"status": "error", "kind": kind, "message": msg}


def main(argv=None):
    code, payload = run(argv)
    stream = sys.stdout if code == EXIT_OK else sys.stderr
    print(json.dumps(payload, sort_keys=True), file=stream)
    return code


if __name__ == "__main__":
    sys.exit(main())
