"""Batch front-end: every kernel and experiment behind one command.

Subcommands: torsion, region, scaling, sharpness, decompose, multilinear,
finitetype, measure-audit, bench.  Exit codes: 0 all verdicts pass (or
--report-only), 2 configuration or parse error, 3 numerical certification
failure.  Result files are deterministic for a fixed config and seed and
embed the config hash; timestamps go only to the sidecar log.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import decomposition as dc
from . import engine as eng
from . import lab
from . import measures as ms
from .curves import CurveSpec, model_curve, torsion

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERT = 3


class ConfigError(Exception):
    pass


class CertificationError(Exception):
    pass


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


class OutputDir:
    def __init__(self, path, force=False, config_hash=""):
        self.path = Path(path)
        self.force = force
        self.config_hash = config_hash
        self.path.mkdir(parents=True, exist_ok=True)

    def _target(self, name):
        target = self.path / name
        if target.exists() and not self.force:
            raise ConfigError(
                f"{target} exists; pass --force to overwrite")
        return target

    def write_csv(self, name, header, rows):
        target = self._target(name)
        lines = [f"# config_hash={self.config_hash}", ",".join(header)]
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        target.write_text("\n".join(lines) + "\n")
        return target

    def write_verdict(self, name, items):
        target = self._target(name)
        lines = [f"config_hash = {self.config_hash}"]
        for k, v in items:
            lines.append(f"{k} = {_fmt(v)}")
        target.write_text("\n".join(lines) + "\n")
        return target

    def write_text(self, name, text):
        target = self._target(name)
        target.write_text(text)
        return target

    def log(self, message):
        # the only place a timestamp is allowed
        with (self.path / "run.log").open("a") as fh:
            fh.write(f"{time.time():.3f} {message}\n")


def _hash_bytes(data):
    return hashlib.sha256(data).hexdigest()[:16]


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def load_config(path):
    raw = Path(path).read_bytes()
    parser = configparser.ConfigParser()
    try:
        parser.read_string(raw.decode())
    except (UnicodeDecodeError, configparser.Error) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return parser, _hash_bytes(raw)


def _get(cfg, section, key, cast=str, default=None):
    if not cfg.has_option(section, key):
        if default is not None:
            return default
        raise ConfigError(f"missing [{section}] {key}")
    raw = cfg.get(section, key)
    try:
        if cast is float and raw == "inf":
            return math.inf
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw}") from exc


def _floats(raw):
    return tuple(float(v) for v in raw.split())


def curve_from_config(cfg):
    kind = _get(cfg, "curve", "kind")
    if kind == "model":
        return model_curve(_get(cfg, "curve", "d", int))
    if kind == "poly":
        d = _get(cfg, "curve", "d", int)
        coeffs = tuple(_floats(_get(cfg, "curve", f"coeffs{i + 1}"))
                       for i in range(d))
        return CurveSpec(d=d, coeffs=coeffs,
                         label=_get(cfg, "curve", "label", str, "config"))
    raise ConfigError(f"unknown curve kind {kind!r}")


def measure_from_config(cfg):
    kind = _get(cfg, "measure", "kind")
    if kind == "lebesgue":
        d = _get(cfg, "measure", "d", int)
        half = _get(cfg, "measure", "half", float, 1.0)
        return ms.make_lebesgue(
            d, box=(-half, half),
            resolution=_get(cfg, "measure", "resolution", int, 64),
            grading_levels=_get(cfg, "measure", "grading_levels", int, 0))
    if kind == "appendix_a":
        return ms.make_appendix_a(
            _get(cfg, "measure", "d", int),
            _get(cfg, "measure", "alpha", float),
            _get(cfg, "measure", "j", int),
            extent=_get(cfg, "measure", "extent", float, 1.0),
            resolution=_get(cfg, "measure", "resolution", int, 256),
            grading_levels=_get(cfg, "measure", "grading_levels", int, 0))
    if kind == "cantor":
        return ms.make_cantor(
            _get(cfg, "measure", "d", int),
            _get(cfg, "measure", "ratio", float),
            _get(cfg, "measure", "depth", int))
    raise ConfigError(f"unknown measure kind {kind!r}")


def lambda_grid_from_config(cfg, section="experiment"):
    lo = _get(cfg, section, "lambda_min_exp", int)
    hi = _get(cfg, section, "lambda_max_exp", int)
    if hi < lo:
        raise ConfigError("lambda_max_exp < lambda_min_exp")
    return [2.0**k for k in range(lo, hi + 1)]


def require_seed(args, cfg=None, section="experiment"):
    if args.seed is not None:
        return args.seed
    if cfg is not None and cfg.has_option(section, "seed"):
        return _get(cfg, section, "seed", int)
    raise ConfigError("randomized experiment needs --seed (or a seed key)")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_torsion(args):
    try:
        curve = CurveSpec.from_text(Path(args.curve_file).read_text())
    except (OSError, ValueError, KeyError, IndexError) as exc:
        raise ConfigError(f"cannot read curve file: {exc}") from None
    if args.points < 2:
        raise ConfigError("need at least 2 grid points")
    out = OutputDir(args.out, force=args.force,
                    config_hash=_hash_bytes(Path(args.curve_file).read_bytes()))
    ts = np.linspace(args.t_min, args.t_max, args.points)
    vals = [float(torsion(curve, t)) for t in ts]
    out.write_csv("torsion_results.csv", ("t", "torsion"), zip(ts, vals))
    out.log(f"torsion over [{args.t_min}, {args.t_max}]")
    if args.require_nondegenerate and min(abs(v) for v in vals) < 1e-12:
        raise CertificationError("torsion vanishes on the requested grid")
    return []


def cmd_region(args):
    if args.steps <= 0:
        raise ConfigError("grid steps must be positive")
    payload = f"region d={args.d} alpha={args.alpha} steps={args.steps}"
    out = OutputDir(args.out, force=args.force,
                    config_hash=_hash_bytes(payload.encode()))
    rows = lab.admissible_region(args.d, args.alpha, steps=args.steps)
    out.write_csv("region_results.csv", ("inv_p", "inv_q", "status"), rows)
    out.log(payload)
    return []


def cmd_scaling(args):
    cfg, chash = load_config(args.config)
    seed = require_seed(args, cfg)
    curve = curve_from_config(cfg)
    p = _get(cfg, "experiment", "p", float)
    q = _get(cfg, "experiment", "q", float)
    alpha = _get(cfg, "experiment", "alpha", float)
    lams = lambda_grid_from_config(cfg)
    npw = _get(cfg, "experiment", "nodes_per_wavelength", float, 8.0)
    kind = _get(cfg, "measure", "kind")
    grid = mu = None
    if kind == "lebesgue" and _get(cfg, "measure", "grading_levels", int, 0):
        grid = lab.GradedGrid(
            curve.d, _get(cfg, "measure", "half", float, 1.0),
            _get(cfg, "measure", "resolution", int, 64),
            _get(cfg, "measure", "grading_levels", int))
    else:
        mu = measure_from_config(cfg)
    rep = lab.scaling_experiment(
        curve, p, q, alpha, lams, mu=mu, grid=grid,
        radius=_get(cfg, "experiment", "radius", float, lab.DEFAULT_RADIUS),
        seed=seed, npw=npw)
    out = OutputDir(args.out, force=args.force, config_hash=chash)
    out.write_csv("scaling_results.csv",
                  ("lambda", "family_sup_norm", "best_label"),
                  zip(rep.lam_grid, rep.sup_norms, rep.best_labels))
    verdict = [("kind", rep.kind), ("slope", rep.slope),
               ("stderr", rep.stderr), ("target_slope", rep.target_slope),
               ("tolerance", rep.tol), ("verdict", rep.verdict)]
    out.write_verdict("scaling_verdict.txt", verdict)
    out.log(f"scaling p={p} q={q} alpha={alpha}")
    return [] if rep.verdict in ("PASS", "vacuous") else ["scaling slope"]


def cmd_sharpness(args):
    cfg, chash = load_config(args.config)
    curve = curve_from_config(cfg)
    mu = measure_from_config(cfg)
    p = _get(cfg, "experiment", "p", float)
    q = _get(cfg, "experiment", "q", float)
    alpha = _get(cfg, "experiment", "alpha", float)
    lams = lambda_grid_from_config(cfg)
    rep = lab.sharpness_experiment(
        curve, mu, alpha, p, q, lams,
        config=lab.KnappConfig(c=_get(cfg, "experiment", "c", float, 0.1)))
    out = OutputDir(args.out, force=args.force, config_hash=chash)
    out.write_csv("sharpness_results.csv",
                  ("lambda", "rect_mass", "normalized_ratio"),
                  zip(rep.lam_grid, rep.rect_masses, rep.ratios))
    failures = []
    if not rep.mass_ok():
        failures.append("rectangle mass slope")
    if not rep.lower_bound_ok:
        failures.append("on-rectangle lower bound")
    out.write_verdict("sharpness_verdict.txt", [
        ("mass_slope", rep.mass_slope), ("mass_target", rep.mass_target),
        ("ratio_slope", rep.ratio_slope),
        ("min_peak_fraction", rep.min_peak_fraction),
        ("lower_bound_ok", rep.lower_bound_ok),
        ("verdict", "PASS" if not failures else "FAIL")])
    out.log(f"sharpness alpha={alpha} p={p} q={q}")
    return failures


def cmd_decompose(args):
    cfg, chash = load_config(args.config)
    seed = require_seed(args, cfg)
    curve = curve_from_config(cfg)
    d = curve.d
    lam = _get(cfg, "experiment", "lambda", float)
    n_targets = _get(cfg, "experiment", "targets", int, 16)
    radius = _get(cfg, "experiment", "radius", float, 8.0)
    scales = _get(cfg, "experiment", "scales", str, "")
    if scales:
        family = dc.DyadicFamily(tuple(Fraction(s) for s in scales.split()))
    else:
        family = dc.DyadicFamily.default(d)
    rng = np.random.default_rng(seed)
    f = eng.trig_poly(seed, _get(cfg, "experiment", "degree", int, 16))
    targets = rng.uniform(-radius, radius, size=(n_targets, d))
    certs = dc.decompose_batch(f, family, curve, lam, targets)
    failures = []
    rows = []
    for i, cert in enumerate(certs):
        ok, slack = dc.verify_certificate(cert, family, d)
        if not ok:
            failures.append(f"certificate {i}")
        rows.append((i, cert.lhs, cert.rhs, slack, ok))
    out = OutputDir(args.out, force=args.force, config_hash=chash)
    out.write_csv("decompose_results.csv",
                  ("target", "lhs", "rhs", "slack", "verified"), rows)
    out.write_text("decompose_certificates.txt",
                   "\n\n".join(c.to_text(family) for c in certs) + "\n")
    out.write_verdict("decompose_verdict.txt", [
        ("targets", len(certs)),
        ("verified", sum(1 for r in rows if r[4])),
        ("verdict", "PASS" if not failures else "FAIL")])
    out.log(f"decompose lam={lam} targets={n_targets}")
    return failures


def cmd_multilinear(args):
    cfg, chash = load_config(args.config)
    curve = curve_from_config(cfg)
    lams = lambda_grid_from_config(cfg)
    supports = _get(cfg, "experiment", "supports", str)
    pieces = supports.split()
    if len(pieces) != 2 * curve.d:
        raise ConfigError("supports must list lo hi per factor")
    fs = [eng.indicator(float(pieces[2 * i]), float(pieces[2 * i + 1]))
          for i in range(curve.d)]
    box_r = _get(cfg, "experiment", "box_r", float, 16.0)
    rows, failures = [], []
    for lam in lams:
        res = eng.multilinear_l2(curve, fs, lam, box_r=box_r)
        ok = res.lhs <= res.bound
        if not ok:
            failures.append(f"lambda={lam}")
        rows.append((lam, res.lhs, res.bound, res.ratio,
                     res.tail_fraction, ok))
    out = OutputDir(args.out, force=args.force, config_hash=chash)
    out.write_csv("multilinear_results.csv",
                  ("lambda", "lhs", "bound", "ratio", "tail_fraction",
                   "holds"), rows)
    out.write_verdict("multilinear_verdict.txt", [
        ("points", len(rows)),
        ("verdict", "PASS" if not failures else "FAIL")])
    out.log(f"multilinear d={curve.d}")
    return failures


def cmd_finitetype(args):
    cfg, chash = load_config(args.config)
    curve = curve_from_config(cfg)
    p = _get(cfg, "experiment", "p", float)
    q = _get(cfg, "experiment", "q", float)
    alpha = _get(cfg, "experiment", "alpha", float)
    lams = lambda_grid_from_config(cfg)
    grid = lab.GradedGrid(
        curve.d, _get(cfg, "measure", "half", float, 8.0),
        _get(cfg, "measure", "resolution", int, 128),
        _get(cfg, "measure", "grading_levels", int, 9))
    reports, slope, target, verdict = lab.finite_type_pipeline(
        curve, _get(cfg, "experiment", "tau", float, 0.0), grid, alpha, p,
        q, lams,
        n_blocks=_get(cfg, "experiment", "blocks", int, 7),
        fit_blocks=_get(cfg, "experiment", "fit_blocks", int, 5),
        npw=_get(cfg, "experiment", "nodes_per_wavelength", float, 6.0))
    rows = []
    for rep in reports:
        for j, norm in enumerate(rep.block_norms):
            rows.append((rep.lam, j, norm))
    top = reports[-1]
    failures = []
    if not top.rate_ok():
        failures.append("block decay rate")
    if verdict != "PASS":
        failures.append("aggregate slope")
    out = OutputDir(args.out, force=args.force, config_hash=chash)
    out.write_csv("finitetype_results.csv", ("lambda", "block", "norm"),
                  rows)
    out.write_verdict("finitetype_verdict.txt", [
        ("block_rate", top.rate), ("block_rate_target", top.target_rate),
        ("aggregate_slope", slope), ("aggregate_target", target),
        ("verdict", "PASS" if not failures else "FAIL")])
    out.log(f"finitetype p={p} q={q}")
    return failures


def cmd_measure_audit(args):
    cfg, chash = load_config(args.config)
    seed = require_seed(args, cfg)
    mu = measure_from_config(cfg)
    report = ms.regularity_audit(mu, seed=seed)
    out = OutputDir(args.out, force=args.force, config_hash=chash)
    out.write_verdict("measure_audit_verdict.txt", [
        ("alpha", mu.alpha), ("c_mu", mu.c_mu),
        ("c_estimate", report.c_est),
        ("exponent_fit", report.exponent_fit),
        ("worst_radius", report.worst_radius),
        ("verdict", "PASS" if report.passed else "FAIL")])
    out.log("measure audit")
    return [] if report.passed else ["regularity certificate"]


def cmd_bench(args):
    cfg, chash = load_config(args.config)
    seed = require_seed(args, cfg)
    curve = curve_from_config(cfg)
    lam = _get(cfg, "experiment", "lambda", float)
    n_targets = _get(cfg, "experiment", "targets", int, 10000)
    workers = tuple(int(w) for w in
                    _get(cfg, "experiment", "workers", str, "1 2 4").split())
    if args.workers is not None:
        workers = tuple(sorted(set(workers) | {args.workers}))
    report = eng.throughput_benchmark(curve, lam, n_targets, workers,
                                      seed=seed)
    out = OutputDir(args.out, force=args.force, config_hash=chash)
    # wall-clock numbers are not deterministic, so they live in the
    # sidecar log; the result files carry only reproducible fields
    base = report.seconds[min(report.seconds)]
    best = min(report.seconds.values())
    for w, s in sorted(report.seconds.items()):
        out.log(f"bench workers={w} seconds={s:.3f}")
    out.log(f"bench speedup={base / best if best > 0 else 1.0:.3f}")
    out.write_csv("bench_results.csv", ("workers",),
                  [(w,) for w in sorted(report.seconds)])
    out.write_verdict("bench_verdict.txt", [
        ("lambda", lam), ("targets", n_targets),
        ("nodes", report.n_nodes),
        ("checksum", report.checksum),
        ("verdict", "PASS")])
    out.log(f"bench lam={lam} targets={n_targets}")
    return []


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="curveext")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--out", default="out")
    common.add_argument("--force", action="store_true")
    common.add_argument("--report-only", action="store_true",
                        dest="report_only")
    sub = parser.add_subparsers(dest="command", required=True)

    p_tor = sub.add_parser("torsion", parents=[common])
    p_tor.add_argument("curve_file")
    p_tor.add_argument("--t-min", type=float, default=0.0)
    p_tor.add_argument("--t-max", type=float, default=1.0)
    p_tor.add_argument("--points", type=int, default=101)
    p_tor.add_argument("--require-nondegenerate", action="store_true")
    p_tor.set_defaults(func=cmd_torsion)

    p_reg = sub.add_parser("region", parents=[common])
    p_reg.add_argument("--d", type=int, required=True)
    p_reg.add_argument("--alpha", type=float, required=True)
    p_reg.add_argument("--steps", type=int, default=40)
    p_reg.set_defaults(func=cmd_region)

    for name, func in (
            ("scaling", cmd_scaling), ("sharpness", cmd_sharpness),
            ("decompose", cmd_decompose), ("multilinear", cmd_multilinear),
            ("finitetype", cmd_finitetype),
            ("measure-audit", cmd_measure_audit), ("bench", cmd_bench)):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("config")
        sp.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        failures = args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CertificationError as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_OK if args.report_only else EXIT_CERT
    if failures and not args.report_only:
        print("certification failure: " + "; ".join(failures),
              file=sys.stderr)
        return EXIT_CERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
