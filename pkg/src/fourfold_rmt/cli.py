"""Command-line entry point: ``fourfold-rmt <subcommand> ...``.

Every subcommand prints a single JSON summary line (with ``"schema": 1``) to
stdout. Exit codes: 0 ok, 1 tolerance breach, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from fourfold_rmt import constants
from fourfold_rmt.control_params import GammaEvaluator, r_matrix, spectral_domain
from fourfold_rmt.ensembles import (
    DIST_KINDS,
    EntryDistribution,
    band,
    fourier_goe_check,
    load_profile,
    sample_fourfold,
    validate_fourfold,
    wigner,
)
from fourfold_rmt.harness import (
    ExperimentConfig,
    domination_fit,
    domination_samples,
    fluctuation_averaging_experiment,
    read_records,
    resume_local_law,
    run_local_law,
    summarize,
    write_records,
    write_summary_csv,
)
from fourfold_rmt.linalg_core import write_matrix_csv
from fourfold_rmt.resolvent import check_resolvent_identities, check_ward, green_minor, random_tuples
from fourfold_rmt.selfconsistent import all_breakdowns
from fourfold_rmt.semicircle import density_mass, fixed_point_residual, m_semicircle, rho

SCHEMA = 1
OK, BREACH, INPUT_ERROR = 0, 1, 2
STATUS = {OK: "ok", BREACH: "tolerance-breach", INPUT_ERROR: "input-error"}


class InputError(ValueError):
    pass


@dataclass
class CommandOutcome:
    subcommand: str
    status: str
    artifacts: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return {v: k for k, v in STATUS.items()}[self.status]


# ---------------------------------------------------------------- parsing helpers

_COMPLEX = re.compile(r"^\s*([+-]?[0-9.]+(?:[eE][+-]?\d+)?)?\s*(?:([+-])\s*([0-9.]+(?:[eE][+-]?\d+)?)?\s*[ij])?\s*$")


def parse_complex(text: str) -> complex:
    """Parse ``a+bi``, ``a-bi``, ``bi``, ``a`` (``j`` accepted for ``i``)."""
    t = text.strip().replace(" ", "")
    if re.fullmatch(r"[+-]?([0-9.]+(?:[eE][+-]?\d+)?)?[ij]", t):
        coef = t[:-1]
        coef = coef + "1" if coef in ("", "+", "-") else coef
        return complex(0.0, float(coef))
    m = _COMPLEX.match(t)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise argparse.ArgumentTypeError(f"cannot parse complex value {text!r} (expected a+bi)")
    re_part = float(m.group(1)) if m.group(1) else 0.0
    im_part = 0.0
    if m.group(2):
        mag = float(m.group(3)) if m.group(3) else 1.0
        im_part = mag if m.group(2) == "+" else -mag
    return complex(re_part, im_part)


def parse_grid(text: str) -> np.ndarray:
    """Parse ``start:stop:count[:log]`` into a linear or geometric grid."""
    parts = text.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
        raise argparse.ArgumentTypeError(f"grid {text!r} must be start:stop:count[:log]")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}") from None
    if count < 1:
        raise argparse.ArgumentTypeError("grid count must be >= 1")
    if len(parts) == 4:
        if start <= 0 or stop <= 0:
            raise argparse.ArgumentTypeError("log grid needs positive endpoints")
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def _cplx_json(z: complex) -> list[float]:
    return [z.real, z.imag]


def _profile(args):
    if getattr(args, "profile_file", None):
        return load_profile(args.profile_file).validate()
    if args.profile == "wigner":
        return wigner(args.n)
    if args.W is None:
        raise InputError("--profile band needs --W")
    return band(args.n, args.W)


def _seed(args, env: Mapping) -> int:
    if env.get(constants.SEED_ENV_VAR):
        return int(env[constants.SEED_ENV_VAR])
    return args.seed


# ---------------------------------------------------------------- subcommands


def cmd_sample(args, env) -> CommandOutcome:
    prof = _profile(args)
    seed = _seed(args, env)
    smp = sample_fourfold(prof, EntryDistribution(args.dist), seed)
    viol = validate_fourfold(smp.h)
    arts = []
    if args.dump_matrix:
        write_matrix_csv(args.dump_matrix, smp.h)
        arts.append(args.dump_matrix)
    lam = np.linalg.eigvalsh(smp.h)
    summary = {
        "n": prof.n,
        "M": prof.M,
        "seed": seed,
        "dist": args.dist,
        "fourfold_violations": len(viol),
        "spectrum_min": float(lam[0]),
        "spectrum_max": float(lam[-1]),
    }
    return CommandOutcome("sample", STATUS[BREACH if viol else OK], arts, summary)


def cmd_semicircle(args, env) -> CommandOutcome:
    E = args.E_grid
    etas = args.eta_grid
    zs = (E[:, None] + 1j * etas[None, :]).ravel()
    res = fixed_point_residual(zs)
    mass = density_mass()
    worst = float(np.max(res))
    summary = {
        "points": int(zs.size),
        "max_fixed_point_residual": worst,
        "density_mass": mass,
        "m_i": _cplx_json(m_semicircle(1j)),
        "m_2i": _cplx_json(m_semicircle(2j)),
    }
    if args.z is not None:
        summary["m_z"] = _cplx_json(m_semicircle(args.z))
    arts = []
    if args.csv:
        import csv

        m = m_semicircle(zs)
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["E", "eta", "re_m", "im_m", "rho"])
            for zz, mm in zip(zs, m):
                w.writerow([f"{v:.17g}" for v in (zz.real, zz.imag, mm.real, mm.imag, rho(zz.real))])
        arts.append(args.csv)
    ok = worst < constants.FIXED_POINT_TOL and abs(mass - 1) < 1e-8
    return CommandOutcome("semicircle", STATUS[OK if ok else BREACH], arts, summary)


def cmd_resolvent_check(args, env) -> CommandOutcome:
    prof = _profile(args)
    seed = _seed(args, env)
    smp = sample_fourfold(prof, EntryDistribution(args.dist), seed)
    if args.z.imag <= 0:
        raise InputError("z must have positive imaginary part")
    tuples = random_tuples(prof.n, args.tuples, seed, max_T=args.max_T)
    rep = check_resolvent_identities(smp.h, args.z, tuples)
    try:
        ward = check_ward(green_minor(smp.h, (), args.z))
        ward_ok = True
    except AssertionError:
        ward, ward_ok = math.nan, False
    summary = {"n": prof.n, "seed": seed, "z": _cplx_json(args.z), **rep.to_json(), "ward": ward}
    ok = rep.passed and ward_ok
    return CommandOutcome("resolvent-check", STATUS[OK if ok else BREACH], [], summary)


def cmd_identity_check(args, env) -> CommandOutcome:
    prof = _profile(args)
    seed = _seed(args, env)
    dist = EntryDistribution(args.dist)
    smp = sample_fourfold(prof, dist, seed)
    if args.z.imag <= 0:
        raise InputError("z must have positive imaginary part")
    diag, off = all_breakdowns(smp, z=args.z)
    d = max(abs(b.residual) for b in diag)
    o = max((abs(b.residual) for b in off), default=0.0)
    tol = constants.identity_tolerance(args.z.imag)
    summary = {
        "n": prof.n,
        "seed": seed,
        "z": _cplx_json(args.z),
        "diag_max_residual": float(d),
        "offdiag_max_residual": float(o),
        "max_residual": float(max(d, o)),
        "tolerance": tol,
    }
    return CommandOutcome("identity-check", STATUS[OK if max(d, o) < tol else BREACH], [], summary)


def cmd_gamma(args, env) -> CommandOutcome:
    prof = _profile(args)
    R = r_matrix(prof, args.dist)
    fn = GammaEvaluator(prof, R)
    zs = args.z if args.z else [2j]
    rows = []
    ok = True
    for z in zs:
        if z.imag <= 0:
            raise InputError("z must have positive imaginary part")
        gv = fn(z)
        lower = 1.0 / abs(1 - m_semicircle(z) ** 2)
        ok &= gv.gamma_s >= lower * (1 - 1e-12)
        rows.append({"z": _cplx_json(z), "gamma_s": gv.gamma_s, "gamma_r": gv.gamma_r, "gamma": gv.gamma, "lower_bound": lower})
    summary = {"n": prof.n, "dist": args.dist, "points": rows}
    return CommandOutcome("gamma", STATUS[OK if ok else BREACH], [], summary)


def cmd_eta_domain(args, env) -> CommandOutcome:
    prof = _profile(args)
    if not 0 < args.gamma < 0.5:
        raise InputError("--gamma must lie in (0, 1/2)")
    dom = spectral_domain(args.gamma, prof, args.dist, E_grid=args.E_grid)
    summary = {
        "n": prof.n,
        "gamma": args.gamma,
        "E": [float(e) for e in dom.E_grid],
        "eta_E": [float(e) for e in dom.eta_E],
        "degenerate": [bool(d) for d in dom.degenerate],
        "points": len(dom.points),
        "metadata": dom.metadata,
    }
    arts = []
    if args.out:
        with open(args.out, "w") as fh:
            for E, eta in dom.points:
                fh.write(json.dumps({"E": E, "eta": eta}) + "\n")
        arts.append(args.out)
    return CommandOutcome("eta-domain", STATUS[OK], arts, summary)


def _load_config(args, env) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.load(args.config, env)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise InputError(f"bad config {args.config}: {exc}") from None
    if args.threads:
        cfg.threads = args.threads
    return cfg


def cmd_locallaw(args, env) -> CommandOutcome:
    cfg = _load_config(args, env)
    for n in cfg.ladder:
        cfg.ensemble.build_profile(n).validate()
    arts = [args.out]
    if args.resume:
        resume_local_law(cfg, args.out, threads=cfg.threads)
    else:
        write_records(args.out, run_local_law(cfg, threads=cfg.threads), append=False)
    recs = read_records(args.out)
    rows = summarize(recs)
    if args.csv:
        write_summary_csv(args.csv, rows)
        arts.append(args.csv)
    breach = [r for r in recs if not r.outside and r.lambda_ > args.phi_factor * r.phi]
    summary = {"records": len(recs), "cells": len(rows), "lambda_over_phi_breaches": len(breach), "phi_factor": args.phi_factor}
    return CommandOutcome("locallaw", STATUS[BREACH if breach else OK], arts, summary)


def cmd_fluctavg(args, env) -> CommandOutcome:
    cfg = _load_config(args, env)
    if args.resamples:
        cfg.resamples = args.resamples
    try:
        out = fluctuation_averaging_experiment(cfg, weights=args.weights, direct=not args.no_direct)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    arts = []
    if args.out:
        with open(args.out, "w") as fh:
            for cell in out["cells"]:
                fh.write(json.dumps(cell, sort_keys=True) + "\n")
        arts.append(args.out)
    gains = {
        f"{c['N']}:{c['E']}:{c['eta']}": {k: c[k] for k in c if k.startswith("gain_")} for c in out["cells"]
    }
    ok = all(g <= args.max_gain for cell in gains.values() for k, g in cell.items() if "F_" in k)
    summary = {"cells": len(out["cells"]), "gains": gains, "max_gain": args.max_gain}
    return CommandOutcome("fluctavg", STATUS[OK if ok else BREACH], arts, summary)


def cmd_domfit(args, env) -> CommandOutcome:
    recs = []
    for p in args.records:
        if not os.path.exists(p):
            raise InputError(f"no such records file {p}")
        recs.extend(read_records(p))
    try:
        fit = domination_fit(domination_samples(recs, args.x, args.y), q=args.q, eps_set=args.eps)
    except (ValueError, AttributeError) as exc:
        raise InputError(str(exc)) from None
    ok = all(fit.verdicts.values())
    return CommandOutcome("domfit", STATUS[OK if ok else BREACH], [], fit.to_json())


def cmd_fourier_goe_check(args, env) -> CommandOutcome:
    rep = fourier_goe_check(args.n, args.samples, _seed(args, env))
    return CommandOutcome("fourier-goe-check", STATUS[OK if rep.passed else BREACH], [], rep.to_json())


# ---------------------------------------------------------------- parser


def _add_matrix_args(p, seed: bool = True):
    p.add_argument("--n", type=int, required=True, help="matrix dimension N")
    p.add_argument("--profile", choices=("wigner", "band"), default="wigner", help="variance profile (default wigner)")
    p.add_argument("--W", type=int, default=None, help="band half-width for --profile band")
    p.add_argument("--profile-file", default=None, help="JSON variance profile (overrides --profile)")
    p.add_argument("--dist", choices=DIST_KINDS, default="real-gaussian", help="entry law (default real-gaussian)")
    if seed:
        p.add_argument("--seed", type=int, default=0, help=f"base seed (default 0; {constants.SEED_ENV_VAR} overrides)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fourfold-rmt", description="Fourfold-symmetric random matrices and local-law experiments.")
    sub = ap.add_subparsers(dest="command", metavar="subcommand")

    p = sub.add_parser("sample", help="draw a fourfold-symmetric matrix")
    _add_matrix_args(p)
    p.add_argument("--dump-matrix", default=None, help="write the matrix as CSV (re,im pairs, 17 digits)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("semicircle", help="check the semicircle transform on a grid")
    p.add_argument("--E-grid", type=parse_grid, default=parse_grid("-10:10:100"), help="E grid start:stop:count[:log] (default -10:10:100)")
    p.add_argument("--eta-grid", type=parse_grid, default=parse_grid("1e-4:10:100:log"), help="eta grid (default 1e-4:10:100:log)")
    p.add_argument("--z", type=parse_complex, default=None, help="also report m(z) at this point (a+bi)")
    p.add_argument("--csv", default=None, help="write E, eta, Re m, Im m, rho over the grid (17 digits)")
    p.set_defaults(func=cmd_semicircle)

    p = sub.add_parser("resolvent-check", help="Schur, expansion and Ward identities on a sample")
    _add_matrix_args(p)
    p.add_argument("--z", type=parse_complex, default=parse_complex("1+0.5i"), help="spectral parameter a+bi (default 1+0.5i)")
    p.add_argument("--tuples", type=int, default=50, help="random (i,j,k,T) tuples (default 50)")
    p.add_argument("--max-T", type=int, default=2, help="largest minor size (default 2)")
    p.set_defaults(func=cmd_resolvent_check)

    p = sub.add_parser("identity-check", help="residuals of both self-consistent equations")
    _add_matrix_args(p)
    p.add_argument("--z", type=parse_complex, default=parse_complex("1+0.5i"), help="spectral parameter a+bi (default 1+0.5i)")
    p.set_defaults(func=cmd_identity_check)

    p = sub.add_parser("gamma", help="Gamma_S and Gamma_R at spectral points")
    _add_matrix_args(p, seed=False)
    p.add_argument("--z", type=parse_complex, action="append", default=None, help="spectral point a+bi (repeatable; default 2i)")
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("eta-domain", help="floor eta_E of the spectral domain on an E grid")
    _add_matrix_args(p, seed=False)
    p.add_argument("--gamma", type=float, default=0.1, help="domain exponent in (0, 1/2) (default 0.1)")
    p.add_argument("--E-grid", type=parse_grid, default=parse_grid("-10:10:41"), help="E grid (default -10:10:41)")
    p.add_argument("--out", default=None, help="write admitted grid points as JSON lines")
    p.set_defaults(func=cmd_eta_domain)

    p = sub.add_parser("locallaw", help="run the local-law experiment from a JSON config")
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", required=True, help="JSON-lines record file")
    p.add_argument("--csv", default=None, help="per-(N, z) CSV summary")
    p.add_argument("--threads", type=int, default=0, help="worker threads (default: config value)")
    p.add_argument("--resume", action="store_true", help="append only cells missing from --out")
    p.add_argument("--phi-factor", type=float, default=10.0, help="breach if Lambda > factor * Phi (default 10)")
    p.set_defaults(func=cmd_locallaw)

    p = sub.add_parser("fluctavg", help="fluctuation-averaging statistics from a JSON config")
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--weights", choices=("uniform", "s", "r"), default="uniform", help="weights t_ik (default uniform 1/N)")
    p.add_argument("--resamples", type=int, default=0, help="conditional resamples (default: config value)")
    p.add_argument("--no-direct", action="store_true", help="skip the direct-average tests (allows non-commuting weights)")
    p.add_argument("--max-gain", type=float, default=1 / 3, help="breach if an averaged/max ratio exceeds this (default 1/3)")
    p.add_argument("--threads", type=int, default=0, help="accepted for symmetry with locallaw; trials run serially (default 0)")
    p.add_argument("--out", default=None, help="JSON-lines output, one line per cell")
    p.set_defaults(func=cmd_fluctavg)

    p = sub.add_parser("domfit", help="domination fit on stored local-law records")
    p.add_argument("--records", nargs="+", required=True, help="record files (JSON lines)")
    p.add_argument("--x", default="mn_err", help="record field for X (default mn_err)")
    p.add_argument("--y", default="inv_M_eta", help="record field for Y (default inv_M_eta)")
    p.add_argument("--q", type=float, default=0.9, help="quantile level in (0.5, 1) (default 0.9)")
    p.add_argument("--eps", type=float, nargs="+", default=[0.2], help="tested epsilons (default 0.2)")
    p.set_defaults(func=cmd_domfit)

    p = sub.add_parser("fourier-goe-check", help="second-moment structure of the Fourier-transformed GOE")
    p.add_argument("--n", type=int, default=16, help="dimension (default 16)")
    p.add_argument("--samples", type=int, default=10_000, help="Monte Carlo samples (default 10000)")
    p.add_argument("--seed", type=int, default=0, help=f"seed (default 0; {constants.SEED_ENV_VAR} overrides)")
    p.set_defaults(func=cmd_fourier_goe_check)
    return ap


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def dispatch(argv: Sequence[str], env: Mapping | None = None, out=None) -> CommandOutcome:
    """Parse ``argv``, run the subcommand and print its JSON summary line."""
    env = os.environ if env is None else env
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else INPUT_ERROR
        if code == 0:
            return CommandOutcome("help", STATUS[OK])
        outcome = CommandOutcome("?", STATUS[INPUT_ERROR], summary={"error": "invalid arguments (see usage)"})
        out.write(json.dumps({"schema": SCHEMA, "subcommand": "?", "status": outcome.status, "artifacts": [], **outcome.summary}, sort_keys=True) + "\n")
        return outcome
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        outcome = CommandOutcome("?", STATUS[INPUT_ERROR], summary={"error": "missing subcommand"})
    else:
        func: Callable = args.func
        try:
            outcome = func(args, env)
        except (InputError, ValueError, OSError) as exc:
            outcome = CommandOutcome(args.command, STATUS[INPUT_ERROR], summary={"error": str(exc)})
    line = {"schema": SCHEMA, "subcommand": outcome.subcommand, "status": outcome.status, "artifacts": outcome.artifacts, **outcome.summary}
    out.write(json.dumps(line, default=_jsonable, sort_keys=True) + "\n")
    return outcome


def main(argv: Sequence[str] | None = None) -> int:
    outcome = dispatch(sys.argv[1:] if argv is None else argv)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
