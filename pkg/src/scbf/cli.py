"""Command-line entry point.

Subcommands: `simulate` (one path -> snapshot + ledger CSV), `ensemble`
(moment/balance reports), `verify` (operator + noise property suites),
`converge` (dt- and n-refinement studies), `uniqueness` (common-random-
number twin tests).  Every subcommand exits 0 when all checks pass, 1 on
a property failure, and 2 on a usage error.  Reports are CSV/JSONL with
matplotlib figures rendered alongside; a manifest ties each run to its
config, seeds, certified noise constants, and output hashes.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import figures
from .config import ConfigError, RunConfig, parse_config, replace
from .integrator import simulate_path
from .persist import (noise_constants, write_jsonl, write_ledger_csv,
                      write_manifest, write_snapshot)

USAGE_ERROR = 2
PROPERTY_FAILURE = 1


def _common(sub):
    sub.add_argument("--config", type=Path, default=None,
                     help="path to a key = value configuration document")
    sub.add_argument("--out", type=Path, default=Path("."),
                     help="output directory (created if missing)")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the configured seed")
    sub.add_argument("--jobs", type=int, default=None,
                     help="worker processes for ensembles (env SCBF_JOBS)")
    sub.add_argument("--no-figures", action="store_true",
                     help="skip rendering PNG figures")


def _load_config(args, uniqueness=False):
    if args.config is not None:
        cfg = parse_config(args.config.read_text(), uniqueness=uniqueness)
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _jobs(args):
    if args.jobs is not None:
        return max(1, args.jobs)
    env = os.environ.get("SCBF_JOBS")
    return max(1, int(env)) if env else 1


def _finish(out, cfg, files, reports, ok):
    write_manifest(out / "manifest.json", cfg, noise_constants(cfg), files)
    for line in reports:
        print(line)
    return 0 if ok else PROPERTY_FAILURE


def cmd_simulate(args):
    cfg = _load_config(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    if not cfg.output_times:
        cfg = replace(cfg, output_times=tuple(np.linspace(0.0, cfg.T, 33)))
    tr = simulate_path(cfg)
    if tr.status != "completed":
        diag_path = out / "diagnostic.json"
        diag_path.write_text(json.dumps(
            {"status": tr.status, "trip_time": tr.trip_time,
             "guard_factor": cfg.guard_factor}, sort_keys=True, indent=2) + "\n")
        print(f"FAIL  guard tripped at t={tr.trip_time}; diagnostic in {diag_path}")
        return PROPERTY_FAILURE
    snap = out / "trajectory.scbf"
    write_snapshot(tr, snap, cfg)
    ledger = diag.energy_ledger(tr, cfg)
    csv_path = out / "ledger.csv"
    write_ledger_csv(ledger, csv_path)
    files = {"trajectory.scbf": snap, "ledger.csv": csv_path}
    if not args.no_figures:
        fig_path = out / "ledger.png"
        figures.ledger_figure(ledger, fig_path)
        files["ledger.png"] = fig_path
    res = float(np.max(np.abs(ledger.residual)))
    return _finish(out, cfg, files, [f"pass  simulate: {len(tr.times)} outputs, "
                                     f"max |ledger residual| = {res:.3e}"], True)


def cmd_ensemble(args):
    cfg = _load_config(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    jobs = _jobs(args)
    balance = diag.ensemble_energy_balance(cfg, cfg.ensemble, jobs=jobs)
    moments = diag.moment_bound_check(cfg, cfg.ensemble, jobs=jobs)
    reports = [balance.as_dict(), moments.as_dict()]
    jsonl = out / "reports.jsonl"
    write_jsonl(reports, jsonl)
    files = {"reports.jsonl": jsonl}
    if not args.no_figures:
        fig_path = out / "ensemble.png"
        figures.ensemble_figure(balance.values, balance, moments, fig_path)
        files["ensemble.png"] = fig_path
    ok = balance.passed and moments.passed
    return _finish(out, cfg, files, [balance.line(), moments.line()], ok)


def cmd_verify(args):
    cfg = _load_config(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed
    suite = [
        diag.trilinear_suite(2, 8, 400, seed=seed),
        diag.trilinear_suite(3, 4, 200, seed=seed),
        diag.stokes_identity_suite(2, 8, 400, seed=seed),
        diag.stokes_identity_suite(3, 4, 200, seed=seed),
    ]
    for r in (1.0, 2.0, 3.0, 5.0):
        suite.append(diag.absorption_identity_suite(r, 200, seed=seed))
        suite.append(diag.check_monotonicity(r, 2000, seed=seed))
    suite.append(diag.check_monotonicity(3.0, 500, d=3, n=3, seed=seed))
    suite.append(diag.convection_bound_suite(5.0, 200, seed=seed))
    for r in (2.0, 3.0, 5.0):
        suite.append(diag.absorption_lipschitz_suite(r, 1000, seed=seed))
    suite.append(diag.smoothing_suite(100, seed=seed))
    noise_cfg = cfg if cfg.sigma_kind != "off" and cfg.jump_intensity > 0 else replace(
        cfg, sigma_kind="additive", sigma_a0=0.5, jump_intensity=2.0,
        gamma_c0=0.5, gamma_c1=0.3)
    suite.append(diag.wiener_statistics_suite(noise_cfg, m=10000))
    suite.append(diag.poisson_count_suite(noise_cfg, m=10000))
    suite.append(diag.ito_isometry_suite(noise_cfg, m=10000))
    suite.append(diag.compensator_mc_suite(noise_cfg, m=10000))
    suite.append(diag.certification_suite(noise_cfg, n_pairs=1000))
    reports = [r.as_dict() for r in suite]
    jsonl = out / "verify.jsonl"
    write_jsonl(reports, jsonl)
    files = {"verify.jsonl": jsonl}
    if not args.no_figures:
        fig_path = out / "verify.png"
        figures.verify_figure(reports, fig_path)
        files["verify.png"] = fig_path
    ok = all(r.passed for r in suite)
    return _finish(out, cfg, files, [r.line() for r in suite], ok)


def cmd_converge(args):
    cfg = _load_config(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    det_cfg = replace(cfg, sigma_kind="off", jump_intensity=0.0,
                      output_times=(cfg.T,))
    dts = [cfg.T / 2 ** k for k in range(6, 11)]
    residuals, slope = diag.ledger_residual_orders(det_cfg, dts)
    study_cfg = replace(cfg, output_times=tuple(np.linspace(0.0, cfg.T, 9)))
    conv = diag.galerkin_convergence_study(study_cfg, args.cutoffs)
    dt_ok = slope >= 0.9
    reports = [{"name": "ledger-residual-order", "dts": list(dts),
                "residuals": [float(x) for x in residuals], "slope": slope,
                "passed": bool(dt_ok)},
               conv.as_dict()]
    jsonl = out / "converge.jsonl"
    write_jsonl(reports, jsonl)
    files = {"converge.jsonl": jsonl}
    if not args.no_figures:
        fig_path = out / "converge.png"
        figures.convergence_figure(dts, residuals, slope, conv.cutoffs,
                                   conv.sup_differences, conv.rate, fig_path)
        files["converge.png"] = fig_path
    lines = [f"{'pass' if dt_ok else 'FAIL'}  ledger residual order: slope={slope:.2f}",
             conv.line()]
    return _finish(out, cfg, files, lines, dt_ok and conv.passed)


def cmd_uniqueness(args):
    cfg = _load_config(args, uniqueness=True)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    zero = diag.gronwall_uniqueness_test(cfg, 0.0, max(2, args.seeds // 10))
    sep = diag.gronwall_uniqueness_test(cfg, args.delta, args.seeds)
    reports = [zero.as_dict(), sep.as_dict()]
    jsonl = out / "uniqueness.jsonl"
    write_jsonl(reports, jsonl)
    files = {"uniqueness.jsonl": jsonl}
    if not args.no_figures:
        fig_path = out / "uniqueness.png"
        figures.uniqueness_figure(sep.extra.get("per_seed_max", []), 1.0, fig_path)
        files["uniqueness.png"] = fig_path
    ok = zero.passed and sep.passed
    return _finish(out, cfg, files, [zero.line(), sep.line()], ok)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scbf",
        description="spectral simulator and verification harness for damped "
                    "stochastic Navier-Stokes flows with jump noise")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, fn, extra in (
            ("simulate", cmd_simulate, ()),
            ("ensemble", cmd_ensemble, ()),
            ("verify", cmd_verify, ()),
            ("converge", cmd_converge, ("cutoffs",)),
            ("uniqueness", cmd_uniqueness, ("delta", "seeds"))):
        sub = subs.add_parser(name)
        _common(sub)
        if "cutoffs" in extra:
            sub.add_argument("--cutoffs", type=lambda s: [int(x) for x in s.split(",")],
                             default=[4, 8, 16, 32],
                             help="comma-separated spectral cutoffs")
        if "delta" in extra:
            sub.add_argument("--delta", type=float, default=1e-6,
                             help="initial separation of the twin runs")
            sub.add_argument("--seeds", type=int, default=100,
                             help="number of independent twin pairs")
        sub.set_defaults(fn=fn)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
