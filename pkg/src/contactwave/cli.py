"""Command line entry point: profile, identities, simulate, fit, audit."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from contactwave import harness as hx
from contactwave.diagnostics import NONZERO, ZERO, heat_identity_errors
from contactwave.core import make_grid
from contactwave.errors import ConfigError, ContactWaveError, SolverFailure
from contactwave.profile import (monotone_violations, ode_residual, solve_profile,
                                 verify_gaussian_bounds)

log = logging.getLogger("contactwave")


def _config(args) -> hx.ExperimentConfig:
    vals: dict = {}
    cfg = hx.load_config(args.config) if args.config else hx.ExperimentConfig()
    if args.mode is not None:
        vals[("mode", "mode")] = args.mode
        if args.mode == "zero" and (not args.config or cfg.mode != ZERO):
            vals[("perturbation", "shape")] = "bump-derivative"
        elif args.mode == "nonzero" and (not args.config or cfg.mode != NONZERO):
            vals[("perturbation", "shape")] = "bump"
    if args.t_end is not None:
        vals[("time", "t_end")] = args.t_end
    if args.delta is not None:
        vals[("ends", "theta_plus")] = cfg.theta_minus + args.delta
    if args.eps is not None:
        vals[("perturbation", "eps")] = args.eps
    if args.grid_n is not None:
        vals[("grid", "N")] = args.grid_n
    if args.seed is not None:
        vals[("mode", "seed")] = args.seed
        vals[("perturbation", "center")] = "random"
    return hx.config_from_values(vals, cfg) if vals else cfg.validate()


def _out(args, cfg) -> Path | None:
    out = args.out or cfg.out_dir
    return Path(out) if out else None


def cmd_profile(args) -> int:
    cfg = _config(args)
    p = solve_profile(cfg.gas, cfg.ends)
    c1, c2, ok = verify_gaussian_bounds(p)
    res = float(np.max(np.abs(ode_residual(p)[4:-4]))) if p.delta > 0 else 0.0
    print(f"a = {p.a_coef:.12g}  newton residual = {p.newton_residual:.3e}  "
          f"ode residual = {res:.3e}")
    print(f"monotone violations = {monotone_violations(p)}  envelope c1 = {c1:.6g} c2 = {c2:.6g}")
    out = _out(args, cfg)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        p.dump(out / "profile.txt")
        print(f"wrote {out / 'profile.txt'}")
    return hx.EXIT_PASS if ok and monotone_violations(p) == 0 else hx.EXIT_FAIL


def cmd_identities(args) -> int:
    gas = _config(args).gas if args.config else None
    res = hx.run_identities(gas, seed=args.seed or 0)
    for name, r in res.items():
        print(f"{'PASS' if r['pass'] else 'FAIL'} {name}: {r['value']:.3e} (tol {r['tol']:g})")
    return hx.EXIT_PASS if all(r["pass"] for r in res.values()) else hx.EXIT_FAIL


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if cfg.run_identities:
        return cmd_identities(args)
    out = _out(args, cfg)
    res = hx.run_experiment(cfg, out)
    if res.verdict is not None:
        sys.stdout.write(res.verdict.report())
    else:
        print("t_end = 0: initial diagnostics only")
    if out is not None:
        print(f"artifacts in {out}")
    return res.exit_code


def _ledger_path(args) -> Path:
    if args.ledger:
        return Path(args.ledger)
    if args.out:
        return Path(args.out) / "ledger.tsv"
    raise ConfigError("need --ledger or --out pointing at a finished run")


def _infer_mode(rows, args) -> str:
    if args.mode is not None:
        return ZERO if args.mode == "zero" else NONZERO
    return ZERO if rows and "h_w" in rows[0] else NONZERO


def cmd_fit(args) -> int:
    path = _ledger_path(args)
    try:
        rows = hx.read_ledger(path)
    except OSError as exc:
        raise ConfigError(f"cannot read ledger {path}: {exc}") from exc
    verdict = hx.verify_theorem(rows, _infer_mode(rows, args))
    sys.stdout.write(verdict.report())
    return hx.EXIT_FAIL if verdict.status == "fail" else hx.EXIT_PASS


def cmd_audit(args) -> int:
    path = _ledger_path(args)
    try:
        rows = hx.read_ledger(path)
    except OSError as exc:
        raise ConfigError(f"cannot read ledger {path}: {exc}") from exc
    mode = _infer_mode(rows, args)
    drift = max(max(r["drift_v"], r["drift_u"], r["drift_E"]) for r in rows)
    print(f"conservation drift (max relative) = {drift:.3e}")
    ok = drift <= 1e-6
    if mode == ZERO:
        cfg = _config(args)
        p = solve_profile(cfg.gas, cfg.ends)
        _, c2, _ = verify_gaussian_bounds(p)
        alpha = c2 / 4.0 if cfg.alpha == "auto" else float(cfg.alpha)
        grid = make_grid(cfg.half_width(), cfg.N)
        for t in (0.0, 10.0, rows[-1]["t"]):
            e = heat_identity_errors(alpha, grid, t)
            print(f"heat identities t = {t:g}: g_t {e['g_t_residual']:.3e}, "
                  f"sup g {e['g_sup_error']:.3e}, f {e['f_sup_scaled']:.4f} <= {e['f_bound']:.4f}")
        sys.stdout.write(hx.audit_report(rows, alpha))
        aud = hx.poincare_audit(rows, alpha)
        ok = ok and aud.variation(500.0, 2000.0) < 0.2
    return hx.EXIT_PASS if ok else hx.EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contactwave",
                                 description="Viscous contact wave experiments for 1-D compressible "
                                             "Navier-Stokes in Lagrangian coordinates.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--mode", choices=("zero", "nonzero"))
    common.add_argument("--t-end", type=float, dest="t_end")
    common.add_argument("--delta", type=float, help="theta_+ - theta_-")
    common.add_argument("--eps", type=float, help="perturbation amplitude (all components)")
    common.add_argument("--grid-n", type=int, dest="grid_n")
    common.add_argument("--seed", type=int, help="seed for random perturbation placement")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("profile", parents=[common], help="solve and dump the self-similar profile")
    sub.add_parser("identities", parents=[common], help="algebraic identity suite")
    sub.add_parser("simulate", parents=[common], help="full run with diagnostics and verdict")
    for name, text in (("fit", "re-fit an existing ledger"),
                       ("audit", "Poincare, heat-kernel and conservation audits of a run")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--ledger", help="ledger.tsv path (default OUT/ledger.tsv)")
    return ap


COMMANDS = {"profile": cmd_profile, "identities": cmd_identities, "simulate": cmd_simulate,
            "fit": cmd_fit, "audit": cmd_audit}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return hx.EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return hx.EXIT_SOLVER
    except ContactWaveError as exc:
        print(f"{type(exc).__name__} during {args.command}: {exc}", file=sys.stderr)
        return hx.EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
