"""Command line entry point: ``kreinlab <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import KreinlabError, ScenarioError
from .grids import RadialGrid, SpectralGrid, read_profile_csv, write_measure_csv
from .krein import (DEFAULT_OSC_FACTOR, DEFAULT_ZERO_THRESHOLD, coefficient_from_profile,
                    integrate_krein, make_coefficient, normalization_constant,
                    residual_conjugation_identity, residual_integral_identity, save_solution,
                    spectral_density, stummel_norm, szego)
from .runner import RunReport, _jsonable, run
from .scenario import (ASYMPT_CHECKS, bundled_scenarios, experiment_defaults, load_scenario,
                       validate_experiments)

log = logging.getLogger("kreinlab")


def _floats(s: str):
    return tuple(float(v) for v in s.split(",") if v.strip())


def _param(s: str):
    key, sep, val = s.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {s!r}")
    return key.strip(), float(val)


def _add_output(p):
    p.add_argument("--json", action="store_true", help="print the machine-readable report")
    p.add_argument("--out", type=Path, default=None, help="directory for CSV/JSON artifacts")


def _add_scenario(p, default="gauss03"):
    p.add_argument("--scenario", default=default,
                   help=f"bundled name ({', '.join(bundled_scenarios())}) or path to a .scn file")
    p.add_argument("--no-cache", action="store_true", help="do not read or write cached solutions")
    _add_output(p)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kreinlab", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    kr = sub.add_parser("krein", help="solve the Krein system for one coefficient")
    kr.add_argument("action", choices=("solve", "sigma", "identities"))
    kr.add_argument("--coefficient", default="gaussian",
                    choices=("zero", "constant", "box", "gaussian", "bump"))
    kr.add_argument("--param", type=_param, action="append", default=[],
                    metavar="KEY=VALUE", help="coefficient parameter, repeatable")
    kr.add_argument("--coefficient-csv", type=Path, default=None,
                    help="sampled coefficient (r,value_re,value_im) instead of a bundled kind")
    kr.add_argument("--r-step", type=float, default=0.01)
    kr.add_argument("--r-max", type=float, default=10.0)
    kr.add_argument("--k-max", type=float, default=10.0)
    kr.add_argument("--k-step", type=float, default=0.05)
    kr.add_argument("--osc-factor", type=float, default=DEFAULT_OSC_FACTOR)
    kr.add_argument("--zero-threshold", type=float, default=DEFAULT_ZERO_THRESHOLD)
    kr.add_argument("--tol", type=float, default=1e-7, help="identity residual tolerance")
    _add_output(kr)

    tr = sub.add_parser("transform", help="Plancherel defects of the generalized transforms")
    _add_scenario(tr)
    tr.add_argument("--tol", type=float, default=None)

    mr = sub.add_parser("mr-check", help="maximal-function bounds on random data")
    _add_scenario(mr)
    mr.add_argument("--count", type=int, default=None)
    mr.add_argument("--ceiling", type=float, default=None)
    mr.add_argument("--seed", type=int, default=None)

    sc = sub.add_parser("scatter", help="wave-operator iterates and their limit")
    _add_scenario(sc)
    sc.add_argument("--times", type=_floats, default=None, help="comma-separated, increasing")
    sc.add_argument("--oracle", choices=("spectral", "fd", "both"), default=None)

    asp = sub.add_parser("asympt", help="Fresnel, stationary-phase and free-evolution checks")
    asp.add_argument("--check", action="append", choices=ASYMPT_CHECKS, default=None,
                     help="repeatable; default runs all")
    _add_output(asp)

    rn = sub.add_parser("run", help="run every experiment of a scenario")
    rn.add_argument("scenario", help="bundled name or path to a .scn file")
    rn.add_argument("--no-cache", action="store_true")
    _add_output(rn)
    return ap


def _print_report(report: RunReport, as_json: bool):
    if as_json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        return
    for r in report.records:
        status = "PASS" if r.passed else "FAIL"
        detail = r.error or _summary(r.observed)
        print(f"{report.scenario:10s} {r.name:14s} {status}  {detail}  ({r.runtime_s:.1f}s)")
    print(f"overall: {'PASS' if report.passed else 'FAIL'}")


def _summary(obs: dict) -> str:
    parts = []
    for k, v in obs.items():
        if isinstance(v, (bool, np.bool_)):
            parts.append(f"{k}={bool(v)}")
        elif isinstance(v, (float, np.floating)):
            parts.append(f"{k}={v:.3g}")
        elif isinstance(v, (int, np.integer)):
            parts.append(f"{k}={v}")
        if len(parts) == 5:
            break
    return " ".join(parts)


def _scenario_run(args, experiment: str, overrides: dict, seed: Optional[int] = None) -> int:
    scn = load_scenario(args.scenario)
    if seed is not None:
        scn.seed = seed
    params = dict(scn.experiments.get(experiment) or experiment_defaults(experiment))
    params.update({k: v for k, v in overrides.items() if v is not None})
    scn.experiments = {experiment: params}
    validate_experiments(scn.experiments, scn.grid)
    report = run(scn, args.out, None if getattr(args, "no_cache", False) else "env")
    _print_report(report, args.json)
    return 0 if report.passed else 1


def _cmd_krein(args) -> int:
    rg = RadialGrid.from_extent(args.r_step, args.r_max)
    kg = SpectralGrid(args.k_max, args.k_step)
    if args.coefficient_csv is not None:
        prof = read_profile_csv(args.coefficient_csv)
        A = coefficient_from_profile(prof, prof.declared_support).resampled(rg)
    else:
        A = make_coefficient(args.coefficient, dict(args.param), rg)
    sol = integrate_krein(A, rg, kg, args.osc_factor)
    out = {"coefficient": A.kind, "params": A.params, "digest": A.digest(),
           "r_grid": rg.to_dict(), "k_grid": kg.to_dict(), "substeps": sol.substeps,
           "closure_index": sol.closure_index}
    ok = True
    if args.action == "solve":
        if args.out is not None:
            out["saved_to"] = str(save_solution(sol, args.out))
    elif args.action == "sigma":
        Pi = szego(sol)
        m = spectral_density(Pi, args.zero_threshold)
        out.update({"min_abs_Pi": Pi.min_modulus,
                    "normalization_constant": normalization_constant(sol, m),
                    "stummel_norm": stummel_norm(A)})
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            out["saved_to"] = str(write_measure_csv(m, args.out / "sigma.csv"))
    else:
        rc, ri = residual_conjugation_identity(sol), residual_integral_identity(sol)
        ok = rc < args.tol and ri < args.tol
        out.update({"conjugation_residual": rc, "integral_residual": ri, "tol": args.tol,
                    "pass": ok})
    if args.json:
        print(json.dumps(_jsonable(out), indent=2, sort_keys=True))
    else:
        for k, v in out.items():
            print(f"{k}: {v}")
    return 0 if ok else 1


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "krein":
            return _cmd_krein(args)
        if args.command == "transform":
            return _scenario_run(args, "plancherel", {"tol": args.tol})
        if args.command == "mr-check":
            return _scenario_run(args, "mr-check", {"count": args.count, "ceiling": args.ceiling},
                                 args.seed)
        if args.command == "scatter":
            return _scenario_run(args, "scatter", {"times": args.times, "oracle": args.oracle})
        if args.command == "asympt":
            args.scenario, args.no_cache = "appendix", True
            checks = tuple(args.check) if args.check else None
            return _scenario_run(args, "asympt", {"checks": checks})
        scn = load_scenario(args.scenario)
        report = run(scn, args.out, None if args.no_cache else "env")
        _print_report(report, args.json)
        return 0 if report.passed else 1
    except ScenarioError as exc:
        for e in exc.errors:
            print(f"scenario error: {e}", file=sys.stderr)
        return 2
    except KreinlabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
