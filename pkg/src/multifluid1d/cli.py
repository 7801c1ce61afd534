"""Command-line entry points.

Commands: run, compare, audit-matrix, mms, collapse-test, ledger.  Exit
codes: 0 success, 1 ledger/check failure, 2 config or assumption error,
3 positivity loss, 4 blow-up, 5 iteration failure, 6 I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import core, estimates, reporting, scenario, verification
from .core import GeneralViscosityPair, Grid1D
from .errors import (AssumptionError, BlowUpError, ConfigError,
                     IterationError, PositivityError)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_POSITIVITY = 3
EXIT_BLOWUP = 4
EXIT_ITERATION = 5
EXIT_IO = 6


def _load_document(args) -> dict:
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    elif getattr(args, "preset", None):
        doc = {"preset": args.preset}
    else:
        raise ConfigError("provide --config PATH or --preset NAME")
    for key in ("backend", "cells", "modes"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    if getattr(args, "horizon", None) is not None:
        doc.setdefault("parameters", {})["horizon"] = args.horizon
    if getattr(args, "out", None) is not None:
        doc.setdefault("outputs", {})["directory"] = args.out
    if getattr(args, "plots", None) is not None:
        doc.setdefault("outputs", {})["plots"] = args.plots
    return doc


def _parse_with_preset_params(doc: dict) -> scenario.ScenarioConfig:
    cfg = scenario.parse_config(doc)
    return cfg


def _run_document(doc: dict, dt_override=None):
    cfg = scenario.parse_config(doc)
    return cfg, scenario.run_scenario(cfg, dt_override=dt_override)


def cmd_run(args) -> int:
    doc = _load_document(args)
    cfg, traj = _run_document(doc, dt_override=args.override_dt)
    out = cfg.out_dir
    reporting.write_trajectory(traj, out, cfg.parameters)
    report = estimates.build_ledger(traj, cfg.parameters)
    with open(os.path.join(out, "ledger.txt"), "w") as fh:
        fh.write(report.to_text())
    with open(os.path.join(out, "ledger.json"), "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if cfg.plots:
        reporting.render_plots(traj, out)
    sys.stdout.write(report.to_text())
    print(f"wrote {out}/")
    return EXIT_OK if report.all_passed else EXIT_CHECK_FAILED


def cmd_compare(args) -> int:
    doc = _load_document(args)
    backends = args.backends or ["eulerian", "lagrangian"]
    docs = []
    for b in backends:
        d = json.loads(json.dumps(doc))
        d["backend"] = b
        docs.append(d)
    for d in docs:  # validate before spawning workers
        scenario.parse_config(d)
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_document, docs))
    else:
        results = [_run_document(d) for d in docs]
    trajs = [traj for _, traj in results]
    report = scenario.compare_trajectories(trajs[0], trajs[1])
    payload = {"backends": backends, **report.to_dict()}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "comparison.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"compare {backends[0]} vs {backends[1]}: "
          f"max |d rho| = {report.max_linf('rho'):.6e}, "
          f"max |d v| = {report.max_linf('v'):.6e}")
    return EXIT_OK


def cmd_audit_matrix(args) -> int:
    if args.matrix:
        m = np.asarray(json.loads(args.matrix), dtype=float)
    else:
        doc = _load_document(args)
        cfg = scenario.parse_config(doc)
        m = cfg.parameters.viscosity
    lam = np.zeros_like(m)
    report = core.audit_viscosity(GeneralViscosityPair(
        lambda_matrix=lam, mu_matrix=m, flow_dim=1))
    for name in ("symmetric", "positive_definite", "second_law_ok",
                 "coercive", "diagonal", "triangular"):
        print(f"{name}: {getattr(report, name)}")
    for name, eig in sorted(report.min_eigenvalues.items()):
        print(f"min eigenvalue [{name}]: {eig:.6g}")
    if report.witness is not None:
        print(f"witness direction: {np.round(report.witness, 6).tolist()}")
    return EXIT_OK if report.all_ok else EXIT_CONFIG


def cmd_mms(args) -> int:
    doc = _load_document(args)
    cfg = scenario.parse_config(doc)
    params = replace(cfg.parameters, horizon=args.horizon or 0.02)
    sol = verification.build_manufactured(params)
    res = args.resolutions or ([8, 16, 32, 64] if cfg.backend == "galerkin"
                               else [128, 256, 512])
    report = verification.mms_convergence(sol, cfg.backend, res, params)
    print(f"backend {cfg.backend}, resolutions {report.resolutions}")
    for k, res_k in enumerate(report.resolutions):
        line = (f"  {res_k:5d}: velocity error {report.velocity_errors[k]:.6e}"
                f"  density error {report.density_errors[k]:.6e}")
        if k > 0:
            line += (f"  orders ({report.velocity_orders[k - 1]:.2f}, "
                     f"{report.density_orders[k - 1]:.2f})")
        print(line)
    print(f"flag: {report.flag}")
    return EXIT_OK if report.flag in ("ok", "exact") else EXIT_CHECK_FAILED


def cmd_collapse_test(args) -> int:
    doc = _load_document(args) if (args.config or args.preset) \
        else {"preset": "collapse"}
    doc.setdefault("preset", "collapse")
    if args.cells:
        doc["cells"] = args.cells
    cfg = scenario.parse_config(doc)
    params = cfg.parameters
    if args.horizon:
        params = replace(params, horizon=args.horizon)
    initial = scenario.initial_state(cfg)
    report = verification.symmetric_collapse_test(
        params, initial, cfg.solver_config())
    print(f"collapse discrepancy over {report.snapshots} snapshots: "
          f"rho {report.density_discrepancy:.3e}, "
          f"v {report.velocity_discrepancy:.3e}")
    return EXIT_OK


def cmd_ledger(args) -> int:
    traj = reporting.read_trajectory(args.trajectory)
    doc = traj.metadata.get("config") or {}
    if not doc:
        raise ConfigError("stored trajectory carries no config; "
                          "cannot rebuild parameters")
    cfg = scenario.parse_config(doc)
    report = estimates.build_ledger(traj, cfg.parameters)
    sys.stdout.write(report.to_text())
    return EXIT_OK if report.all_passed else EXIT_CHECK_FAILED


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mf1d",
        description="1D viscous compressible multi-fluid laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, preset_default=None):
        p.add_argument("--config", help="path to a scenario JSON document")
        p.add_argument("--preset", default=preset_default,
                       choices=sorted(scenario.PRESETS),
                       help="named preset instead of a config file")
        p.add_argument("--backend",
                       choices=("eulerian", "lagrangian", "galerkin"))
        p.add_argument("--cells", type=int)
        p.add_argument("--modes", type=int)
        p.add_argument("--horizon", type=float)
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("run", help="run a scenario and its estimate ledger")
    common(p)
    p.add_argument("--plots", type=_bool, help="emit SVG figures")
    p.add_argument("--override-dt", type=float, dest="override_dt",
                   help="force the time step (unsafe; instability demos)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run two backends and compare")
    common(p)
    p.add_argument("--backends", nargs=2,
                   metavar=("A", "B"),
                   help="the two backends to compare")
    p.add_argument("--jobs", type=int, default=1,
                   help="run backends concurrently")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("audit-matrix",
                       help="admissibility audit of a viscosity matrix")
    common(p)
    p.add_argument("--matrix", help="inline JSON matrix, e.g. [[2,1],[1,2]]")
    p.set_defaults(func=cmd_audit_matrix)

    p = sub.add_parser("mms", help="manufactured-solution refinement study")
    common(p, preset_default="smooth-mix")
    p.add_argument("--resolutions", type=int, nargs="+",
                   help="cell counts (or mode counts for galerkin)")
    p.set_defaults(func=cmd_mms)

    p = sub.add_parser("collapse-test",
                       help="identical constituents vs mono-fluid reduction")
    common(p)
    p.set_defaults(func=cmd_collapse_test)

    p = sub.add_parser("ledger",
                       help="re-run the estimate ledger on a stored run")
    p.add_argument("--trajectory", required=True,
                   help="run directory written by `mf1d run`")
    p.set_defaults(func=cmd_ledger)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, AssumptionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PositivityError as exc:
        print(f"positivity loss: {exc}", file=sys.stderr)
        return EXIT_POSITIVITY
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except IterationError as exc:
        print(f"iteration failure: {exc}", file=sys.stderr)
        return EXIT_ITERATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
