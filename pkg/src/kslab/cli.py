"""Command line driver: run, sweep, check, and report subcommands.

Exit codes: 0 success; 2 a run stopped on the concentration rule (artifacts
intact); 1 configuration or execution error.  Every artifact directory
holds a manifest (config hash, seed, version) sufficient to re-execute the
producing command bit-identically.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import checks, io
from .config import ConfigError, parse_run_config, parse_sweep_plan, emit_run_config
from .solver import (
    initial_condition_radial,
    initial_condition_rect,
    make_radial_grid,
    radial_run,
    run as rect_run,
)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kslab", description="Regularized aggregation dynamics laboratory")
    ap.add_argument("--out", default=None, help="output directory override")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    ap.add_argument("--seed", type=int, default=None, help="seed override")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one run from a config file")
    p_run.add_argument("config", help="run configuration path")

    p_sweep = sub.add_parser("sweep", help="execute an epsilon sweep plan")
    p_sweep.add_argument("plan", help="sweep plan path")

    p_check = sub.add_parser("check", help="run a verification suite")
    p_check.add_argument("suite", choices=["greens", "testfn", "sobolev", "weak-residual"])
    p_check.add_argument("--mesh", type=float, default=1.0 / 512.0, help="stencil mesh for greens/testfn")
    p_check.add_argument("--rho", type=float, default=0.02, help="bump radius for testfn")
    p_check.add_argument("--levels", default="64 128 256", help="refinement ladder for weak-residual")

    p_rep = sub.add_parser("report", help="summarize an artifact directory")
    p_rep.add_argument("directory")
    return ap


def cmd_run(args) -> int:
    try:
        cfg = parse_run_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        cfg.seed = args.seed
    out_dir = args.out or cfg.out_dir
    try:
        if cfg.domain == "disk":
            grid = make_radial_grid(cfg.solver.radial_n, cfg.solver.radial_ratio)
            u0 = initial_condition_radial(grid, cfg.initial_kind, **cfg.initial_params)
            traj = radial_run(cfg.solver, cfg.reg, u0)
        else:
            params = dict(cfg.initial_params)
            cx = params.pop("center_x", None)
            cy = params.pop("center_y", None)
            if cx is not None:
                params["center"] = (cx, cy if cy is not None else cx)
            u0 = initial_condition_rect(
                cfg.solver.nx, cfg.solver.ny, cfg.solver.lx, cfg.solver.ly, cfg.initial_kind, **params
            )
            traj = rect_run(cfg.solver, cfg.reg, u0)
    except Exception as exc:  # noqa: BLE001 - reported with exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if out_dir:
        text = emit_run_config(cfg)
        io.save_trajectory(
            traj, out_dir, {"config_hash": io.config_hash(text + f"|seed={cfg.seed}"), "seed": cfg.seed}
        )
        Path(out_dir, "config.ini").write_text(text)
    if traj.failed:
        print(f"error: {traj.failure_message}", file=sys.stderr)
        return 1
    if traj.stop_reason in ("umax_stop", "dt_min"):
        print(f"stopped on concentration rule at t={traj.times[-1]} ({traj.stop_reason})")
        return 2
    print(f"completed t={traj.times[-1]} with {len(traj.diag)} steps")
    return 0


def cmd_sweep(args) -> int:
    from .sweep import run_sweep

    try:
        plan = parse_sweep_plan(args.plan)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        plan.seed = args.seed
    out = args.out or plan.out_dir or "sweep_out"
    try:
        report = run_sweep(plan, out, threads=max(1, args.threads))
    except (ConfigError, Exception) as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 1
    n_fail = sum(1 for row in report.rows if row.status != "ok")
    print(f"sweep complete: {len(report.rows)} runs, {n_fail} failed; report in {out}")
    return 0


def cmd_check(args) -> int:
    if args.suite == "greens":
        rows, passed = checks.check_greens(mesh=args.mesh)
    elif args.suite == "testfn":
        rows, passed = checks.check_testfn(rhos=(args.rho,), mesh=args.mesh)
    elif args.suite == "sobolev":
        rows, passed = checks.check_sobolev()
    else:
        levels = tuple(int(tok) for tok in args.levels.split())
        rows, passed = checks.check_weak_residual(levels=levels)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    io.write_csv(out / f"check_{args.suite.replace('-', '_')}.csv", checks.CHECK_COLUMNS, rows)
    for row in rows:
        mark = "PASS" if row["passed"] else "FAIL"
        print(f"{mark:4s} {row['check']}: {row['value']} (gate {row['gate']})")
    return 0 if passed else 1


def cmd_report(args) -> int:
    root = Path(args.directory)
    if not root.exists():
        print(f"error: no such directory {root}", file=sys.stderr)
        return 1
    manifests = sorted(root.rglob("manifest.ini")) + sorted(root.rglob("sweep_manifest.ini"))
    if not manifests:
        print("error: no manifests found", file=sys.stderr)
        return 1
    for m in manifests:
        entries = io.read_manifest(m)
        print(f"== {m.parent}")
        for key in sorted(entries):
            print(f"  {key} = {entries[key]}")
        diag = m.parent / "diagnostics.csv"
        if diag.exists():
            lines = diag.read_text().strip().splitlines()
            if len(lines) > 1:
                cols = lines[0].split(",")
                last = lines[-1].split(",")
                mass_idx = cols.index("mass") if "mass" in cols else None
                if mass_idx is not None:
                    first = lines[1].split(",")
                    drift = abs(float(last[mass_idx]) - float(first[mass_idx]))
                    print(f"  steps = {len(lines) - 1}, final mass drift = {drift!r}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    np.seterr(over="raise", invalid="raise")
    handler = {"run": cmd_run, "sweep": cmd_sweep, "check": cmd_check, "report": cmd_report}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
