"""``hsfem`` command line.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 invariant violation (only with ``--strict``).
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import assembly
from ..config import SweepSpec, parse_config
from ..errors import ConfigError, HSFEMError, NonConvergenceError, SimulationAborted, UnsupportedMeshError
from ..fespace import lumped_mass
from ..mesh import build_rect_mesh, classify_angles
from ..stepper import initial_field, run
from . import harness
from .io import write_field, write_meta, write_series

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4

log = logging.getLogger("hsfem")


def _violations(summary) -> list:
    out = []
    if not summary.dmp_ok:
        out.append(f"discrete maximum principle violated at {summary.dmp_steps_violated} step(s) "
                   f"(below {summary.dmp_worst_below:.3e}, above {summary.dmp_worst_above:.3e})")
    if summary.energy_flags:
        out.append(f"energy inequality flagged at {summary.energy_flags} step(s)")
    if summary.h4_holds and not summary.monotone_ok:
        out.append(f"monotonicity violated (min dt n = {summary.min_dtn:.3e}) although the initial residual is nonnegative")
    return out


def _print_summary(s, stream=None):
    stream = stream or sys.stdout
    print(f"h4_min = {s.h4_min:.6g} ({'holds' if s.h4_holds else 'fails'})", file=stream)
    print(f"dmp_ok = {s.dmp_ok}", file=stream)
    print(f"min_dtn = {s.min_dtn:.6g}", file=stream)
    print(f"max_rel_mass_balance = {s.max_rel_mass_balance:.3e}", file=stream)
    print(f"energy_flags = {s.energy_flags}", file=stream)
    print(f"max_pressure = {s.max_pressure:.6g}", file=stream)
    print(f"solver_max_iterations = {s.solver_max_iterations}", file=stream)


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    out = Path(args.out or cfg.out_dir)
    fmt = cfg.field_format

    mesh = build_rect_mesh(cfg.x0, cfg.x1, cfg.y0, cfg.y1, cfg.nx, cfg.ny)

    def on_output(state):
        write_field(state, mesh, out / f"field_{state.step:08d}.{fmt}", fmt, cfg.params.k)

    records = []
    try:
        res = run(cfg, on_output=on_output, on_record=records.append)
    except SimulationAborted as exc:
        write_series(records, out / "series.csv")
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    write_series(res.records, out / "series.csv")
    write_meta(cfg, out / "meta.txt", clamped_nodes=res.clamped)
    _print_summary(res.summary)
    bad = _violations(res.summary)
    for msg in bad:
        print(f"warning: {msg}", file=sys.stderr)
    return EXIT_INVARIANT if (bad and args.strict) else EXIT_OK


def _parse_values(text):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"values: {exc}") from exc
    if not vals:
        raise ConfigError("values: empty value list")
    return vals


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    values = _parse_values(args.values)
    if args.param == "k":
        values = tuple(int(v) if float(v).is_integer() else v for v in values)
    spec = SweepSpec(args.param, values, cfg)
    out = Path(args.out or cfg.out_dir)
    try:
        if args.param == "k":
            rows = harness.k_sweep(spec, out, t_star=args.t_star)
            for r in rows:
                print(", ".join(f"{c}={r[c]:.6g}" for c in harness.K_SWEEP_COLUMNS))
        else:
            fronts = harness.param_study(spec, out)
            for value, per in fronts.items():
                print(f"{args.param}={value:g}: " + ", ".join(f"t={t:g} front={f:g}" for t, f in per.items()))
    except SimulationAborted as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_check_mesh(args) -> int:
    cfg = parse_config(args.config)
    mesh = build_rect_mesh(cfg.x0, cfg.x1, cfg.y0, cfg.y1, cfg.nx, cfg.ny)
    angles = classify_angles(mesh)
    print(f"nodes = {mesh.n_nodes}, elements = {mesh.n_elements}, h = {mesh.h:.6g}")
    print(f"all_right_angled = {angles.all_right_angled}")
    print(f"all_nonobtuse = {angles.all_nonobtuse}")
    print(f"max_angle_deg = {np.degrees(angles.max_angle):.12g}")
    n0 = np.clip(initial_field(cfg, mesh), 0.0, cfg.params.n_max)
    K = assembly.stiffness(mesh)
    ops = {"stiffness": K}
    try:
        ops["diffusion_fem"] = assembly.diffusion_fem(mesh, n0, cfg.params.k)
    except UnsupportedMeshError as exc:
        print(f"diffusion_fem: {exc}")
    try:
        ops["diffusion_fem2"] = assembly.diffusion_fem2(mesh, n0, cfg.params.k, cfg.quadrature)
    except UnsupportedMeshError as exc:
        print(f"diffusion_fem2: {exc}")
    A = ops.get("diffusion_fem2" if cfg.scheme == "fem2" else "diffusion_fem")
    if A is not None:
        ops["system"] = assembly.system_matrix(lumped_mass(mesh), cfg.params.tau, A, cfg.params.nu, K)
    ok = True
    for name, op in ops.items():
        rep = assembly.offdiag_sign_check(op)
        ok &= rep.ok
        print(f"{name}: max_offdiag = {rep.max_offdiag:.3e}, violations = {len(rep.violations)}")
    if "system" in ops:
        print(f"system: diagonal_dominance_margin = {assembly.diagonal_dominance_margin(ops['system']):.6g}")
    ok &= A is not None
    return EXIT_INVARIANT if (args.strict and not ok) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hsfem", description="Finite element solver for a tumour growth model with stiff pressure law.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one simulation")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--strict", action="store_true", help="exit 4 on an invariant violation")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="parameter study or k sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--param", required=True, choices=("alpha", "nu", "k", "P_max"))
    s.add_argument("--values", required=True, help="comma separated list")
    s.add_argument("--out")
    s.add_argument("--t-star", type=float, default=harness.DEFAULT_T_STAR, help="evaluation time of a k sweep")
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("check-mesh", help="angle classification and sign certificates")
    c.add_argument("--config", required=True)
    c.add_argument("--strict", action="store_true")
    c.set_defaults(func=cmd_check_mesh)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except HSFEMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
