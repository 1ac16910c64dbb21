"""Command-line orchestrator: run / eigen / check subcommands.

Exit codes: 0 success, 1 convergence failure, 2 configuration or usage error.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ConfigError, SolverConfig, load_config
from .eigenbasis import EigenSolveError, assemble_operator, solve_eigenbasis, verify_basis
from .eulerian import FLOAT_FMT, export_run
from .grid import validate_physical_vacuum
from .nonlinear import PicardSettings, picard_solve
from .reporting import render_check_figures, render_eigen_figures, render_run_figures


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swvac", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "solve the nonlinear problem and export the run artifacts"),
        ("eigen", "assemble the weighted operator and export its spectrum"),
        ("check", "run the inequality and kinematics property suites"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="path to the run configuration file")
        sp.add_argument("--out", default=None, help="override the output directory")
        sp.add_argument("--quiet", action="store_true", help="suppress the summary")
    return p


def _say(quiet: bool, msg: str) -> None:
    if not quiet:
        print(msg)


def _cmd_run(cfg: SolverConfig, out_dir: str, quiet: bool) -> int:
    grid, weight = cfg.build_domain()
    report = validate_physical_vacuum(weight)
    if not report.passed:
        _say(quiet, f"weight profile fails physical-vacuum validation: {report}")
        return 2
    op = assemble_operator(weight, grid)
    basis = solve_eigenbasis(op, cfg.n_modes)
    u0 = cfg.initial_velocity(grid)
    settings = PicardSettings(
        t_final=cfg.t_final,
        n_steps=cfg.n_steps,
        tol=cfg.picard_tol,
        max_iter=cfg.max_iter,
        scheme=cfg.scheme,
        pressure=cfg.pressure,
    )
    sol, trace = picard_solve(u0, grid, weight, basis, settings)
    export_run(
        sol,
        out_dir,
        manifest_lines=list(cfg.raw_lines),
        max_order=min(cfg.truncation_order, 2),
    )
    render_run_figures(out_dir)
    _say(
        quiet,
        f"run {'converged' if sol.converged else 'FAILED'} after "
        f"{trace.iterations} iterations, {len(trace.halvings)} T-halvings, "
        f"final T = {sol.t_final:g}; artifacts in {out_dir}",
    )
    return 0 if sol.converged else 1


def _cmd_eigen(cfg: SolverConfig, out_dir: str, quiet: bool) -> int:
    grid, weight = cfg.build_domain()
    op = assemble_operator(weight, grid)
    try:
        basis = solve_eigenbasis(op, cfg.n_modes)
    except EigenSolveError as exc:
        _say(quiet, f"eigensolve failed: {exc}")
        return 1
    check = verify_basis(basis)
    os.makedirs(out_dir, exist_ok=True)
    rows = np.stack([np.arange(1, basis.n_modes + 1), basis.sigma], axis=1)
    np.savetxt(
        os.path.join(out_dir, "eigenvalues.csv"),
        rows,
        fmt=FLOAT_FMT,
        delimiter=",",
        header="index,sigma",
        comments="",
    )
    xx1, xx2 = grid.mesh()
    n_snap = min(basis.n_modes, 6)
    mode_rows = np.column_stack(
        [xx1.ravel(), xx2.ravel()]
        + [basis.modes[:, l] for l in range(n_snap)]
    )
    header = "x1,x2," + ",".join(f"mode{l + 1}" for l in range(n_snap))
    np.savetxt(
        os.path.join(out_dir, "modes.csv"),
        mode_rows,
        fmt=FLOAT_FMT,
        delimiter=",",
        header=header,
        comments="",
    )
    render_eigen_figures(out_dir)
    _say(
        quiet,
        f"{basis.n_modes} modes, sigma_1 = {basis.sigma[0]:.12f}, "
        f"orthonormality defect {check.orthonormality_defect:.2e}; artifacts in {out_dir}",
    )
    return 0


def _cmd_check(cfg: SolverConfig, out_dir: str, quiet: bool) -> int:
    from .kinematics import deformation, identity_state, piola_residual
    from .weighted import (
        check_hardy_embedding,
        check_interpolation,
        eval_sample,
        sample_coefficients,
        tangent_ratio,
    )

    grid, weight = cfg.build_domain()
    report = validate_physical_vacuum(weight)
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    coeffs = sample_coefficients(n_samples=25, seed=cfg.seed)
    for c in coeffs:
        g = eval_sample(c, grid)
        for rep in (check_hardy_embedding(g, weight, 0), check_interpolation(g, weight)):
            lines.append(rep.csv_row(grid.n1, grid.n2, cfg.seed))
    with open(os.path.join(out_dir, "inequalities.csv"), "w") as f:
        f.write("name,lhs,rhs,constant,n1,n2,seed\n")
        f.write("\n".join(lines))
        f.write("\n")

    piola = piola_residual(deformation(identity_state(grid)))
    tr = tangent_ratio(weight, 1) if grid.n1 >= 4 else 0.0
    with open(os.path.join(out_dir, "check_summary.txt"), "w") as f:
        f.write(f"physical_vacuum_pass = {report.passed}\n")
        f.write(f"comparability = ({weight.c_lower:.6g}, {weight.c_upper:.6g})\n")
        f.write(f"boundary_residual = {report.boundary_residual:.6g}\n")
        f.write(f"piola_identity_map = {piola:.6g}\n")
        f.write(f"tangent_ratio_l1 = {tr:.6g}\n")
    render_check_figures(out_dir)
    _say(
        quiet,
        f"physical vacuum {'pass' if report.passed else 'FAIL'}; "
        f"{len(lines)} inequality reports in {out_dir}",
    )
    return 0 if report.passed else 1


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out or cfg.directory
    try:
        if args.command == "run":
            return _cmd_run(cfg, out_dir, args.quiet)
        if args.command == "eigen":
            return _cmd_eigen(cfg, out_dir, args.quiet)
        return _cmd_check(cfg, out_dir, args.quiet)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
