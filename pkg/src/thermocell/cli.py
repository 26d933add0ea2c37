"""Command line driver.

Subcommands: run (full simulation plus output files), validate (hypothesis
report only), mms (manufactured-solution refinement tables), sweep-tau
(regularization continuation table), oracle-compare (main path against the
scalar reference on a small mesh).  Exit codes: 0 success, 1 admissibility
failure, 2 solver failure, 3 configuration error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import coupled
from .butler_volmer import make_context
from .config import load_config
from .coupled import run_simulation
from .errors import (EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION,
                     ConfigError, SolverFailure, ThermocellError,
                     ValidationFailure)
from .mms import forcing_compatibility, run_all
from .oracle import (ORACLE_CAP, compare_fields, oracle_apply_J,
                     oracle_solve_limit, oracle_solve_regularized)
from .params import epsilon_bounds, validate_hypotheses
from .potentials import solve_limit, solve_regularized
from .reporting import summary_text, write_simulation_outputs

RATE_BANDS = {"heat_space": (2.0, 0.2), "heat_time": (1.0, 0.2),
              "potential": (2.0, 0.2)}


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors, which collides with the
    # solver-failure code; remap to the config-error status
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, "%s: error: %s\n" % (self.prog, message))


def _build_parser():
    parser = _Parser(prog="thermocell",
                     description="truncated thermal cell model driver")
    sub = parser.add_subparsers(dest="mode", required=True,
                                parser_class=_Parser)
    helps = {
        "run": "march the coupled system and write outputs",
        "validate": "check the admissibility hypotheses and exit",
        "mms": "manufactured-solution refinement study",
        "sweep-tau": "regularization sweep against the constrained solve",
        "oracle-compare": "compare the main path with the scalar reference",
    }
    for name in ("run", "validate", "mms", "sweep-tau", "oracle-compare"):
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, metavar="PATH",
                       help="configuration file")
        if name == "mms":
            p.add_argument("--levels", type=int, default=4,
                           help="refinement levels per case")
    return parser


def _context(mesh, params, settings):
    if settings.eps is not None:
        return make_context(mesh, params, settings.eps)
    L0, _ = epsilon_bounds(params.u0)
    return make_context(mesh, params, 0.5 * L0)


def _validate_or_fail(params, mesh, out):
    report = validate_hypotheses(params, mesh)
    print(report.text(), file=out)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures())
        print("validation failed: %s" % names, file=sys.stderr)
    return report


def _cmd_validate(cfg, args):
    mesh = cfg.build_mesh()
    params = cfg.build_params(mesh)
    report = _validate_or_fail(params, mesh, sys.stdout)
    return EXIT_OK if report.passed else EXIT_VALIDATION


def _cmd_run(cfg, args):
    mesh = cfg.build_mesh()
    params = cfg.build_params(mesh)
    settings = cfg.build_settings()
    report = _validate_or_fail(params, mesh, sys.stdout)
    if not report.passed:
        return EXIT_VALIDATION
    ctx = _context(mesh, params, settings)
    result = run_simulation(mesh, params, ctx, settings)
    out = cfg.effective()["output"]
    written = write_simulation_outputs(
        out["directory"], result, mesh, stride=out["stride"],
        figures=out["figures"], config_text=cfg.text(),
        validation_text=report.text())
    print(summary_text(result))
    print("wrote %d files to %s" % (len(written), out["directory"]))
    if result.failed:
        print("solver failed at stage %s: %s"
              % (getattr(result.failure, "stage", "?"), result.failure),
              file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_mms(cfg, args):
    levels = getattr(args, "levels", 4)
    cases = run_all(levels=levels)
    bad = []
    for case in cases:
        print(case.text())
        target, width = RATE_BANDS[case.name]
        final = case.rates[-1]
        if abs(final - target) > width:
            bad.append("%s rate %.3f outside %g +- %g"
                       % (case.name, final, target, width))
    gap = forcing_compatibility()
    print("forcing compatibility gap: %.3g" % gap)
    if gap > 1e-10:
        bad.append("forcing compatibility gap %.3g" % gap)
    if bad:
        for line in bad:
            print("mms failure: %s" % line, file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_sweep_tau(cfg, args):
    mesh = cfg.build_mesh()
    params = cfg.build_params(mesh)
    settings = cfg.build_settings()
    report = _validate_or_fail(params, mesh, sys.stdout)
    if not report.passed:
        return EXIT_VALIDATION
    ctx = _context(mesh, params, settings)
    u = ctx.u0.copy()
    limit = solve_limit(u, ctx, mesh, params, settings,
                        delta=settings.delta)
    print("constrained solve: sup_phis=%.6g sup_phie=%.6g iters=%d"
          % (limit.sup_phis, limit.sup_phie, limit.newton_iters))
    print("%-10s %-12s %-12s %-12s %-6s %s"
          % ("tau", "gap", "sup_phis", "sup_phie", "iters", "mean_sum"))
    pot = None
    for tau in sorted(settings.tau_sequence, reverse=True):
        pot = solve_regularized(u, tau, settings.delta, ctx, mesh, params,
                                settings, initial_guess=pot)
        gap = max(float(np.max(np.abs(pot.phis - limit.phis))),
                  float(np.max(np.abs(pot.phie - limit.phie))))
        print("%-10.3g %-12.6g %-12.6g %-12.6g %-6d %.3g"
              % (tau, gap, pot.sup_phis, pot.sup_phie, pot.newton_iters,
                 pot.mean_sum))
    return EXIT_OK


def _cmd_oracle_compare(cfg, args):
    mesh = cfg.build_mesh()
    params = cfg.build_params(mesh)
    settings = cfg.build_settings()
    report = _validate_or_fail(params, mesh, sys.stdout)
    if not report.passed:
        return EXIT_VALIDATION
    n = mesh.n_solid + mesh.n_cells
    if n > ORACLE_CAP:
        raise ConfigError("oracle comparison needs %d or fewer unknowns, "
                          "the configured mesh has %d" % (ORACLE_CAP, n))
    ctx = _context(mesh, params, settings)
    u = ctx.u0.copy()
    tau = max(settings.tau_sequence)
    delta = settings.delta
    tol = 1e-8
    reports = []

    main = solve_regularized(u, tau, delta, ctx, mesh, params, settings)
    ref_s, ref_e = oracle_solve_regularized(u, tau, delta, ctx, mesh, params)
    reports.append(compare_fields("solve_regularized tau=%g" % tau, "phis",
                                  main.phis, ref_s, tol))
    reports.append(compare_fields("solve_regularized tau=%g" % tau, "phie",
                                  main.phie, ref_e, tol))

    main0 = solve_limit(u, ctx, mesh, params, settings, delta=delta)
    ref_s0, ref_e0 = oracle_solve_limit(u, ctx, mesh, params, delta=delta)
    reports.append(compare_fields("solve_limit", "phis", main0.phis,
                                  ref_s0, tol))
    reports.append(compare_fields("solve_limit", "phie", main0.phie,
                                  ref_e0, tol))

    u_next, _, picard = coupled.picard_step(u, ctx, mesh, params, settings)
    tau_j = 0.0 if settings.tau_mode == "constrained_zero" \
        else settings.tau_sequence[-1]
    ref_next, _, _ = oracle_apply_J(
        u_next, ctx, mesh, params, settings.dt, tau_j, delta,
        q_form=settings.q_form, robin_convention=settings.robin_convention,
        boundary_mode=settings.boundary_mode, u_old=u)
    reports.append(compare_fields(
        "fixed point certificate (%d sweeps)" % picard.iters, "u",
        u_next, ref_next, 2.0 * settings.picard_tol
        * max(1.0, float(np.max(np.abs(u_next))))))

    ok = True
    for rep in reports:
        print(rep.text())
        ok = ok and rep.passed
    if not ok:
        print("oracle comparison failed", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "validate": _cmd_validate,
    "mms": _cmd_mms,
    "sweep-tau": _cmd_sweep_tau,
    "oracle-compare": _cmd_oracle_compare,
}


def run_cli(argv=None):
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.mode](cfg, args)
    except OSError as exc:
        print("cannot read configuration: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailure as exc:
        print("validation failed: %s" % exc, file=sys.stderr)
        return EXIT_VALIDATION
    except SolverFailure as exc:
        print("solver failed: %s" % exc, file=sys.stderr)
        return EXIT_SOLVER
    except ThermocellError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


def entry():
    sys.exit(run_cli())


if __name__ == "__main__":
    entry()
