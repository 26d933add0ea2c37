"""Outer fixed-point coupling of the potential solves and the heat step.

Each time step freezes a candidate end-of-step temperature v, solves the
potential system at v, evaluates the volumetric source, and advances the
heat equation one implicit step with exchange data taken from v.  Iterating
that map with optional relaxation until the update stalls gives the
accepted field for the step.

The truncation band |u0 - u| <= eps makes every one of those stages well
posed no matter how hot the field runs, so the march never aborts when the
band is left; it only flags the event.  The existence horizon t_star is the
last step boundary before any cell has ever left the band.  Up to that
boundary the clamp never engages, so rerunning with the clamp disabled
replays the same arithmetic; recheck_without_truncation does exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import numpy as np

from .butler_volmer import (context_with_params, context_without_truncation,
                            effective_temperature, potential_gradients,
                            source_Q_eps)
from .errors import SolverFailure, ThermocellError
from .heat import TemperatureField, step_temperature
from .potentials import (energy_identity_residual, solve_limit,
                         solve_regularized)

HORIZON = "horizon"

TAU_MODES = ("constrained_zero", "continuation")
Q_FORMS = ("potential_difference", "overpotential")
ROBIN_CONVENTIONS = ("cooling", "literal")
BOUNDARY_MODES = ("frozen", "implicit")
OUTER_MODES = ("per_step", "whole_trajectory")

OMEGA_FLOOR = 1.0 / 64.0


@dataclass
class SolverSettings:
    dt: float = 0.1
    t_end: float = 1.0
    tau_mode: str = "constrained_zero"
    tau_sequence: tuple = (1e-2, 1e-4, 1e-6, 1e-8)
    delta: float = 1.0
    nonlinear_tol: float = 1e-10
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    picard_relaxation: float = 1.0
    eps: float = None
    overflow_ceiling: float = 1e6
    q_form: str = "potential_difference"
    robin_convention: str = "cooling"
    boundary_mode: str = "frozen"
    outer_mode: str = "per_step"
    tstar_bisect: bool = False

    def validate(self):
        if not self.dt > 0:
            raise ThermocellError("solver.dt must be positive")
        if not self.t_end > 0:
            raise ThermocellError("solver.t_end must be positive")
        for name in ("nonlinear_tol", "picard_tol"):
            if not getattr(self, name) > 0:
                raise ThermocellError("solver.%s must be positive" % name)
        if self.picard_max_iters < 1:
            raise ThermocellError("solver.picard_max_iters must be at least 1")
        if not 0 < self.picard_relaxation <= 1:
            raise ThermocellError(
                "solver.picard_relaxation must lie in (0, 1]")
        if not 0 < self.delta <= 1:
            raise ThermocellError("solver.delta must lie in (0, 1]")
        if self.eps is not None and not self.eps > 0:
            raise ThermocellError("solver.eps must be positive")
        if not self.overflow_ceiling > 0:
            raise ThermocellError("solver.overflow_ceiling must be positive")
        for name, allowed in (("tau_mode", TAU_MODES), ("q_form", Q_FORMS),
                              ("robin_convention", ROBIN_CONVENTIONS),
                              ("boundary_mode", BOUNDARY_MODES),
                              ("outer_mode", OUTER_MODES)):
            if getattr(self, name) not in allowed:
                raise ThermocellError(
                    "solver.%s must be one of %s" % (name, ", ".join(allowed)))
        if self.tau_mode == "continuation":
            seq = tuple(self.tau_sequence)
            if not seq or any(not t > 0 for t in seq):
                raise ThermocellError(
                    "solver.tau_sequence needs positive entries")
        return self


@dataclass
class PicardDiagnostics:
    iters: int
    updates: list
    decay_ratio: float
    converged: bool


@dataclass
class SimulationResult:
    times: list = field(default_factory=list)
    temperature_snapshots: list = field(default_factory=list)
    potential_snapshots: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    t_star: object = None
    t_star_refined: object = None
    horizon: float = 0.0
    eps: float = 0.0
    failed: bool = False
    failure: object = None

    def snapshot_values(self, n):
        return self.temperature_snapshots[n].values


def solve_potentials(u, ctx, mesh, params, settings, initial_guess=None):
    """Potential pair at frozen temperature, per the configured tau mode."""
    if settings.tau_mode == "constrained_zero":
        return solve_limit(u, ctx, mesh, params, settings,
                           delta=settings.delta, initial_guess=initial_guess)
    pot = initial_guess
    for tau in settings.tau_sequence:
        pot = solve_regularized(u, tau, settings.delta, ctx, mesh, params,
                                settings, initial_guess=pot)
    return pot


def apply_J(v, state, ctx, mesh, params, settings):
    """One sweep of the alternating map: potentials at frozen v, source,
    then an implicit heat step from the previous accepted field with
    exchange data from v."""
    try:
        pot = solve_potentials(v, ctx, mesh, params, settings)
    except SolverFailure as exc:
        exc.stage = "potentials"
        raise
    grad_phis, grad_phie = potential_gradients(mesh, pot.phis, pot.phie)
    Q = source_Q_eps(v, pot.phis, pot.phie, grad_phis, grad_phie, ctx, mesh,
                     q_form=settings.q_form)
    if settings.boundary_mode == "frozen":
        wb = effective_temperature(v, ctx.u0, ctx.eps, ctx.truncation_enabled)
    else:
        wb = None
    try:
        u_next = step_temperature(state, settings.dt, Q, mesh, params,
                                  w_boundary=wb,
                                  robin_convention=settings.robin_convention)
    except (ThermocellError, np.linalg.LinAlgError) as exc:
        raise SolverFailure("heat step failed: %s" % exc, stage="heat")
    return u_next, pot


def picard_step(state, ctx, mesh, params, settings):
    """Fixed point of the single-step map by relaxed iteration.

    The relaxation weight starts at the configured value and halves whenever
    the update norm grows, down to a floor of 1/64.
    """
    u_k = np.asarray(state, dtype=float).copy()
    omega = settings.picard_relaxation
    updates = []
    pot = None
    for it in range(1, settings.picard_max_iters + 1):
        u_J, pot = apply_J(u_k, state, ctx, mesh, params, settings)
        u_next = (1.0 - omega) * u_k + omega * u_J
        upd = float(np.max(np.abs(u_next - u_k)))
        updates.append(upd)
        sup = float(np.max(np.abs(u_next)))
        if not np.isfinite(sup) or sup > settings.overflow_ceiling:
            raise SolverFailure(
                "fixed-point iterate exceeded the overflow ceiling %g"
                % settings.overflow_ceiling, trace=updates, stage="picard")
        u_k = u_next
        if upd <= settings.picard_tol:
            ratio = _decay_ratio(updates)
            diag = PicardDiagnostics(it, updates, ratio, True)
            return u_k, pot, diag
        if len(updates) >= 2 and updates[-1] > updates[-2]:
            omega = max(omega / 2.0, OMEGA_FLOOR)
    raise SolverFailure(
        "fixed-point iteration did not converge in %d sweeps (last update %g)"
        % (settings.picard_max_iters, updates[-1]),
        trace=updates, stage="picard")


def _decay_ratio(updates):
    if len(updates) < 2 or updates[0] == 0.0:
        return 0.0
    return float((updates[-1] / updates[0]) ** (1.0 / (len(updates) - 1)))


def _params_at(params, t):
    if params.U_schedule:
        return params.with_U_at(t)
    return params


def _step_diag(t, u, pot, ctx, mesh, params, picard):
    dev = float(np.max(np.abs(ctx.u0 - u)))
    V = mesh.cell_measure
    return {
        "t": t,
        "min_u": float(np.min(u)),
        "max_u": float(np.max(u)),
        "mean_u": float(np.dot(V, u) / np.sum(V)),
        "sup_phis": pot.sup_phis,
        "sup_phie": pot.sup_phie,
        "picard_iters": picard.iters if picard else 0,
        "truncation_active": bool(dev > ctx.eps),
        "mean_sum": pot.mean_sum,
        "energy_residual": energy_identity_residual(pot, u, ctx, mesh, params),
        "max_band_deviation": dev,
        "decay_ratio": picard.decay_ratio if picard else 0.0,
        "positive": bool(np.min(u) > 0.0),
    }


def run_simulation(mesh, params, ctx, settings):
    """March from 0 to t_end, recording snapshots and diagnostics at every
    step boundary.  Leaving the truncation band is flagged, never fatal;
    stage failures stop the march but keep everything accepted so far."""
    settings.validate()
    n_steps = int(round(settings.t_end / settings.dt))
    if n_steps < 1 or abs(n_steps * settings.dt - settings.t_end) > 1e-9 * settings.t_end:
        raise ThermocellError(
            "solver.t_end must be a whole number of dt steps")
    result = SimulationResult(horizon=settings.t_end, eps=ctx.eps)
    u = ctx.u0.copy()
    params_0 = _params_at(params, 0.0)
    ctx_0 = context_with_params(ctx, params_0)
    pot0 = solve_potentials(u, ctx_0, mesh, params_0, settings)
    result.times.append(0.0)
    result.temperature_snapshots.append(TemperatureField(u.copy(), 0.0))
    result.potential_snapshots.append(pot0)
    result.diagnostics.append(
        _step_diag(0.0, u, pot0, ctx_0, mesh, params_0, None))

    if settings.outer_mode == "whole_trajectory":
        return _run_whole_trajectory(result, mesh, params, ctx, settings,
                                     n_steps)

    for n in range(n_steps):
        t_next = (n + 1) * settings.dt
        params_n = _params_at(params, t_next)
        ctx_n = context_with_params(ctx, params_n)
        try:
            u, _, picard = picard_step(u, ctx_n, mesh, params_n, settings)
            # the recorded pair is a fresh cold-start solve at the accepted
            # field so snapshots do not depend on the iteration path
            pot = solve_potentials(u, ctx_n, mesh, params_n, settings)
        except SolverFailure as exc:
            result.failed = True
            result.failure = exc
            break
        result.times.append(t_next)
        result.temperature_snapshots.append(TemperatureField(u.copy(), t_next))
        result.potential_snapshots.append(pot)
        result.diagnostics.append(
            _step_diag(t_next, u, pot, ctx_n, mesh, params_n, picard))
    result.t_star = detect_tstar(result, ctx.eps)
    if settings.tstar_bisect and result.t_star != HORIZON and not result.failed:
        result.t_star_refined = _bisect_tstar(result, mesh, params, ctx,
                                              settings)
    return result


def _run_whole_trajectory(result, mesh, params, ctx, settings, n_steps):
    """Outer iteration over the entire march: every sweep rebuilds the whole
    trajectory using the previous sweep's fields as the frozen coefficients."""
    u0 = ctx.u0.copy()
    traj = [u0.copy() for _ in range(n_steps + 1)]
    omega = settings.picard_relaxation
    sweeps = 0
    for sweep in range(1, settings.picard_max_iters + 1):
        sweeps = sweep
        new_traj = [u0.copy()]
        change = 0.0
        u_prev = u0
        try:
            for n in range(n_steps):
                t_next = (n + 1) * settings.dt
                params_n = _params_at(params, t_next)
                ctx_n = context_with_params(ctx, params_n)
                u_J, _ = apply_J(traj[n + 1], u_prev, ctx_n, mesh, params_n,
                                 settings)
                u_new = (1.0 - omega) * traj[n + 1] + omega * u_J
                change = max(change, float(np.max(np.abs(u_new - traj[n + 1]))))
                if not np.isfinite(change) or \
                        float(np.max(np.abs(u_new))) > settings.overflow_ceiling:
                    raise SolverFailure(
                        "trajectory iterate exceeded the overflow ceiling",
                        stage="picard")
                new_traj.append(u_new)
                u_prev = u_new
        except SolverFailure as exc:
            result.failed = True
            result.failure = exc
            result.t_star = detect_tstar(result, ctx.eps)
            return result
        traj = new_traj
        if change <= settings.picard_tol:
            break
    else:
        result.failed = True
        result.failure = SolverFailure(
            "whole-trajectory iteration did not converge in %d sweeps"
            % settings.picard_max_iters, stage="picard")
    diag = PicardDiagnostics(sweeps, [], 0.0, not result.failed)
    for n in range(n_steps):
        t_next = (n + 1) * settings.dt
        params_n = _params_at(params, t_next)
        ctx_n = context_with_params(ctx, params_n)
        u = traj[n + 1]
        pot = solve_potentials(u, ctx_n, mesh, params_n, settings)
        result.times.append(t_next)
        result.temperature_snapshots.append(TemperatureField(u.copy(), t_next))
        result.potential_snapshots.append(pot)
        result.diagnostics.append(
            _step_diag(t_next, u, pot, ctx_n, mesh, params_n, diag))
    result.t_star = detect_tstar(result, ctx.eps)
    return result


def detect_tstar(result, eps):
    """Largest step boundary up to which no cell has ever left the band.

    On that interval the clamp is exactly the identity, which is asserted
    cellwise, so the recorded fields satisfy the untruncated equations.
    """
    t_star = None
    for snap in result.temperature_snapshots:
        dev = float(np.max(np.abs(result_u0(result) - snap.values)))
        if dev > eps:
            break
        w = effective_temperature(snap.values, result_u0(result), eps)
        if not np.array_equal(w, snap.values):
            raise AssertionError(
                "clamp altered an in-band field at t = %g" % snap.time)
        t_star = snap.time
    if t_star is None:
        return 0.0
    if t_star == result.times[-1] and not result.failed \
            and t_star >= result.horizon:
        return HORIZON
    return t_star


def result_u0(result):
    return result.temperature_snapshots[0].values


def _bisect_tstar(result, mesh, params, ctx, settings, iters=20):
    """Refine the horizon inside the first violating step by bisecting the
    step length from the last accepted in-band state."""
    t0 = result.t_star
    idx = result.times.index(t0)
    if idx + 1 >= len(result.times):
        return t0
    u_star = result.temperature_snapshots[idx].values
    lo, hi = 0.0, settings.dt
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        trial = replace(settings, dt=mid, t_end=mid, tstar_bisect=False)
        params_t = _params_at(params, t0 + mid)
        ctx_t = context_with_params(ctx, params_t)
        try:
            u_mid, _, _ = picard_step(u_star, ctx_t, mesh, params_t, trial)
        except SolverFailure:
            hi = mid
            continue
        if float(np.max(np.abs(ctx.u0 - u_mid))) <= ctx.eps:
            lo = mid
        else:
            hi = mid
    return t0 + lo


def recheck_without_truncation(result, mesh, params, ctx, settings):
    """Replay the march up to t_star with the clamp disabled and return the
    worst discrepancy over all recorded fields.

    Inside the band the clamp returns its argument bit for bit, so the
    replay performs identical arithmetic and the discrepancy is exactly
    zero whenever the iteration never sampled outside the band.
    """
    t_star = result.t_star
    t_limit = result.horizon if t_star == HORIZON else t_star
    ctx_raw = context_without_truncation(ctx)
    u = ctx_raw.u0.copy()
    worst = 0.0
    idx = 0
    params_0 = _params_at(params, 0.0)
    ctx_0 = context_with_params(ctx_raw, params_0)
    pot = solve_potentials(u, ctx_0, mesh, params_0, settings)
    worst = max(worst,
                _pair_gap(pot, result.potential_snapshots[0]),
                float(np.max(np.abs(u - result.snapshot_values(0)))))
    n = 0
    while n + 1 < len(result.times) and result.times[n + 1] <= t_limit + 1e-12:
        t_next = result.times[n + 1]
        params_n = _params_at(params, t_next)
        ctx_n = context_with_params(ctx_raw, params_n)
        u, _, _ = picard_step(u, ctx_n, mesh, params_n, settings)
        pot = solve_potentials(u, ctx_n, mesh, params_n, settings)
        worst = max(worst,
                    float(np.max(np.abs(u - result.snapshot_values(n + 1)))),
                    _pair_gap(pot, result.potential_snapshots[n + 1]))
        n += 1
    return worst


def _pair_gap(a, b):
    return max(float(np.max(np.abs(a.phis - b.phis))),
               float(np.max(np.abs(a.phie - b.phie))))
