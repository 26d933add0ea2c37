"""Coupled marching: fixed-point sweeps, breakdown-time detection, the
truncation-free recheck, and settings validation."""

import numpy as np
import pytest

from thermocell.butler_volmer import make_context
from thermocell.coupled import (HORIZON, SolverSettings, apply_J,
                                detect_tstar, picard_step,
                                recheck_without_truncation, run_simulation,
                                solve_potentials)
from thermocell.errors import ThermocellError
from thermocell.potentials import solve_limit

from conftest import default_params


def _equilibrium(mesh):
    params = default_params(mesh, I_a=0.0, U=0.0, f=0.0)
    return params, make_context(mesh, params, 1.0)


def _forced(mesh, I_a=0.2, eps=1.0, **kw):
    params = default_params(mesh, I_a=I_a, **kw)
    return params, make_context(mesh, params, eps)


def test_settings_validation_messages():
    cases = [
        (dict(dt=-1.0), "solver.dt must be positive"),
        (dict(t_end=0.0), "solver.t_end must be positive"),
        (dict(nonlinear_tol=0.0), "solver.nonlinear_tol must be positive"),
        (dict(picard_tol=-2.0), "solver.picard_tol must be positive"),
        (dict(picard_max_iters=0), "picard_max_iters must be at least 1"),
        (dict(picard_relaxation=1.5), "picard_relaxation must lie in (0, 1]"),
        (dict(delta=0.0), "solver.delta must lie in (0, 1]"),
        (dict(eps=-0.1), "solver.eps must be positive"),
        (dict(overflow_ceiling=0.0), "overflow_ceiling must be positive"),
        (dict(tau_mode="bogus"), "solver.tau_mode must be one of"),
        (dict(q_form="bogus"), "solver.q_form must be one of"),
        (dict(outer_mode="bogus"), "solver.outer_mode must be one of"),
        (dict(tau_mode="continuation", tau_sequence=()),
         "tau_sequence needs positive entries"),
    ]
    for kw, fragment in cases:
        with pytest.raises(ThermocellError) as err:
            SolverSettings(**kw).validate()
        assert fragment in str(err.value), kw


def test_t_end_must_be_whole_steps(mesh):
    params, ctx = _equilibrium(mesh)
    with pytest.raises(ThermocellError, match="whole number"):
        run_simulation(mesh, params, ctx,
                       SolverSettings(dt=0.3, t_end=1.0))


def test_equilibrium_reaches_horizon(mesh):
    params, ctx = _equilibrium(mesh)
    settings = SolverSettings(dt=0.1, t_end=1.0)
    res = run_simulation(mesh, params, ctx, settings)
    assert not res.failed
    assert res.t_star == HORIZON
    assert len(res.times) == 11
    for snap in res.temperature_snapshots:
        assert np.max(np.abs(snap.values - params.T_a)) < 1e-12
    for d in res.diagnostics:
        assert not d["truncation_active"]
        assert d["sup_phis"] == 0.0 and d["sup_phie"] == 0.0


def test_fixed_point_certificate(mesh):
    params, ctx = _forced(mesh)
    settings = SolverSettings(dt=0.1, t_end=0.5)
    state = ctx.u0.copy()
    u_star, pot, diag = picard_step(state, ctx, mesh, params, settings)
    assert diag.converged and diag.iters >= 1
    assert diag.decay_ratio < 1.0
    u_again, _ = apply_J(u_star, state, ctx, mesh, params, settings)
    scale = max(1.0, float(np.max(np.abs(u_star))))
    assert np.max(np.abs(u_again - u_star)) <= 2.0 * settings.picard_tol * scale


def test_heating_is_monotone_under_constant_drive(mesh):
    params, ctx = _forced(mesh)
    res = run_simulation(mesh, params, ctx, SolverSettings(dt=0.1, t_end=0.5))
    maxima = [d["max_u"] for d in res.diagnostics]
    assert all(b > a for a, b in zip(maxima, maxima[1:]))
    assert res.t_star == HORIZON  # band is wide here


def test_tstar_detected_inside_run(mesh):
    params, ctx = _forced(mesh, I_a=0.5, eps=0.05)
    settings = SolverSettings(dt=0.05, t_end=0.5)
    res = run_simulation(mesh, params, ctx, settings)
    assert not res.failed
    assert res.t_star != HORIZON
    assert 0.0 < res.t_star < 0.5
    crossed = False
    for d in res.diagnostics:
        if d["t"] <= res.t_star + 1e-12:
            assert not d["truncation_active"]
        elif not crossed:
            assert d["truncation_active"]
            crossed = True
    assert crossed


def test_tstar_bisection_refines_within_step(mesh):
    params, ctx = _forced(mesh, I_a=0.5, eps=0.05)
    settings = SolverSettings(dt=0.05, t_end=0.5, tstar_bisect=True)
    res = run_simulation(mesh, params, ctx, settings)
    assert res.t_star_refined is not None
    assert res.t_star <= res.t_star_refined <= res.t_star + settings.dt


def test_recheck_without_truncation_is_exact_in_band(mesh):
    params, ctx = _forced(mesh)
    settings = SolverSettings(dt=0.1, t_end=0.5)
    res = run_simulation(mesh, params, ctx, settings)
    assert res.t_star == HORIZON
    gap = recheck_without_truncation(res, mesh, params, ctx, settings)
    assert gap <= 1e-12
    # in-band clamp output is the identity bit for bit, so the replay is
    # the same arithmetic and the gap is exactly zero
    assert gap == 0.0


def test_whole_trajectory_mode_matches_per_step(mesh):
    params, ctx = _forced(mesh)
    per = run_simulation(mesh, params, ctx,
                         SolverSettings(dt=0.1, t_end=0.3))
    whole = run_simulation(mesh, params, ctx,
                           SolverSettings(dt=0.1, t_end=0.3,
                                          outer_mode="whole_trajectory",
                                          picard_max_iters=200))
    assert not whole.failed
    assert whole.t_star == HORIZON
    for a, b in zip(per.temperature_snapshots, whole.temperature_snapshots):
        assert np.max(np.abs(a.values - b.values)) < 1e-7


def test_overflow_failure_keeps_partial_results(mesh):
    params, ctx = _forced(mesh)
    settings = SolverSettings(dt=0.1, t_end=1.0, overflow_ceiling=2.005)
    res = run_simulation(mesh, params, ctx, settings)
    assert res.failed
    assert res.failure.stage == "picard"
    assert 1 <= len(res.times) < 11
    assert len(res.diagnostics) == len(res.times)
    assert res.t_star != HORIZON


def test_open_circuit_schedule_switches_mid_run(mesh):
    params = default_params(mesh, I_a=0.0, f=0.0, U=0.1,
                            U_schedule=((0.25, 0.4),))
    ctx = make_context(mesh, params, 1.0)
    res = run_simulation(mesh, params, ctx, SolverSettings(dt=0.05, t_end=0.5))
    early = [d["sup_phis"] for d in res.diagnostics if d["t"] < 0.25]
    late = [d["sup_phis"] for d in res.diagnostics if d["t"] >= 0.25]
    assert max(early) < 0.1
    assert min(late) > 0.2


def test_snapshots_are_cold_start_states(mesh):
    """Recorded potentials equal a fresh solve at the recorded temperature,
    so outputs do not depend on the iteration path."""
    params, ctx = _forced(mesh)
    settings = SolverSettings(dt=0.1, t_end=0.3)
    res = run_simulation(mesh, params, ctx, settings)
    for n in (1, 3):
        u = res.snapshot_values(n)
        pot = solve_potentials(u, ctx, mesh, params, settings)
        assert np.array_equal(pot.phis, res.potential_snapshots[n].phis)
        assert np.array_equal(pot.phie, res.potential_snapshots[n].phie)


def test_continuation_tau_mode(mesh):
    params, ctx = _forced(mesh)
    settings = SolverSettings(tau_mode="continuation",
                              tau_sequence=(1e-2, 1e-4, 1e-6, 1e-8))
    pot = solve_potentials(ctx.u0, ctx, mesh, params, settings)
    assert pot.tau == 1e-8
    limit = solve_limit(ctx.u0, ctx, mesh, params)
    assert np.max(np.abs(pot.phis - limit.phis)) < 1e-6


def test_detect_tstar_flags_clamped_snapshot_mismatch(mesh):
    """A snapshot claiming to be in band must be a clamp fixed point."""
    params, ctx = _equilibrium(mesh)
    res = run_simulation(mesh, params, ctx, SolverSettings(dt=0.1, t_end=0.2))
    assert detect_tstar(res, ctx.eps) == HORIZON
    res.temperature_snapshots[1].values[:] = params.T_a + 0.5
    assert detect_tstar(res, 0.1) == 0.0
