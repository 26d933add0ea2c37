"""Potential system solves: constant-solution oracle, zero-mean closure,
energy identity, uniqueness, and regularization limit."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermocell.butler_volmer import context_with_params, make_context
from thermocell.errors import SolverFailure, ThermocellError
from thermocell.mesh import build_sandwich_mesh, region_measure
from thermocell.potentials import (PotentialAssembly, PotentialPair, _picard_b,
                                   apriori_diagnostics, assemble_residual,
                                   constant_solution_reference,
                                   energy_identity_residual,
                                   energy_identity_terms, solve_limit,
                                   solve_regularized)

from conftest import CELLS, LENGTHS, default_params, random_data

_MESH = build_sandwich_mesh(LENGTHS, CELLS)


def _scale(mesh, pot):
    vol = region_measure(mesh, "omega") + region_measure(mesh, "omega_prime")
    return vol * max(1.0, pot.sup_phis, pot.sup_phie)


def test_constant_solution_with_uniform_U(mesh):
    """No current, no forcing, uniform U: the solution is a pair of exact
    constants fixed by the zero-mean closure."""
    params = default_params(mesh, I_a=0.0, f=0.0, U=0.1)
    ctx = make_context(mesh, params, 1.0)
    pot = solve_limit(ctx.u0, ctx, mesh, params)
    c1, c2 = constant_solution_reference(mesh, 0.1)
    assert np.max(np.abs(pot.phis - c1)) < 1e-12
    assert np.max(np.abs(pot.phie - c2)) < 1e-12
    assert c1 - c2 == pytest.approx(0.1)


def test_constant_solution_scales_with_mesh():
    fine = build_sandwich_mesh(LENGTHS, (16, 8, 16))
    params = default_params(fine, I_a=0.0, f=0.0, U=-0.25)
    ctx = make_context(fine, params, 1.0)
    pot = solve_limit(ctx.u0, ctx, fine, params)
    c1, c2 = constant_solution_reference(fine, -0.25)
    assert np.max(np.abs(pot.phis - c1)) < 1e-12
    assert np.max(np.abs(pot.phie - c2)) < 1e-12


def test_zero_mean_across_tau_and_delta(mesh):
    rng = np.random.default_rng(23)
    params, ctx, u = random_data(mesh, rng)
    for tau in (0.0, 1e-6, 1e-2, 1.0):
        for delta in (0.25, 1.0):
            if tau > 0:
                pot = solve_regularized(u, tau, delta, ctx, mesh, params)
            else:
                pot = solve_limit(u, ctx, mesh, params, delta=delta)
            assert abs(pot.mean_sum) <= 1e-10 * _scale(mesh, pot), \
                f"tau={tau} delta={delta}: mean {pot.mean_sum:.3g}"
            assert abs(pot.multiplier) <= 1e-10


def test_unique_solution_from_random_starts(mesh):
    rng = np.random.default_rng(5)
    params, ctx, u = random_data(mesh, rng)
    sols = []
    for _ in range(6):
        guess = PotentialPair(
            phis=rng.uniform(-5, 5, mesh.n_solid),
            phie=rng.uniform(-5, 5, mesh.n_cells), tau=0.0, delta=1.0)
        pot = solve_limit(u, ctx, mesh, params, initial_guess=guess)
        sols.append(np.concatenate([pot.phis, pot.phie]))
    spread = max(np.max(np.abs(s - sols[0])) for s in sols[1:])
    assert spread < 1e-10


def test_energy_identity_holds_and_detects_perturbation(mesh):
    rng = np.random.default_rng(41)
    params, ctx, u = random_data(mesh, rng)
    pot = solve_limit(u, ctx, mesh, params)
    terms, total, scale = energy_identity_terms(pot, u, ctx, mesh, params)
    assert abs(total) <= 1e-10 * max(scale, 1e-30)
    assert terms["dirichlet_s"] >= 0 and terms["dirichlet_e"] >= 0
    bad = PotentialPair(phis=pot.phis * (1 + 1e-3), phie=pot.phie,
                        tau=0.0, delta=1.0)
    assert energy_identity_residual(bad, u, ctx, mesh, params) \
        > 1e-8 * max(scale, 1e-30)


def test_tau_sweep_converges_linearly(mesh):
    rng = np.random.default_rng(13)
    params, ctx, u = random_data(mesh, rng)
    limit = solve_limit(u, ctx, mesh, params)
    taus = (1e-2, 1e-4, 1e-6, 1e-8)
    gaps = []
    pot = None
    for tau in taus:
        pot = solve_regularized(u, tau, 1.0, ctx, mesh, params,
                                initial_guess=pot)
        gaps.append(max(np.max(np.abs(pot.phis - limit.phis)),
                        np.max(np.abs(pot.phie - limit.phie))))
    assert gaps[0] > gaps[1] > gaps[2] > gaps[3]
    assert gaps[-1] <= 1e-6
    # first-order in tau: consecutive ratios track the tau ratios
    assert gaps[1] / gaps[0] < 1e-1
    sups = []
    for tau in (1e-8, 1e-9):
        p = solve_regularized(u, tau, 1.0, ctx, mesh, params)
        sups.append((p.sup_phis, p.sup_phie))
    assert abs(sups[0][0] - sups[1][0]) <= 0.01 * max(sups[0][0], 1e-30)


def test_unbalanced_contacts_trip_the_multiplier(mesh):
    params = default_params(mesh, I_a=1.0, I_c=1.0)  # violates the balance
    ctx = make_context(mesh, params, 1.0)
    with pytest.raises(SolverFailure, match="multiplier"):
        solve_limit(ctx.u0, ctx, mesh, params)


def test_invalid_arguments(mesh, params, ctx):
    with pytest.raises(ThermocellError, match="tau must be positive"):
        solve_regularized(ctx.u0, 0.0, 1.0, ctx, mesh, params)
    with pytest.raises(ThermocellError, match="delta"):
        solve_limit(ctx.u0, ctx, mesh, params, delta=1.5)
    with pytest.raises(ThermocellError, match="delta"):
        solve_limit(ctx.u0, ctx, mesh, params, delta=0.0)


def test_residual_vanishes_only_at_solution(mesh):
    rng = np.random.default_rng(2)
    params, ctx, u = random_data(mesh, rng)
    pot = solve_limit(u, ctx, mesh, params)
    r = assemble_residual(pot, u, ctx, mesh, params)
    assert np.max(np.abs(r)) < 1e-12
    off = PotentialPair(phis=pot.phis + 0.01, phie=pot.phie, tau=0.0,
                        delta=1.0)
    assert np.max(np.abs(assemble_residual(off, u, ctx, mesh, params))) > 1e-5


def test_warm_start_reproduces_cold_solution(mesh):
    rng = np.random.default_rng(31)
    params, ctx, u = random_data(mesh, rng)
    cold = solve_regularized(u, 1e-4, 1.0, ctx, mesh, params)
    warm = solve_regularized(u, 1e-4, 1.0, ctx, mesh, params,
                             initial_guess=cold)
    assert np.max(np.abs(warm.phis - cold.phis)) < 1e-12
    assert warm.newton_iters <= cold.newton_iters


def test_frozen_kernel_sweeps_agree_with_newton(mesh, params, ctx):
    """In the contraction regime (mass term dominating the kernel slope)
    the frozen-coefficient sweeps reach the same fixed point as Newton."""
    u = ctx.u0.copy()
    pot = solve_regularized(u, 1.0, 1.0, ctx, mesh, params)
    asm = PotentialAssembly(mesh, ctx)
    N = mesh.n_solid + mesh.n_cells
    x = _picard_b(asm, np.zeros(N + 1), u, 1.0, 1.0, iters=400)
    assert np.max(np.abs(x[:mesh.n_solid] - pot.phis)) < 1e-8
    assert np.max(np.abs(x[mesh.n_solid:N] - pot.phie)) < 1e-8
    with pytest.raises(SolverFailure):
        _picard_b(asm, np.zeros(N + 1), u, 0.0, 1.0)


def test_two_dimensional_solve(mesh2d):
    params = default_params(mesh2d, I_a=0.3)
    ctx = make_context(mesh2d, params, 1.0)
    pot = solve_limit(ctx.u0, ctx, mesh2d, params)
    assert pot.residual_norm < 1e-12
    assert abs(pot.mean_sum) <= 1e-10 * _scale(mesh2d, pot)
    assert pot.sup_phis > 0


def test_open_circuit_schedule_enters_through_context(mesh):
    params = default_params(mesh, I_a=0.0, f=0.0, U=0.1,
                            U_schedule=((0.5, 0.4),))
    ctx = make_context(mesh, params, 1.0)
    late = params.with_U_at(0.7)
    pot_late = solve_limit(ctx.u0, context_with_params(ctx, late), mesh, late)
    c1, c2 = constant_solution_reference(mesh, 0.4)
    assert np.max(np.abs(pot_late.phis - c1)) < 1e-12
    assert np.max(np.abs(pot_late.phie - c2)) < 1e-12


def test_diagnostics_shape_and_consistency(mesh):
    rng = np.random.default_rng(3)
    params, ctx, u = random_data(mesh, rng)
    pot = solve_limit(u, ctx, mesh, params)
    d = apriori_diagnostics(pot, u, ctx, mesh, params)
    assert set(d) == {"l2_phis", "l2_phie", "sup_phis", "sup_phie",
                      "mean_sum", "ifara_integral"}
    assert d["sup_phis"] == pytest.approx(pot.sup_phis)
    assert d["l2_phie"] <= d["sup_phie"] * np.sqrt(region_measure(mesh, "omega"))
    assert not pot.saturated


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), tau=st.sampled_from([0.0, 1e-6, 1e-2, 1.0]))
def test_residual_sum_telescopes(seed, tau):
    """Summing all cell residuals cancels every flux and coupling term,
    leaving tau * mean - delta * (net contact current) for any fields."""
    rng = np.random.default_rng(seed)
    params, ctx, u = random_data(_MESH, rng)
    phis = rng.uniform(-2, 2, _MESH.n_solid)
    phie = rng.uniform(-2, 2, _MESH.n_cells)
    delta = float(rng.uniform(0.2, 1.0))
    pot = PotentialPair(phis=phis, phie=phie, tau=tau, delta=delta)
    R = assemble_residual(pot, u, ctx, _MESH, params)
    mean = (np.dot(_MESH.cell_measure[_MESH.solid_cells], phis)
            + np.dot(_MESH.cell_measure, phie))
    net_I = (params.I_a * _MESH.gamma_measure(1)
             + params.I_c * _MESH.gamma_measure(2))
    expect = tau * mean - delta * net_I
    scale = max(1.0, float(np.max(np.abs(R))))
    assert np.sum(R) == pytest.approx(expect, abs=1e-11 * scale)
