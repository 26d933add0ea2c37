"""Reference-path checks: scalar-loop solves against the vectorized path,
finite-difference audits, and rate fitting."""

import numpy as np
import pytest

from thermocell.butler_volmer import make_context
from thermocell.coupled import SolverSettings, apply_J
from thermocell.errors import SolverFailure, ThermocellError
from thermocell.mesh import build_sandwich_mesh
from thermocell.oracle import (ORACLE_CAP, FdCheckResult, brute_force_solve,
                               compare_fields, convergence_rate, fd_check,
                               oracle_apply_J, oracle_heat_step,
                               oracle_residual, oracle_solve_limit,
                               oracle_solve_regularized, oracle_source)
from thermocell.potentials import (assemble_residual, solve_limit,
                                   solve_regularized)
from thermocell.heat import step_temperature
from thermocell.butler_volmer import potential_gradients, source_Q_eps

from conftest import LENGTHS, default_params, random_data


def test_oracle_residual_matches_assembly(mesh):
    """Scalar-loop residual equals the vectorized integral residual."""
    rng = np.random.default_rng(4)
    params, ctx, u = random_data(mesh, rng)
    phis = rng.uniform(-1, 1, mesh.n_solid)
    phie = rng.uniform(-1, 1, mesh.n_cells)
    from thermocell.potentials import PotentialPair
    pot = PotentialPair(phis=phis, phie=phie, tau=0.3, delta=0.8)
    R_main = assemble_residual(pot, u, ctx, mesh, params)
    R_s, R_e = oracle_residual(phis, phie, u, 0.3, 0.8, ctx, mesh, params)
    R_ref = np.concatenate([R_s, R_e])
    scale = max(1.0, float(np.max(np.abs(R_ref))))
    assert np.max(np.abs(R_main - R_ref)) < 1e-12 * scale


def test_regularized_solves_agree(mesh):
    for seed in (0, 1, 2):
        rng = np.random.default_rng(seed)
        params, ctx, u = random_data(mesh, rng)
        pot = solve_regularized(u, 1e-3, 1.0, ctx, mesh, params)
        ref_s, ref_e = oracle_solve_regularized(u, 1e-3, 1.0, ctx, mesh,
                                                params)
        assert np.max(np.abs(pot.phis - ref_s)) < 1e-8
        assert np.max(np.abs(pot.phie - ref_e)) < 1e-8


def test_limit_solves_agree(mesh):
    for seed in (3, 4):
        rng = np.random.default_rng(seed)
        params, ctx, u = random_data(mesh, rng)
        pot = solve_limit(u, ctx, mesh, params)
        ref_s, ref_e = oracle_solve_limit(u, ctx, mesh, params)
        assert np.max(np.abs(pot.phis - ref_s)) < 1e-8
        assert np.max(np.abs(pot.phie - ref_e)) < 1e-8


def test_source_agrees_with_oracle(mesh):
    rng = np.random.default_rng(9)
    params, ctx, u = random_data(mesh, rng)
    phis = rng.uniform(-1, 1, mesh.n_solid)
    phie = rng.uniform(-1, 1, mesh.n_cells)
    gs, ge = potential_gradients(mesh, phis, phie)
    for q_form in ("potential_difference", "overpotential"):
        q_main = source_Q_eps(u, phis, phie, gs, ge, ctx, mesh, q_form)
        q_ref = oracle_source(u, phis, phie, ctx, mesh, params, q_form)
        scale = max(1.0, float(np.max(np.abs(q_ref))))
        assert np.max(np.abs(q_main - q_ref)) < 1e-12 * scale


def test_heat_step_agrees_with_oracle(mesh):
    rng = np.random.default_rng(14)
    params, ctx, u = random_data(mesh, rng)
    q = rng.uniform(-0.5, 0.5, mesh.n_cells)
    for convention in ("cooling", "literal"):
        a = step_temperature(u, 0.2, q, mesh, params,
                             robin_convention=convention)
        b = oracle_heat_step(u, 0.2, q, mesh, params,
                             robin_convention=convention)
        assert np.max(np.abs(a - b)) < 1e-12
    w = ctx.u0 + 0.3
    a = step_temperature(u, 0.2, q, mesh, params, w_boundary=w)
    b = oracle_heat_step(u, 0.2, q, mesh, params, w_boundary=w)
    assert np.max(np.abs(a - b)) < 1e-12


def test_apply_J_agrees_with_oracle(mesh):
    rng = np.random.default_rng(21)
    params, ctx, u = random_data(mesh, rng)
    settings = SolverSettings(dt=0.1, t_end=0.5)
    state = ctx.u0.copy()
    u_main, _ = apply_J(u, state, ctx, mesh, params, settings)
    u_ref, _, _ = oracle_apply_J(u, ctx, mesh, params, 0.1, 0.0, 1.0,
                                 boundary_mode="frozen", u_old=state)
    assert np.max(np.abs(u_main - u_ref)) < 1e-8


def test_brute_force_refuses_large_systems():
    big = build_sandwich_mesh(LENGTHS, (16, 8, 16))
    params = default_params(big)
    ctx = make_context(big, params, 1.0)
    with pytest.raises(SolverFailure, match="refuses"):
        brute_force_solve(big, ctx.u0, 0.0, 1.0, ctx, params)


def test_brute_force_small_system(mesh):
    params = default_params(mesh)
    ctx = make_context(mesh, params, 1.0)
    assert mesh.n_solid + mesh.n_cells <= ORACLE_CAP
    pot = brute_force_solve(mesh, ctx.u0, 1e-3, 1.0, ctx, params)
    assert pot.method == "oracle"
    assert pot.residual_norm < 1e-10
    main = solve_regularized(ctx.u0, 1e-3, 1.0, ctx, mesh, params)
    assert np.max(np.abs(pot.phis - main.phis)) < 1e-8


def test_fd_check_kernel_derivatives(mesh, ctx):
    rng = np.random.default_rng(6)
    samples = [(float(ctx.u0_solid[c] + rng.uniform(-0.8, 0.8)),
                float(rng.uniform(-1.5, 1.5)), int(c))
               for c in rng.integers(0, mesh.n_solid, 100)]
    for fid in ("d_ifara_dy2", "d_ifara_du"):
        res = fd_check(fid, samples, ctx)
        assert isinstance(res, FdCheckResult)
        assert res.max_rel_error <= 1e-6, fid
        assert res.n_checked + res.n_excluded == 100


def test_fd_check_excludes_clamp_edge(mesh, ctx):
    c = 0
    edge = float(ctx.u0_solid[c]) - ctx.eps
    samples = [(edge, 0.4, c), (edge + 0.5, 0.4, c)]
    res = fd_check("d_ifara_du", samples, ctx)
    assert res.n_excluded == 1 and res.n_checked == 1


def test_fd_check_source(mesh):
    rng = np.random.default_rng(12)
    params, ctx, u = random_data(mesh, rng)
    samples = []
    for _ in range(5):
        samples.append({
            "u": ctx.u0 + rng.uniform(-0.6, 0.6, mesh.n_cells),
            "phis": rng.uniform(-1, 1, mesh.n_solid),
            "phie": rng.uniform(-1, 1, mesh.n_cells),
            "du": rng.uniform(-1, 1, mesh.n_cells),
            "dphis": rng.uniform(-1, 1, mesh.n_solid),
            "dphie": rng.uniform(-1, 1, mesh.n_cells),
        })
    res = fd_check("source_Q_eps", samples, ctx, mesh=mesh)
    assert res.max_rel_error <= 1e-6
    assert res.n_checked == 5
    with pytest.raises(ThermocellError, match="mesh"):
        fd_check("source_Q_eps", samples, ctx)


def test_fd_check_unknown_id(ctx):
    with pytest.raises(ThermocellError, match="unknown fd_check id"):
        fd_check("nonsense", [], ctx)


def test_convergence_rate_fit():
    hs = [0.1, 0.05, 0.025, 0.0125]
    errors = [4.0 * h ** 2 for h in hs]
    assert convergence_rate(errors, hs) == pytest.approx(2.0, abs=1e-10)
    with pytest.raises(ThermocellError, match="at least 3"):
        convergence_rate([1.0, 0.5], [0.1, 0.05])
    with pytest.raises(ThermocellError, match="decreasing"):
        convergence_rate([1.0, 0.5, 0.25], [0.1, 0.1, 0.05])


def test_compare_fields_report():
    rep = compare_fields("case", "q", np.array([1.0, 2.0]),
                         np.array([1.0, 2.0 + 5e-9]), 1e-8)
    assert rep.passed and "pass" in rep.text()
    rep2 = compare_fields("case", "q", np.array([1.0]), np.array([2.0]), 1e-8)
    assert not rep2.passed and rep2.max_abs == pytest.approx(1.0)
