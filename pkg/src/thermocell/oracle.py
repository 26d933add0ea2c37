"""Slow reference implementations used to cross-check the production solver.

Everything here is built along a different construction path on purpose:
scalar loops instead of vectorized scatters, the two-exponential kernel form
instead of sinh, finite-difference Jacobians instead of analytic ones, and a
pin-one-unknown-then-shift closure for the constrained limit problem instead
of a bordered system.  Agreement with the fast path is therefore evidence
about signs, indexing, and assembly, not a tautology.

These routines are meant for the small meshes used in tests; they make no
attempt at speed.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .butler_volmer import (d_ifara_dy2, d_ifara_du,
                            i_fara_eps, i_fara_eps_two_exp,
                            potential_gradients, source_Q_directional,
                            source_Q_eps)
from .errors import SolverFailure, ThermocellError
from .mesh import GAMMA_A

ORACLE_CAP = 64


def _w_scalar(u_c, u0_c, eps, enabled):
    if not enabled:
        return u_c
    lo = u0_c - eps
    hi = u0_c + eps
    return min(max(u_c, lo), hi)


def _face_coeff(mesh, coeff, f):
    c_lo, c_hi = mesh.face_cells[f]
    d_lo, d_hi = mesh.face_dist[f]
    return mesh.face_measure[f] / (d_lo / coeff[c_lo] + d_hi / coeff[c_hi])


def _neighbors(mesh, c, axis):
    lo = mesh.nbr_lo[axis, c]
    hi = mesh.nbr_hi[axis, c]
    return lo, hi


def _axis_coord(mesh, c, axis):
    return mesh.cell_x[c] if axis == 0 else mesh.cell_y[c]


def _block_gradient(mesh, values, c, restrict):
    """Per-axis gradient at cell c by central or one-sided differences,
    recomputed from scratch with scalar arithmetic."""
    grads = []
    region = mesh.cell_region[c]
    for axis in range(mesh.dimension):
        lo, hi = _neighbors(mesh, c, axis)
        if restrict:
            if lo >= 0 and mesh.cell_region[lo] != region:
                lo = -1
            if hi >= 0 and mesh.cell_region[hi] != region:
                hi = -1
        if lo >= 0 and hi >= 0:
            g = (values[hi] - values[lo]) / (
                _axis_coord(mesh, hi, axis) - _axis_coord(mesh, lo, axis))
        elif hi >= 0:
            g = (values[hi] - values[c]) / (
                _axis_coord(mesh, hi, axis) - _axis_coord(mesh, c, axis))
        elif lo >= 0:
            g = (values[c] - values[lo]) / (
                _axis_coord(mesh, c, axis) - _axis_coord(mesh, lo, axis))
        else:
            g = 0.0
        grads.append(g)
    return grads


def oracle_residual(phis, phie, u, tau, delta, ctx, mesh, params):
    """Scalar-loop residual of the potential system."""
    ns = mesh.n_solid
    R_s = np.zeros(ns)
    R_e = np.zeros(mesh.n_cells)
    for f in mesh.solid_faces:
        c_lo, c_hi = mesh.face_cells[f]
        T = _face_coeff(mesh, _global_sigma_s(mesh, params), f)
        flux = T * (phis[mesh.solid_index[c_lo]] - phis[mesh.solid_index[c_hi]])
        R_s[mesh.solid_index[c_lo]] += flux
        R_s[mesh.solid_index[c_hi]] -= flux
    for f in mesh.interior_faces:
        c_lo, c_hi = mesh.face_cells[f]
        T = _face_coeff(mesh, params.sigma_e, f)
        flux = T * (phie[c_lo] - phie[c_hi])
        R_e[c_lo] += flux
        R_e[c_hi] -= flux
    for si, c in enumerate(mesh.solid_cells):
        w = _w_scalar(u[c], ctx.u0[c], ctx.eps, ctx.truncation_enabled)
        y2 = phis[si] - phie[c]
        ival = i_fara_eps_two_exp(np.array([u[c]]), np.array([y2]),
                                  np.array([si]), ctx)[0]
        V = mesh.cell_measure[c]
        R_s[si] += tau * V * phis[si] + delta * params.A_s * ival * V
        R_e[c] += -delta * params.A_s * ival * V
    for c in range(mesh.n_cells):
        R_e[c] += tau * mesh.cell_measure[c] * phie[c]
    for f in np.concatenate([mesh.gamma_a_faces, mesh.gamma_c_faces]):
        c = mesh.face_cells[f, 0]
        I = params.I_a if mesh.face_tag[f] == GAMMA_A else params.I_c
        R_s[mesh.solid_index[c]] -= delta * I * mesh.face_measure[f]
    for f in mesh.interior_faces:
        fv = params.f_faces[f]
        if fv == 0.0:
            continue
        c_lo, c_hi = mesh.face_cells[f]
        w_lo = _w_scalar(u[c_lo], ctx.u0[c_lo], ctx.eps, ctx.truncation_enabled)
        w_hi = _w_scalar(u[c_hi], ctx.u0[c_hi], ctx.eps, ctx.truncation_enabled)
        G = 0.5 * params.d1 * (params.sigma_e[c_lo] * w_lo
                               + params.sigma_e[c_hi] * w_hi) * fv \
            * mesh.face_measure[f]
        R_e[c_lo] += delta * G
        R_e[c_hi] -= delta * G
    return R_s, R_e


def _global_sigma_s(mesh, params):
    out = np.ones(mesh.n_cells)
    out[mesh.solid_cells] = params.sigma_s
    return out


def _fd_newton(res_fn, x0, tol=1e-11, max_iter=80):
    x = x0.copy()
    n = len(x)
    for _ in range(max_iter):
        r = res_fn(x)
        rn = np.max(np.abs(r))
        if rn <= tol:
            return x
        J = np.zeros((n, n))
        for j in range(n):
            h = 1e-7 * max(1.0, abs(x[j]))
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            J[:, j] = (res_fn(xp) - res_fn(xm)) / (2.0 * h)
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SolverFailure("oracle linear solve failed: %s" % exc)
        t = 1.0
        while t > 2.0 ** -16:
            rn_new = np.max(np.abs(res_fn(x + t * dx)))
            if rn_new < rn:
                break
            t *= 0.5
        x = x + t * dx
    r = res_fn(x)
    if np.max(np.abs(r)) > tol:
        raise SolverFailure("oracle Newton stalled at %g" % np.max(np.abs(r)))
    return x


def oracle_solve_regularized(u, tau, delta, ctx, mesh, params):
    """Plain unconstrained finite-difference Newton; valid because tau > 0
    makes the system nonsingular without any constraint."""
    if not tau > 0:
        raise SolverFailure("oracle_solve_regularized needs tau > 0")
    ns = mesh.n_solid
    nc = mesh.n_cells

    def res(x):
        R_s, R_e = oracle_residual(x[:ns], x[ns:], u, tau, delta,
                                   ctx, mesh, params)
        return np.concatenate([R_s, R_e])

    x = _fd_newton(res, np.zeros(ns + nc))
    return x[:ns], x[ns:]


def oracle_solve_limit(u, ctx, mesh, params, delta=1.0):
    """tau = 0 solve by pinning one electrolyte value, then shifting the
    joint constant so the weighted sums cancel.  Dropping one equation is
    consistent because the equations sum to zero when the contact currents
    balance."""
    ns = mesh.n_solid
    nc = mesh.n_cells
    pin = ns + nc - 1

    def res(x):
        R_s, R_e = oracle_residual(x[:ns], x[ns:], u, 0.0, delta,
                                   ctx, mesh, params)
        full = np.concatenate([R_s, R_e])
        full[pin] = x[pin]
        return full

    x = _fd_newton(res, np.zeros(ns + nc))
    phis, phie = x[:ns], x[ns:]
    M_s = np.sum(mesh.cell_measure[mesh.solid_cells])
    M_e = np.sum(mesh.cell_measure)
    total = (np.dot(mesh.cell_measure[mesh.solid_cells], phis)
             + np.dot(mesh.cell_measure, phie))
    c = total / (M_s + M_e)
    return phis - c, phie - c


def oracle_source(u, phis, phie, ctx, mesh, params, q_form="potential_difference"):
    """Scalar-loop volumetric heat source."""
    U_arr = params.U
    q = np.zeros(mesh.n_cells)
    for c in range(mesh.n_cells):
        ge = _block_gradient(mesh, phie, c, restrict=False)
        q[c] += params.sigma_e[c] * sum(g * g for g in ge)
        w = _w_scalar(u[c], ctx.u0[c], ctx.eps, ctx.truncation_enabled)
        f_axis = []
        for axis in range(mesh.dimension):
            acc = 0.0
            cnt = 0
            for f in range(mesh.n_faces):
                if mesh.face_axis[f] != axis:
                    continue
                if c in mesh.face_cells[f]:
                    acc += params.f_faces[f]
                    cnt += 1
            f_axis.append(acc / cnt if cnt else 0.0)
        q[c] += params.d1 * params.sigma_e[c] * w * sum(
            fa * g for fa, g in zip(f_axis, ge))
    phis_full = np.zeros(mesh.n_cells)
    phis_full[mesh.solid_cells] = phis
    for si, c in enumerate(mesh.solid_cells):
        gs = _block_gradient(mesh, phis_full, c, restrict=True)
        q[c] += params.sigma_s[si] * sum(g * g for g in gs)
        y2 = phis[si] - phie[c]
        ival = i_fara_eps_two_exp(np.array([u[c]]), np.array([y2]),
                                  np.array([si]), ctx)[0]
        factor = y2 if q_form == "potential_difference" else y2 - U_arr[si]
        q[c] += params.A_s * ival * factor
    return q


def oracle_heat_step(u_old, dt, q, mesh, params, w_boundary=None,
                     robin_convention="cooling"):
    """Scalar-loop implicit Euler step."""
    sign = 1.0 if robin_convention == "cooling" else -1.0
    n = mesh.n_cells
    M = np.zeros((n, n))
    b = np.zeros(n)
    for c in range(n):
        a = params.rho_cp * mesh.cell_measure[c] / dt
        M[c, c] += a
        b[c] += a * u_old[c]
        if q is not None:
            b[c] += q[c] * mesh.cell_measure[c]
    for f in mesh.interior_faces:
        c_lo, c_hi = mesh.face_cells[f]
        T = _face_coeff(mesh, params.k, f)
        M[c_lo, c_lo] += T
        M[c_hi, c_hi] += T
        M[c_lo, c_hi] -= T
        M[c_hi, c_lo] -= T
    for f in mesh.boundary_faces:
        c = mesh.face_cells[f, 0]
        Af = mesh.face_measure[f]
        if params.k1 == 0:
            continue
        if w_boundary is None:
            if sign > 0:
                C = Af / (mesh.face_dist[f, 0] / params.k[c] + 1.0 / params.k1)
                M[c, c] += C
                b[c] += C * params.T_a
            else:
                M[c, c] -= params.k1 * Af
                b[c] -= params.k1 * Af * params.T_a
        else:
            out = sign * params.k1 * (w_boundary[c] - params.T_a) * Af
            b[c] -= out
    return np.linalg.solve(M, b)


@dataclass
class OracleReport:
    case: str
    quantity: str
    max_abs: float
    max_rel: float
    tol: float
    passed: bool

    def text(self):
        return ("%-24s %-16s max_abs=%-12.4g max_rel=%-12.4g tol=%g  %s"
                % (self.case, self.quantity, self.max_abs, self.max_rel,
                   self.tol, "pass" if self.passed else "FAIL"))


def compare_fields(case, quantity, main, other, tol):
    main = np.asarray(main, dtype=float)
    other = np.asarray(other, dtype=float)
    diff = np.abs(main - other)
    max_abs = float(np.max(diff)) if diff.size else 0.0
    denom = np.maximum(np.abs(other), 1e-30)
    max_rel = float(np.max(diff / denom)) if diff.size else 0.0
    return OracleReport(case, quantity, max_abs, max_rel, tol, max_abs <= tol)


def brute_force_solve(mesh, u, tau, delta, ctx, params):
    """Reference potential solve, refusing anything beyond desk scale."""
    from .potentials import PotentialPair
    n = mesh.n_solid + mesh.n_cells
    if n > ORACLE_CAP:
        raise SolverFailure(
            "oracle refuses systems beyond %d unknowns (got %d)"
            % (ORACLE_CAP, n))
    if tau > 0:
        phis, phie = oracle_solve_regularized(u, tau, delta, ctx, mesh, params)
    else:
        phis, phie = oracle_solve_limit(u, ctx, mesh, params, delta)
    R_s, R_e = oracle_residual(phis, phie, u, tau, delta, ctx, mesh, params)
    rn = float(max(np.max(np.abs(R_s)), np.max(np.abs(R_e))))
    return PotentialPair(phis=phis, phie=phie, tau=tau, delta=delta,
                         residual_norm=rn, method="oracle").finalize(mesh)


@dataclass
class FdCheckResult:
    max_rel_error: float
    n_checked: int
    n_excluded: int


FD_FUNCTIONS = ("d_ifara_dy2", "d_ifara_du", "source_Q_eps")


def fd_check(function_id, samples, ctx, step=1e-6, mesh=None,
             q_form="potential_difference"):
    """Central-difference audit of an analytic derivative.

    Kernel samples are (u, y2, cell) triples; source samples are dicts with
    the three fields and a perturbation direction for each.  Samples whose
    finite-difference stencil straddles the clamp edge are excluded and
    counted, not failed, since the derivative is one-sided there.
    """
    if function_id not in FD_FUNCTIONS:
        raise ThermocellError("unknown fd_check id %r; choose from %s"
                              % (function_id, ", ".join(FD_FUNCTIONS)))
    worst = 0.0
    checked = 0
    excluded = 0
    if function_id in ("d_ifara_dy2", "d_ifara_du"):
        for u, y2, cell in samples:
            cell = int(cell)
            if function_id == "d_ifara_du":
                dist = abs(float(ctx.u0_solid[cell]) - u)
                if ctx.truncation_enabled and abs(dist - ctx.eps) <= 2 * step:
                    excluded += 1
                    continue
                fd = (i_fara_eps(u + step, y2, cell, ctx)
                      - i_fara_eps(u - step, y2, cell, ctx)) / (2 * step)
                an = d_ifara_du(u, y2, cell, ctx)
            else:
                fd = (i_fara_eps(u, y2 + step, cell, ctx)
                      - i_fara_eps(u, y2 - step, cell, ctx)) / (2 * step)
                an = d_ifara_dy2(u, y2, cell, ctx)
            worst = max(worst, abs(fd - an) / max(abs(an), 1e-30))
            checked += 1
        return FdCheckResult(worst, checked, excluded)
    if mesh is None:
        raise ThermocellError("source_Q_eps check needs a mesh")
    for s in samples:
        u, phis, phie = s["u"], s["phis"], s["phie"]
        du, dphis, dphie = s["du"], s["dphis"], s["dphie"]
        dist = np.abs(ctx.u0 - np.asarray(u, dtype=float))
        if ctx.truncation_enabled and np.any(
                (np.abs(dist - ctx.eps) <= 2 * step) & (np.asarray(du) != 0)):
            excluded += 1
            continue

        def q_at(sg):
            uu = u + sg * step * du
            ps = phis + sg * step * dphis
            pe = phie + sg * step * dphie
            gs, ge = potential_gradients(mesh, ps, pe)
            return source_Q_eps(uu, ps, pe, gs, ge, ctx, mesh, q_form)

        fd = (q_at(+1.0) - q_at(-1.0)) / (2 * step)
        an = source_Q_directional(u, phis, phie, du, dphis, dphie, ctx, mesh,
                                  q_form)
        scale = max(float(np.max(np.abs(an))), 1e-30)
        worst = max(worst, float(np.max(np.abs(fd - an))) / scale)
        checked += 1
    return FdCheckResult(worst, checked, excluded)


def convergence_rate(errors, hs):
    """Least-squares slope of log error against log h."""
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if len(errors) < 3 or len(errors) != len(hs):
        raise ThermocellError("convergence_rate needs at least 3 (h, error) pairs")
    if np.any(np.diff(hs) >= 0):
        raise ThermocellError("h values must be strictly decreasing")
    slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
    return float(slope)


def oracle_apply_J(u, ctx, mesh, params, dt, tau, delta,
                   q_form="potential_difference", robin_convention="cooling",
                   boundary_mode="implicit", u_old=None):
    """One alternating-map sweep along the slow path: potential solve at the
    frozen temperature, source evaluation, one heat step.  The heat step
    starts from u_old (the accepted field at the start of the step) while
    the exchange data is evaluated at u; u_old defaults to u."""
    if tau > 0:
        phis, phie = oracle_solve_regularized(u, tau, delta, ctx, mesh,
                                              params)
    else:
        phis, phie = oracle_solve_limit(u, ctx, mesh, params, delta)
    q = oracle_source(u, phis, phie, ctx, mesh, params, q_form)
    if boundary_mode == "frozen":
        wb = np.array([
            _w_scalar(u[c], ctx.u0[c], ctx.eps, ctx.truncation_enabled)
            for c in range(mesh.n_cells)])
    else:
        wb = None
    base = u if u_old is None else np.asarray(u_old, dtype=float)
    u_next = oracle_heat_step(base, dt, q, mesh, params, w_boundary=wb,
                              robin_convention=robin_convention)
    return u_next, phis, phie
