"""Truncated Butler-Volmer coupling kernel and the volumetric heat source.

The temperature argument enters only through the effective temperature
w = u0 - theta_eps(u0 - u), which equals u inside the band |u0 - u| <= eps
and is clamped to u0 -+ eps outside it.  That keeps w >= L0 - eps > 0, so
the 1/w exponents never blow up for admissible eps.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .errors import ThermocellError
from .params import epsilon_bounds

# cap on |alpha (y2 - U) / w| before exponentiation; bounded solves stay far
# below it, so hitting the cap flags divergence instead of overflowing
EXP_CAP = 350.0


@dataclass
class ButlerVolmerContext:
    params: object
    u0: np.ndarray        # initial temperature on all cells
    u0_solid: np.ndarray  # restriction to electrode cells
    eps: float
    L0: float
    c0: float             # 2 g0 alpha / (L0 - eps), conservative slope floor
    slope_floor: float    # 2 g0 alpha / (max u0 + eps), valid for every w
    truncation_enabled: bool = True

    def reset_flags(self):
        self.overflow_flag = False
        self.kink_flag = False

    def __post_init__(self):
        self.reset_flags()


def make_context(mesh, params, eps):
    """Validate eps against (0, L0) and precompute the slope constants."""
    L0, (lo, hi) = epsilon_bounds(params.u0)
    eps = float(eps)
    if not (lo < eps < hi):
        raise ThermocellError(
            "eps must lie in (0, L0) = (0, %g); got %g" % (L0, eps))
    c0 = 2.0 * params.g0 * params.alpha / (L0 - eps)
    # c0 is attained where w is clamped at its minimum L0 - eps; for larger w
    # the uniform floor weakens to 2 g0 alpha / w, so carry the worst case too
    slope_floor = 2.0 * params.g0 * params.alpha / (float(params.u0.max()) + eps)
    return ButlerVolmerContext(
        params=params,
        u0=np.asarray(params.u0, dtype=float),
        u0_solid=np.asarray(params.u0, dtype=float)[mesh.solid_cells],
        eps=eps,
        L0=L0,
        c0=c0,
        slope_floor=slope_floor,
    )


def context_without_truncation(ctx):
    """Same data but w = u verbatim; used to re-check accepted states."""
    out = ButlerVolmerContext(
        params=ctx.params, u0=ctx.u0, u0_solid=ctx.u0_solid, eps=ctx.eps,
        L0=ctx.L0, c0=ctx.c0, slope_floor=ctx.slope_floor,
        truncation_enabled=False)
    return out


def context_with_params(ctx, params):
    """Same truncation data with swapped coefficients; this is how a
    time-dependent open-circuit schedule enters the kernel."""
    return ButlerVolmerContext(
        params=params, u0=ctx.u0, u0_solid=ctx.u0_solid, eps=ctx.eps,
        L0=ctx.L0, c0=ctx.c0, slope_floor=ctx.slope_floor,
        truncation_enabled=ctx.truncation_enabled)


def theta_eps(s, eps):
    """Clamp s to [-eps, eps]."""
    if not eps > 0:
        raise ThermocellError("eps must be positive")
    return np.clip(s, -eps, eps)


def effective_temperature(u, u0, eps, enabled=True):
    """w = u0 - theta_eps(u0 - u).

    Inside the band the returned values are u itself, bit for bit, so a
    re-solve without truncation reproduces in-band results exactly.
    """
    u = np.asarray(u, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    if not enabled:
        return u.copy() if u.shape else u
    d = u0 - u
    clamped = u0 - np.sign(d) * eps
    w = np.where(np.abs(d) <= eps, u, clamped)
    if w.ndim == 0:
        return float(w)
    return w


def _capped(a, ctx):
    over = np.abs(a) > EXP_CAP
    if np.any(over):
        ctx.overflow_flag = True
        a = np.clip(a, -EXP_CAP, EXP_CAP)
    return a


def i_fara_eps(u, y2, cell, ctx):
    """Truncated interfacial current density 2 g1 sinh(alpha (y2 - U) / w).

    cell indexes the electrode-cell ordering (scalar or array).  u is the
    temperature at those cells.
    """
    g1 = ctx.params.g1[cell]
    U = ctx.params.U[cell]
    u0 = ctx.u0_solid[cell]
    w = effective_temperature(u, u0, ctx.eps, ctx.truncation_enabled)
    a = _capped(ctx.params.alpha * (np.asarray(y2, dtype=float) - U) / w, ctx)
    out = 2.0 * g1 * np.sinh(a)
    return float(out) if np.ndim(out) == 0 else out


def i_fara_eps_two_exp(u, y2, cell, ctx):
    """Same kernel evaluated literally as the difference of two exponential
    products g1 (e^{a y2/w} e^{-a U/w} - e^{-a y2/w} e^{a U/w})."""
    g1 = ctx.params.g1[cell]
    U = ctx.params.U[cell]
    u0 = ctx.u0_solid[cell]
    w = effective_temperature(u, u0, ctx.eps, ctx.truncation_enabled)
    alpha = ctx.params.alpha
    b1 = _capped(alpha * np.asarray(y2, dtype=float) / w, ctx)
    b2 = _capped(alpha * U / w, ctx)
    out = g1 * (np.exp(b1) * np.exp(-b2) - np.exp(-b1) * np.exp(b2))
    return float(out) if np.ndim(out) == 0 else out


def d_ifara_dy2(u, y2, cell, ctx):
    """Derivative in the potential difference: 2 g1 alpha cosh(a) / w > 0."""
    g1 = ctx.params.g1[cell]
    U = ctx.params.U[cell]
    u0 = ctx.u0_solid[cell]
    w = effective_temperature(u, u0, ctx.eps, ctx.truncation_enabled)
    a = _capped(ctx.params.alpha * (np.asarray(y2, dtype=float) - U) / w, ctx)
    out = 2.0 * g1 * ctx.params.alpha * np.cosh(a) / w
    return float(out) if np.ndim(out) == 0 else out


def d_ifara_du(u, y2, cell, ctx):
    """Derivative in temperature through w; zero where the clamp is active.

    At the clamp edge |u0 - u| = eps the derivative is one-sided; the
    band-interior value is returned and ctx.kink_flag is raised.
    """
    g1 = ctx.params.g1[cell]
    U = ctx.params.U[cell]
    u0 = ctx.u0_solid[cell]
    d = np.abs(np.asarray(u0 - u, dtype=float))
    if ctx.truncation_enabled and np.any(d == ctx.eps):
        ctx.kink_flag = True
    w = effective_temperature(u, u0, ctx.eps, ctx.truncation_enabled)
    a = _capped(ctx.params.alpha * (np.asarray(y2, dtype=float) - U) / w, ctx)
    inner = 2.0 * g1 * np.cosh(a) * (-a / w)
    if ctx.truncation_enabled:
        out = np.where(d <= ctx.eps, inner, 0.0)
    else:
        out = inner
    return float(out) if np.ndim(out) == 0 else out


def at_theta_kink(u, u0, eps):
    """True where |u0 - u| sits exactly on the clamp edge."""
    return np.abs(np.asarray(u0, dtype=float) - np.asarray(u, dtype=float)) == eps


def kernel_fields(u_solid, y2, ctx):
    """Vectorized kernel and slope over all electrode cells."""
    cells = np.arange(len(ctx.u0_solid))
    return (i_fara_eps(u_solid, y2, cells, ctx),
            d_ifara_dy2(u_solid, y2, cells, ctx))


def cell_f(mesh, f_faces):
    """Average the per-face normal components of f onto cells, one column per
    axis."""
    out = np.zeros((mesh.n_cells, mesh.dimension))
    count = np.zeros((mesh.n_cells, mesh.dimension))
    for fi in range(mesh.n_faces):
        a = mesh.face_axis[fi]
        if a >= mesh.dimension:
            continue
        for c in mesh.face_cells[fi]:
            if c >= 0:
                out[c, a] += f_faces[fi]
                count[c, a] += 1.0
    return out / np.maximum(count, 1.0)


def source_Q_eps(u, phis, phie, grad_phis, grad_phie, ctx, mesh,
                 q_form="potential_difference"):
    """Volumetric heat source on all cells.

    Q = [A_s i (phis - phie) + sigma_s |grad phis|^2] on electrodes
        + sigma_e |grad phie|^2 + d1 sigma_e w f . grad phie  everywhere.

    q_form "overpotential" replaces the kernel factor (phis - phie) by
    (phis - phie - U).
    """
    params = ctx.params
    u = np.asarray(u, dtype=float)
    if len(u) != mesh.n_cells or len(phie) != mesh.n_cells:
        raise ThermocellError("field sizes do not match the mesh")
    if len(phis) != mesh.n_solid:
        raise ThermocellError("phis must live on the electrode cells")
    w = effective_temperature(u, ctx.u0, ctx.eps, ctx.truncation_enabled)
    Q = params.sigma_e * np.sum(np.asarray(grad_phie) ** 2, axis=1)
    fc = cell_f(mesh, params.f_faces)
    Q = Q + params.d1 * params.sigma_e * w * np.sum(fc * grad_phie, axis=1)
    sc = mesh.solid_cells
    y2 = np.asarray(phis) - np.asarray(phie)[sc]
    i_val = i_fara_eps(u[sc], y2, np.arange(mesh.n_solid), ctx)
    factor = y2 - params.U if q_form == "overpotential" else y2
    solid_part = (params.A_s * i_val * factor
                  + params.sigma_s * np.sum(np.asarray(grad_phis) ** 2, axis=1))
    Q[sc] += solid_part
    return Q


def potential_gradients(mesh, phis, phie):
    """Cell gradients of both potentials; the solid one never differences
    across a block boundary."""
    from .mesh import cell_gradients
    grad_phis = cell_gradients(mesh, phis, cells=mesh.solid_cells,
                               restrict_to_block=True)
    grad_phie = cell_gradients(mesh, phie)
    return grad_phis, grad_phie


def source_Q_directional(u, phis, phie, du, dphis, dphie, ctx, mesh,
                         q_form="potential_difference"):
    """Directional derivative of source_Q_eps along (du, dphis, dphie).

    The gradient reconstruction is linear, so perturbation gradients are the
    reconstruction applied to the perturbations.  The temperature enters
    through w, whose derivative vanishes where the clamp is active; samples
    on the clamp edge belong to the caller's exclusion logic.
    """
    from .mesh import cell_gradients
    params = ctx.params
    u = np.asarray(u, dtype=float)
    du = np.asarray(du, dtype=float)
    w = effective_temperature(u, ctx.u0, ctx.eps, ctx.truncation_enabled)
    if ctx.truncation_enabled:
        dw = np.where(np.abs(ctx.u0 - u) <= ctx.eps, du, 0.0)
    else:
        dw = du
    grad_phis, grad_phie = potential_gradients(mesh, phis, phie)
    dgrad_s = cell_gradients(mesh, dphis, cells=mesh.solid_cells,
                             restrict_to_block=True)
    dgrad_e = cell_gradients(mesh, dphie)
    fc = cell_f(mesh, params.f_faces)
    dQ = 2.0 * params.sigma_e * np.sum(grad_phie * dgrad_e, axis=1)
    dQ += params.d1 * params.sigma_e * (
        dw * np.sum(fc * grad_phie, axis=1)
        + w * np.sum(fc * dgrad_e, axis=1))
    sc = mesh.solid_cells
    cells = np.arange(mesh.n_solid)
    y2 = np.asarray(phis) - np.asarray(phie)[sc]
    dy2 = np.asarray(dphis) - np.asarray(dphie)[sc]
    ival = i_fara_eps(u[sc], y2, cells, ctx)
    d_dy2 = d_ifara_dy2(u[sc], y2, cells, ctx)
    d_du = d_ifara_du(u[sc], y2, cells, ctx)
    factor = y2 - params.U if q_form == "overpotential" else y2
    d_i = d_dy2 * dy2 + d_du * du[sc]
    dQ[sc] += params.A_s * (d_i * factor + ival * dy2)
    dQ[sc] += 2.0 * params.sigma_s * np.sum(grad_phis * dgrad_s, axis=1)
    return dQ
