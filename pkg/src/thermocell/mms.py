"""Manufactured-solution convergence studies.

Three cases:

heat_space   insulated slab, exact solution T_a + t cos(pi x / L).  The
             solution is linear in time, so implicit Euler with the forcing
             taken at the new time level commits no temporal error and the
             measured decay is the pure spatial rate (2).

heat_time    spatially uniform exact solution T_a + 1 - cos(t).  All fluxes
             vanish, so the error is the pure implicit Euler rate (1).

potential    trigonometric potentials on the electrode sandwich with a
             polynomial correction carrying the contact currents.  No solve
             is involved; the discrete residual is evaluated at the sampled
             exact solution with the strong-form forcing subtracted, and the
             divided residual must shrink at rate 2.  The fields are built so
             the third derivatives vanish at the contacts and at the block
             interfaces, which keeps the one-sided boundary closures from
             degrading the observed rate.

The potential forcing is additionally audited against closed-form block
integrals: summed over the domain, conduction telescopes to boundary
gradients, the f term telescopes to boundary values of f, and the kernel
contributions cancel between the two equations, leaving only the tau terms.
A 50-point Gauss-Legendre quadrature of the forcing must reproduce that
bookkeeping to near machine precision before any mesh is touched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .butler_volmer import make_context
from .heat import step_temperature
from .mesh import build_sandwich_mesh, ANODE, CATHODE, SEPARATOR
from .params import make_params
from .potentials import PotentialPair, assemble_residual


@dataclass
class MmsCase:
    name: str
    sizes: list
    errors: list
    rates: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.rates:
            e = self.errors
            self.rates = [float(np.log2(e[i] / e[i + 1]))
                          for i in range(len(e) - 1)]

    def text(self):
        lines = ["case %s" % self.name,
                 "  %-12s %-14s %s" % ("size", "error", "rate")]
        for i, (s, e) in enumerate(zip(self.sizes, self.errors)):
            r = "" if i == 0 else "%.3f" % self.rates[i - 1]
            lines.append("  %-12.6g %-14.6g %s" % (s, e, r))
        return "\n".join(lines)


# shared geometry for all cases: equal cell widths in every block
LENGTHS = (1.0, 0.5, 1.0)
BASE_CELLS = (4, 2, 4)


def _mesh(level):
    cells = tuple(c * 2 ** level for c in BASE_CELLS)
    return build_sandwich_mesh(LENGTHS, cells)


def run_heat_space(levels=4, dt=0.02, t_end=0.2):
    rho_cp, k, T_a = 1.3, 0.8, 2.0
    L = sum(LENGTHS)
    errors, sizes = [], []
    for level in range(levels):
        mesh = _mesh(level)
        params = make_params(mesh, rho_cp=rho_cp, k=k, T_a=T_a, k1=0.0,
                             u0=T_a)
        x = mesh.cell_x
        cos = np.cos(np.pi * x / L)
        u = T_a + 0.0 * cos
        n_steps = int(round(t_end / dt))
        for n in range(n_steps):
            t_new = (n + 1) * dt
            q = rho_cp * cos + k * t_new * (np.pi / L) ** 2 * cos
            u = step_temperature(u, dt, q, mesh, params)
        exact = T_a + t_end * cos
        errors.append(float(np.max(np.abs(u - exact))))
        sizes.append(L / mesh.n_cells)
    return MmsCase("heat_space", sizes, errors,
                   detail={"dt": dt, "t_end": t_end})


def run_heat_time(levels=4, dt0=0.2, t_end=1.0):
    rho_cp, T_a = 1.3, 2.0
    mesh = _mesh(0)
    params = make_params(mesh, rho_cp=rho_cp, T_a=T_a, k1=0.0, u0=T_a)
    errors, sizes = [], []
    for level in range(levels):
        dt = dt0 / 2 ** level
        u = np.full(mesh.n_cells, T_a)
        n_steps = int(round(t_end / dt))
        for n in range(n_steps):
            t_new = (n + 1) * dt
            q = np.full(mesh.n_cells, rho_cp * np.sin(t_new))
            u = step_temperature(u, dt, q, mesh, params)
        exact = T_a + 1.0 - np.cos(t_end)
        errors.append(float(np.max(np.abs(u - exact))))
        sizes.append(dt)
    return MmsCase("heat_time", sizes, errors, detail={"t_end": t_end})


class _PotentialExact:
    """Closed-form fields and forcings for the potential case."""

    def __init__(self):
        self.La, self.Ls, self.Lc = LENGTHS
        self.L = sum(LENGTHS)
        self.Lb = self.La + self.Ls
        self.sigma_s, self.sigma_e = 2.0, 1.5
        self.tau, self.delta = 0.7, 1.0
        self.A_s, self.alpha = 0.9, 1.1
        self.g1, self.g0, self.Uoc = 0.8, 0.4, 0.1
        self.d1, self.f0 = 0.2, 0.6
        self.u0, self.eps = 2.0, 0.5
        self.w = self.u0
        self.Ba, self.Da = 0.25, 0.05
        self.Bc, self.Dc = 0.20, -0.08
        self.G = 0.15
        self.E = 0.3
        # contact data carried by the polynomial part; the cosine parts have
        # zero slope and zero third derivative at every block end
        self.I_a = -self.sigma_s * self.G / self.delta
        self.I_c = self.sigma_s * self.G / self.delta

    def phis(self, x, region):
        if region == ANODE:
            return (self.Ba * np.cos(np.pi * x / self.La)
                    + self.G * (x - x ** 2 / (2 * self.La)) + self.Da)
        xi = x - self.Lb
        return (self.Bc * np.cos(np.pi * xi / self.Lc)
                + self.G * xi ** 2 / (2 * self.Lc) + self.Dc)

    def phis_xx(self, x, region):
        if region == ANODE:
            return (-self.Ba * (np.pi / self.La) ** 2
                    * np.cos(np.pi * x / self.La) - self.G / self.La)
        xi = x - self.Lb
        return (-self.Bc * (np.pi / self.Lc) ** 2
                * np.cos(np.pi * xi / self.Lc) + self.G / self.Lc)

    def phie(self, x):
        return self.E * np.cos(np.pi * x / self.L)

    def phie_xx(self, x):
        return -self.E * (np.pi / self.L) ** 2 * np.cos(np.pi * x / self.L)

    def f(self, x):
        return self.f0 * np.sin(np.pi * x / self.L)

    def f_x(self, x):
        return self.f0 * (np.pi / self.L) * np.cos(np.pi * x / self.L)

    def kernel(self, x, region):
        y2 = self.phis(x, region) - self.phie(x)
        a = self.alpha * (y2 - self.Uoc) / self.w
        return 2.0 * self.g1 * np.sinh(a)

    def forcing_s(self, x, region):
        return (-self.sigma_s * self.phis_xx(x, region)
                + self.tau * self.phis(x, region)
                + self.delta * self.A_s * self.kernel(x, region))

    def forcing_e(self, x, region):
        out = (-self.sigma_e * self.phie_xx(x)
               + self.tau * self.phie(x)
               + self.delta * self.d1 * self.sigma_e * self.w * self.f_x(x))
        if region != SEPARATOR:
            out = out - self.delta * self.A_s * self.kernel(x, region)
        return out

    def build(self, mesh):
        params = make_params(
            mesh, sigma_s=self.sigma_s, sigma_e=self.sigma_e, A_s=self.A_s,
            alpha=self.alpha, g1=self.g1, g0=self.g0, U=self.Uoc,
            d1=self.d1, u0=self.u0, I_a=self.I_a, I_c=self.I_c,
            f=self._face_f(mesh))
        ctx = make_context(mesh, params, self.eps)
        return params, ctx

    def _face_f(self, mesh):
        f = np.zeros(mesh.n_faces)
        itf = mesh.interior_faces
        f[itf] = self.f(mesh.face_x[itf])
        return f


def run_potential(levels=4):
    ex = _PotentialExact()
    errors, sizes = [], []
    for level in range(levels):
        mesh = _mesh(level)
        params, ctx = ex.build(mesh)
        x = mesh.cell_x
        reg = mesh.cell_region
        phie = ex.phie(x)
        xs = x[mesh.solid_cells]
        rs = reg[mesh.solid_cells]
        phis = np.where(rs == ANODE, ex.phis(xs, ANODE), ex.phis(xs, CATHODE))
        S_s = np.where(rs == ANODE, ex.forcing_s(xs, ANODE),
                       ex.forcing_s(xs, CATHODE))
        S_e = np.empty(mesh.n_cells)
        for region in (ANODE, SEPARATOR, CATHODE):
            m = reg == region
            S_e[m] = ex.forcing_e(x[m], region)
        u = np.full(mesh.n_cells, ex.u0)
        pot = PotentialPair(phis=phis, phie=phie, tau=ex.tau, delta=ex.delta)
        R = assemble_residual(pot, u, ctx, mesh, params,
                              extra_s=S_s, extra_e=S_e)
        ns = mesh.n_solid
        divided = np.concatenate([
            R[:ns] / mesh.cell_measure[mesh.solid_cells],
            R[ns:] / mesh.cell_measure])
        errors.append(float(np.max(np.abs(divided))))
        sizes.append(sum(LENGTHS) / mesh.n_cells)
    return MmsCase("potential", sizes, errors)


def forcing_compatibility():
    """Quadrature audit of the manufactured forcing.

    Integrated over the sandwich, the forcing must reduce to the closed-form
    bookkeeping: conduction gives sigma_s G per electrode with opposite
    contact signs, the electrolyte boundary gradients and the f boundary
    values vanish, the kernel terms cancel pairwise, and what survives is
    tau times the block integrals of the exact potentials.  Returns the
    worst absolute discrepancy over the individual audits.
    """
    ex = _PotentialExact()
    nodes, weights = np.polynomial.legendre.leggauss(50)

    def integrate(fn, a, b):
        xm = 0.5 * (a + b) + 0.5 * (b - a) * nodes
        return 0.5 * (b - a) * float(np.sum(weights * fn(xm)))

    blocks = [
        (ANODE, 0.0, ex.La),
        (SEPARATOR, ex.La, ex.Lb),
        (CATHODE, ex.Lb, ex.L),
    ]
    gaps = []

    # conduction in the solid telescopes to the contact gradients
    for region, a, b in ((ANODE, 0.0, ex.La), (CATHODE, ex.Lb, ex.L)):
        got = integrate(lambda x: -ex.sigma_s * ex.phis_xx(x, region), a, b)
        want = ex.sigma_s * ex.G
        want = want if region == ANODE else -want
        gaps.append(abs(got - want))

    # electrolyte conduction and the f divergence telescope to zero
    got = sum(integrate(lambda x: -ex.sigma_e * ex.phie_xx(x), a, b)
              for _, a, b in blocks)
    gaps.append(abs(got))
    got = sum(integrate(
        lambda x: ex.delta * ex.d1 * ex.sigma_e * ex.w * ex.f_x(x), a, b)
        for _, a, b in blocks)
    gaps.append(abs(got))

    # tau terms against closed-form block integrals
    int_phis = (ex.G * ex.La ** 2 / 3 + ex.Da * ex.La
                + ex.G * ex.Lc ** 2 / 6 + ex.Dc * ex.Lc)
    got = (integrate(lambda x: ex.tau * ex.phis(x, ANODE), 0.0, ex.La)
           + integrate(lambda x: ex.tau * ex.phis(x, CATHODE), ex.Lb, ex.L))
    gaps.append(abs(got - ex.tau * int_phis))
    got = sum(integrate(lambda x: ex.tau * ex.phie(x), a, b)
              for _, a, b in blocks)
    gaps.append(abs(got - 0.0))

    # the kernel enters the two equations with opposite signs; the sum of
    # both forcings over the sandwich must therefore equal the tau part alone
    total = (integrate(lambda x: ex.forcing_s(x, ANODE), 0.0, ex.La)
             + integrate(lambda x: ex.forcing_s(x, CATHODE), ex.Lb, ex.L)
             + sum(integrate(lambda x: ex.forcing_e(x, r), a, b)
                   for r, a, b in blocks))
    want = ex.tau * int_phis - ex.delta * (ex.I_a + ex.I_c)
    gaps.append(abs(total - want))

    return max(gaps)


CASES = {
    "heat_space": run_heat_space,
    "heat_time": run_heat_time,
    "potential": run_potential,
}


def run_case(name, levels=4):
    if name not in CASES:
        raise KeyError("unknown mms case %r; choose from %s"
                       % (name, sorted(CASES)))
    return CASES[name](levels=levels)


def run_all(levels=4):
    return [run_case(name, levels) for name in ("heat_space", "heat_time",
                                                "potential")]
