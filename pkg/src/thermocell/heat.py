"""Implicit Euler stepping of the lumped thermal balance
rho_cp du/dt - div(k grad u) = q with a surface exchange condition on the
whole outer boundary.

Two boundary treatments are available.  With w_boundary=None the exchange
flux is taken implicitly in the new temperature through the series
conductance of the half cell and the surface film, which keeps the step an
M-matrix and preserves the ambient equilibrium exactly.  Passing a
w_boundary array freezes the exchange flux at the supplied effective
temperature instead; that is the form the alternating map uses, where the
boundary data is the truncated temperature of the previous iterate.

robin_convention selects the sign of the exchange term.  "cooling" sends
heat outward when the boundary is warmer than ambient.  "literal" flips the
sign; it reproduces a source formulation that feeds energy in instead, and
is only there so the difference stays observable.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .errors import ThermocellError
from .mesh import harmonic_transmissibility


@dataclass
class TemperatureField:
    values: np.ndarray
    time: float


def step_temperature(u_old, dt, q_cells, mesh, params, w_boundary=None,
                     robin_convention="cooling"):
    """One implicit Euler step; returns the new cell temperatures."""
    if not dt > 0:
        raise ThermocellError("solver.dt must be positive")
    if robin_convention not in ("cooling", "literal"):
        raise ThermocellError("robin_convention must be 'cooling' or 'literal'")
    sign = 1.0 if robin_convention == "cooling" else -1.0
    u_old = np.asarray(u_old, dtype=float)
    n = mesh.n_cells
    V = mesh.cell_measure
    a_diag = params.rho_cp * V / dt

    M = np.zeros((n, n))
    idx = np.arange(n)
    M[idx, idx] += a_diag
    b = a_diag * u_old
    if q_cells is not None:
        b = b + np.asarray(q_cells, dtype=float) * V

    itf = mesh.interior_faces
    T_k = harmonic_transmissibility(mesh, params.k, itf)
    lo = mesh.face_cells[itf, 0]
    hi = mesh.face_cells[itf, 1]
    np.add.at(M, (lo, lo), T_k)
    np.add.at(M, (hi, hi), T_k)
    np.add.at(M, (lo, hi), -T_k)
    np.add.at(M, (hi, lo), -T_k)

    bf = mesh.boundary_faces
    bc = mesh.face_cells[bf, 0]
    Af = mesh.face_measure[bf]
    k1 = params.k1
    if w_boundary is None:
        if k1 == 0:
            pass
        elif sign > 0:
            dc = mesh.face_dist[bf, 0]
            kc = params.k[bc]
            C = Af / (dc / kc + 1.0 / k1)
            np.add.at(M, (bc, bc), C)
            np.add.at(b, bc, C * params.T_a)
        else:
            # flipped sign has no resistive elimination; the surface value is
            # the cell value and the term is taken implicitly as it stands
            np.add.at(M, (bc, bc), -k1 * Af)
            np.add.at(b, bc, -k1 * Af * params.T_a)
    else:
        wb = np.asarray(w_boundary, dtype=float)[bc]
        out = sign * k1 * (wb - params.T_a) * Af
        np.add.at(b, bc, -out)

    return np.linalg.solve(M, b)


def linf_monitor(u, q_norm, params, boundary_norm=0.0):
    """Sup-norm of the field against the structural growth bound shape
    |q| + |boundary data| + 2 |u0| + 1.  The ratio is a divergence tripwire,
    not an estimate of any constant."""
    sup_u = float(np.max(np.abs(u)))
    bound = float(q_norm) + float(boundary_norm) \
        + 2.0 * float(np.max(np.abs(params.u0))) + 1.0
    return {"sup_u": sup_u, "bound_estimate": bound, "ratio": sup_u / bound}


def steady_residual(u, q_cells, mesh, params, robin_convention="cooling"):
    """Integral residual of the stationary balance; used to diagnose whether
    a temperature field has settled."""
    sign = 1.0 if robin_convention == "cooling" else -1.0
    u = np.asarray(u, dtype=float)
    R = np.zeros(mesh.n_cells)
    itf = mesh.interior_faces
    T_k = harmonic_transmissibility(mesh, params.k, itf)
    lo = mesh.face_cells[itf, 0]
    hi = mesh.face_cells[itf, 1]
    flux = T_k * (u[lo] - u[hi])
    np.add.at(R, lo, flux)
    np.add.at(R, hi, -flux)
    bf = mesh.boundary_faces
    bc = mesh.face_cells[bf, 0]
    Af = mesh.face_measure[bf]
    if params.k1 > 0:
        if sign > 0:
            dc = mesh.face_dist[bf, 0]
            kc = params.k[bc]
            C = Af / (dc / kc + 1.0 / params.k1)
            np.add.at(R, bc, C * (u[bc] - params.T_a))
        else:
            np.add.at(R, bc, -params.k1 * Af * (u[bc] - params.T_a))
    if q_cells is not None:
        R -= np.asarray(q_cells, dtype=float) * mesh.cell_measure
    return R
