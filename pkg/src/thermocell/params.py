"""Coefficient data of the coupled model and its admissibility checks.

The model needs: heat capacity rho_cp, conductivities k / sigma_s / sigma_e,
transfer coefficient alpha, interfacial area A_s, surface exchange k1,
ambient T_a, electrolyte coupling d1, exchange prefactor g1 with uniform
lower bound g0, open-circuit potential U, a divergence-forcing vector field
f with zero boundary-normal component, contact current densities I_a / I_c,
and the initial temperature u0.  The admissibility checks are named H1..H7:

H1  positive scalar constants,
H2  conductivities bounded away from zero,
H3  U bounded (finite),
H4  g1 >= g0 > 0,
H5  f has exactly zero normal component on the outer boundary,
H6  contact currents integrate to zero over the electrode boundary,
H7  the separator is strictly smaller than half the anode.

A positive u0 minimum is checked alongside, since the truncation radius must
fit inside (0, min u0).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import numpy as np

from .errors import StructuralError, ThermocellError
from .mesh import GAMMA_A, GAMMA_C, region_measure

FARADAY = 96485.33212


@dataclass
class PhysicalParams:
    rho_cp: float
    k: np.ndarray          # on all cells
    sigma_s: np.ndarray    # on electrode cells (solid ordering)
    sigma_e: np.ndarray    # on all cells
    alpha: float
    A_s: float
    k1: float
    T_a: float
    d1: float
    g1: np.ndarray         # on electrode cells
    g0: float
    U: np.ndarray          # on electrode cells
    f_faces: np.ndarray    # normal component per face; boundary entries 0
    I_a: float
    I_c: float
    u0: np.ndarray         # on all cells
    U_schedule: tuple = ()  # optional ((t, scalar), ...) piecewise-constant

    def U_at(self, t):
        """U field at time t: static unless a schedule entry has started."""
        value = None
        for t_k, v_k in self.U_schedule:
            if t_k <= t:
                value = v_k
        if value is None:
            return self.U
        return np.full_like(self.U, float(value))

    def with_U_at(self, t):
        if not self.U_schedule:
            return self
        return replace(self, U=self.U_at(t), U_schedule=())


def _broadcast(value, mesh, domain, name):
    """Expand scalar / per-region / per-cell input to the full field."""
    if domain == "cells":
        n = mesh.n_cells
        regions = mesh.cell_region
        region_codes = (0, 1, 2)
    elif domain == "solid":
        n = mesh.n_solid
        regions = mesh.cell_region[mesh.solid_cells]
        region_codes = (0, 2)
    else:
        n = mesh.n_faces
        regions = None
        region_codes = ()
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        if domain == "faces":
            # a scalar f means a uniform x-component on interior faces;
            # boundary entries stay exactly zero
            out = np.zeros(n)
            mask = (mesh.face_tag == 0) & (mesh.face_axis == 0)
            out[mask] = float(arr)
            return out
        return np.full(n, float(arr))
    arr = arr.ravel()
    if domain != "faces" and len(arr) == len(region_codes):
        out = np.empty(n)
        for val, code in zip(arr, region_codes):
            out[regions == code] = val
        return out
    if len(arr) != n:
        raise StructuralError(
            "%s needs a scalar, one value per region, or %d values; got %d"
            % (name, n, len(arr)))
    return arr.copy()


PARAM_DEFAULTS = dict(
    rho_cp=1.0, k=1.0, sigma_s=1.0, sigma_e=1.0, alpha=1.0, A_s=1.0,
    k1=1.0, T_a=2.0, d1=0.1, g1=1.0, g0=0.25, U=0.1, f=0.0,
    f_boundary=0.0, I_a=0.2, I_c=None, u0=2.0, U_schedule=(),
)


def make_params(mesh, **kw):
    """Build PhysicalParams on a mesh, broadcasting scalars and applying
    defaults that satisfy H1..H7 on any admissible mesh."""
    defaults = PARAM_DEFAULTS
    unknown = set(kw) - set(defaults)
    if unknown:
        raise StructuralError("unknown parameter(s): %s" % ", ".join(sorted(unknown)))
    vals = dict(defaults, **kw)
    I_a = float(vals["I_a"])
    I_c = vals["I_c"]
    if I_c is None:
        I_c = balance_I_c(mesh, I_a)
    f_faces = _broadcast(vals["f"], mesh, "faces", "f")
    # diagnostic override: writes the boundary-normal component directly,
    # which the admissibility gate rejects whenever it is nonzero
    fb = float(vals["f_boundary"])
    if fb != 0.0:
        f_faces = f_faces.copy()
        f_faces[mesh.boundary_faces] = fb
    return PhysicalParams(
        rho_cp=float(vals["rho_cp"]),
        k=_broadcast(vals["k"], mesh, "cells", "k"),
        sigma_s=_broadcast(vals["sigma_s"], mesh, "solid", "sigma_s"),
        sigma_e=_broadcast(vals["sigma_e"], mesh, "cells", "sigma_e"),
        alpha=float(vals["alpha"]),
        A_s=float(vals["A_s"]),
        k1=float(vals["k1"]),
        T_a=float(vals["T_a"]),
        d1=float(vals["d1"]),
        g1=_broadcast(vals["g1"], mesh, "solid", "g1"),
        g0=float(vals["g0"]),
        U=_broadcast(vals["U"], mesh, "solid", "U"),
        f_faces=f_faces,
        I_a=I_a,
        I_c=float(I_c),
        u0=_broadcast(vals["u0"], mesh, "cells", "u0"),
        U_schedule=tuple(vals["U_schedule"]),
    )


def balance_I_c(mesh, I_a):
    """Cathode current density that makes the contact currents sum to zero."""
    ga = mesh.gamma_measure(GAMMA_A)
    gc = mesh.gamma_measure(GAMMA_C)
    return -I_a * ga / gc


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    detail: str


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def text(self):
        lines = []
        for c in self.checks:
            lines.append("%-4s %-4s %s" % (c.name, "pass" if c.passed else "FAIL", c.detail))
        lines.append("overall: %s" % ("pass" if self.passed else "FAIL"))
        return "\n".join(lines)


def _check_shapes(params, mesh):
    want = (
        ("k", params.k, mesh.n_cells),
        ("sigma_s", params.sigma_s, mesh.n_solid),
        ("sigma_e", params.sigma_e, mesh.n_cells),
        ("g1", params.g1, mesh.n_solid),
        ("U", params.U, mesh.n_solid),
        ("f", params.f_faces, mesh.n_faces),
        ("u0", params.u0, mesh.n_cells),
    )
    for name, arr, n in want:
        if len(np.atleast_1d(arr)) != n:
            raise StructuralError(
                "%s has %d entries but the mesh needs %d (electrode fields live "
                "on electrode cells only)" % (name, len(np.atleast_1d(arr)), n))


def validate_hypotheses(params, mesh):
    """Check H1..H7 plus u0 positivity; pure (same inputs, same report)."""
    _check_shapes(params, mesh)
    checks = []

    bad = [(n, v) for n, v in (
        ("rho_cp", params.rho_cp), ("alpha", params.alpha),
        ("A_s", params.A_s), ("k1", params.k1), ("d1", params.d1),
        ("T_a", params.T_a),
    ) if not (np.isfinite(v) and v > 0)]
    checks.append(HypothesisCheck(
        "H1", not bad,
        "positive constants" if not bad
        else "non-positive: " + ", ".join("%s=%g" % nv for nv in bad)))

    mins = {"k": params.k.min(), "sigma_s": params.sigma_s.min(),
            "sigma_e": params.sigma_e.min()}
    finite = all(np.all(np.isfinite(a)) for a in (params.k, params.sigma_s, params.sigma_e))
    ok2 = finite and all(v > 0 for v in mins.values())
    checks.append(HypothesisCheck(
        "H2", ok2,
        "conductivity minima " + ", ".join("%s=%g" % kv for kv in mins.items())
        + ("" if finite else "; non-finite entries present")))

    sched_ok = all(np.isfinite(float(v)) for _, v in params.U_schedule)
    ok3 = bool(np.all(np.isfinite(params.U))) and sched_ok
    checks.append(HypothesisCheck(
        "H3", ok3, "U bounded" if ok3 else "U has non-finite entries"))

    ok4 = (np.isfinite(params.g0) and params.g0 > 0
           and bool(np.all(np.isfinite(params.g1)))
           and bool(np.all(params.g1 >= params.g0)))
    checks.append(HypothesisCheck(
        "H4", ok4,
        "g1 >= g0 = %g > 0" % params.g0 if ok4
        else "needs g1 >= g0 > 0; got g0=%g, min g1=%g" % (params.g0, params.g1.min())))

    bnd = mesh.boundary_faces
    leak = float(np.max(np.abs(params.f_faces[bnd]))) if len(bnd) else 0.0
    ok5 = leak == 0.0 and bool(np.all(np.isfinite(params.f_faces)))
    checks.append(HypothesisCheck(
        "H5", ok5,
        "f normal component vanishes on the outer boundary" if ok5
        else "f has boundary-normal magnitude %g (must be exactly 0)" % leak))

    ga = mesh.gamma_measure(GAMMA_A)
    gc = mesh.gamma_measure(GAMMA_C)
    total = params.I_a * ga + params.I_c * gc
    scale = abs(params.I_a) * ga + abs(params.I_c) * gc
    ok6 = abs(total) <= 1e-12 * max(scale, 1.0)
    checks.append(HypothesisCheck(
        "H6", ok6,
        "contact currents balance" if ok6
        else "contact currents sum to %g over the electrode boundary" % total))

    omega_s = region_measure(mesh, "separator")
    omega_a = region_measure(mesh, "anode")
    ok7 = omega_s < 0.5 * omega_a
    checks.append(HypothesisCheck(
        "H7", ok7,
        "|separator| = %g < half |anode| = %g" % (omega_s, 0.5 * omega_a) if ok7
        else "|separator| = %g >= half |anode| = %g" % (omega_s, 0.5 * omega_a)))

    min_u0 = float(params.u0.min())
    ok_u0 = np.isfinite(min_u0) and min_u0 > 0
    checks.append(HypothesisCheck(
        "u0", ok_u0,
        "min u0 = %g > 0" % min_u0 if ok_u0 else "u0 must be positive (min %g)" % min_u0))

    return ValidationReport(checks)


def epsilon_bounds(u0):
    """Smallest initial temperature L0 and the admissible truncation interval
    (0, L0)."""
    u0 = np.asarray(u0, dtype=float)
    L0 = float(u0.min())
    if not (np.isfinite(L0) and L0 > 0):
        raise ThermocellError("u0 must be positive")
    return L0, (0.0, L0)


def exchange_current_prefactor(k0, c_e, c_s_max, c_s_surf, alpha, faraday=FARADAY):
    """Exchange-current prefactor from frozen concentration profiles:
    F * k0 * c_e**alpha * (c_s_max - c_s_surf)**alpha * c_s_surf**alpha.

    Input-preparation convenience for building g1; the solver itself takes
    g1 as data.
    """
    k0 = np.asarray(k0, dtype=float)
    c_e = np.asarray(c_e, dtype=float)
    c_s_max = np.asarray(c_s_max, dtype=float)
    c_s_surf = np.asarray(c_s_surf, dtype=float)
    if np.any(c_s_surf < 0) or np.any(c_s_max - c_s_surf < 0) or np.any(c_e < 0):
        raise ThermocellError("concentrations must be non-negative with c_s_surf <= c_s_max")
    return faraday * k0 * c_e ** alpha * (c_s_max - c_s_surf) ** alpha * c_s_surf ** alpha
