"""Flat text run configuration.

Lines have the form `section.key = value`; `#` starts a comment and blank
lines are ignored.  Sections are mesh, params, solver, and output, plus the
bare key `mode`.  Unknown keys are hard errors so typos never pass silently.

List values are comma separated (`mesh.lengths = 1, 0.5, 1`).  Cell fields
in the params section take one value or one value per region.  A schedule
is written as comma-separated `time:value` pairs.  The word `none` clears
an optional value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .coupled import SolverSettings
from .errors import ConfigError, ThermocellError
from .mesh import build_sandwich_mesh
from .params import PARAM_DEFAULTS, make_params

MODES = ("run", "validate", "mms", "sweep-tau", "oracle-compare")

# kinds: float, int, bool, str, floats (list), ints (list), flexible
# (scalar or per-region list), schedule, and opt* variants accepting `none`
MESH_SCHEMA = {
    "lengths": "floats", "cells": "ints",
    "width": "optfloat", "width_cells": "int",
}
MESH_DEFAULTS = {"width": None, "width_cells": 1}
MESH_REQUIRED = ("lengths", "cells")

PARAMS_SCHEMA = {
    "rho_cp": "float", "k": "flexible", "sigma_s": "flexible",
    "sigma_e": "flexible", "alpha": "float", "A_s": "float", "k1": "float",
    "T_a": "float", "d1": "float", "g1": "flexible", "g0": "float",
    "U": "flexible", "f": "float", "f_boundary": "float",
    "I_a": "float", "I_c": "optfloat", "u0": "flexible",
    "U_schedule": "schedule",
}

SOLVER_SCHEMA = {
    "dt": "float", "t_end": "float", "tau_mode": "str",
    "tau_sequence": "floats", "delta": "float", "nonlinear_tol": "float",
    "picard_tol": "float", "picard_max_iters": "int",
    "picard_relaxation": "float", "eps": "optfloat",
    "overflow_ceiling": "float", "q_form": "str",
    "robin_convention": "str", "boundary_mode": "str",
    "outer_mode": "str", "tstar_bisect": "bool",
}

OUTPUT_SCHEMA = {"directory": "str", "stride": "int", "figures": "bool"}
OUTPUT_DEFAULTS = {"directory": "out", "stride": 1, "figures": True}

SECTIONS = {
    "mesh": MESH_SCHEMA, "params": PARAMS_SCHEMA,
    "solver": SOLVER_SCHEMA, "output": OUTPUT_SCHEMA,
}


def _convert(kind, raw, where):
    raw = raw.strip()
    low = raw.lower()
    try:
        if kind.startswith("opt"):
            if low == "none":
                return None
            kind = kind[3:]
        if kind == "float":
            return float(raw)
        if kind == "int":
            v = float(raw)
            if v != int(v):
                raise ValueError("not an integer")
            return int(v)
        if kind == "bool":
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError("not a boolean")
        if kind == "str":
            return raw
        if kind == "floats":
            return tuple(float(p) for p in raw.split(","))
        if kind == "ints":
            out = []
            for p in raw.split(","):
                v = float(p)
                if v != int(v):
                    raise ValueError("not an integer")
                out.append(int(v))
            return tuple(out)
        if kind == "flexible":
            parts = [float(p) for p in raw.split(",")]
            return parts[0] if len(parts) == 1 else parts
        if kind == "schedule":
            if low == "none":
                return ()
            out = []
            for pair in raw.split(","):
                t, _, v = pair.partition(":")
                if not _:
                    raise ValueError("schedule entries are time:value")
                out.append((float(t), float(v)))
            return tuple(sorted(out))
    except ValueError as exc:
        raise ConfigError("%s: cannot read value %r (%s)" % (where, raw, exc))
    raise ConfigError("%s: unhandled value kind %s" % (where, kind))


@dataclass
class RunConfig:
    mode: str = None
    mesh: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def build_mesh(self):
        kw = dict(MESH_DEFAULTS, **self.mesh)
        width = None
        if kw["width"] is not None:
            width = (kw["width"], kw["width_cells"])
        return build_sandwich_mesh(kw["lengths"], kw["cells"], width=width)

    def build_params(self, mesh):
        return make_params(mesh, **self.params)

    def build_settings(self):
        return SolverSettings(**self.solver)

    def effective(self):
        """Nested dict with all defaults applied."""
        solver = SolverSettings(**self.solver)
        params = dict(PARAM_DEFAULTS)
        params.update(self.params)
        return {
            "mode": self.mode,
            "mesh": dict(MESH_DEFAULTS, **self.mesh),
            "params": params,
            "solver": {k: getattr(solver, k) for k in SOLVER_SCHEMA},
            "output": dict(OUTPUT_DEFAULTS, **self.output),
        }

    def text(self):
        """Canonical echo of the effective configuration."""
        eff = self.effective()
        lines = []
        if eff["mode"]:
            lines.append("mode = %s" % eff["mode"])
        for section in ("mesh", "params", "solver", "output"):
            for key in sorted(eff[section]):
                lines.append("%s.%s = %s"
                             % (section, key, _fmt(eff[section][key])))
        return "\n".join(lines)


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        if not value:
            return "none"
        if isinstance(value[0], (tuple, list)):
            return ", ".join("%g:%g" % tuple(p) for p in value)
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text):
    """Parse and eagerly sanity-check a configuration document."""
    cfg = RunConfig()
    seen = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError("line %d: expected `section.key = value`, got %r"
                              % (lineno, raw_line.strip()))
        key = key.strip()
        where = "line %d: %s" % (lineno, key)
        if key in seen:
            raise ConfigError("%s repeats the assignment from line %d"
                              % (where, seen[key]))
        seen[key] = lineno
        if key == "mode":
            mode = value.strip()
            if mode not in MODES:
                raise ConfigError("%s: unknown mode %r (choose from %s)"
                                  % (where, mode, ", ".join(MODES)))
            cfg.mode = mode
            continue
        section, dot, name = key.partition(".")
        if not dot or section not in SECTIONS:
            raise ConfigError("line %d: unknown key %r" % (lineno, key))
        schema = SECTIONS[section]
        if name not in schema:
            raise ConfigError("line %d: unknown key %s.%s"
                              % (lineno, section, name))
        getattr(cfg, section)[name] = _convert(schema[name], value, where)
    for name in MESH_REQUIRED:
        if name not in cfg.mesh:
            raise ConfigError("missing required key mesh.%s" % name)
    if len(cfg.mesh["lengths"]) != 3 or len(cfg.mesh["cells"]) != 3:
        raise ConfigError(
            "mesh.lengths and mesh.cells need exactly three entries "
            "(anode, separator, cathode)")
    try:
        cfg.build_settings().validate()
    except (TypeError, ThermocellError) as exc:
        raise ConfigError(str(exc))
    out = dict(OUTPUT_DEFAULTS, **cfg.output)
    if out["stride"] < 1:
        raise ConfigError("output.stride must be at least 1")
    return cfg


def load_config(path):
    with open(path, "r") as fh:
        return parse_config(fh.read())
