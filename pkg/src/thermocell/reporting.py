"""Output emission: delimited time series, field snapshots, run log, and
summary figures.

All delimited output is written with repr() floats, so identical runs give
byte-identical files.  Figures are rendered to PNG next to the delimited
files and are conveniences, not part of the reproducibility contract.
"""

from __future__ import annotations

import os
import numpy as np

from .coupled import HORIZON
from .mesh import REGION_NAMES, SEPARATOR

TIMESERIES_COLUMNS = ("t", "min_u", "max_u", "mean_u", "sup_phis",
                      "sup_phie", "picard_iters", "truncation_active",
                      "mean_sum", "energy_residual")


def _num(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def timeseries_text(diagnostics):
    lines = [",".join(TIMESERIES_COLUMNS)]
    for row in diagnostics:
        lines.append(",".join(_num(row[c]) for c in TIMESERIES_COLUMNS))
    return "\n".join(lines) + "\n"


def write_timeseries(path, diagnostics):
    with open(path, "w") as fh:
        fh.write(timeseries_text(diagnostics))


def fields_text(mesh, u, pot):
    two_d = mesh.dimension == 2
    header = ["cell_index", "x"] + (["y"] if two_d else []) \
        + ["region", "u", "phis", "phie"]
    lines = [",".join(header)]
    for c in range(mesh.n_cells):
        row = [str(c), repr(float(mesh.cell_x[c]))]
        if two_d:
            row.append(repr(float(mesh.cell_y[c])))
        region = mesh.cell_region[c]
        row.append(REGION_NAMES[region])
        row.append(repr(float(u[c])))
        if region == SEPARATOR:
            row.append("")
        else:
            row.append(repr(float(pot.phis[mesh.solid_index[c]])))
        row.append(repr(float(pot.phie[c])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_fields(path, mesh, u, pot):
    with open(path, "w") as fh:
        fh.write(fields_text(mesh, u, pot))


def potentials_text(mesh, pot):
    """Field export without a temperature column, for standalone solves."""
    two_d = mesh.dimension == 2
    header = ["cell_index", "x"] + (["y"] if two_d else []) \
        + ["region", "phis", "phie"]
    lines = [",".join(header)]
    for c in range(mesh.n_cells):
        row = [str(c), repr(float(mesh.cell_x[c]))]
        if two_d:
            row.append(repr(float(mesh.cell_y[c])))
        region = mesh.cell_region[c]
        row.append(REGION_NAMES[region])
        if region == SEPARATOR:
            row.append("")
        else:
            row.append(repr(float(pot.phis[mesh.solid_index[c]])))
        row.append(repr(float(pot.phie[c])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def summary_text(result):
    lines = ["steps: %d" % (len(result.times) - 1),
             "final time: %s" % _num(result.times[-1]),
             "t_star: %s" % (result.t_star if result.t_star == HORIZON
                             else _num(result.t_star))]
    if result.t_star_refined is not None:
        lines.append("t_star_refined: %s" % _num(result.t_star_refined))
    if result.failed:
        lines.append("FAILED at stage %s: %s"
                     % (getattr(result.failure, "stage", "?"), result.failure))
    last = result.diagnostics[-1]
    lines.append("final sup_phis: %s" % _num(last["sup_phis"]))
    lines.append("final sup_phie: %s" % _num(last["sup_phie"]))
    lines.append("truncation active at end: %s"
                 % ("yes" if last["truncation_active"] else "no"))
    return "\n".join(lines)


def render_figures(outdir, result, mesh):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = [d["t"] for d in result.diagnostics]
    fig, ax = plt.subplots(figsize=(7, 4))
    for key, style in (("min_u", "C0--"), ("mean_u", "C0-"),
                       ("max_u", "C0:")):
        ax.plot(t, [d[key] for d in result.diagnostics], style, label=key)
    u0 = result.temperature_snapshots[0].values
    ax.axhline(float(np.min(u0)) - result.eps, color="0.6", lw=0.8)
    ax.axhline(float(np.max(u0)) + result.eps, color="0.6", lw=0.8)
    if result.t_star != HORIZON and result.t_star is not None:
        ax.axvline(result.t_star, color="C3", lw=1.0, label="t_star")
    ax.set_xlabel("t")
    ax.set_ylabel("temperature")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(outdir, "temperature.png"), dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 4))
    pot = result.potential_snapshots[-1]
    if mesh.dimension == 1:
        xs = mesh.cell_x[mesh.solid_cells]
        order = np.argsort(xs)
        ax.plot(xs[order], pot.phis[order], "C1.", label="phis (final)")
        order_e = np.argsort(mesh.cell_x)
        ax.plot(mesh.cell_x[order_e], pot.phie[order_e], "C2.-", lw=0.8,
                label="phie (final)")
        ax.set_xlabel("x")
    else:
        ax.plot(t, [d["sup_phis"] for d in result.diagnostics], "C1-",
                label="sup_phis")
        ax.plot(t, [d["sup_phie"] for d in result.diagnostics], "C2-",
                label="sup_phie")
        ax.set_xlabel("t")
    ax.set_ylabel("potential")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(os.path.join(outdir, "potentials.png"), dpi=120)
    plt.close(fig)


def write_simulation_outputs(outdir, result, mesh, stride=1, figures=True,
                             config_text=None, validation_text=None):
    """Emit everything for one run; returns the list of written paths."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    path = os.path.join(outdir, "timeseries.csv")
    write_timeseries(path, result.diagnostics)
    written.append(path)
    last = len(result.times) - 1
    for n in range(len(result.times)):
        if n % stride and n != last:
            continue
        path = os.path.join(outdir, "fields_%06d.csv" % n)
        write_fields(path, mesh, result.temperature_snapshots[n].values,
                     result.potential_snapshots[n])
        written.append(path)
    log_path = os.path.join(outdir, "run.log")
    with open(log_path, "w") as fh:
        if config_text:
            fh.write("# effective configuration\n")
            fh.write(config_text.rstrip() + "\n\n")
        if validation_text:
            fh.write("# hypothesis report\n")
            fh.write(validation_text.rstrip() + "\n\n")
        fh.write("# summary\n")
        fh.write(summary_text(result) + "\n")
    written.append(log_path)
    if figures:
        render_figures(outdir, result, mesh)
        written.append(os.path.join(outdir, "temperature.png"))
        written.append(os.path.join(outdir, "potentials.png"))
    return written
