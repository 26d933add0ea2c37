"""Cell-centered tensor meshes for the three-region battery sandwich.

The domain is anode | separator | cathode along x, with the external contacts
gamma_a (x = 0 side) and gamma_c (x = L side).  The electrode subset
(anode plus cathode cells) carries the solid potential; the full domain
carries the electrolyte potential and the temperature.  1D is the default;
a second tensor direction is optional.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .errors import ConfigError

ANODE, SEPARATOR, CATHODE = 0, 1, 2
REGION_NAMES = ("anode", "separator", "cathode")

# face tags
INTERIOR, GAMMA_A, GAMMA_C, INSULATED = 0, 1, 2, 3


@dataclass
class Mesh:
    dimension: int
    lengths: tuple
    counts: tuple
    width: float
    width_cells: int
    cell_x: np.ndarray
    cell_y: np.ndarray
    cell_measure: np.ndarray
    cell_region: np.ndarray
    solid_cells: np.ndarray   # global indices of electrode cells, ascending
    solid_index: np.ndarray   # global -> position in solid_cells, -1 on separator
    face_cells: np.ndarray    # (n_faces, 2); second entry -1 on boundary faces
    face_axis: np.ndarray     # 0: x-normal, 1: y-normal
    face_measure: np.ndarray
    face_x: np.ndarray
    face_y: np.ndarray
    face_tag: np.ndarray
    face_dist: np.ndarray     # (n_faces, 2) centroid-to-face distances

    def __post_init__(self):
        fc = self.face_cells
        self.interior_faces = np.nonzero(fc[:, 1] >= 0)[0]
        self.boundary_faces = np.nonzero(fc[:, 1] < 0)[0]
        self.gamma_a_faces = np.nonzero(self.face_tag == GAMMA_A)[0]
        self.gamma_c_faces = np.nonzero(self.face_tag == GAMMA_C)[0]
        reg = self.cell_region
        li, ri = fc[self.interior_faces, 0], fc[self.interior_faces, 1]
        same_electrode = (reg[li] == reg[ri]) & (reg[li] != SEPARATOR)
        # faces conducting the solid potential: interior to one electrode block
        self.solid_faces = self.interior_faces[same_electrode]
        one_sep = (reg[li] == SEPARATOR) ^ (reg[ri] == SEPARATOR)
        self.separator_interface_faces = self.interior_faces[one_sep]
        self._build_axis_neighbors()
        for arr in (self.cell_x, self.cell_y, self.cell_measure,
                    self.cell_region, self.solid_cells, self.solid_index,
                    self.face_cells, self.face_axis, self.face_measure,
                    self.face_x, self.face_y, self.face_tag, self.face_dist):
            arr.flags.writeable = False

    def _build_axis_neighbors(self):
        # per-axis neighbor cell of each cell, -1 where none; used for
        # cell-gradient reconstruction
        n = self.n_cells
        self.nbr_lo = -np.ones((2, n), dtype=int)
        self.nbr_hi = -np.ones((2, n), dtype=int)
        for fi in self.interior_faces:
            a = self.face_axis[fi]
            lo, hi = self.face_cells[fi]
            self.nbr_hi[a, lo] = hi
            self.nbr_lo[a, hi] = lo

    @property
    def n_cells(self):
        return len(self.cell_x)

    @property
    def n_faces(self):
        return len(self.face_tag)

    @property
    def n_solid(self):
        return len(self.solid_cells)

    def gamma_measure(self, tag):
        faces = self.gamma_a_faces if tag == GAMMA_A else self.gamma_c_faces
        return float(np.sum(self.face_measure[faces]))

    def summary(self):
        """Plain-text region table: tag, cell count, measure."""
        lines = ["region      cells  measure"]
        for code, name in enumerate(REGION_NAMES):
            mask = self.cell_region == code
            lines.append("%-10s %6d  %.12g"
                         % (name, int(mask.sum()),
                            float(self.cell_measure[mask].sum())))
        lines.append("%-10s %6d  %.12g"
                     % ("total", self.n_cells,
                        float(self.cell_measure.sum())))
        return "\n".join(lines)


def build_sandwich_mesh(lengths, cells, width=None):
    """Build the anode/separator/cathode mesh.

    lengths: (L_a, L_s, L_c) region extents along x.
    cells:   (n_a, n_s, n_c) cell counts per region.
    width:   optional (extent, count) for a second tensor direction.
    """
    names_l = ("L_a", "L_s", "L_c")
    names_n = ("n_a", "n_s", "n_c")
    lengths = tuple(float(v) for v in lengths)
    cells = tuple(int(v) for v in cells)
    for name, val in zip(names_l, lengths):
        if not val > 0:
            raise ConfigError("%s must be positive" % name)
    for name, val in zip(names_n, cells):
        if not val > 0:
            raise ConfigError("%s must be positive" % name)
    if width is None:
        w_extent, ny = 1.0, 1
        dimension = 1
    else:
        w_extent, ny = float(width[0]), int(width[1])
        if not w_extent > 0:
            raise ConfigError("width must be positive")
        if not ny > 0:
            raise ConfigError("width_cells must be positive")
        dimension = 2

    la, ls, lc = lengths
    na, ns, nc = cells
    nx = na + ns + nc
    edges_x = np.concatenate([
        la * np.arange(na + 1) / na,
        la + ls * np.arange(1, ns + 1) / ns,
        la + ls + lc * np.arange(1, nc + 1) / nc,
    ])
    col_region = np.concatenate([
        np.full(na, ANODE), np.full(ns, SEPARATOR), np.full(nc, CATHODE),
    ]).astype(int)
    cx = 0.5 * (edges_x[:-1] + edges_x[1:])
    dx = np.diff(edges_x)
    if dimension == 2:
        edges_y = w_extent * np.arange(ny + 1) / ny
        cy = 0.5 * (edges_y[:-1] + edges_y[1:])
        dy = np.diff(edges_y)
    else:
        edges_y = np.array([0.0, 1.0])
        cy = np.array([0.0])
        dy = np.array([1.0])

    # cell index = iy * nx + ix (x fastest)
    cell_x = np.tile(cx, ny)
    cell_y = np.repeat(cy, nx)
    cell_region = np.tile(col_region, ny)
    if dimension == 2:
        cell_measure = np.tile(dx, ny) * np.repeat(dy, nx)
    else:
        cell_measure = np.tile(dx, ny)

    solid_cells = np.nonzero(cell_region != SEPARATOR)[0]
    solid_index = -np.ones(nx * ny, dtype=int)
    solid_index[solid_cells] = np.arange(len(solid_cells))

    f_cells, f_axis, f_meas, f_x, f_y, f_tag, f_dist = [], [], [], [], [], [], []
    for iy in range(ny):
        for ie in range(nx + 1):
            xe = edges_x[ie]
            if ie == 0:
                c = iy * nx
                f_cells.append((c, -1))
                f_tag.append(GAMMA_A)
                f_dist.append((cx[0] - xe, 0.0))
            elif ie == nx:
                c = iy * nx + nx - 1
                f_cells.append((c, -1))
                f_tag.append(GAMMA_C)
                f_dist.append((xe - cx[nx - 1], 0.0))
            else:
                lo = iy * nx + ie - 1
                hi = iy * nx + ie
                f_cells.append((lo, hi))
                f_tag.append(INTERIOR)
                f_dist.append((xe - cx[ie - 1], cx[ie] - xe))
            f_axis.append(0)
            f_meas.append(dy[iy] if dimension == 2 else 1.0)
            f_x.append(xe)
            f_y.append(cy[iy])
    if dimension == 2:
        for je in range(ny + 1):
            ye = edges_y[je]
            for ix in range(nx):
                if je == 0:
                    c = ix
                    f_cells.append((c, -1))
                    f_tag.append(INSULATED)
                    f_dist.append((cy[0] - ye, 0.0))
                elif je == ny:
                    c = (ny - 1) * nx + ix
                    f_cells.append((c, -1))
                    f_tag.append(INSULATED)
                    f_dist.append((ye - cy[ny - 1], 0.0))
                else:
                    lo = (je - 1) * nx + ix
                    hi = je * nx + ix
                    f_cells.append((lo, hi))
                    f_tag.append(INTERIOR)
                    f_dist.append((ye - cy[je - 1], cy[je] - ye))
                f_axis.append(1)
                f_meas.append(dx[ix])
                f_x.append(cx[ix])
                f_y.append(ye)

    mesh = Mesh(
        dimension=dimension,
        lengths=lengths,
        counts=cells,
        width=w_extent,
        width_cells=ny,
        cell_x=cell_x,
        cell_y=cell_y,
        cell_measure=cell_measure,
        cell_region=cell_region,
        solid_cells=solid_cells,
        solid_index=solid_index,
        face_cells=np.array(f_cells, dtype=int),
        face_axis=np.array(f_axis, dtype=int),
        face_measure=np.array(f_meas, dtype=float),
        face_x=np.array(f_x, dtype=float),
        face_y=np.array(f_y, dtype=float),
        face_tag=np.array(f_tag, dtype=int),
        face_dist=np.array(f_dist, dtype=float),
    )
    _check_layout(mesh)
    return mesh


def _check_layout(mesh):
    # contact faces must touch their own electrode only
    for faces, want in ((mesh.gamma_a_faces, ANODE), (mesh.gamma_c_faces, CATHODE)):
        touching = mesh.cell_region[mesh.face_cells[faces, 0]]
        assert np.all(touching == want), "contact face touches a foreign region"
    total = mesh.cell_measure.sum()
    per_region = sum(region_measure(mesh, name) for name in REGION_NAMES)
    assert abs(total - per_region) <= 1e-12 * max(total, 1.0)


def region_measure(mesh, region):
    """Total measure of a named region, of omega, or of omega_prime."""
    if region == "omega":
        return float(mesh.cell_measure.sum())
    if region == "omega_prime":
        mask = mesh.cell_region != SEPARATOR
    elif region in REGION_NAMES:
        mask = mesh.cell_region == REGION_NAMES.index(region)
    else:
        raise ConfigError("unknown region %r" % (region,))
    return float(mesh.cell_measure[mask].sum())


def harmonic_transmissibility(mesh, coeff, faces):
    """Two-point transmissibility A / (d0/c0 + d1/c1) for the given faces.

    coeff is a per-cell (global) coefficient field.  Faces must be interior.
    """
    lo = mesh.face_cells[faces, 0]
    hi = mesh.face_cells[faces, 1]
    d0 = mesh.face_dist[faces, 0]
    d1 = mesh.face_dist[faces, 1]
    return mesh.face_measure[faces] / (d0 / coeff[lo] + d1 / coeff[hi])


def cell_gradients(mesh, values, cells=None, restrict_to_block=False):
    """Per-cell gradient by central or one-sided differences of cell values.

    values lives on all cells, or on the listed cells when cells is given
    (the electrode subset for the solid potential).  restrict_to_block keeps
    differences inside one region, required for the solid potential because
    the electrode blocks are disconnected.  Returns (len(cells), dimension).
    """
    if cells is None:
        cells = np.arange(mesh.n_cells)
    index_of = -np.ones(mesh.n_cells, dtype=int)
    index_of[cells] = np.arange(len(cells))
    grad = np.zeros((len(cells), mesh.dimension))
    coords = (mesh.cell_x, mesh.cell_y)
    reg = mesh.cell_region
    for axis in range(mesh.dimension):
        x = coords[axis]
        lo = mesh.nbr_lo[axis][cells]
        hi = mesh.nbr_hi[axis][cells]
        ok_lo = lo >= 0
        ok_hi = hi >= 0
        ok_lo &= index_of[np.where(ok_lo, lo, 0)] >= 0
        ok_hi &= index_of[np.where(ok_hi, hi, 0)] >= 0
        if restrict_to_block:
            ok_lo &= np.where(ok_lo, reg[np.where(ok_lo, lo, 0)] == reg[cells], False)
            ok_hi &= np.where(ok_hi, reg[np.where(ok_hi, hi, 0)] == reg[cells], False)
        v = np.asarray(values, dtype=float)
        vc = v[index_of[cells]]
        vlo = np.where(ok_lo, v[index_of[np.where(ok_lo, lo, 0)]], 0.0)
        vhi = np.where(ok_hi, v[index_of[np.where(ok_hi, hi, 0)]], 0.0)
        xc = x[cells]
        xlo = np.where(ok_lo, x[np.where(ok_lo, lo, 0)], 0.0)
        xhi = np.where(ok_hi, x[np.where(ok_hi, hi, 0)], 0.0)
        both = ok_lo & ok_hi
        only_lo = ok_lo & ~ok_hi
        only_hi = ok_hi & ~ok_lo
        with np.errstate(divide="ignore", invalid="ignore"):
            g_both = np.where(both, (vhi - vlo) / np.where(both, xhi - xlo, 1.0), 0.0)
            g_lo = np.where(only_lo, (vc - vlo) / np.where(only_lo, xc - xlo, 1.0), 0.0)
            g_hi = np.where(only_hi, (vhi - vc) / np.where(only_hi, xhi - xc, 1.0), 0.0)
        grad[:, axis] = g_both + g_lo + g_hi
    return grad
