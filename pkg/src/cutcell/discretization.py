"""Cut-cell MAC-grid operators.

Assembles the implicit Helmholtz operator for each velocity component with
Shortley-Weller irregular rows near the immersed boundary, and the pressure
Poisson operator as the literal composition of the discrete divergence and
gradient.  Also provides the explicit pieces of the time step: convection in
flux (divergence) form, the divergence/gradient array kernels, outer boundary
condition updates and the corner vorticity used in snapshots.

Index conventions (x-major everywhere):
    p    (nx, ny)      cell centers
    u    (nx+1, ny)    vertical-face midpoints; columns 0 and nx hold data
    v    (nx, ny+1)    horizontal-face midpoints; rows 0 and ny hold data
Unknown layouts flatten with y contiguous so y-transforms act on axis 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, UnderResolvedGeometryError
from .geometry import (
    RELOCATED,
    SNAP_TOL,
    SOLID,
    CellMask,
    CutCellGeometry,
    LevelSetBody,
    levelset_eval,
    segment_apertures,
    segment_crossing,
)
from .grid import StaggeredGrid

PRESETS = ("open", "confined")


# ---------------------------------------------------------------------------
# fields and packing


@dataclass
class StaggeredField:
    """A scalar sample set living on one of the staggered position families."""

    kind: str  # 'u' | 'v' | 'p'
    values: np.ndarray  # full 2-D array, data slots included
    grid: StaggeredGrid

    def __post_init__(self):
        shape = full_shape(self.grid, self.kind)
        if self.values.shape != shape:
            raise ConfigError(
                f"field kind '{self.kind}' expects shape {shape}, got {self.values.shape}"
            )

    def copy(self) -> "StaggeredField":
        return StaggeredField(self.kind, self.values.copy(), self.grid)


def full_shape(grid: StaggeredGrid, kind: str) -> tuple:
    if kind == "u":
        return (grid.nx + 1, grid.ny)
    if kind == "v":
        return (grid.nx, grid.ny + 1)
    if kind == "p":
        return (grid.nx, grid.ny)
    raise ConfigError(f"unknown field kind '{kind}'")


def unknown_shape(grid: StaggeredGrid, kind: str) -> tuple:
    """Shape of the unknown block once boundary-data slots are stripped."""
    if kind == "u":
        return (grid.nx - 1, grid.ny)
    if kind == "v":
        return (grid.nx, grid.ny - 1)
    if kind == "p":
        return (grid.nx, grid.ny)
    raise ConfigError(f"unknown field kind '{kind}'")


def pack_unknowns(grid: StaggeredGrid, kind: str, full: np.ndarray) -> np.ndarray:
    if kind == "u":
        return full[1:-1, :].ravel()
    if kind == "v":
        return full[:, 1:-1].ravel()
    return full.ravel()


def unpack_unknowns(grid: StaggeredGrid, kind: str, vec: np.ndarray,
                    full: np.ndarray) -> np.ndarray:
    """Write packed unknowns back into a full array (data slots untouched)."""
    if kind == "u":
        full[1:-1, :] = vec.reshape(grid.nx - 1, grid.ny)
    elif kind == "v":
        full[:, 1:-1] = vec.reshape(grid.nx, grid.ny - 1)
    else:
        full[:, :] = vec.reshape(grid.nx, grid.ny)
    return full


def pack_boundary_data(grid: StaggeredGrid, kind: str, full: np.ndarray,
                       wall_lo: np.ndarray | None = None,
                       wall_hi: np.ndarray | None = None) -> np.ndarray:
    """Dirichlet data vector matching the operator's boundary map.

    u: [column 0, column nx].  v: [row 0, row ny, x-lo wall points, x-hi wall
    points] where the wall points carry v on the domain sides for interior
    rows.  p has no Dirichlet data.
    """
    if kind == "u":
        return np.concatenate([full[0, :], full[-1, :]])
    if kind == "v":
        lo = np.zeros(grid.ny - 1) if wall_lo is None else np.asarray(wall_lo, float)
        hi = np.zeros(grid.ny - 1) if wall_hi is None else np.asarray(wall_hi, float)
        return np.concatenate([full[:, 0], full[:, -1], lo, hi])
    return np.zeros(0)


def n_boundary_slots(grid: StaggeredGrid, kind: str) -> int:
    if kind == "u":
        return 2 * grid.ny
    if kind == "v":
        return 2 * grid.nx + 2 * (grid.ny - 1)
    return 0


# ---------------------------------------------------------------------------
# operators


@dataclass
class SparseOperator:
    """Assembled implicit operator on the packed unknown layout.

    matrix      csr, identity rows at solid unknowns
    bc          affine contribution of immersed-boundary (and static wall) data
    bmap        csr mapping packed outer Dirichlet data into the rhs
    marked_rows rows whose stencil was modified by the cut (solid excluded)
    solid_rows  rows replaced by the identity
    """

    kind: str
    matrix: sp.csr_matrix
    bc: np.ndarray
    bmap: sp.csr_matrix
    marked_rows: np.ndarray
    solid_rows: np.ndarray
    shape2d: tuple
    sigma: float = 0.0
    singular: bool = False
    left_null: np.ndarray | None = None
    fluid_mask: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def rhs_boundary(self, data: np.ndarray) -> np.ndarray:
        """bc + bmap @ data: everything the rhs owes to boundary values."""
        out = self.bc.copy()
        if self.bmap.shape[1]:
            out = out + self.bmap @ data
        return out

    def max_row_nnz(self) -> int:
        return int(np.max(np.diff(self.matrix.indptr)))


def _second_diff(dl, dr):
    """3-point second-derivative weights for spacings dl (left) and dr."""
    s = dl + dr
    return 2.0 / (dl * s), -2.0 / (dl * dr), 2.0 / (dr * s)


@dataclass
class SeparableParts:
    """No-body operator split for the transform-based direct solver.

    The per-mode tridiagonal has diagonal diag0 + lambda_scale * eigvals[k];
    sub and sup couple adjacent x-unknowns and are mode independent.
    """

    kind: str
    transform: str  # 'dct2' | 'dst2' | 'dst1'
    eigvals: np.ndarray
    sub: np.ndarray
    diag0: np.ndarray
    sup: np.ndarray
    lambda_scale: float
    shape2d: tuple
    singular: bool = False


def separable_parts(grid: StaggeredGrid, kind: str, re: float, dt: float,
                    preset: str = "open") -> SeparableParts:
    """x-tridiagonal bands and y-transform eigenvalues of the no-body operator."""
    if preset not in PRESETS:
        raise ConfigError(f"unknown boundary preset '{preset}'")
    hy = grid.hy
    nx, ny = grid.nx, grid.ny
    if kind == "u":
        sigma = 1.5 / dt
        dl = grid.hx[:-1]
        dr = grid.hx[1:]
        cl, cc, cr = _second_diff(dl, dr)
        sub = -(1.0 / re) * cl
        sup = -(1.0 / re) * cr
        diag0 = sigma - (1.0 / re) * cc
        sub = sub.copy()
        sup = sup.copy()
        sub[0] = 0.0  # column 0 is data
        sup[-1] = 0.0  # column nx is data
        if preset == "open":
            transform = "dct2"
            k = np.arange(ny)
        else:
            transform = "dst2"
            k = np.arange(1, ny + 1)
        eig = -(4.0 / hy**2) * np.sin(np.pi * k / (2.0 * ny)) ** 2
        return SeparableParts(kind, transform, eig, sub, diag0, sup,
                              -(1.0 / re), (nx - 1, ny))
    if kind == "v":
        sigma = 1.5 / dt
        xc = grid.xc
        dl = np.empty(nx)
        dr = np.empty(nx)
        dl[1:] = xc[1:] - xc[:-1]
        dr[:-1] = xc[1:] - xc[:-1]
        dl[0] = xc[0] - grid.x_faces[0]  # to the x-lo wall point
        dr[-1] = grid.x_faces[-1] - xc[-1]
        cl, cc, cr = _second_diff(dl, dr)
        sub = -(1.0 / re) * cl
        sup = -(1.0 / re) * cr
        diag0 = sigma - (1.0 / re) * cc
        sub[0] = 0.0
        sup[-1] = 0.0
        k = np.arange(1, ny)
        eig = -(4.0 / hy**2) * np.sin(np.pi * k / (2.0 * ny)) ** 2
        return SeparableParts(kind, "dst1", eig, sub, diag0, sup,
                              -(1.0 / re), (nx, ny - 1))
    if kind == "p":
        hx = grid.hx
        xc = grid.xc
        dxc = xc[1:] - xc[:-1]
        sub = np.zeros(nx)
        sup = np.zeros(nx)
        sub[1:] = (1.0 / hx[1:]) / dxc  # Neumann: boundary fluxes dropped
        sup[:-1] = (1.0 / hx[:-1]) / dxc
        diag0 = -(sub + sup)
        k = np.arange(ny)
        eig = -(4.0 / hy**2) * np.sin(np.pi * k / (2.0 * ny)) ** 2
        return SeparableParts(kind, "dct2", eig, sub, diag0, sup, 1.0,
                              (nx, ny), singular=True)
    raise ConfigError(f"unknown field kind '{kind}'")


# ---------------------------------------------------------------------------
# Helmholtz assembly


def _body_values(body_vel, body_data, comp, pts):
    if body_data is not None:
        return np.asarray(body_data(np.asarray(pts, dtype=float)), dtype=float)
    return np.full(len(pts), float(body_vel[comp]))


class _RowBuilder:
    """One irregular matrix row plus its affine pieces."""

    def __init__(self, row):
        self.row = row
        self.cols: list = []
        self.vals: list = []
        self.bc = 0.0
        self.bslots: list = []
        self.bvals: list = []
        self.irregular = False


def assemble_helmholtz(grid: StaggeredGrid, re: float, dt: float, kind: str,
                       mask: CellMask | None = None,
                       geom: CutCellGeometry | None = None,
                       body: LevelSetBody | None = None,
                       t: float = 0.0,
                       preset: str = "open",
                       body_vel=(0.0, 0.0),
                       body_data=None,
                       wall_data=None) -> SparseOperator:
    """(3/(2 dt)) I - (1/Re) Laplacian for one velocity component.

    Rows whose five-point stencil is intersected by the body get
    Shortley-Weller legs: exact shortened distances along the component's own
    face line, and cross-direction legs that either terminate on the boundary
    or interpolate between samples on the neighbouring line.  Solid unknowns
    become identity rows.  With body=None this is the separable operator the
    fast direct solver inverts; rows untouched by the cut are bit-identical
    between the two assemblies.
    """
    if kind not in ("u", "v"):
        raise ConfigError("assemble_helmholtz handles kinds 'u' and 'v'")
    parts = separable_parts(grid, kind, re, dt, preset)
    nxu, nyu = parts.shape2d
    n = nxu * nyu
    nx, ny = grid.nx, grid.ny
    hy = grid.hy
    inv_re = 1.0 / re
    sigma = 1.5 / dt

    # --- regular separable assembly -----------------------------------------
    ii, jj = np.meshgrid(np.arange(nxu), np.arange(nyu), indexing="ij")
    q = (ii * nyu + jj).ravel()
    ii = ii.ravel()
    jj = jj.ravel()

    ydiag = np.full(n, -2.0 / hy**2)
    if kind == "u":
        if preset == "open":  # slip: mirror ghost folds into the center
            ydiag[jj == 0] = -1.0 / hy**2
            ydiag[jj == nyu - 1] = -1.0 / hy**2
        else:  # no-slip: ghost reflected through the wall value
            ydiag[jj == 0] = -3.0 / hy**2
            ydiag[jj == nyu - 1] = -3.0 / hy**2
    center = parts.diag0[ii] - inv_re * ydiag

    rows_list = [q]
    cols_list = [q]
    vals_list = [center]
    m = ii > 0
    rows_list.append(q[m]); cols_list.append(q[m] - nyu)
    vals_list.append(parts.sub[ii[m]])
    m = ii < nxu - 1
    rows_list.append(q[m]); cols_list.append(q[m] + nyu)
    vals_list.append(parts.sup[ii[m]])
    m = jj > 0
    rows_list.append(q[m]); cols_list.append(q[m] - 1)
    vals_list.append(np.full(int(m.sum()), -inv_re / hy**2))
    m = jj < nyu - 1
    rows_list.append(q[m]); cols_list.append(q[m] + 1)
    vals_list.append(np.full(int(m.sum()), -inv_re / hy**2))

    # outer Dirichlet data couplings
    brow_list, bslot_list, bval_list = [], [], []
    if kind == "u":
        cl, _, cr = _second_diff(grid.hx[:-1], grid.hx[1:])
        m = ii == 0  # references data column 0, slot j
        brow_list.append(q[m]); bslot_list.append(jj[m])
        bval_list.append(np.full(int(m.sum()), inv_re * cl[0]))
        m = ii == nxu - 1  # data column nx, slot ny + j
        brow_list.append(q[m]); bslot_list.append(ny + jj[m])
        bval_list.append(np.full(int(m.sum()), inv_re * cr[-1]))
    else:
        xc = grid.xc
        cl0 = _second_diff(xc[0] - grid.x_faces[0], xc[1] - xc[0])[0]
        crn = _second_diff(xc[-1] - xc[-2], grid.x_faces[-1] - xc[-1])[2]
        m = jj == 0  # v row 0 data, slot i
        brow_list.append(q[m]); bslot_list.append(ii[m])
        bval_list.append(np.full(int(m.sum()), inv_re / hy**2))
        m = jj == nyu - 1  # v row ny data, slot nx + i
        brow_list.append(q[m]); bslot_list.append(nx + ii[m])
        bval_list.append(np.full(int(m.sum()), inv_re / hy**2))
        m = ii == 0  # x-lo wall point, slot 2 nx + (j - 1)
        brow_list.append(q[m]); bslot_list.append(2 * nx + jj[m])
        bval_list.append(np.full(int(m.sum()), inv_re * cl0))
        m = ii == nxu - 1  # x-hi wall point
        brow_list.append(q[m]); bslot_list.append(2 * nx + (ny - 1) + jj[m])
        bval_list.append(np.full(int(m.sum()), inv_re * crn))

    bc = np.zeros(n)
    if kind == "u" and preset == "confined" and wall_data is not None:
        # static wall data folded through the ghost reflection: (2/hy^2) u_wall
        xs = grid.x_faces[1:-1]
        lo_vals, hi_vals = wall_data(xs)
        bc[(np.arange(nxu)) * nyu + 0] += inv_re * (2.0 / hy**2) * np.asarray(lo_vals)
        bc[(np.arange(nxu)) * nyu + (nyu - 1)] += inv_re * (2.0 / hy**2) * np.asarray(hi_vals)

    # --- irregular rows near the body ---------------------------------------
    solid_rows = np.zeros(0, dtype=np.int64)
    marked = np.zeros(0, dtype=np.int64)
    drop = np.zeros(n, dtype=bool)
    extra_rows: list = []
    if body is not None and mask is not None and geom is not None:
        node_state = mask.u_node if kind == "u" else mask.v_node
        kappa = geom.kappa_u if kind == "u" else geom.kappa_v
        cut_at = geom.cut_y_u if kind == "u" else geom.cut_x_v
        cx, cy = body.center_at(t)
        r = body.radius
        pad = 2.0 * max(float(np.max(grid.hx)), hy)
        if kind == "u":
            i_lo = max(1, int(np.searchsorted(grid.x_faces, cx - r - pad)) - 1)
            i_hi = min(nx, int(np.searchsorted(grid.x_faces, cx + r + pad)) + 1)
            j_lo = max(0, int(np.searchsorted(grid.yc, cy - r - pad)) - 1)
            j_hi = min(ny, int(np.searchsorted(grid.yc, cy + r + pad)) + 1)
        else:
            i_lo = max(0, int(np.searchsorted(grid.xc, cx - r - pad)) - 1)
            i_hi = min(nx, int(np.searchsorted(grid.xc, cx + r + pad)) + 1)
            j_lo = max(1, int(np.searchsorted(grid.y_faces, cy - r - pad)) - 1)
            j_hi = min(ny, int(np.searchsorted(grid.y_faces, cy + r + pad)) + 1)

        solid: list = []
        marked_set: list = []
        for i in range(i_lo, i_hi):
            for j in range(j_lo, j_hi):
                row = (i - 1) * nyu + j if kind == "u" else i * nyu + (j - 1)
                if node_state[i, j] == SOLID:
                    solid.append(row)
                    drop[row] = True
                    continue
                rb = _build_irregular_row(
                    grid, re, dt, kind, preset, node_state, kappa, cut_at,
                    body, t, body_vel, body_data, i, j)
                if rb is not None and rb.irregular:
                    drop[row] = True
                    marked_set.append(row)
                    extra_rows.append(rb)
        solid_rows = np.asarray(sorted(solid), dtype=np.int64)
        marked = np.asarray(sorted(marked_set), dtype=np.int64)

    rows = np.concatenate(rows_list)
    cols = np.concatenate(cols_list)
    vals = np.concatenate([np.asarray(a, dtype=float) for a in vals_list])
    keep = ~drop[rows]
    rows, cols, vals = rows[keep], cols[keep], vals[keep]

    brows = np.concatenate(brow_list)
    bslots = np.concatenate(bslot_list)
    bvals = np.concatenate([np.asarray(a, dtype=float) for a in bval_list])
    bkeep = ~drop[brows]
    brows, bslots, bvals = brows[bkeep], bslots[bkeep], bvals[bkeep]

    add_rows: list = []
    add_cols: list = []
    add_vals: list = []
    badd_rows: list = []
    badd_slots: list = []
    badd_vals: list = []
    for rb in extra_rows:
        add_rows.extend([rb.row] * len(rb.cols))
        add_cols.extend(rb.cols)
        add_vals.extend(rb.vals)
        bc[rb.row] += rb.bc
        badd_rows.extend([rb.row] * len(rb.bslots))
        badd_slots.extend(rb.bslots)
        badd_vals.extend(rb.bvals)
    for row in solid_rows:
        add_rows.append(int(row))
        add_cols.append(int(row))
        add_vals.append(1.0)
        bc[row] = 0.0

    rows = np.concatenate([rows, np.asarray(add_rows, dtype=np.int64)])
    cols = np.concatenate([cols, np.asarray(add_cols, dtype=np.int64)])
    vals = np.concatenate([vals, np.asarray(add_vals, dtype=float)])
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    matrix.sum_duplicates()

    brows = np.concatenate([brows, np.asarray(badd_rows, dtype=np.int64)])
    bslots = np.concatenate([bslots, np.asarray(badd_slots, dtype=np.int64)])
    bvals = np.concatenate([bvals, np.asarray(badd_vals, dtype=float)])
    bmap = sp.csr_matrix((bvals, (brows, bslots)),
                         shape=(n, n_boundary_slots(grid, kind)))

    return SparseOperator(kind, matrix, bc, bmap, marked, solid_rows,
                          parts.shape2d, sigma=sigma)


def _build_irregular_row(grid, re, dt, kind, preset, node_state, kappa,
                         cut_at, body, t, body_vel, body_data, i, j):
    """Shortley-Weller row for one near-boundary velocity unknown.

    Returns None when all legs turn out regular (the vectorized row stands).
    """
    nx, ny = grid.nx, grid.ny
    hy = grid.hy
    inv_re = 1.0 / re
    sigma = 1.5 / dt
    comp = 0 if kind == "u" else 1
    nyu = ny if kind == "u" else ny - 1

    def row_of(key):
        if kind == "u":
            return (key[0] - 1) * nyu + key[1]
        return key[0] * nyu + (key[1] - 1)

    if kind == "u":
        ord_here = kappa[i, j]
        ord_reg = grid.yc[j]
        pos = np.array([grid.x_faces[i], ord_here])
    else:
        ord_here = kappa[i, j]
        ord_reg = grid.xc[i]
        pos = np.array([ord_here, grid.y_faces[j]])

    rb = _RowBuilder(row_of((i, j)))
    if ord_here != ord_reg:
        rb.irregular = True

    def body_val(pt):
        return float(_body_values(body_vel, body_data, comp, [pt])[0])

    # legs along the face line: exact shortened distances ---------------------
    line_legs = []  # (distance, tag-tuple); tags: n/b/w/ghost
    own_cut = cut_at[i, j]
    for side in (-1, 1):
        if not np.isnan(own_cut) and np.sign(own_cut - ord_here) == side:
            # our own face's fluid part ends on the boundary on this side
            d = abs(own_cut - ord_here)
            pt = (pos[0], own_cut) if kind == "u" else (own_cut, pos[1])
            line_legs.append((max(d, 1e-12 * hy), ("b", body_val(pt))))
            rb.irregular = True
            continue
        jn = j + side if kind == "u" else j
        in_ = i if kind == "u" else i + side
        if kind == "u" and not (0 <= jn <= ny - 1):
            line_legs.append((hy, ("ghost", side)))
            continue
        if kind == "v" and not (0 <= in_ <= nx - 1):
            wall_x = grid.x_faces[0] if side < 0 else grid.x_faces[-1]
            slot = (2 * nx + (j - 1)) if side < 0 else (2 * nx + (ny - 1) + (j - 1))
            if ord_here != ord_reg:
                rb.irregular = True
            line_legs.append((abs(wall_x - ord_here), ("w", slot)))
            continue
        key = (i, jn) if kind == "u" else (in_, j)
        st = node_state[key]
        if st == SOLID:
            tgt = grid.yc[jn] if kind == "u" else grid.xc[in_]
            p1 = np.array([pos[0], tgt]) if kind == "u" else np.array([tgt, pos[1]])
            s = segment_crossing(body, t, pos, p1)
            if s is None:
                # snapped sliver: boundary sits at the shared face corner
                edge = (grid.y_faces[j + (side > 0)] if kind == "u"
                        else grid.x_faces[i + (side > 0)])
                d = abs(edge - ord_here)
                pt = (pos[0], edge) if kind == "u" else (edge, pos[1])
            else:
                d = s * abs(tgt - ord_here)
                pt = tuple(pos + s * (p1 - pos))
            line_legs.append((max(d, 1e-12 * hy), ("b", body_val(pt))))
            rb.irregular = True
        else:
            nb_ord = kappa[key]
            nb_reg = grid.yc[jn] if kind == "u" else grid.xc[in_]
            if nb_ord != nb_reg:
                rb.irregular = True
            line_legs.append((abs(nb_ord - ord_here), ("n", key)))

    # cross legs toward the neighbouring lines --------------------------------
    cross_legs = []  # (distance, [terms], interp error weight)
    for side in (-1, 1):
        if kind == "u":
            ln = i + side
            data_line = ln == 0 or ln == nx
            p1 = np.array([grid.x_faces[ln], ord_here])
        else:
            ln = j + side
            data_line = ln == 0 or ln == ny
            p1 = np.array([ord_here, grid.y_faces[ln]])
        full_d = float(np.linalg.norm(p1 - pos))
        s = segment_crossing(body, t, pos, p1)
        if s is not None:
            pt = tuple(pos + s * (p1 - pos))
            cross_legs.append((max(s * full_d, 1e-12 * full_d),
                               [("b", body_val(pt), 1.0)], 0.0))
            rb.irregular = True
            continue
        res = _line_samples(grid, kind, node_state, kappa, cut_at, ln,
                            j if kind == "u" else i, ord_here, body_val,
                            data_line)
        if res is None:
            raise UnderResolvedGeometryError(
                f"no interpolation bracket on the neighbouring line for "
                f"{kind} node ({i}, {j})")
        terms, exact_regular, werr = res
        if not exact_regular:
            rb.irregular = True
        cross_legs.append((full_d, terms, werr))

    if not rb.irregular:
        return None

    entries: dict = {}

    def add_unknown(rrow, val):
        entries[rrow] = entries.get(rrow, 0.0) + val

    # The cross values come from linear interpolation along the neighbouring
    # lines, which leaves a curvature error w*u'' per leg.  Shrinking the
    # line-direction second difference by the matching amount cancels it, so
    # the six-point row stays exact on quadratics (first-order truncation).
    # The shrink factor is floored to keep the row diagonally dominant when
    # the cells are strongly anisotropic; the cancellation is then partial.
    (dc_m, terms_m, w_m), (dc_p, terms_p, w_p) = cross_legs
    xl, xc_, xr = _second_diff(dc_m, dc_p)
    scale = max(1.0 - (xl * w_m + xr * w_p), 0.2)

    (d_m, leg_m), (d_p, leg_p) = line_legs
    cl, cc, cr = _second_diff(d_m, d_p)
    total_c = sigma - inv_re * cc * scale
    for leg, coef in ((leg_m, cl * scale), (leg_p, cr * scale)):
        if leg[0] == "ghost":
            if preset == "open":
                total_c += -inv_re * coef  # mirror ghost equals the center
            else:
                total_c -= -inv_re * coef  # ghost = 2 u_wall - u_center, wall 0
        elif leg[0] == "n":
            add_unknown(row_of(leg[1]), -inv_re * coef)
        elif leg[0] == "b":
            rb.bc += inv_re * coef * leg[1]
        elif leg[0] == "w":
            rb.bslots.append(leg[1])
            rb.bvals.append(inv_re * coef)
    add_unknown(rb.row, total_c)

    add_unknown(rb.row, -inv_re * xc_)
    for terms, coef in ((terms_m, xl), (terms_p, xr)):
        for term in terms:
            if term[0] == "n":
                add_unknown(row_of(term[1]), -inv_re * coef * term[2])
            elif term[0] == "b":
                rb.bc += inv_re * coef * term[1] * term[2]
            else:
                rb.bslots.append(term[1])
                rb.bvals.append(inv_re * coef * term[2])

    rb.cols = list(entries.keys())
    rb.vals = [entries[c] for c in rb.cols]
    return rb


def _line_samples(grid, kind, node_state, kappa, cut_at, ln, center_j,
                  ord_here, body_val, data_line):
    """Component value on line `ln` at ordinate `ord_here`.

    Returns (terms, exact_regular, werr): terms are ('n', key, w) unknown
    references, ('b', value, w) boundary points and ('w', slot, w) outer-data
    references.  exact_regular means the single regular node got weight one.
    werr = (q-a)(b-q)/2 is the curvature weight of the linear interpolation
    error; zero for an exact hit.
    """
    nx, ny = grid.nx, grid.ny
    samples = []
    window = range(center_j - 2, center_j + 3)
    if kind == "u":
        for jn in window:
            if not (0 <= jn <= ny - 1):
                continue
            if data_line:
                samples.append((grid.yc[jn], ("w", (0 if ln == 0 else ny) + jn)))
                continue
            if node_state[ln, jn] != SOLID:
                samples.append((kappa[ln, jn], ("n", (ln, jn))))
            cy = cut_at[ln, jn]
            if not np.isnan(cy):
                samples.append((cy, ("b", body_val((grid.x_faces[ln], cy)))))
    else:
        for in_ in window:
            if not (0 <= in_ <= nx - 1):
                continue
            if data_line:
                samples.append((grid.xc[in_], ("w", (0 if ln == 0 else nx) + in_)))
                continue
            if node_state[in_, ln] != SOLID:
                samples.append((kappa[in_, ln], ("n", (in_, ln))))
            cx = cut_at[in_, ln]
            if not np.isnan(cx):
                samples.append((cx, ("b", body_val((cx, grid.y_faces[ln])))))
        if not data_line:
            if center_j - 2 <= -1:
                samples.append((grid.x_faces[0], ("w", 2 * nx + (ln - 1))))
            if center_j + 2 >= nx:
                samples.append((grid.x_faces[-1], ("w", 2 * nx + (ny - 1) + (ln - 1))))

    if not samples:
        return None
    samples.sort(key=lambda sv: sv[0])
    ords = [sv[0] for sv in samples]
    # tolerant hit: tangency can place a sample within roundoff of the leg
    tol = 1e-9 * grid.hy
    best = min(range(len(samples)), key=lambda q: abs(ords[q] - ord_here))
    if abs(ords[best] - ord_here) <= tol:
        o, term = samples[best]
        reg_key = (ln, center_j) if kind == "u" else (center_j, ln)
        reg_ord = grid.yc[center_j] if kind == "u" else grid.xc[center_j]
        regular = term[0] == "n" and term[1] == reg_key and o == reg_ord
        return [term + (1.0,)], regular, 0.0
    k = int(np.searchsorted(np.asarray(ords), ord_here))
    if k == 0 or k == len(samples):
        return None
    oa, ta = samples[k - 1]
    ob, tb = samples[k]
    wa = (ob - ord_here) / (ob - oa)
    werr = 0.5 * (ord_here - oa) * (ob - ord_here)
    return [ta + (wa,), tb + (1.0 - wa,)], False, werr


# ---------------------------------------------------------------------------
# divergence / gradient / pressure Poisson


def divergence(grid: StaggeredGrid, u: np.ndarray, v: np.ndarray,
               geom: CutCellGeometry | None = None,
               body_vel=(0.0, 0.0),
               body_data=None) -> np.ndarray:
    """Aperture-weighted finite-volume divergence over the fluid cell areas.

    Includes the body-boundary closure flux, so a velocity field that matches
    the body velocity is exactly divergence free in the cut cells.
    """
    hy = grid.hy
    hx = grid.hx[:, None]
    if geom is None:
        net = (u[1:, :] - u[:-1, :]) * hy + (v[:, 1:] - v[:, :-1]) * hx
        return net / (hx * hy)
    xi_u, xi_v = geom.xi_u, geom.xi_v
    net = (xi_u[1:, :] * u[1:, :] - xi_u[:-1, :] * u[:-1, :]) * hy
    net += (xi_v[:, 1:] * v[:, 1:] - xi_v[:, :-1] * v[:, :-1]) * hx
    if geom.n_segments:
        if body_data is not None:
            ub = np.asarray(body_data(geom.seg_mid), dtype=float)
        else:
            ub = np.broadcast_to(np.asarray(body_vel, dtype=float),
                                 (geom.n_segments, 2)).copy()
        flux = -(ub[:, 0] * geom.seg_normal[:, 0]
                 + ub[:, 1] * geom.seg_normal[:, 1]) * geom.seg_len
        np.add.at(net, (geom.seg_cell[:, 0], geom.seg_cell[:, 1]), flux)
    area = geom.fluid_area
    out = np.zeros_like(net)
    good = area > 0.0
    out[good] = net[good] / area[good]
    return out


def gradient(grid: StaggeredGrid, p: np.ndarray,
             mask: CellMask | None = None,
             geom: CutCellGeometry | None = None) -> tuple:
    """Pressure gradient at interior velocity nodes (data slots zero).

    Relocated nodes evaluate each one-sided pressure at the node's actual
    ordinate by linear interpolation between the two adjacent cell centers of
    that column (u) or row (v); the difference runs over the usual spacing.
    """
    nx, ny = grid.nx, grid.ny
    gu = np.zeros((nx + 1, ny))
    gv = np.zeros((nx, ny + 1))
    dxc = grid.xc[1:] - grid.xc[:-1]
    gu[1:-1, :] = (p[1:, :] - p[:-1, :]) / dxc[:, None]
    gv[:, 1:-1] = (p[:, 1:] - p[:, :-1]) / grid.hy
    if mask is None or geom is None:
        return gu, gv
    for (i, j) in np.argwhere(mask.u_node == RELOCATED):
        if i == 0 or i == nx:
            continue
        yk = geom.kappa_u[i, j]
        pl = _p_at(grid, mask, p, i - 1, j, yk, axis=1)
        pr = _p_at(grid, mask, p, i, j, yk, axis=1)
        gu[i, j] = (pr - pl) / dxc[i - 1]
    for (i, j) in np.argwhere(mask.v_node == RELOCATED):
        if j == 0 or j == ny:
            continue
        xk = geom.kappa_v[i, j]
        pb = _p_at(grid, mask, p, i, j - 1, xk, axis=0)
        pt = _p_at(grid, mask, p, i, j, xk, axis=0)
        gv[i, j] = (pt - pb) / grid.hy
    gu[1:-1, :][mask.u_node[1:-1, :] == SOLID] = 0.0
    gv[:, 1:-1][mask.v_node[:, 1:-1] == SOLID] = 0.0
    return gu, gv


def _p_at(grid, mask, p, i, j, coord, axis):
    """Pressure of cell (i, j) shifted to `coord` along `axis` by linear
    interpolation with the next non-solid cell center; plain cell value when
    no usable partner exists."""
    if axis == 1:
        c0 = grid.yc[j]
        s = 1 if coord > c0 else -1
        jn = j + s
        if jn < 0 or jn >= grid.ny or mask.cell[i, jn] == SOLID:
            return p[i, j]
        w = abs(coord - c0) / grid.hy
        return (1.0 - w) * p[i, j] + w * p[i, jn]
    c0 = grid.xc[i]
    s = 1 if coord > c0 else -1
    in_ = i + s
    if in_ < 0 or in_ >= grid.nx or mask.cell[in_, j] == SOLID:
        return p[i, j]
    w = abs(coord - c0) / abs(grid.xc[in_] - c0)
    return (1.0 - w) * p[i, j] + w * p[in_, j]


def _u_slot(grid, i, j):
    return i * grid.ny + j


def _v_slot(grid, i, j):
    return (grid.nx + 1) * grid.ny + i * (grid.ny + 1) + j


def _assemble_divergence_matrix(grid, geom):
    """Sparse divergence: rows are cells, columns the full u then v layouts."""
    nx, ny = grid.nx, grid.ny
    hy = grid.hy
    if geom is None:
        area = np.outer(grid.hx, np.full(ny, hy))
        xi_u = np.ones((nx + 1, ny))
        xi_v = np.ones((nx, ny + 1))
    else:
        area = geom.fluid_area
        xi_u, xi_v = geom.xi_u, geom.xi_v
    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    r = (I * ny + J).ravel()
    a = area.ravel()
    good = a > 0.0
    inv_a = np.zeros_like(a)
    inv_a[good] = 1.0 / a[good]
    hx = grid.hx[:, None]

    fam = [
        ((I + 1) * ny + J, (xi_u[1:, :] * hy), 1.0, 0),
        (I * ny + J, (xi_u[:-1, :] * hy), -1.0, 0),
        (I * (ny + 1) + (J + 1), (xi_v[:, 1:] * hx), 1.0, (nx + 1) * ny),
        (I * (ny + 1) + J, (xi_v[:, :-1] * hx), -1.0, (nx + 1) * ny),
    ]
    rows, cols, vals = [], [], []
    for slot, w, sgn, off in fam:
        v = sgn * w.ravel() * inv_a
        keep = good & (v != 0.0)
        rows.append(r[keep])
        cols.append(slot.ravel()[keep] + off)
        vals.append(v[keep])
    nfull = (nx + 1) * ny + nx * (ny + 1)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nx * ny, nfull))


def _assemble_gradient_matrix(grid, geom, mask):
    """Sparse gradient: rows the full u then v layouts, columns are cells."""
    nx, ny = grid.nx, grid.ny
    dxc = grid.xc[1:] - grid.xc[:-1]
    inv_hy = 1.0 / grid.hy
    rows, cols, vals = [], [], []

    I, J = np.meshgrid(np.arange(1, nx), np.arange(ny), indexing="ij")
    keep = np.ones(I.shape, dtype=bool)
    if mask is not None:
        keep = mask.u_node[1:-1, :] == 0  # regular fluid rows only
    r = (I * ny + J)[keep]
    inv = (1.0 / dxc)[I[keep] - 1]
    rows += [r, r]
    cols += [((I - 1) * ny + J)[keep], (I * ny + J)[keep]]
    vals += [-inv, inv]

    I, J = np.meshgrid(np.arange(nx), np.arange(1, ny), indexing="ij")
    keep = np.ones(I.shape, dtype=bool)
    if mask is not None:
        keep = mask.v_node[:, 1:-1] == 0
    r = (_v_slot(grid, I, J))[keep]
    rows += [r, r]
    cols += [(I * ny + (J - 1))[keep], (I * ny + J)[keep]]
    vals += [np.full(r.size, -inv_hy), np.full(r.size, inv_hy)]

    lr, lc, lv = [], [], []
    if mask is not None and geom is not None:
        for (i, j) in np.argwhere(mask.u_node == RELOCATED):
            if i == 0 or i == nx:
                continue
            yk = geom.kappa_u[i, j]
            rr = _u_slot(grid, i, j)
            inv = 1.0 / dxc[i - 1]
            for (ic, sgn) in ((i - 1, -1.0), (i, 1.0)):
                c0 = grid.yc[j]
                s = 1 if yk > c0 else -1
                jn = j + s
                if jn < 0 or jn >= ny or mask.cell[ic, jn] == SOLID:
                    lr.append(rr); lc.append(ic * ny + j); lv.append(sgn * inv)
                else:
                    w = abs(yk - c0) / grid.hy
                    lr.append(rr); lc.append(ic * ny + j); lv.append(sgn * inv * (1.0 - w))
                    lr.append(rr); lc.append(ic * ny + jn); lv.append(sgn * inv * w)
        for (i, j) in np.argwhere(mask.v_node == RELOCATED):
            if j == 0 or j == ny:
                continue
            xk = geom.kappa_v[i, j]
            rr = _v_slot(grid, i, j)
            for (jc, sgn) in ((j - 1, -1.0), (j, 1.0)):
                c0 = grid.xc[i]
                s = 1 if xk > c0 else -1
                in_ = i + s
                if in_ < 0 or in_ >= nx or mask.cell[in_, jc] == SOLID:
                    lr.append(rr); lc.append(i * ny + jc); lv.append(sgn * inv_hy)
                else:
                    w = abs(xk - c0) / abs(grid.xc[in_] - c0)
                    lr.append(rr); lc.append(i * ny + jc); lv.append(sgn * inv_hy * (1.0 - w))
                    lr.append(rr); lc.append(in_ * ny + jc); lv.append(sgn * inv_hy * w)
    rows.append(np.asarray(lr, dtype=np.int64))
    cols.append(np.asarray(lc, dtype=np.int64))
    vals.append(np.asarray(lv, dtype=float))

    nfull = (nx + 1) * ny + nx * (ny + 1)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nfull, nx * ny))


def assemble_pressure_poisson(grid: StaggeredGrid,
                              mask: CellMask | None = None,
                              geom: CutCellGeometry | None = None) -> SparseOperator:
    """Discrete Poisson operator: literally divergence composed with gradient.

    Solid cells become identity rows; marked rows are those whose entries
    differ from the no-body composition.  The left null vector used for
    compatibility projection is the fluid-area weight.
    """
    nx, ny = grid.nx, grid.ny
    n = nx * ny
    D = _assemble_divergence_matrix(grid, geom)
    G = _assemble_gradient_matrix(grid, geom, mask)
    L = (D @ G).tocsr()
    L.sum_duplicates()

    solid_rows = np.zeros(0, dtype=np.int64)
    marked = np.zeros(0, dtype=np.int64)
    if geom is not None and mask is not None:
        D0 = _assemble_divergence_matrix(grid, None)
        G0 = _assemble_gradient_matrix(grid, None, None)
        L0 = (D0 @ G0).tocsr()
        diff = (L - L0).tocsr()
        diff.eliminate_zeros()
        touched = np.unique(diff.nonzero()[0]).astype(np.int64)
        solid_rows = np.nonzero(mask.cell.ravel() == SOLID)[0].astype(np.int64)
        marked = np.setdiff1d(touched, solid_rows)
        keep = np.ones(n)
        keep[solid_rows] = 0.0
        add = np.zeros(n)
        add[solid_rows] = 1.0
        L = (sp.diags(keep) @ L + sp.diags(add)).tocsr()
        L.eliminate_zeros()

    if mask is not None:
        fluid_mask = mask.cell.ravel() != SOLID
        areas = (geom.fluid_area.ravel() if geom is not None
                 else np.outer(grid.hx, np.full(ny, grid.hy)).ravel())
    else:
        fluid_mask = np.ones(n, dtype=bool)
        areas = np.outer(grid.hx, np.full(ny, grid.hy)).ravel()
    null = np.where(fluid_mask, areas, 0.0)

    return SparseOperator("p", L, np.zeros(n), sp.csr_matrix((n, 0)), marked,
                          solid_rows, (nx, ny), singular=True, left_null=null,
                          fluid_mask=fluid_mask)


# ---------------------------------------------------------------------------
# convection


def _apertures_windowed(body, t, axis, coord, lo, hi, pad):
    """Fluid fractions, evaluating the cut test only near the body."""
    xi = np.ones(coord.shape)
    if body is None:
        return xi
    c = body.center_at(t)
    r = body.radius
    cross_c = c[0] if axis == "x" else c[1]
    along_c = c[1] if axis == "x" else c[0]
    m = ((np.abs(coord - cross_c) <= r + pad)
         & (hi >= along_c - r - pad) & (lo <= along_c + r + pad))
    if np.any(m):
        xi[m] = segment_apertures(body, t, axis, coord[m], lo[m], hi[m])
    return xi


def convection(grid: StaggeredGrid, u: np.ndarray, v: np.ndarray,
               body: LevelSetBody | None = None, t: float = 0.0,
               body_vel=(0.0, 0.0)) -> tuple:
    """Divergence-form convection for both momentum components.

    Control volumes are the staggered boxes around each velocity node; edge
    fluxes are aperture weighted and closed over the body boundary, so the
    scheme reduces to the standard second-order MAC form away from the cut.
    Data slots of the returned arrays stay zero.
    """
    nx, ny = grid.nx, grid.ny
    hy = grid.hy
    hx = grid.hx
    xc = grid.xc
    yc = grid.yc
    xf = grid.x_faces
    yf = grid.y_faces
    pad = 2.0 * max(float(np.max(hx)), hy)
    Nu = np.zeros((nx + 1, ny))
    Nv = np.zeros((nx, ny + 1))
    ubx, uby = float(body_vel[0]), float(body_vel[1])

    # -- u momentum -----------------------------------------------------------
    Xc, Ylo = np.meshgrid(xc, yf[:-1], indexing="ij")
    Yhi = np.meshgrid(xc, yf[1:], indexing="ij")[1]
    xi_e = _apertures_windowed(body, t, "x", Xc, Ylo, Yhi, pad)  # (nx, ny)
    ubar = 0.5 * (u[:-1, :] + u[1:, :])
    Fx = xi_e * hy * ubar * ubar

    Xl, Yp = np.meshgrid(xc[:-1], yf, indexing="ij")
    Xr = np.meshgrid(xc[1:], yf, indexing="ij")[0]
    xi_n = _apertures_windowed(body, t, "y", Yp, Xl, Xr, pad)  # (nx-1, ny+1)
    alpha = (hx[:-1] / (hx[:-1] + hx[1:]))[:, None]
    ubar_c = np.zeros((nx - 1, ny + 1))
    ubar_c[:, 1:-1] = 0.5 * (u[1:-1, :-1] + u[1:-1, 1:])
    vbar_c = (1.0 - alpha) * v[:-1, :] + alpha * v[1:, :]
    wx = 0.5 * (hx[:-1] + hx[1:])[:, None]
    Fy = xi_n * wx * ubar_c * vbar_c
    Fy[:, 0] = 0.0  # wall-normal velocity vanishes for both presets
    Fy[:, -1] = 0.0

    closure_x = (xi_e[1:, :] - xi_e[:-1, :]) * hy
    closure_y = (xi_n[:, 1:] - xi_n[:, :-1]) * wx
    Fb = ubx * (ubx * (-closure_x) + uby * (-closure_y))
    Nu[1:-1, :] = (Fx[1:, :] - Fx[:-1, :] + Fy[:, 1:] - Fy[:, :-1] + Fb) / (wx * hy)

    # -- v momentum -----------------------------------------------------------
    Xp, Yl = np.meshgrid(xf, yc[:-1], indexing="ij")
    Yh = np.meshgrid(xf, yc[1:], indexing="ij")[1]
    xi_ev = _apertures_windowed(body, t, "x", Xp, Yl, Yh, pad)  # (nx+1, ny-1)
    ubar_v = 0.5 * (u[:, :-1] + u[:, 1:])  # u at the (x_i, y_j) corners
    vbar_e = np.zeros((nx + 1, ny - 1))
    vbar_e[1:-1, :] = 0.5 * (v[:-1, 1:-1] + v[1:, 1:-1])
    vbar_e[0, :] = v[0, 1:-1]
    vbar_e[-1, :] = v[-1, 1:-1]
    Fxv = xi_ev * hy * ubar_v * vbar_e

    Xlo, Ycc = np.meshgrid(xf[:-1], yc, indexing="ij")
    Xhi = np.meshgrid(xf[1:], yc, indexing="ij")[0]
    xi_nv = _apertures_windowed(body, t, "y", Ycc, Xlo, Xhi, pad)  # (nx, ny)
    vbar_n = 0.5 * (v[:, :-1] + v[:, 1:])
    Fyv = xi_nv * hx[:, None] * vbar_n * vbar_n

    closure_xv = (xi_ev[1:, :] - xi_ev[:-1, :]) * hy
    closure_yv = (xi_nv[:, 1:] - xi_nv[:, :-1]) * hx[:, None]
    Fbv = uby * (ubx * (-closure_xv) + uby * (-closure_yv))
    Nv[:, 1:-1] = (Fxv[1:, :] - Fxv[:-1, :] + Fyv[:, 1:] - Fyv[:, :-1] + Fbv) \
        / (hx[:, None] * hy)

    if body is not None:
        # Solid nodes carry no momentum equation; same snap rule as the mask.
        own_u = _apertures_windowed(
            body, t, "x",
            np.broadcast_to(xf[:, None], (nx + 1, ny)),
            np.broadcast_to(yf[None, :-1], (nx + 1, ny)),
            np.broadcast_to(yf[None, 1:], (nx + 1, ny)), pad)
        Nu[own_u < SNAP_TOL] = 0.0
        own_v = _apertures_windowed(
            body, t, "y",
            np.broadcast_to(yf[None, :], (nx, ny + 1)),
            np.broadcast_to(xf[:-1, None], (nx, ny + 1)),
            np.broadcast_to(xf[1:, None], (nx, ny + 1)), pad)
        Nv[own_v < SNAP_TOL] = 0.0
    return Nu, Nv


# ---------------------------------------------------------------------------
# outer boundary conditions


def apply_outer_bcs(grid: StaggeredGrid, u: np.ndarray, v: np.ndarray,
                    v_wall_hi: np.ndarray, preset: str, dt: float,
                    u_inf: float = 1.0) -> np.ndarray:
    """Update the outer Dirichlet data slots in place.

    open: uniform inflow, convective outflow (explicit upwind at the free
    stream speed), slip walls.  confined: all data zero.  Returns the updated
    outflow-side wall values of v (the only off-array data family).
    """
    if preset == "confined":
        u[0, :] = 0.0
        u[-1, :] = 0.0
        v[:, 0] = 0.0
        v[:, -1] = 0.0
        return np.zeros_like(v_wall_hi)
    u[0, :] = u_inf
    hxl = grid.hx[-1]
    u[-1, :] = u[-1, :] - dt * u_inf * (u[-1, :] - u[-2, :]) / hxl
    v[:, 0] = 0.0
    v[:, -1] = 0.0
    return v_wall_hi - dt * u_inf * (v_wall_hi - v[-1, 1:-1]) / (0.5 * hxl)


def balance_outflow(grid: StaggeredGrid, u: np.ndarray,
                    geom: CutCellGeometry | None = None) -> None:
    """Shift the outflow column uniformly so the global mass flux closes.

    The discrete Poisson problem is only compatible when the net flux through
    the outer boundary vanishes (rigid bodies conserve volume); the convective
    outflow update does not enforce that on its own.
    """
    hy = grid.hy
    xi_in = geom.xi_u[0, :] if geom is not None else np.ones(grid.ny)
    xi_out = geom.xi_u[-1, :] if geom is not None else np.ones(grid.ny)
    inflow = float(np.sum(xi_in * u[0, :]) * hy)
    outflow = float(np.sum(xi_out * u[-1, :]) * hy)
    open_len = float(np.sum(xi_out) * hy)
    if open_len > 0.0:
        u[-1, :] += (inflow - outflow) / open_len


def vorticity(grid: StaggeredGrid, u: np.ndarray, v: np.ndarray,
              body: LevelSetBody | None = None, t: float = 0.0) -> np.ndarray:
    """dv/dx - du/dy at grid corners; corners inside the body are zero."""
    nx, ny = grid.nx, grid.ny
    w = np.zeros((nx + 1, ny + 1))
    dxc = (grid.xc[1:] - grid.xc[:-1])[:, None]
    w[1:-1, 1:-1] = (v[1:, 1:-1] - v[:-1, 1:-1]) / dxc \
        - (u[1:-1, 1:] - u[1:-1, :-1]) / grid.hy
    w[0, :] = w[1, :]
    w[-1, :] = w[-2, :]
    w[:, 0] = w[:, 1]
    w[:, -1] = w[:, -2]
    if body is not None:
        X, Y = np.meshgrid(grid.x_faces, grid.y_faces, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        phi = levelset_eval(body, pts, t).reshape(nx + 1, ny + 1)
        w[phi <= 0.0] = 0.0
    return w
