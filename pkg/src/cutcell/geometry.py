"""Rigid circular bodies on the staggered grid: classification and cut geometry.

The level set is the signed distance to the body boundary, positive in the
fluid.  Faces crossed by the zero level set get an aperture xi in (0, 1) (the
fluid fraction) and the velocity unknown on a cut face is relocated to the
midpoint of its fluid portion.  Each cut pressure cell carries one straight
boundary segment joining the two face intersections; segments chain into a
closed polyline around the body.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UnderResolvedGeometryError
from .grid import StaggeredGrid

# Cell kinds.
FLUID = 0
SOLID = 1
CUT = 2
# Node kinds (u/v unknowns). FLUID/SOLID shared; a cut face holds a RELOCATED node.
RELOCATED = 2

# Apertures closer than this to 0 or 1 snap to the exact value.
SNAP_TOL = 1e-6


@dataclass(frozen=True)
class LevelSetBody:
    """Circle of given radius, either fixed or translating sinusoidally in x.

    For ``motion='sinusoidal'`` the velocity is (alpha*2*sin(t/2), 0) and the
    center offset is integrated exactly: x_c(t) = alpha*4*(1 - cos(t/2)).
    """

    center: tuple
    radius: float
    motion: str = "fixed"
    alpha: float = 0.25

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ConfigError(f"body.radius must be positive, got {self.radius}")
        if self.motion not in ("fixed", "sinusoidal"):
            raise ConfigError(f"body.motion: unknown kind '{self.motion}'")

    def center_at(self, t: float) -> np.ndarray:
        cx, cy = self.center
        if self.motion == "sinusoidal":
            cx = cx + self.alpha * 4.0 * (1.0 - np.cos(0.5 * t))
        return np.array([cx, cy])

    def velocity(self, t: float) -> np.ndarray:
        if self.motion == "sinusoidal":
            return np.array([self.alpha * 2.0 * np.sin(0.5 * t), 0.0])
        return np.zeros(2)

    def max_center_offset(self, t_max: float) -> float:
        """Largest |x_c(t) - x_c(0)| over [0, t_max]."""
        if self.motion != "sinusoidal":
            return 0.0
        t_peak = min(abs(t_max), 2.0 * np.pi)
        return self.alpha * 4.0 * (1.0 - np.cos(0.5 * t_peak))


def body_velocity(body: LevelSetBody, t: float) -> np.ndarray:
    return body.velocity(t)


def levelset_eval(body: LevelSetBody, points, t: float = 0.0) -> np.ndarray:
    """Signed distance to the body boundary at time t, positive in the fluid."""
    pts = np.asarray(points, dtype=float)
    c = body.center_at(t)
    d = np.sqrt((pts[..., 0] - c[0]) ** 2 + (pts[..., 1] - c[1]) ** 2)
    return d - body.radius


@dataclass
class CellMask:
    """Classification of pressure cells and velocity nodes.

    cell: (nx, ny) in {FLUID, SOLID, CUT}
    u_node: (nx+1, ny) in {FLUID, SOLID, RELOCATED}; boundary columns are data
    slots and always FLUID when no body touches them.
    v_node: (nx, ny+1) likewise.
    """

    cell: np.ndarray
    u_node: np.ndarray
    v_node: np.ndarray

    @property
    def n_cut(self) -> int:
        return int(np.count_nonzero(self.cell == CUT))

    @property
    def n_solid(self) -> int:
        return int(np.count_nonzero(self.cell == SOLID))


@dataclass
class CutCellGeometry:
    """Apertures, relocated positions, boundary segments and fluid areas.

    xi_u[i, j] is the fluid fraction of the vertical face at (x_faces[i],
    y-cell j); kappa_u[i, j] the ordinate of the relocated u unknown (equal to
    the cell-center ordinate on uncut faces).  Mirrored for v with abscissae.
    Segments: one straight chord per cut cell, unit normal pointing into the
    fluid, ordered counterclockwise around the body.
    """

    xi_u: np.ndarray
    xi_v: np.ndarray
    kappa_u: np.ndarray
    kappa_v: np.ndarray
    fluid_area: np.ndarray
    # Intersection ordinate on cut u-faces (NaN elsewhere), abscissa for v.
    cut_y_u: np.ndarray
    cut_x_v: np.ndarray
    seg_cell: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.intp))
    seg_p1: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    seg_p2: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    seg_mid: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    seg_len: np.ndarray = field(default_factory=lambda: np.zeros(0))
    seg_normal: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    seg_of_cell: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.intp))

    @property
    def n_segments(self) -> int:
        return self.seg_len.size

    @property
    def perimeter(self) -> float:
        return float(self.seg_len.sum())


def segment_apertures(body, t, axis, coord, lo, hi):
    """Fluid fraction of axis-aligned segments cut by the body.

    axis='x': vertical segments at abscissa coord[k] spanning y in
    [lo[k], hi[k]]; axis='y': horizontal segments at ordinate coord[k]
    spanning x.  All arrays broadcast together.  Raises when a segment is cut
    twice (endpoints fluid but the interior dips into the body).
    """
    coord, lo, hi = np.broadcast_arrays(
        np.asarray(coord, dtype=float), np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    )
    if body is None:
        return np.ones(coord.shape)
    c = body.center_at(t)
    along_c, cross_c = (c[1], c[0]) if axis == "x" else (c[0], c[1])
    d_cross = coord - cross_c
    phi_lo = np.sqrt(d_cross**2 + (lo - along_c) ** 2) - body.radius
    phi_hi = np.sqrt(d_cross**2 + (hi - along_c) ** 2) - body.radius

    xi = np.ones(coord.shape)
    solid = (phi_lo <= 0.0) & (phi_hi <= 0.0)
    xi[solid] = 0.0
    mixed = (phi_lo <= 0.0) != (phi_hi <= 0.0)

    near = np.clip(along_c, lo, hi)
    dips = (
        (~solid)
        & (~mixed)
        & (np.sqrt(d_cross**2 + (near - along_c) ** 2) - body.radius < 0.0)
    )
    if np.any(dips):
        raise UnderResolvedGeometryError(
            "a momentum control-volume edge is cut twice by the body boundary"
        )
    if np.any(mixed):
        idx = np.nonzero(mixed)
        half = np.sqrt(np.maximum(body.radius**2 - d_cross[idx] ** 2, 0.0))
        r_hi = along_c + half
        r_lo = along_c - half
        s_lo, s_hi = lo[idx], hi[idx]
        root = np.where((r_hi >= s_lo) & (r_hi <= s_hi), r_hi, r_lo)
        fluid_hi = phi_hi[idx] > 0.0
        frac = np.where(fluid_hi, s_hi - root, root - s_lo) / (s_hi - s_lo)
        xi[idx] = np.clip(frac, 0.0, 1.0)
    return xi


def segment_crossing(body, t, p0, p1):
    """First crossing of the zero level set on the segment p0 -> p1.

    Returns the crossing fraction s in (0, 1] with phi(p0) > 0 assumed, or
    None when the whole segment stays in the fluid.  Raises when the segment
    leaves and re-enters the fluid (under-resolved feature).
    """
    if body is None:
        return None
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    c = body.center_at(t)
    d = p1 - p0
    f = p0 - c
    a = float(d @ d)
    b = 2.0 * float(f @ d)
    cc = float(f @ f) - body.radius**2
    disc = b * b - 4.0 * a * cc
    if disc <= 0.0 or a == 0.0:
        return None
    sq = np.sqrt(disc)
    s1 = (-b - sq) / (2.0 * a)
    s2 = (-b + sq) / (2.0 * a)
    if s1 > 1.0 or s2 < 0.0:
        return None
    if s1 > 0.0 and s2 > 1.0:
        return float(s1)
    # Remaining cases would raise.  Relocated stencil nodes can sit within
    # roundoff of the surface (grazing face near a tangency), making the
    # segment look like it dips inside; measure the deepest penetration and
    # treat roundoff-deep grazes as fluid.
    s_deep = min(max(-b / (2.0 * a), max(s1, 0.0)), min(s2, 1.0))
    pt = p0 + s_deep * d
    depth = body.radius - float(np.hypot(pt[0] - c[0], pt[1] - c[1]))
    if depth <= 1e-12 * body.radius:
        return None
    if s1 > 0.0:
        raise UnderResolvedGeometryError(
            "stencil leg crosses the body boundary twice (feature under-resolved)"
        )
    # s1 <= 0 < s2: p0 would be inside the body; callers guarantee otherwise.
    raise UnderResolvedGeometryError("stencil leg starts inside the body")


def _corner_phi(grid: StaggeredGrid, body: LevelSetBody | None, t: float) -> np.ndarray:
    if body is None:
        return np.full((grid.nx + 1, grid.ny + 1), np.inf)
    X, Y = np.meshgrid(grid.x_faces, grid.y_faces, indexing="ij")
    return levelset_eval(body, np.stack([X, Y], axis=-1), t)


def _check_clearance(grid: StaggeredGrid, body: LevelSetBody, t: float) -> None:
    x0, x1, y0, y1 = grid.bounds
    c = body.center_at(t)
    h = max(grid.hy, float(grid.hx.max()))
    gap = min(c[0] - x0, x1 - c[0], c[1] - y0, y1 - c[1]) - body.radius
    # Entirely outside the domain is fine (all-fluid); straddling the border is not.
    outside = (
        c[0] + body.radius < x0
        or c[0] - body.radius > x1
        or c[1] + body.radius < y0
        or c[1] - body.radius > y1
    )
    if outside:
        return
    if gap < h:
        raise ConfigError(
            f"body touches or comes within one cell of the outer boundary "
            f"(gap {gap:.3e}, cell {h:.3e}) at t={t:.6g}"
        )


def _vertical_face_cuts(grid, body, phi_c, t):
    """States, apertures, relocated ordinates and cut points of u-faces."""
    nx, ny = grid.nx, grid.ny
    hy = grid.hy
    ylo = grid.y_faces[:-1]
    yhi = grid.y_faces[1:]
    phi_lo = phi_c[:, :-1]
    phi_hi = phi_c[:, 1:]

    state = np.zeros((nx + 1, ny), dtype=np.uint8)
    xi = np.ones((nx + 1, ny))
    kappa = np.broadcast_to(grid.yc, (nx + 1, ny)).copy()
    cut_y = np.full((nx + 1, ny), np.nan)
    if body is None:
        return state, xi, kappa, cut_y

    c = body.center_at(t)
    solid = (phi_lo <= 0.0) & (phi_hi <= 0.0)
    mixed = (phi_lo <= 0.0) != (phi_hi <= 0.0)

    # A face whose endpoints are both fluid may still dip into the body when
    # the chord is shorter than the face; that is an under-resolved feature.
    dx = grid.x_faces[:, None] - c[0]
    inside_band = np.abs(dx) < body.radius
    y_near = np.clip(c[1], ylo, yhi)[None, :]
    phi_min = np.sqrt(dx**2 + (y_near - c[1]) ** 2) - body.radius
    double = (~solid) & (~mixed) & inside_band & (phi_min < 0.0)
    if np.any(double):
        i, j = np.argwhere(double)[0]
        raise UnderResolvedGeometryError(
            f"vertical face ({i},{j}) is cut twice by the body boundary"
        )

    state[solid] = SOLID
    xi[solid] = 0.0

    ii, jj = np.nonzero(mixed)
    if ii.size:
        # Exact circle-segment intersection; exactly one root lies on the face.
        dxi = grid.x_faces[ii] - c[0]
        half = np.sqrt(np.maximum(body.radius**2 - dxi**2, 0.0))
        r_hi = c[1] + half
        r_lo = c[1] - half
        lo, hi = ylo[jj], yhi[jj]
        y_star = np.where((r_hi >= lo) & (r_hi <= hi), r_hi, r_lo)
        fluid_above = phi_hi[ii, jj] > 0.0
        frac = np.where(fluid_above, hi - y_star, y_star - lo) / hy
        kap = np.where(fluid_above, 0.5 * (y_star + hi), 0.5 * (lo + y_star))

        snap_solid = frac < SNAP_TOL
        snap_fluid = frac > 1.0 - SNAP_TOL
        keep = ~(snap_solid | snap_fluid)
        state[ii[snap_solid], jj[snap_solid]] = SOLID
        xi[ii[snap_solid], jj[snap_solid]] = 0.0
        xi[ii[snap_fluid], jj[snap_fluid]] = 1.0
        state[ii[keep], jj[keep]] = CUT
        xi[ii[keep], jj[keep]] = frac[keep]
        kappa[ii[keep], jj[keep]] = kap[keep]
        cut_y[ii[keep], jj[keep]] = y_star[keep]
    return state, xi, kappa, cut_y


def _horizontal_face_cuts(grid, body, phi_c, t):
    """Mirror of :func:`_vertical_face_cuts` for v-faces (cuts move in x)."""
    nx, ny = grid.nx, grid.ny
    xlo = grid.x_faces[:-1]
    xhi = grid.x_faces[1:]
    hx = grid.hx
    phi_lo = phi_c[:-1, :]
    phi_hi = phi_c[1:, :]

    state = np.zeros((nx, ny + 1), dtype=np.uint8)
    xi = np.ones((nx, ny + 1))
    kappa = np.broadcast_to(grid.xc[:, None], (nx, ny + 1)).copy()
    cut_x = np.full((nx, ny + 1), np.nan)
    if body is None:
        return state, xi, kappa, cut_x

    c = body.center_at(t)
    solid = (phi_lo <= 0.0) & (phi_hi <= 0.0)
    mixed = (phi_lo <= 0.0) != (phi_hi <= 0.0)

    dy = grid.y_faces[None, :] - c[1]
    inside_band = np.abs(dy) < body.radius
    x_near = np.clip(c[0], xlo, xhi)[:, None]
    phi_min = np.sqrt((x_near - c[0]) ** 2 + dy**2) - body.radius
    double = (~solid) & (~mixed) & inside_band & (phi_min < 0.0)
    if np.any(double):
        i, j = np.argwhere(double)[0]
        raise UnderResolvedGeometryError(
            f"horizontal face ({i},{j}) is cut twice by the body boundary"
        )

    state[solid] = SOLID
    xi[solid] = 0.0

    ii, jj = np.nonzero(mixed)
    if ii.size:
        dyj = grid.y_faces[jj] - c[1]
        half = np.sqrt(np.maximum(body.radius**2 - dyj**2, 0.0))
        r_hi = c[0] + half
        r_lo = c[0] - half
        lo, hi = xlo[ii], xhi[ii]
        x_star = np.where((r_hi >= lo) & (r_hi <= hi), r_hi, r_lo)
        fluid_right = phi_hi[ii, jj] > 0.0
        frac = np.where(fluid_right, hi - x_star, x_star - lo) / hx[ii]
        kap = np.where(fluid_right, 0.5 * (x_star + hi), 0.5 * (lo + x_star))

        snap_solid = frac < SNAP_TOL
        snap_fluid = frac > 1.0 - SNAP_TOL
        keep = ~(snap_solid | snap_fluid)
        state[ii[snap_solid], jj[snap_solid]] = SOLID
        xi[ii[snap_solid], jj[snap_solid]] = 0.0
        xi[ii[snap_fluid], jj[snap_fluid]] = 1.0
        state[ii[keep], jj[keep]] = CUT
        xi[ii[keep], jj[keep]] = frac[keep]
        kappa[ii[keep], jj[keep]] = kap[keep]
        cut_x[ii[keep], jj[keep]] = x_star[keep]
    return state, xi, kappa, cut_x


def classify(grid: StaggeredGrid, body: LevelSetBody | None, t: float = 0.0) -> CellMask:
    """Classify pressure cells and velocity nodes at time t.

    A cell is SOLID/FLUID when all four of its faces are, CUT otherwise.
    Velocity nodes inherit the state of their face (a cut face holds a
    RELOCATED unknown).  No body (or a body outside the domain) gives
    all-FLUID.
    """
    if body is not None:
        _check_clearance(grid, body, t)
    phi_c = _corner_phi(grid, body, t)
    u_state, _, _, _ = _vertical_face_cuts(grid, body, phi_c, t)
    v_state, _, _, _ = _horizontal_face_cuts(grid, body, phi_c, t)

    left = u_state[:-1, :]
    right = u_state[1:, :]
    bottom = v_state[:, :-1]
    top = v_state[:, 1:]
    all_solid = (left == SOLID) & (right == SOLID) & (bottom == SOLID) & (top == SOLID)
    all_fluid = (left == FLUID) & (right == FLUID) & (bottom == FLUID) & (top == FLUID)
    cell = np.full((grid.nx, grid.ny), CUT, dtype=np.uint8)
    cell[all_fluid] = FLUID
    cell[all_solid] = SOLID
    return CellMask(cell=cell, u_node=u_state, v_node=v_state)


def cut_geometry(
    grid: StaggeredGrid,
    body: LevelSetBody | None,
    mask: CellMask,
    t: float = 0.0,
) -> CutCellGeometry:
    """Apertures, relocated positions, fluid areas and boundary segments."""
    phi_c = _corner_phi(grid, body, t)
    u_state, xi_u, kappa_u, cut_y = _vertical_face_cuts(grid, body, phi_c, t)
    v_state, xi_v, kappa_v, cut_x = _horizontal_face_cuts(grid, body, phi_c, t)

    nx, ny = grid.nx, grid.ny
    area = grid.cell_areas()
    area[mask.cell == SOLID] = 0.0

    seg_cell, seg_p1, seg_p2 = [], [], []
    seg_of_cell = np.full((nx, ny), -1, dtype=np.intp)
    cut_cells = np.argwhere(mask.cell == CUT)
    if body is not None:
        c = body.center_at(t)
    for i, j in cut_cells:
        # Chain the fluid sub-intervals of the four faces counterclockwise.
        # Consecutive intervals share corners exactly; the single gap in the
        # chain is the boundary chord (this also covers the case where the
        # body grazes a corner, phi = 0 there).
        corners = (
            (grid.x_faces[i], grid.y_faces[j]),
            (grid.x_faces[i + 1], grid.y_faces[j]),
            (grid.x_faces[i + 1], grid.y_faces[j + 1]),
            (grid.x_faces[i], grid.y_faces[j + 1]),
        )
        corner_phi = (
            phi_c[i, j],
            phi_c[i + 1, j],
            phi_c[i + 1, j + 1],
            phi_c[i, j + 1],
        )
        face_specs = (
            (v_state[i, j], cut_x[i, j], "h", 0, 1),
            (u_state[i + 1, j], cut_y[i + 1, j], "v", 1, 2),
            (v_state[i, j + 1], cut_x[i, j + 1], "h", 2, 3),
            (u_state[i, j], cut_y[i, j], "v", 3, 0),
        )
        edges = []
        for st, cut, ax, a, b in face_specs:
            if st == SOLID:
                continue
            pa, pb = corners[a], corners[b]
            if st == CUT:
                q = (cut, pa[1]) if ax == "h" else (pa[0], cut)
                edges.append((q, pb) if corner_phi[b] > 0.0 else (pa, q))
            else:
                edges.append((pa, pb))
        if not edges:
            raise UnderResolvedGeometryError(
                f"cut cell ({i},{j}) has no fluid boundary on its faces"
            )
        gaps = [
            (edges[k][1], edges[(k + 1) % len(edges)][0])
            for k in range(len(edges))
            if edges[k][1] != edges[(k + 1) % len(edges)][0]
        ]
        if len(gaps) != 1:
            raise UnderResolvedGeometryError(
                f"cut cell ({i},{j}) has {len(gaps)} boundary chords, expected 1"
            )
        poly = []
        for e in edges:
            for pt in e:
                if not poly or poly[-1] != pt:
                    poly.append(pt)
        if poly[0] == poly[-1]:
            poly.pop()
        xs = np.array([p[0] for p in poly])
        ys = np.array([p[1] for p in poly])
        area[i, j] = 0.5 * abs(
            np.dot(xs, np.roll(ys, -1)) - np.dot(ys, np.roll(xs, -1))
        )
        if area[i, j] <= 1e-12 * grid.hx[i] * grid.hy:
            raise UnderResolvedGeometryError(
                f"cut cell ({i},{j}) has a degenerate fluid polygon"
            )
        p1, p2 = np.array(gaps[0][0]), np.array(gaps[0][1])
        mid = 0.5 * (p1 + p2)
        n = mid - c
        n /= np.linalg.norm(n)
        # Counterclockwise direction around the body = normal rotated +90 deg.
        d = np.array([-n[1], n[0]])
        if np.dot(p2 - p1, d) < 0.0:
            p1, p2 = p2, p1
        seg_of_cell[i, j] = len(seg_cell)
        seg_cell.append((i, j))
        seg_p1.append(p1)
        seg_p2.append(p2)

    if seg_cell:
        seg_cell = np.array(seg_cell, dtype=np.intp)
        seg_p1 = np.array(seg_p1)
        seg_p2 = np.array(seg_p2)
        mids = 0.5 * (seg_p1 + seg_p2)
        vecs = seg_p2 - seg_p1
        lens = np.hypot(vecs[:, 0], vecs[:, 1])
        normals = np.column_stack([vecs[:, 1], -vecs[:, 0]]) / lens[:, None]
        # Orient into the fluid (away from the body center for a circle).
        flip = np.einsum("ij,ij->i", normals, mids - c) < 0.0
        normals[flip] *= -1.0
        # Order counterclockwise by midpoint angle for the closure contract.
        order = np.argsort(np.arctan2(mids[:, 1] - c[1], mids[:, 0] - c[0]))
        inv = np.empty_like(order)
        inv[order] = np.arange(order.size)
        keep = seg_of_cell >= 0
        seg_of_cell[keep] = inv[seg_of_cell[keep]]
        geom_args = dict(
            seg_cell=seg_cell[order],
            seg_p1=seg_p1[order],
            seg_p2=seg_p2[order],
            seg_mid=mids[order],
            seg_len=lens[order],
            seg_normal=normals[order],
            seg_of_cell=seg_of_cell,
        )
    else:
        geom_args = dict(seg_of_cell=seg_of_cell)

    return CutCellGeometry(
        xi_u=xi_u,
        xi_v=xi_v,
        kappa_u=kappa_u,
        kappa_v=kappa_v,
        fluid_area=area,
        cut_y_u=cut_y,
        cut_x_v=cut_x,
        **geom_args,
    )
