"""Hydrodynamic force on the body and the short-time drag prediction.

The force is a line integral over the boundary chords,

    F = sum_segments (-p(m) n + (1/Re) du/dn(m)) * length,

with the surface pressure extrapolated from the two nearest fluid pressure
cells along the outward normal and the normal velocity derivative taken as a
one-sided two-point difference between the body velocity and the flow probed
one cell size off the surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UnderResolvedGeometryError
from .geometry import body_velocity

__all__ = [
    "BodyForce",
    "ForceCoefficients",
    "body_force",
    "coefficients",
    "predicted_drag",
]


@dataclass(frozen=True)
class BodyForce:
    """Force vector on the body, split into pressure and viscous parts."""

    pressure: np.ndarray
    viscous: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.pressure + self.viscous


@dataclass(frozen=True)
class ForceCoefficients:
    t: float  # nondimensional time 2 U t / D
    cd: float
    cl: float
    cd_pressure: float
    cd_viscous: float


def _pressure_at_wall(grid, p, fluid_area, m, n):
    """Surface pressure at segment midpoint m, normal n into the fluid.

    Walks the normal ray and linearly extrapolates from the centers of the
    first two distinct non-solid cells it passes through.
    """
    x0, x1, y0, y1 = grid.bounds
    step = 0.25 * min(grid.hx_min, grid.hy)
    cells = []
    s = 0.0
    # 8 cell sizes is far more clearance than any resolved body needs
    s_max = 8.0 * max(grid.hx.max(), grid.hy)
    while len(cells) < 2:
        q = m + s * n
        if not (x0 <= q[0] <= x1 and y0 <= q[1] <= y1):
            raise UnderResolvedGeometryError(
                "force probe left the domain before finding two fluid "
                f"pressure cells (segment midpoint {m})"
            )
        if s > s_max:
            raise UnderResolvedGeometryError(
                "force probe found no fluid pressure cells along the normal "
                f"(segment midpoint {m})"
            )
        i = min(max(int(np.searchsorted(grid.x_faces, q[0]) - 1), 0), grid.nx - 1)
        j = min(max(int(np.searchsorted(grid.y_faces, q[1]) - 1), 0), grid.ny - 1)
        if (i, j) not in cells and fluid_area[i, j] > 0.0:
            # reject a second center that projects onto (almost) the same
            # normal coordinate; the extrapolation would be ill-conditioned
            if len(cells) == 1:
                c0 = cells[0]
                s0 = (grid.xc[c0[0]] - m[0]) * n[0] + (grid.yc[c0[1]] - m[1]) * n[1]
                s1 = (grid.xc[i] - m[0]) * n[0] + (grid.yc[j] - m[1]) * n[1]
                if s1 - s0 >= 0.05 * grid.hy:
                    cells.append((i, j))
            else:
                cells.append((i, j))
        s += step
    (i0, j0), (i1, j1) = cells
    s0 = (grid.xc[i0] - m[0]) * n[0] + (grid.yc[j0] - m[1]) * n[1]
    s1 = (grid.xc[i1] - m[0]) * n[0] + (grid.yc[j1] - m[1]) * n[1]
    p0, p1 = p[i0, j0], p[i1, j1]
    return p0 + (p1 - p0) * (0.0 - s0) / (s1 - s0)


def _bilinear(xs, ys, f, solid, fill, q, bounds):
    """Bilinear sample of a node field, substituting `fill` at solid nodes."""
    x0, x1, y0, y1 = bounds
    if not (x0 <= q[0] <= x1 and y0 <= q[1] <= y1):
        raise UnderResolvedGeometryError(
            f"velocity force probe at {q} left the domain"
        )
    i = min(max(int(np.searchsorted(xs, q[0]) - 1), 0), xs.size - 2)
    j = min(max(int(np.searchsorted(ys, q[1]) - 1), 0), ys.size - 2)
    tx = (q[0] - xs[i]) / (xs[i + 1] - xs[i])
    ty = (q[1] - ys[j]) / (ys[j + 1] - ys[j])
    out = 0.0
    for di, wx in ((0, 1.0 - tx), (1, tx)):
        for dj, wy in ((0, 1.0 - ty), (1, ty)):
            v = fill if solid[i + di, j + dj] else f[i + di, j + dj]
            out += wx * wy * v
    return out


def body_force(grid, state, geom, re: float, body=None) -> BodyForce:
    """Pressure and viscous force vectors on the body for the given state."""
    if geom.n_segments == 0:
        z = np.zeros(2)
        return BodyForce(pressure=z, viscous=z.copy())
    vel = body_velocity(body, state.t) if body is not None else np.zeros(2)
    h = grid.hy
    u_solid = geom.xi_u == 0.0
    v_solid = geom.xi_v == 0.0

    f_p = np.zeros(2)
    f_v = np.zeros(2)
    for k in range(geom.n_segments):
        m = geom.seg_mid[k]
        n = geom.seg_normal[k]
        ln = geom.seg_len[k]

        pw = _pressure_at_wall(grid, state.p, geom.fluid_area, m, n)
        f_p += -pw * n * ln

        q = m + h * n
        uq = _bilinear(grid.x_faces, grid.yc, state.u, u_solid, vel[0], q,
                       grid.bounds)
        vq = _bilinear(grid.xc, grid.y_faces, state.v, v_solid, vel[1], q,
                       grid.bounds)
        dudn = (uq - vel[0]) / h
        dvdn = (vq - vel[1]) / h
        f_v += (ln / re) * np.array([dudn, dvdn])
    return BodyForce(pressure=f_p, viscous=f_v)


def coefficients(force: BodyForce, t: float, u_inf: float = 1.0,
                 diameter: float = 1.0) -> ForceCoefficients:
    """Drag/lift coefficients and nondimensional time for a force sample."""
    if u_inf <= 0.0 or diameter <= 0.0:
        raise ConfigError(
            f"u_inf and diameter must be positive, got {u_inf}, {diameter}"
        )
    scale = 2.0  # 2 F / (rho U^2 D) with rho = U = D = 1
    cd_p = scale * float(force.pressure[0])
    cd_v = scale * float(force.viscous[0])
    cl = scale * float(force.total[1])
    return ForceCoefficients(
        t=2.0 * u_inf * t / diameter,
        cd=cd_p + cd_v,
        cl=cl,
        cd_pressure=cd_p,
        cd_viscous=cd_v,
    )


def predicted_drag(re: float, t: float) -> float:
    """Short-time analytic drag of an impulsively started cylinder.

    t is the nondimensional time 2 U t_dim / D.
    """
    if re <= 0.0 or t <= 0.0:
        raise ConfigError(f"predicted_drag needs re > 0 and t > 0, got {re}, {t}")
    return 4.0 * np.sqrt(2.0 * np.pi / (re * t)) + (2.0 * np.pi / re) * (
        9.0 - 15.0 / np.sqrt(np.pi)
    )
