"""Staggered (MAC) grid on a rectangle.

Pressure unknowns live at cell centers, the x-velocity u at vertical-face
midpoints and the y-velocity v at horizontal-face midpoints.  The y spacing
must be uniform (the fast solver applies discrete sine/cosine transforms along
y); the x spacing may be an arbitrary strictly increasing partition.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# Relative tolerance on y uniformity required by the transform-based solver.
_Y_UNIFORM_RTOL = 1e-12


@dataclass(frozen=True)
class StaggeredGrid:
    """Geometry of the staggered grid.

    Attributes
    ----------
    x_faces : (nx+1,) strictly increasing vertical-face abscissae
    y_faces : (ny+1,) uniformly spaced horizontal-face ordinates
    """

    x_faces: np.ndarray
    y_faces: np.ndarray
    # Derived arrays, filled in __post_init__.
    hx: np.ndarray = field(init=False, repr=False)
    xc: np.ndarray = field(init=False, repr=False)
    yc: np.ndarray = field(init=False, repr=False)
    hy: float = field(init=False, repr=False)

    def __post_init__(self):
        xf = np.ascontiguousarray(np.asarray(self.x_faces, dtype=float))
        yf = np.ascontiguousarray(np.asarray(self.y_faces, dtype=float))
        if xf.ndim != 1 or yf.ndim != 1:
            raise ConfigError("grid faces must be 1-D arrays")
        if xf.size < 5 or yf.size < 5:
            raise ConfigError(
                f"grid must have at least 4 cells per direction, got "
                f"nx={xf.size - 1}, ny={yf.size - 1}"
            )
        if np.any(np.diff(xf) <= 0.0):
            raise ConfigError("grid.x_faces must be strictly increasing")
        dy = np.diff(yf)
        if np.any(dy <= 0.0):
            raise ConfigError("grid.y_faces must be strictly increasing")
        hy = (yf[-1] - yf[0]) / (yf.size - 1)
        if np.max(np.abs(dy - hy)) > _Y_UNIFORM_RTOL * max(abs(yf[0]), abs(yf[-1]), hy):
            raise ConfigError("grid.y_faces must be uniformly spaced")
        object.__setattr__(self, "x_faces", xf)
        object.__setattr__(self, "y_faces", yf)
        object.__setattr__(self, "hx", np.diff(xf))
        object.__setattr__(self, "xc", 0.5 * (xf[:-1] + xf[1:]))
        object.__setattr__(self, "yc", 0.5 * (yf[:-1] + yf[1:]))
        object.__setattr__(self, "hy", float(hy))

    @property
    def nx(self) -> int:
        return self.x_faces.size - 1

    @property
    def ny(self) -> int:
        return self.y_faces.size - 1

    @property
    def bounds(self):
        return (
            float(self.x_faces[0]),
            float(self.x_faces[-1]),
            float(self.y_faces[0]),
            float(self.y_faces[-1]),
        )

    @property
    def hx_min(self) -> float:
        return float(self.hx.min())

    def cell_areas(self) -> np.ndarray:
        """Full (uncut) cell areas, shape (nx, ny)."""
        return np.outer(self.hx, np.full(self.ny, self.hy))

    def __eq__(self, other):
        if not isinstance(other, StaggeredGrid):
            return NotImplemented
        return np.array_equal(self.x_faces, other.x_faces) and np.array_equal(
            self.y_faces, other.y_faces
        )


def _tanh_faces(lo: float, hi: float, n: int, gamma: float) -> np.ndarray:
    # Center-clustering map evaluated at n+1 equispaced parameters in [0, 1].
    # gamma -> 0 degenerates to the uniform partition.
    s = np.linspace(0.0, 1.0, n + 1)
    c = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    if gamma <= 0.0:
        return lo + (hi - lo) * s
    x = c + half * np.arctanh((2.0 * s - 1.0) * np.tanh(gamma)) / gamma
    # Guard the endpoints against round-off.
    x[0], x[-1] = lo, hi
    return x


def build_grid(
    bounds,
    nx: int | None = None,
    ny: int | None = None,
    h: float | None = None,
    stretch: str = "none",
    stretch_gamma: float = 0.0,
    x_faces=None,
) -> StaggeredGrid:
    """Build a staggered grid on ``bounds = (x_min, x_max, y_min, y_max)``.

    Either give cell counts (nx, ny), a target uniform spacing h (counts are
    derived and must divide the extents to 1e-9 relative), or an explicit
    x-face list combined with ny.
    """
    x_min, x_max, y_min, y_max = map(float, bounds)
    if not (x_min < x_max and y_min < y_max):
        raise ConfigError(f"domain bounds are empty: {bounds}")

    if h is not None:
        if h <= 0.0:
            raise ConfigError(f"grid.h must be positive, got {h}")
        nx_f = (x_max - x_min) / h
        ny_f = (y_max - y_min) / h
        nx, ny = int(round(nx_f)), int(round(ny_f))
        if abs(nx_f - nx) > 1e-9 * nx_f or abs(ny_f - ny) > 1e-9 * ny_f:
            raise ConfigError(
                f"grid.h={h} does not divide the domain extents "
                f"({x_max - x_min} x {y_max - y_min})"
            )

    if ny is None:
        raise ConfigError("grid.ny (or grid.h) is required")
    y = np.linspace(y_min, y_max, ny + 1)

    if x_faces is not None:
        x = np.asarray(x_faces, dtype=float)
        if abs(x[0] - x_min) > 1e-12 or abs(x[-1] - x_max) > 1e-12:
            raise ConfigError("grid.x_faces must span the domain bounds")
        return StaggeredGrid(x, y)

    if nx is None:
        raise ConfigError("grid.nx (or grid.h or grid.x_faces) is required")
    if stretch in (None, "none", ""):
        x = np.linspace(x_min, x_max, nx + 1)
    elif stretch == "tanh":
        x = _tanh_faces(x_min, x_max, nx, float(stretch_gamma))
    else:
        raise ConfigError(f"grid.stretch: unknown map '{stretch}'")
    return StaggeredGrid(x, y)


def field_positions(grid: StaggeredGrid, kind: str) -> np.ndarray:
    """Coordinates of every slot of a staggered field, shape (N, 2).

    Ordering is x-major (all y for the first x, then the next x), matching the
    flattening of the 2-D field arrays used throughout.
    """
    if kind == "u":
        xs, ys = grid.x_faces, grid.yc
    elif kind == "v":
        xs, ys = grid.xc, grid.y_faces
    elif kind == "p":
        xs, ys = grid.xc, grid.yc
    elif kind == "corner":
        xs, ys = grid.x_faces, grid.y_faces
    else:
        raise ConfigError(f"unknown field kind '{kind}'")
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])
