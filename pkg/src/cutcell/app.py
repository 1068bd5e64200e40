"""Case configuration, orchestration and file output.

Configs are flat ``key = value`` text with dotted section prefixes and ``#``
comments.  run_case drives the stepper and emits the drag CSV plus legacy
VTK snapshots; validate_drag and convergence_study wrap it for the two
standard studies.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, fields

import numpy as np

from .discretization import (
    assemble_helmholtz,
    assemble_pressure_poisson,
    pack_boundary_data,
    separable_parts,
    vorticity,
)
from .errors import ConfigError, NonConvergenceError
from .forces import (
    ForceCoefficients,
    body_force,
    coefficients,
    predicted_drag,
)
from .geometry import LevelSetBody, classify, cut_geometry, levelset_eval
from .grid import build_grid
from .linsolve import CapacitanceSolver, KrylovSettings, build_fast_plan
from .timestepper import Stepper

__all__ = [
    "SimConfig",
    "DragSeries",
    "load_config",
    "parse_config",
    "serialize_config",
    "run_case",
    "validate_drag",
    "convergence_study",
    "write_drag_csv",
    "read_drag_csv",
    "OUTDIR_ENV",
]

OUTDIR_ENV = "CUTCELL_OUTDIR"

_REQUIRED = object()


@dataclass
class SimConfig:
    """One simulation case; field names mirror the dotted config keys."""

    x_min: float = _REQUIRED
    x_max: float = _REQUIRED
    y_min: float = _REQUIRED
    y_max: float = _REQUIRED
    nx: int | None = None
    ny: int | None = None
    h: float | None = None
    stretch: str = "none"
    stretch_gamma: float = 0.0
    re: float = _REQUIRED
    dt: float = _REQUIRED
    tmax: float = _REQUIRED
    u_inf: float = 1.0
    shape: str = "none"
    radius: float = 0.5
    center_x: float = 0.0
    center_y: float = 0.0
    motion: str = "fixed"
    alpha: float = 0.25
    preset: str = "open"
    solver: str = "auto"
    tol: float = 1e-8
    max_iter: int = 1000
    preconditioner: str = "jacobi"
    rebuild_direct: bool = False
    outdir: str = "out"
    prefix: str = "case"
    drag_every: int = 1
    snapshot_every: int = 0
    t_lo: float = 0.05
    t_hi: float = 0.2
    threshold: float = 0.10
    conv_case: str = "disk"
    conv_n0: int = 64
    conv_levels: int = 3
    conv_min_order: float = 1.9


# config key -> (attribute, converter); order fixes the serialized layout
_KEYS = {
    "domain.x_min": ("x_min", float),
    "domain.x_max": ("x_max", float),
    "domain.y_min": ("y_min", float),
    "domain.y_max": ("y_max", float),
    "grid.nx": ("nx", int),
    "grid.ny": ("ny", int),
    "grid.h": ("h", float),
    "grid.stretch": ("stretch", str),
    "grid.gamma": ("stretch_gamma", float),
    "flow.re": ("re", float),
    "flow.dt": ("dt", float),
    "flow.tmax": ("tmax", float),
    "flow.u_inf": ("u_inf", float),
    "body.shape": ("shape", str),
    "body.radius": ("radius", float),
    "body.center_x": ("center_x", float),
    "body.center_y": ("center_y", float),
    "body.motion": ("motion", str),
    "body.alpha": ("alpha", float),
    "bc.preset": ("preset", str),
    "solver.kind": ("solver", str),
    "solver.tol": ("tol", float),
    "solver.max_iter": ("max_iter", int),
    "solver.preconditioner": ("preconditioner", str),
    "solver.rebuild_direct": ("rebuild_direct", bool),
    "output.dir": ("outdir", str),
    "output.prefix": ("prefix", str),
    "output.drag_every": ("drag_every", int),
    "output.snapshot_every": ("snapshot_every", int),
    "validate.t_lo": ("t_lo", float),
    "validate.t_hi": ("t_hi", float),
    "validate.threshold": ("threshold", float),
    "convergence.case": ("conv_case", str),
    "convergence.n0": ("conv_n0", int),
    "convergence.levels": ("conv_levels", int),
    "convergence.min_order": ("conv_min_order", float),
}
_ATTR_TO_KEY = {attr: key for key, (attr, _) in _KEYS.items()}
_REQUIRED_KEYS = [k for k, (attr, _) in _KEYS.items()
                  if getattr(SimConfig, attr, None) is _REQUIRED]


def _convert(key, conv, raw):
    if conv is bool:
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got '{raw}'")
    if conv is int:
        try:
            val = float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got '{raw}'") from None
        if val != int(val):
            raise ConfigError(f"{key}: expected an integer, got '{raw}'")
        return int(val)
    if conv is float:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got '{raw}'") from None
    return raw


def parse_config(text: str) -> SimConfig:
    """Parse config text; unknown or missing required keys raise ConfigError."""
    cfg = SimConfig.__new__(SimConfig)
    for f in fields(SimConfig):
        setattr(cfg, f.name, f.default)
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        bare = line.split("#", 1)[0].strip()
        if not bare:
            continue
        if "=" not in bare:
            raise ConfigError(f"config line {lineno}: expected 'key = value', "
                              f"got '{bare}'")
        key, raw = (part.strip() for part in bare.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"config line {lineno}: unknown key '{key}'")
        attr, conv = _KEYS[key]
        setattr(cfg, attr, _convert(key, conv, raw))
        seen.add(key)
    missing = [k for k in _REQUIRED_KEYS if getattr(cfg, _KEYS[k][0]) is _REQUIRED]
    if missing:
        raise ConfigError(f"config is missing required keys: {', '.join(missing)}")
    validate_config(cfg)
    return cfg


def load_config(path) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize_config(cfg: SimConfig) -> str:
    """Canonical text form; parse(serialize(parse(x))) == parse(x)."""
    lines = []
    section = None
    for key, (attr, conv) in _KEYS.items():
        val = getattr(cfg, attr)
        if val is None:
            continue
        sec = key.split(".", 1)[0]
        if sec != section:
            if section is not None:
                lines.append("")
            section = sec
        if conv is bool:
            text = "true" if val else "false"
        elif conv is float:
            text = f"{val:.17g}"
        else:
            text = str(val)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def validate_config(cfg: SimConfig) -> None:
    if not (cfg.x_min < cfg.x_max and cfg.y_min < cfg.y_max):
        raise ConfigError("domain.*: bounds describe an empty box")
    if cfg.h is None and (cfg.nx is None or cfg.ny is None):
        raise ConfigError("grid.nx and grid.ny (or grid.h) are required")
    for key in ("re", "dt"):
        if getattr(cfg, key) <= 0.0:
            raise ConfigError(f"flow.{key} must be positive, got {getattr(cfg, key)}")
    if cfg.tmax < 0.0:
        raise ConfigError(f"flow.tmax must be nonnegative, got {cfg.tmax}")
    if cfg.shape not in ("none", "circle"):
        raise ConfigError(f"body.shape: unknown shape '{cfg.shape}'")
    if cfg.preset not in ("open", "confined"):
        raise ConfigError(f"bc.preset must be 'open' or 'confined', got "
                          f"'{cfg.preset}'")
    if cfg.solver not in ("auto", "direct", "iterative"):
        raise ConfigError(f"solver.kind must be direct or iterative, got "
                          f"'{cfg.solver}'")
    if cfg.drag_every < 1 or cfg.snapshot_every < 0:
        raise ConfigError("output.drag_every must be >= 1 and "
                          "output.snapshot_every >= 0")
    if cfg.shape == "circle":
        if cfg.radius <= 0.0:
            raise ConfigError(f"body.radius must be positive, got {cfg.radius}")
        body = _make_body(cfg)
        off = body.max_center_offset(cfg.tmax)
        lo, hi = cfg.center_x - cfg.radius, cfg.center_x + off + cfg.radius
        if not (cfg.x_min < lo and hi < cfg.x_max
                and cfg.y_min < cfg.center_y - cfg.radius
                and cfg.center_y + cfg.radius < cfg.y_max):
            raise ConfigError(
                "body.*: the body leaves the domain over [0, tmax] "
                f"(x extent [{lo:.4g}, {hi:.4g}])"
            )
        moving = cfg.motion != "fixed"
        if moving and cfg.solver == "direct" and not cfg.rebuild_direct:
            raise ConfigError(
                "solver.kind = direct with a moving body refactorizes the "
                "capacitance system every step; set solver.rebuild_direct = "
                "true to accept that cost or use solver.kind = iterative"
            )


def _make_body(cfg: SimConfig) -> LevelSetBody | None:
    if cfg.shape == "none":
        return None
    return LevelSetBody(center=(cfg.center_x, cfg.center_y), radius=cfg.radius,
                        motion=cfg.motion, alpha=cfg.alpha)


def _solver_kind(cfg: SimConfig) -> str:
    if cfg.solver != "auto":
        return cfg.solver
    moving = cfg.shape == "circle" and cfg.motion != "fixed"
    return "iterative" if moving else "direct"


def resolve_outdir(cfg: SimConfig) -> str:
    return os.environ.get(OUTDIR_ENV, cfg.outdir)


# ---------------------------------------------------------------------------
# Drag series and file formats


class DragSeries:
    """Ordered drag records; the CSV carries the five spec columns."""

    COLUMNS = ("T", "Cd", "Cl", "Cd_p", "Cd_v")

    def __init__(self):
        self.rows: list[tuple] = []
        self.wall: list[float] = []
        self.max_div = 0.0  # largest per-step fluid-cell divergence seen

    def append(self, c: ForceCoefficients, wall: float = 0.0) -> None:
        if self.rows and c.t <= self.rows[-1][0]:
            raise ConfigError(
                f"drag series time must be strictly increasing, got "
                f"{c.t} after {self.rows[-1][0]}"
            )
        self.rows.append((c.t, c.cd, c.cl, c.cd_pressure, c.cd_viscous))
        self.wall.append(wall)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        idx = self.COLUMNS.index(name)
        return np.array([r[idx] for r in self.rows])


def write_drag_csv(series: DragSeries, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(DragSeries.COLUMNS) + "\n")
        for row in series.rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_drag_csv(path) -> DragSeries:
    out = DragSeries()
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != ",".join(DragSeries.COLUMNS):
            raise ConfigError(f"{path}: unexpected drag CSV header '{header}'")
        for line in fh:
            if line.strip():
                t, cd, cl, cdp, cdv = (float(x) for x in line.split(","))
                out.append(ForceCoefficients(t=t, cd=cd, cl=cl,
                                             cd_pressure=cdp, cd_viscous=cdv))
    return out


def _corner_average(kind: str, f: np.ndarray) -> np.ndarray:
    """Interpolate a staggered field to grid corners (edge replicated)."""
    if kind == "u":  # (nx+1, ny) -> average in y
        out = np.empty((f.shape[0], f.shape[1] + 1))
        out[:, 1:-1] = 0.5 * (f[:, 1:] + f[:, :-1])
        out[:, 0] = f[:, 0]
        out[:, -1] = f[:, -1]
        return out
    if kind == "v":  # (nx, ny+1) -> average in x
        out = np.empty((f.shape[0] + 1, f.shape[1]))
        out[1:-1, :] = 0.5 * (f[1:, :] + f[:-1, :])
        out[0, :] = f[0, :]
        out[-1, :] = f[-1, :]
        return out
    padded = np.pad(f, 1, mode="edge")  # p: (nx, ny) -> 4-cell average
    return 0.25 * (padded[:-1, :-1] + padded[1:, :-1]
                   + padded[:-1, 1:] + padded[1:, 1:])


def write_snapshot(path, grid, state, body=None) -> None:
    """Legacy ASCII VTK rectilinear snapshot of u, v, p, vorticity, levelset."""
    nxp, nyp = grid.nx + 1, grid.ny + 1
    w = vorticity(grid, state.u, state.v, body, state.t)
    if body is not None:
        X, Y = np.meshgrid(grid.x_faces, grid.y_faces, indexing="ij")
        phi = levelset_eval(body, np.stack([X, Y], axis=-1), state.t)
    else:
        phi = np.full((nxp, nyp), 1e30)
    fields_out = (
        ("u", _corner_average("u", state.u)),
        ("v", _corner_average("v", state.v)),
        ("p", _corner_average("p", state.p)),
        ("vorticity", w),
        ("levelset", phi),
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"cutcell snapshot t={state.t:.17g}\n")
        fh.write("ASCII\nDATASET RECTILINEAR_GRID\n")
        fh.write(f"DIMENSIONS {nxp} {nyp} 1\n")
        fh.write(f"X_COORDINATES {nxp} double\n")
        fh.write(" ".join(f"{x:.17g}" for x in grid.x_faces) + "\n")
        fh.write(f"Y_COORDINATES {nyp} double\n")
        fh.write(" ".join(f"{y:.17g}" for y in grid.y_faces) + "\n")
        fh.write("Z_COORDINATES 1 double\n0\n")
        fh.write(f"POINT_DATA {nxp * nyp}\n")
        for name, data in fields_out:
            fh.write(f"SCALARS {name} double\nLOOKUP_TABLE default\n")
            # VTK point order is x fastest
            for j in range(nyp):
                fh.write(" ".join(f"{val:.9g}" for val in data[:, j]) + "\n")


def read_snapshot_field(path, name: str) -> np.ndarray:
    """Read one scalar field back from a snapshot, shaped (nx+1, ny+1)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    dims = next(ln for ln in lines if ln.startswith("DIMENSIONS")).split()
    nxp, nyp = int(dims[1]), int(dims[2])
    start = next(i for i, ln in enumerate(lines)
                 if ln.startswith(f"SCALARS {name} "))
    vals: list[float] = []
    for ln in lines[start + 2:]:
        if ln.startswith("SCALARS"):
            break
        vals.extend(float(tok) for tok in ln.split())
    return np.array(vals[: nxp * nyp]).reshape(nyp, nxp).T


# ---------------------------------------------------------------------------
# Case orchestration


def _build_stepper(cfg: SimConfig):
    grid = build_grid((cfg.x_min, cfg.x_max, cfg.y_min, cfg.y_max),
                      nx=cfg.nx, ny=cfg.ny, h=cfg.h,
                      stretch=cfg.stretch, stretch_gamma=cfg.stretch_gamma)
    body = _make_body(cfg)
    settings = KrylovSettings(tol=cfg.tol, max_iter=cfg.max_iter,
                              preconditioner=cfg.preconditioner)
    stepper = Stepper(grid, body=body, re=cfg.re, dt=cfg.dt,
                      preset=cfg.preset, u_inf=cfg.u_inf,
                      solver=_solver_kind(cfg), krylov=settings)
    return grid, body, stepper


def run_case(cfg: SimConfig):
    """Run to flow.tmax; returns (DragSeries, [written file paths])."""
    validate_config(cfg)
    grid, body, stepper = _build_stepper(cfg)
    outdir = resolve_outdir(cfg)
    os.makedirs(outdir, exist_ok=True)
    u_ref = cfg.u_inf if cfg.u_inf > 0.0 else 1.0
    diameter = 2.0 * cfg.radius if body is not None else 1.0

    state = stepper.initial_state()
    series = DragSeries()
    files = []

    def snapshot():
        path = os.path.join(outdir, f"{cfg.prefix}_{state.step:06d}.vtk")
        write_snapshot(path, grid, state, body)
        files.append(path)

    snapshot()  # the initial state is always written
    nsteps = int(round(cfg.tmax / cfg.dt))
    for _ in range(nsteps):
        t_wall = time.perf_counter()
        try:
            info = stepper.advance(state)
            series.max_div = max(series.max_div, info["div_inf"])
        except NonConvergenceError as err:
            raise NonConvergenceError(
                f"solver failed at step {state.step + 1} "
                f"(residual {err.residual}, {err.iterations} iterations)",
                residual=err.residual, iterations=err.iterations,
            ) from err
        if body is not None and state.step % cfg.drag_every == 0:
            fb = body_force(grid, state, stepper.geom, cfg.re, body)
            series.append(coefficients(fb, state.t, u_ref, diameter),
                          wall=time.perf_counter() - t_wall)
        if cfg.snapshot_every > 0 and state.step % cfg.snapshot_every == 0:
            snapshot()

    csv_path = os.path.join(outdir, f"{cfg.prefix}_drag.csv")
    write_drag_csv(series, csv_path)
    files.append(csv_path)
    return series, files


@dataclass(frozen=True)
class DragValidation:
    t_lo: float
    t_hi: float
    n_samples: int
    max_rel: float
    mean_rel: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_rel <= self.threshold

    def render(self) -> str:
        return (
            f"drag validation over T in [{self.t_lo:g}, {self.t_hi:g}] "
            f"({self.n_samples} samples)\n"
            f"  max  |Cd - C_pred| / C_pred = {self.max_rel:.6f}\n"
            f"  mean |Cd - C_pred| / C_pred = {self.mean_rel:.6f}\n"
            f"  threshold {self.threshold:g}: "
            f"{'PASS' if self.passed else 'FAIL'}\n"
        )


def validate_drag(cfg: SimConfig, threshold: float | None = None) -> DragValidation:
    """Run a fixed-cylinder case and compare Cd against the analytic law."""
    if cfg.shape != "circle" or cfg.motion != "fixed":
        raise ConfigError("validate_drag needs a fixed circular cylinder case")
    thr = cfg.threshold if threshold is None else float(threshold)
    series, _ = run_case(cfg)
    t = series.column("T")
    cd = series.column("Cd")
    sel = (t >= cfg.t_lo) & (t <= cfg.t_hi)
    if not np.any(sel):
        raise ConfigError(
            f"no drag samples inside validate window [{cfg.t_lo}, {cfg.t_hi}]"
        )
    pred = np.array([predicted_drag(cfg.re, ti) for ti in t[sel]])
    rel = np.abs(cd[sel] - pred) / pred
    report = DragValidation(t_lo=cfg.t_lo, t_hi=cfg.t_hi,
                            n_samples=int(sel.sum()),
                            max_rel=float(rel.max()),
                            mean_rel=float(rel.mean()), threshold=thr)
    outdir = resolve_outdir(cfg)
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, f"{cfg.prefix}_validate.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(report.render())
    return report


# ---------------------------------------------------------------------------
# Manufactured-solution convergence study


def _helmholtz_disk_error(cfg: SimConfig, n: int) -> float:
    """Max-norm error of the cut Helmholtz solve for u* = sin(pi x) sin(pi y)."""
    grid = build_grid((cfg.x_min, cfg.x_max, cfg.y_min, cfg.y_max), nx=n, ny=n)
    body = _make_body(cfg)
    mask = classify(grid, body, 0.0)
    geom = cut_geometry(grid, body, mask, 0.0)

    def exact(pts):
        pts = np.asarray(pts, dtype=float)
        return np.sin(np.pi * pts[..., 0]) * np.sin(np.pi * pts[..., 1])

    sigma = 1.5 / cfg.dt
    op = assemble_helmholtz(
        grid, cfg.re, cfg.dt, "u", mask=mask, geom=geom, body=body,
        preset="confined", body_data=lambda pts: exact(pts),
        wall_data=lambda xs: (exact(np.stack([xs, np.full_like(xs, cfg.y_min)],
                                             axis=-1)),
                              exact(np.stack([xs, np.full_like(xs, cfg.y_max)],
                                             axis=-1))),
    )
    # unknown positions: interior columns at their relocated ordinates
    xs = grid.x_faces[1:-1][:, None] + 0.0 * grid.yc[None, :]
    ys = geom.kappa_u[1:-1, :]
    pts = np.stack([xs, ys], axis=-1)
    ue = exact(pts)
    rhs_f = sigma * ue + (2.0 * np.pi**2 / cfg.re) * ue

    full = np.zeros((grid.nx + 1, grid.ny))
    full[0, :] = exact(np.stack([np.full(grid.ny, grid.x_faces[0]), grid.yc],
                                axis=-1))
    full[-1, :] = exact(np.stack([np.full(grid.ny, grid.x_faces[-1]), grid.yc],
                                 axis=-1))
    rhs = rhs_f.ravel() + op.rhs_boundary(pack_boundary_data(grid, "u", full))
    rhs[op.solid_rows] = ue.ravel()[op.solid_rows]

    g_op = assemble_helmholtz(grid, cfg.re, cfg.dt, "u", preset="confined")
    plan = build_fast_plan(separable_parts(grid, "u", cfg.re, cfg.dt,
                                           "confined"))
    x = CapacitanceSolver(op, g_op.matrix, plan).solve(rhs)
    keep = np.ones(op.n, dtype=bool)
    keep[op.solid_rows] = False
    return float(np.max(np.abs(x - ue.ravel())[keep]))


def _poisson_error(cfg: SimConfig, n: int) -> float:
    """Max-norm error of the no-body Poisson solve, u* = cos(pi x) cos(pi y)."""
    grid = build_grid((cfg.x_min, cfg.x_max, cfg.y_min, cfg.y_max), nx=n, ny=n)
    op = assemble_pressure_poisson(grid)
    X, Y = np.meshgrid(grid.xc, grid.yc, indexing="ij")
    kx = np.pi * 2.0 / (cfg.x_max - cfg.x_min)
    ky = np.pi * 2.0 / (cfg.y_max - cfg.y_min)
    ue = np.cos(kx * (X - cfg.x_min)) * np.cos(ky * (Y - cfg.y_min))
    rhs = -(kx**2 + ky**2) * ue
    plan = build_fast_plan(separable_parts(grid, "p", 1.0, 1.0, "open"),
                           weights=op.left_null)
    x = CapacitanceSolver(op, op.matrix, plan).solve(rhs.ravel())
    diff = x - ue.ravel()
    diff -= diff.mean()
    return float(np.max(np.abs(diff)))


@dataclass(frozen=True)
class ConvergenceReport:
    case: str
    ns: tuple
    errors: tuple
    orders: tuple
    min_order: float

    @property
    def passed(self) -> bool:
        return all(p >= self.min_order for p in self.orders)

    def render(self) -> str:
        lines = [f"manufactured-solution study '{self.case}'"]
        for i, (n, e) in enumerate(zip(self.ns, self.errors)):
            order = f"  order {self.orders[i - 1]:.3f}" if i else ""
            lines.append(f"  n={n:<5d} max error {e:.3e}{order}")
        lines.append(f"  required order {self.min_order:g}: "
                     f"{'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


def convergence_study(cfg: SimConfig) -> ConvergenceReport:
    """Solve on a refinement ladder (n0, 2 n0, ...) and report observed orders."""
    if cfg.conv_levels < 2:
        raise ConfigError("convergence.levels: ladder needs at least 2 levels")
    if cfg.conv_case not in ("disk", "poisson"):
        raise ConfigError(f"convergence.case: unknown case '{cfg.conv_case}'")
    solve = _helmholtz_disk_error if cfg.conv_case == "disk" else _poisson_error
    ns = [cfg.conv_n0 * 2**k for k in range(cfg.conv_levels)]
    errors = [solve(cfg, n) for n in ns]
    orders = tuple(float(np.log2(errors[i] / errors[i + 1]))
                   for i in range(len(ns) - 1))
    report = ConvergenceReport(case=cfg.conv_case, ns=tuple(ns),
                               errors=tuple(errors), orders=orders,
                               min_order=cfg.conv_min_order)
    outdir = resolve_outdir(cfg)
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, f"{cfg.prefix}_convergence.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(report.render())
    return report
