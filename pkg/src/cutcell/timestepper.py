"""Semi-implicit BDF2 projection stepping on the cut-cell staggered grid.

Each step solves one Helmholtz system per velocity component for the
intermediate field (convection extrapolated from the two previous levels),
then a pressure-correction Poisson problem that restores the discrete
divergence constraint.  Both solver routes share all of the spatial
machinery: "direct" uses the capacitance-matrix fast solver, "iterative"
preconditioned BiCGSTAB.
"""

from dataclasses import dataclass
import warnings

import numpy as np

from .errors import ConfigError, NonConvergenceError
from .grid import StaggeredGrid
from .geometry import (SOLID, LevelSetBody, body_velocity, classify,
                       cut_geometry)
from .discretization import (PRESETS, apply_outer_bcs, assemble_helmholtz,
                             assemble_pressure_poisson, balance_outflow,
                             convection, divergence, gradient,
                             pack_boundary_data, pack_unknowns,
                             separable_parts, unpack_unknowns)
from .linsolve import (KrylovSettings, build_fast_plan, build_preconditioner,
                       capacitance_build, krylov_solve)

BETA = 1.5  # BDF2 projection factor: u = u~ - (dt/beta) grad(phi)

_BOOTSTRAP_TOL = 1e-12


@dataclass
class FlowState:
    """Velocity/pressure fields on the full staggered layouts.

    u, v include their Dirichlet data slots; u_prev/v_prev hold the previous
    time level for the BDF2 history.  v_wall_hi carries v on the outflow-side
    wall points, the only data family living off the arrays.
    """

    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    v_wall_hi: np.ndarray
    u_prev: np.ndarray
    v_prev: np.ndarray
    t: float = 0.0
    step: int = 0

    def copy(self) -> "FlowState":
        return FlowState(self.u.copy(), self.v.copy(), self.p.copy(),
                         self.v_wall_hi.copy(), self.u_prev.copy(),
                         self.v_prev.copy(), self.t, self.step)


class Stepper:
    """Advances the flow in time around an optional rigid body.

    solver="direct" prefactors the capacitance solvers once for a fixed body
    (and rebuilds them when it moves); solver="iterative" runs BiCGSTAB with
    a Jacobi preconditioner on the diagonally dominant velocity systems and
    an incomplete LU on the pressure Poisson operator.
    """

    def __init__(self, grid: StaggeredGrid, body: LevelSetBody | None = None,
                 re: float = 1000.0, dt: float = 1e-3, preset: str = "open",
                 u_inf: float = 1.0, solver: str = "direct",
                 krylov: KrylovSettings | None = None):
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}'")
        if solver not in ("direct", "iterative"):
            raise ConfigError(f"unknown solver '{solver}'")
        if dt <= 0.0 or re <= 0.0:
            raise ConfigError("re and dt must be positive")
        self.grid = grid
        self.body = body
        self.re = float(re)
        self.dt = float(dt)
        self.preset = preset
        self.u_inf = float(u_inf) if preset == "open" else 0.0
        self.solver = solver
        self.krylov = krylov if krylov is not None else KrylovSettings(tol=1e-10)
        self.moving = body is not None and body.motion != "fixed"

        self.mask = classify(grid, body, 0.0)
        self.geom = cut_geometry(grid, body, self.mask)
        self._ops_t = None
        self._n_conv = None  # cached convection of the current state
        self._phi = None  # previous pressure correction, Krylov warm start
        self._cfl_warned = False
        self._p_applies = 0
        self._p_ilu_solid = None

        self._g_ops = {k: assemble_helmholtz(grid, re, dt, k, preset=preset)
                       for k in ("u", "v")}
        if solver == "direct":
            self._plans = {k: build_fast_plan(separable_parts(grid, k, re, dt,
                                                              preset))
                           for k in ("u", "v")}
            areas = assemble_pressure_poisson(grid).left_null
            self._plans["p"] = build_fast_plan(
                separable_parts(grid, "p", re, dt, preset), weights=areas)
        self._build_operators(0.0)

    # -- operator construction -------------------------------------------

    def _build_operators(self, t: float) -> None:
        """(Re)assemble the cut operators and their solvers for time t."""
        if self._ops_t == t:
            return
        vel = body_velocity(self.body, t) if self.body is not None else (0.0, 0.0)
        self.ops = {k: assemble_helmholtz(self.grid, self.re, self.dt, k,
                                          mask=self.mask, geom=self.geom,
                                          body=self.body, t=t,
                                          preset=self.preset, body_vel=vel)
                    for k in ("u", "v")}
        self.ops["p"] = assemble_pressure_poisson(self.grid, self.mask,
                                                  self.geom)
        if self.solver == "direct":
            self.caps = {k: capacitance_build(self.ops[k],
                                              self._g_ops[k].matrix,
                                              self._plans[k])
                         for k in ("u", "v")}
            g_p = assemble_pressure_poisson(self.grid)
            self.caps["p"] = capacitance_build(self.ops["p"], g_p.matrix,
                                               self._plans["p"])
        else:
            self.preconds = {k: build_preconditioner(self.ops[k], "jacobi")
                             for k in ("u", "v")}
            # Recycling the incomplete factorization across steps of a moving
            # body is fine while it merely drifts, but once the solid row set
            # changes the old factorization enforces the wrong identity rows
            # and BiCGSTAB diverges instead of just slowing down.
            solid = self.ops["p"].solid_rows
            if (self._ops_t is None or self._p_applies > 140
                    or not np.array_equal(solid, self._p_ilu_solid)):
                self._p_ilu = build_preconditioner(self.ops["p"], "ilu")
                self._p_ilu_solid = solid.copy()
        self._ops_t = t

    def _solve_p(self, rhs: np.ndarray, tol: float | None = None) -> np.ndarray:
        if self.solver == "direct":
            return self.caps["p"].solve(rhs)
        settings = self.krylov if tol is None else KrylovSettings(
            tol=tol, max_iter=self.krylov.max_iter, preconditioner="ilu")
        count = [0]
        ilu = self._p_ilu

        def counted(r):
            count[0] += 1
            return ilu(r)

        x, _ = krylov_solve(self.ops["p"], rhs, settings,
                            x0=self._phi, precond=counted)
        self._p_applies = count[0]
        return x

    def _solve_vel(self, kind: str, rhs: np.ndarray, x0: np.ndarray,
                   bootstrap_op=None) -> np.ndarray:
        if bootstrap_op is not None:
            settings = KrylovSettings(tol=_BOOTSTRAP_TOL,
                                      preconditioner="jacobi")
            pre = build_preconditioner(bootstrap_op, "jacobi")
            return krylov_solve(bootstrap_op, rhs, settings, x0=x0,
                                precond=pre)[0]
        if self.solver == "direct":
            return self.caps[kind].solve(rhs)
        return krylov_solve(self.ops[kind], rhs, self.krylov, x0=x0,
                            precond=self.preconds[kind])[0]

    # -- state construction ------------------------------------------------

    def initial_state(self) -> FlowState:
        """Free stream (open) or rest (confined), projected to the discrete
        divergence-free space with P = 0: the impulsive start."""
        grid = self.grid
        nx, ny = grid.nx, grid.ny
        u = np.full((nx + 1, ny), self.u_inf)
        v = np.zeros((nx, ny + 1))
        p = np.zeros((nx, ny))
        v_wall_hi = np.zeros(ny - 1)
        self._enforce_solid(u, v, 0.0)
        balance_outflow(grid, u, self.geom)

        vel0 = body_velocity(self.body, 0.0) if self.body is not None else (0.0, 0.0)
        # One projection of the impulsive start leaves a residual set by the
        # conditioning of the cut Poisson solve; refine until it is far below
        # the per-step divergence budget.  BiCGSTAB may stagnate once the rhs
        # is pure roundoff, which only matters if the field is still dirty.
        for _ in range(3):
            div0 = divergence(grid, u, v, self.geom, body_vel=vel0)
            dmax = float(np.max(np.abs(div0)))
            if dmax <= 1e-12:
                break
            try:
                phi = self.project_velocity(u, v, t=0.0, tol=_BOOTSTRAP_TOL)
            except NonConvergenceError:
                if dmax > 1e-9:
                    raise
                break
            if self._phi is None:
                self._phi = phi
        self._enforce_solid(u, v, 0.0)
        return FlowState(u, v, p, v_wall_hi, u.copy(), v.copy(), 0.0, 0)

    def project_velocity(self, u: np.ndarray, v: np.ndarray, t: float = 0.0,
                         tol: float | None = None,
                         scale: float = 1.0) -> np.ndarray:
        """Subtract the discrete gradient part of (u, v) in place.

        Solves L phi = scale * div(u, v) with the pressure Poisson operator
        and updates (u, v) -= (1/scale) grad phi; returns the flat phi.  A
        time step uses scale = beta/dt so that phi is the pressure increment.
        """
        grid = self.grid
        vel = body_velocity(self.body, t) if self.body is not None else (0.0, 0.0)
        div0 = divergence(grid, u, v, self.geom, body_vel=vel)
        rhs = scale * div0.ravel()
        rhs[self.ops["p"].solid_rows] = 0.0
        phi = self._solve_p(rhs, tol=tol)
        gu, gv = gradient(grid, phi.reshape(grid.nx, grid.ny), self.mask,
                          self.geom)
        u -= (1.0 / scale) * gu
        v -= (1.0 / scale) * gv
        return phi

    def _enforce_solid(self, u: np.ndarray, v: np.ndarray, t: float) -> None:
        """Fictitious solid-node values carry the body velocity, which closes
        the convective fluxes of the neighbouring cut control volumes."""
        if self.body is None:
            return
        vel = body_velocity(self.body, t)
        u[self.mask.u_node == SOLID] = vel[0]
        v[self.mask.v_node == SOLID] = vel[1]

    # -- time stepping -------------------------------------------------------

    def advance(self, state: FlowState) -> dict:
        """One time step in place; returns step diagnostics."""
        grid = self.grid
        nx, ny = grid.nx, grid.ny
        dt = self.dt
        t_old = state.t
        t_new = t_old + dt
        bootstrap = state.step == 0

        old_mask = self.mask
        if self.moving:
            self.mask = classify(grid, self.body, t_new)
            self.geom = cut_geometry(grid, self.body, self.mask, t_new)
            _fill_fresh(state.u, old_mask.u_node, self.mask.u_node)
            _fill_fresh(state.v, old_mask.v_node, self.mask.v_node)
            _fill_fresh(state.u_prev, old_mask.u_node, self.mask.u_node)
            _fill_fresh(state.v_prev, old_mask.v_node, self.mask.v_node)
            self._build_operators(t_new)
        vel_new = (body_velocity(self.body, t_new)
                   if self.body is not None else np.zeros(2))

        # convection at the two history levels
        vel_old = (body_velocity(self.body, t_old)
                   if self.body is not None else (0.0, 0.0))
        nu_k, nv_k = convection(grid, state.u, state.v, self.body, t_old,
                                vel_old)
        if bootstrap:
            nu_m = nv_m = None
        elif self.moving or self._n_conv is None:
            vel_prev = (body_velocity(self.body, t_old - dt)
                        if self.body is not None else (0.0, 0.0))
            nu_m, nv_m = convection(grid, state.u_prev, state.v_prev,
                                    self.body, t_old - dt, vel_prev)
        else:
            nu_m, nv_m = self._n_conv

        gpu, gpv = gradient(grid, state.p, self.mask, self.geom)

        # outer data for the new level before the implicit solves
        u_new = state.u.copy()
        v_new = state.v.copy()
        v_wall_hi = apply_outer_bcs(grid, u_new, v_new, state.v_wall_hi,
                                    self.preset, dt, self.u_inf)
        balance_outflow(grid, u_new, self.geom)

        rhs2d = {}
        if bootstrap:
            rhs2d["u"] = state.u / dt - gpu - nu_k
            rhs2d["v"] = state.v / dt - gpv - nv_k
            boot_ops = {
                k: assemble_helmholtz(grid, self.re, 1.5 * dt, k,
                                      mask=self.mask, geom=self.geom,
                                      body=self.body, t=t_new,
                                      preset=self.preset, body_vel=vel_new)
                for k in ("u", "v")}
            beta = 1.0
        else:
            rhs2d["u"] = ((4.0 * state.u - state.u_prev) / (2.0 * dt)
                          - gpu - 2.0 * nu_k + nu_m)
            rhs2d["v"] = ((4.0 * state.v - state.v_prev) / (2.0 * dt)
                          - gpv - 2.0 * nv_k + nv_m)
            boot_ops = None
            beta = BETA

        bdata = {
            "u": pack_boundary_data(grid, "u", u_new),
            "v": pack_boundary_data(grid, "v", v_new,
                                    wall_hi=(v_wall_hi if self.preset == "open"
                                             else None)),
        }

        for kind, full, full_old in (("u", u_new, state.u),
                                     ("v", v_new, state.v)):
            op = boot_ops[kind] if bootstrap else self.ops[kind]
            rhs = pack_unknowns(grid, kind, rhs2d[kind])
            rhs += op.rhs_boundary(bdata[kind])
            comp = 0 if kind == "u" else 1
            rhs[op.solid_rows] = vel_new[comp]
            x = self._solve_vel(kind, rhs, pack_unknowns(grid, kind, full_old),
                                bootstrap_op=op if bootstrap else None)
            if kind == "u":
                u_new[1:-1, :] = x.reshape(nx - 1, ny)
            else:
                v_new[:, 1:-1] = x.reshape(nx, ny - 1)

        # pressure correction
        div = divergence(grid, u_new, v_new, self.geom, body_vel=vel_new)
        rhs_p = (beta / dt) * div.ravel()
        rhs_p[self.ops["p"].solid_rows] = 0.0
        phi = self._solve_p(rhs_p, tol=_BOOTSTRAP_TOL if bootstrap else None)
        self._phi = phi
        phi2d = phi.reshape(nx, ny)
        gu, gv = gradient(grid, phi2d, self.mask, self.geom)
        u_new -= (dt / beta) * gu
        v_new -= (dt / beta) * gv

        # rotate the history and finalize the new level
        state.u_prev, state.v_prev = state.u, state.v
        state.u, state.v = u_new, v_new
        state.p = state.p + phi2d
        state.v_wall_hi = v_wall_hi
        state.t = t_new
        state.step += 1
        self._enforce_solid(state.u, state.v, t_new)
        if not self.moving:
            self._n_conv = (nu_k, nv_k)

        cfl = dt * float(np.max(np.abs(state.u)) / grid.hx_min
                         + np.max(np.abs(state.v)) / grid.hy)
        if cfl > 1.0 and not self._cfl_warned:
            warnings.warn(f"convective CFL {cfl:.2f} > 1 at t={t_new:.4g}; "
                          "the explicit convection extrapolation may go "
                          "unstable", RuntimeWarning, stacklevel=2)
            self._cfl_warned = True

        div_new = divergence(grid, state.u, state.v, self.geom,
                             body_vel=vel_new)
        fluid = self.mask.cell != SOLID
        return {
            "t": t_new,
            "step": state.step,
            "cfl": cfl,
            "div_inf": float(np.max(np.abs(div_new[fluid]))),
        }

    def run(self, state: FlowState, t_end: float, observer=None) -> FlowState:
        """Step until t_end (within half a step); observer(state, info) runs
        after every step."""
        nsteps = int(round((t_end - state.t) / self.dt))
        for _ in range(nsteps):
            info = self.advance(state)
            if observer is not None:
                observer(state, info)
        return state


def _fill_fresh(full: np.ndarray, old_state: np.ndarray,
                new_state: np.ndarray) -> None:
    """Nodes uncovered by the moving body inherit the average of their
    already-fluid neighbours (two sweeps handle small clusters); a node with
    no fluid neighbour keeps the body velocity it carried while solid."""
    fresh = (old_state == SOLID) & (new_state != SOLID)
    if not np.any(fresh):
        return
    known = (new_state != SOLID) & ~fresh
    for _ in range(2):
        if not np.any(fresh):
            break
        acc = np.zeros_like(full)
        cnt = np.zeros(full.shape)
        for sh in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            src_ok = np.roll(known, sh, axis=(0, 1))
            src_val = np.roll(full, sh, axis=(0, 1))
            if sh[0] == 1:
                src_ok[0, :] = False
            elif sh[0] == -1:
                src_ok[-1, :] = False
            elif sh[1] == 1:
                src_ok[:, 0] = False
            else:
                src_ok[:, -1] = False
            acc += np.where(src_ok, src_val, 0.0)
            cnt += src_ok
        fill_now = fresh & (cnt > 0)
        full[fill_now] = acc[fill_now] / cnt[fill_now]
        known |= fill_now
        fresh &= ~fill_now
