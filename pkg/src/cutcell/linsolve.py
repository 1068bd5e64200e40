"""Linear solvers: tridiagonal kernels, the separable fast solver, the
capacitance-matrix direct method and a BiCGSTAB fallback for moving bodies.

The fast solver diagonalizes the y direction of a no-body operator with a
sine/cosine transform (uniform y spacing) and solves one tridiagonal system in
x per mode; the x spacing may be arbitrary.  Obstructed operators differ from
the no-body one on a thin set of rows near the cut, which the capacitance
method corrects with a dense LU of that set.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy import fft
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import spilu

from .errors import ConfigError, NonConvergenceError, SingularSystemError

_PIVOT_RTOL = 1e-14


@dataclass
class TridiagonalSystem:
    """Coefficients of a tridiagonal matrix.

    sub[i] multiplies x[i-1] in row i (sub[0] unused); sup[i] multiplies
    x[i+1] in row i (sup[n-1] unused).  Stored full length for easy slicing.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        self.sub = np.asarray(self.sub, dtype=float)
        self.diag = np.asarray(self.diag, dtype=float)
        self.sup = np.asarray(self.sup, dtype=float)
        n = self.diag.size
        if self.sub.size != n or self.sup.size != n:
            raise ConfigError("tridiagonal bands must all have length n")

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[1:] += self.sub[1:] * x[:-1]
        y[:-1] += self.sup[:-1] * x[1:]
        return y

    def slice(self, a: int, b: int) -> "TridiagonalSystem":
        """Sub-system on rows [a, b), couplings across the ends dropped."""
        sub = self.sub[a:b].copy()
        sup = self.sup[a:b].copy()
        sub[0] = 0.0
        sup[-1] = 0.0
        return TridiagonalSystem(sub, self.diag[a:b].copy(), sup)


def thomas_solve(system: TridiagonalSystem, rhs: np.ndarray) -> np.ndarray:
    """Gaussian elimination without pivoting for a tridiagonal system."""
    n = system.n
    b = np.asarray(rhs, dtype=float)
    if b.shape[0] != n:
        raise ConfigError(f"rhs length {b.shape[0]} != system size {n}")
    scale = max(
        np.abs(system.diag).max(),
        np.abs(system.sub).max() if n > 1 else 0.0,
        np.abs(system.sup).max() if n > 1 else 0.0,
    )
    tiny = _PIVOT_RTOL * scale
    c = np.empty(n)
    d = b.astype(float, copy=True)
    piv = system.diag[0]
    if abs(piv) <= tiny:
        raise SingularSystemError(f"zero pivot in row 0 (|{piv:.3e}| <= {tiny:.3e})")
    c[0] = system.sup[0] / piv if n > 1 else 0.0
    d[0] = d[0] / piv
    for i in range(1, n):
        piv = system.diag[i] - system.sub[i] * c[i - 1]
        if abs(piv) <= tiny:
            raise SingularSystemError(
                f"zero pivot in row {i} (|{piv:.3e}| <= {tiny:.3e})"
            )
        c[i] = system.sup[i] / piv if i < n - 1 else 0.0
        d[i] = (d[i] - system.sub[i] * d[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        d[i] -= c[i] * d[i + 1]
    return d


def dac_reduced_size(n_blocks: int) -> int:
    """Size of the divide-and-conquer correction system."""
    return 2 * n_blocks - 1


def dac_solve(system: TridiagonalSystem, rhs: np.ndarray, n_blocks: int) -> np.ndarray:
    """Divide-and-conquer tridiagonal solve.

    The unknowns split into n_blocks contiguous blocks (each of size >= 2).
    Every block edge except the very first unknown enters a reduced system of
    size 2*n_blocks-1, tridiagonal in the interleaved edge ordering; block
    interiors are eliminated by independent Thomas solves and recovered by
    back-substitution.  n_blocks=1 falls through to thomas_solve.
    """
    n = system.n
    p = int(n_blocks)
    if p < 1:
        raise ConfigError(f"n_blocks must be >= 1, got {n_blocks}")
    if p == 1:
        return thomas_solve(system, rhs)
    if n < 2 * p:
        raise ConfigError(f"blocks of size >= 2 impossible: n={n}, n_blocks={p}")
    b = np.asarray(rhs, dtype=float)

    # Block k covers [starts[k], ends[k]] inclusive.
    sizes = np.full(p, n // p)
    sizes[: n % p] += 1
    ends = np.cumsum(sizes) - 1
    starts = np.concatenate([[0], ends[:-1] + 1])

    # Reduced unknowns in interleaved order: e_0, s_1, e_1, ..., s_{p-1}, e_{p-1}.
    reduced = [ends[0]]
    for k in range(1, p):
        reduced.extend((starts[k], ends[k]))
    reduced = np.array(reduced)
    m = reduced.size
    pos = {int(r): q for q, r in enumerate(reduced)}

    # Interior ranges [a, b) and their particular/homogeneous solutions.
    # x_interior = y + x_left * L + x_right * R with left/right the bounding
    # reduced unknowns (block 0 has no left coupling).
    interiors = []
    for k in range(p):
        a = starts[k] if k == 0 else starts[k] + 1
        bnd = ends[k]
        if a >= bnd:
            interiors.append(None)
            continue
        tk = system.slice(a, bnd)
        y = thomas_solve(tk, b[a:bnd])
        e0 = np.zeros(bnd - a)
        e0[0] = 1.0
        el = np.zeros(bnd - a)
        el[-1] = 1.0
        left = None
        if k > 0:
            left = thomas_solve(tk, -system.sub[a] * e0)
        right = thomas_solve(tk, -system.sup[bnd - 1] * el)
        interiors.append((a, bnd, y, left, right))

    rd = TridiagonalSystem(np.zeros(m), np.zeros(m), np.zeros(m))
    rb = np.zeros(m)

    def couple(q, r_neighbor, coef):
        # Row q of the reduced system gains coef * x[r_neighbor].
        dq = pos[int(r_neighbor)] - q
        if dq == 0:
            rd.diag[q] += coef
        elif dq == -1:
            rd.sub[q] += coef
        elif dq == 1:
            rd.sup[q] += coef
        else:  # pragma: no cover - construction guarantees adjacency
            raise AssertionError("reduced system lost tridiagonal structure")

    for q, r in enumerate(reduced):
        r = int(r)
        rd.diag[q] += system.diag[r]
        rb[q] += b[r]
        for nb, coef in ((r - 1, system.sub[r]), (r + 1, system.sup[r])):
            if coef == 0.0 or nb < 0 or nb >= n:
                continue
            if nb in pos:
                couple(q, nb, coef)
                continue
            # Neighbor sits in some block interior; substitute its affine form.
            k = int(np.searchsorted(ends, nb))
            a, bnd, y, left, right = interiors[k]
            idx = nb - a
            rb[q] -= coef * y[idx]
            if left is not None:
                couple(q, starts[k], coef * left[idx])
            couple(q, ends[k], coef * right[idx])

    xr = thomas_solve(rd, rb)

    x = np.empty(n)
    x[reduced] = xr
    for k in range(p):
        if interiors[k] is None:
            continue
        a, bnd, y, left, right = interiors[k]
        xi = y + xr[pos[int(ends[k])]] * right
        if left is not None:
            xi += xr[pos[int(starts[k])]] * left
        x[a:bnd] = xi
    return x


# ---------------------------------------------------------------------------
# transform-based fast direct solver


def _forward_transform(name: str, z: np.ndarray) -> np.ndarray:
    if name == "dct2":
        return fft.dct(z, type=2, axis=1, norm="ortho")
    if name == "dst2":
        return fft.dst(z, type=2, axis=1, norm="ortho")
    if name == "dst1":
        return fft.dst(z, type=1, axis=1, norm="ortho")
    raise ConfigError(f"unknown transform '{name}'")


def _inverse_transform(name: str, z: np.ndarray) -> np.ndarray:
    if name == "dct2":
        return fft.idct(z, type=2, axis=1, norm="ortho")
    if name == "dst2":
        return fft.idst(z, type=2, axis=1, norm="ortho")
    if name == "dst1":
        return fft.idst(z, type=1, axis=1, norm="ortho")
    raise ConfigError(f"unknown transform '{name}'")


class FastPlan:
    """Direct solver for the separable no-body operator.

    One orthonormal transform along y turns the operator into independent
    tridiagonal systems along x (one per mode); those are prefactored here.
    For the singular pressure operator the right-hand side is first projected
    onto the range (area-weighted mean removed), the zero mode is pinned at
    the first cell and the final solution has its plain mean removed.
    """

    def __init__(self, parts, weights: np.ndarray | None = None):
        self.parts = parts
        self.shape2d = tuple(parts.shape2d)
        ncols, nmodes = self.shape2d
        if parts.eigvals.size != nmodes:
            raise ConfigError("eigenvalue count does not match the mode count")
        self.transform = parts.transform
        self.singular = bool(parts.singular)
        self.weights = None
        if self.singular:
            if weights is None:
                raise ConfigError("singular plans need area weights for projection")
            self.weights = np.asarray(weights, dtype=float).reshape(self.shape2d)
            self._wsum = float(self.weights.sum())
        self.solve_count = 0

        diag = parts.diag0[:, None] + parts.lambda_scale * parts.eigvals[None, :]
        self.sub = parts.sub.copy()
        self.sup = parts.sup.copy()
        self._mode0 = None
        cols = np.arange(nmodes)
        if self.singular:
            if abs(parts.eigvals[0]) > 1e-13 * np.max(np.abs(parts.eigvals)):
                raise ConfigError("singular plan expects the zero mode first")
            cols = cols[1:]
            # zero mode: pin x[0] = 0 and solve the trailing (ncols-1) block
            m0 = TridiagonalSystem(
                np.concatenate([[0.0], self.sub[2:]]),
                diag[1:, 0].copy(),
                np.concatenate([self.sup[1:-1], [0.0]]),
            )
            self._mode0 = m0
        self._cols = cols
        d = diag[:, cols]
        low = np.zeros_like(d)
        dhat = np.empty_like(d)
        dhat[0] = d[0]
        for i in range(1, ncols):
            low[i] = self.sub[i] / dhat[i - 1]
            dhat[i] = d[i] - low[i] * self.sup[i - 1]
        if np.any(np.abs(dhat) <= _PIVOT_RTOL * np.max(np.abs(d))):
            raise SingularSystemError("fast plan: zero pivot while factoring")
        self._low = low
        self._dhat_inv = 1.0 / dhat

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for one right-hand side given on the unknown layout."""
        ncols, nmodes = self.shape2d
        z = np.asarray(rhs, dtype=float).reshape(self.shape2d)
        if self.singular:
            z = z - (self.weights * z).sum() / self._wsum
        zh = _forward_transform(self.transform, z)

        xh = np.empty_like(zh)
        b = zh[:, self._cols]
        y = np.empty_like(b)
        y[0] = b[0]
        for i in range(1, ncols):
            y[i] = b[i] - self._low[i] * y[i - 1]
        x = np.empty_like(b)
        x[-1] = y[-1] * self._dhat_inv[-1]
        for i in range(ncols - 2, -1, -1):
            x[i] = (y[i] - self.sup[i] * x[i + 1]) * self._dhat_inv[i]
        xh[:, self._cols] = x
        if self._mode0 is not None:
            x0 = np.zeros(ncols)
            x0[1:] = thomas_solve(self._mode0, zh[1:, 0])
            xh[:, 0] = x0

        out = _inverse_transform(self.transform, xh)
        if self.singular:
            out = out - out.mean()
        self.solve_count += 1
        return out.reshape(np.asarray(rhs).shape)

    def solve_block(self, rhs_cols: np.ndarray) -> np.ndarray:
        """Solve a block of right-hand sides given as columns of an (n, k)
        array; identical per-column semantics to solve()."""
        ncols, nmodes = self.shape2d
        k = rhs_cols.shape[1]
        z = np.asarray(rhs_cols, dtype=float).reshape(ncols, nmodes, k)
        if self.singular:
            z = z - (self.weights[:, :, None] * z).sum(axis=(0, 1)) / self._wsum
        zh = _forward_transform(self.transform, z)

        xh = np.empty_like(zh)
        b = zh[:, self._cols, :]
        low = self._low[:, :, None]
        dinv = self._dhat_inv[:, :, None]
        y = np.empty_like(b)
        y[0] = b[0]
        for i in range(1, ncols):
            y[i] = b[i] - low[i] * y[i - 1]
        x = np.empty_like(b)
        x[-1] = y[-1] * dinv[-1]
        for i in range(ncols - 2, -1, -1):
            x[i] = (y[i] - self.sup[i] * x[i + 1]) * dinv[i]
        xh[:, self._cols, :] = x
        if self._mode0 is not None:
            x0 = np.zeros((ncols, k))
            x0[1:] = thomas_solve(self._mode0, zh[1:, 0, :])
            xh[:, 0, :] = x0

        out = _inverse_transform(self.transform, xh)
        if self.singular:
            out = out - out.mean(axis=(0, 1))
        self.solve_count += k
        return out.reshape(ncols * nmodes, k)


def build_fast_plan(parts, weights: np.ndarray | None = None) -> FastPlan:
    return FastPlan(parts, weights=weights)


def fast_solve(plan: FastPlan, rhs: np.ndarray) -> np.ndarray:
    return plan.solve(rhs)


# ---------------------------------------------------------------------------
# capacitance-matrix direct solver for the cut operator


class CapacitanceSolver:
    """Fast direct solver for the cut-cell operator.

    The assembled operator differs from the separable no-body operator G in a
    thin band of marked rows near the boundary.  Writing the difference as
    Q M (Q scatters the marked rows), the Woodbury identity reduces each solve
    to exactly two fast G-solves plus one small dense solve with the
    capacitance matrix C = I + M G^{-1} Q, factored once here.

    Solid-row identities are reproduced by overwriting those entries with the
    right-hand side after the solve; no fluid unknown couples to them.
    """

    def __init__(self, op, g_matrix, plan: FastPlan):
        self.op = op
        self.plan = plan
        self.markers = np.asarray(op.marked_rows, dtype=np.int64)
        n_c = self.markers.size
        self.n_c = n_c
        if n_c == 0:
            self.M = None
            self._lu = None
            return
        self.M = (op.matrix[self.markers] - g_matrix[self.markers]).tocsr()
        self.M.eliminate_zeros()
        ncols, nmodes = plan.shape2d
        n = ncols * nmodes
        C = np.eye(n_c)
        # blocked impulse solves: batching amortizes transform overhead while
        # keeping the (n, blk) scratch arrays within a few hundred MB
        blk = 16 if n >= (1 << 20) else 64
        for s in range(0, n_c, blk):
            idx = self.markers[s:s + blk]
            E = np.zeros((n, idx.size))
            E[idx, np.arange(idx.size)] = 1.0
            C[:, s:s + idx.size] += self.M @ plan.solve_block(E)
        lu, piv = lu_factor(C)
        umin = np.min(np.abs(np.diag(lu)))
        if umin <= _PIVOT_RTOL * max(1.0, np.max(np.abs(np.diag(lu)))):
            raise SingularSystemError(
                f"capacitance matrix is numerically singular (|u_min|={umin:.3e})"
            )
        self._lu = (lu, piv)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float).ravel()
        w = self.plan.solve(rhs).ravel()
        if self.n_c:
            y = lu_solve(self._lu, self.M @ w)
            rhs2 = rhs.copy()
            rhs2[self.markers] -= y
            x = self.plan.solve(rhs2).ravel()
        else:
            x = w
        solid = self.op.solid_rows
        if solid.size:
            x[solid] = rhs[solid]
        if self.op.kind == "p" and self.op.fluid_mask is not None:
            f = self.op.fluid_mask
            x[f] -= x[f].mean()
        return x


def capacitance_build(op, g_matrix, plan: FastPlan) -> CapacitanceSolver:
    return CapacitanceSolver(op, g_matrix, plan)


def capacitance_solve(solver: CapacitanceSolver, rhs: np.ndarray) -> np.ndarray:
    return solver.solve(rhs)


# ---------------------------------------------------------------------------
# Krylov fallback (BiCGSTAB, hand-rolled)


@dataclass
class KrylovSettings:
    tol: float = 1e-8
    max_iter: int = 1000
    preconditioner: str = "jacobi"  # 'none' | 'jacobi' | 'ilu'

    def __post_init__(self):
        if not 0.0 < self.tol < 1.0:
            raise ConfigError(f"krylov tol must be in (0, 1), got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"krylov max_iter must be >= 1, got {self.max_iter}")


def build_preconditioner(op, kind: str):
    """Returns apply(r) -> approximate A^{-1} r, or None."""
    if kind == "none":
        return None
    A = op.matrix
    if kind == "jacobi":
        d = A.diagonal()
        if np.any(d == 0.0):
            raise SingularSystemError("jacobi preconditioner hit a zero diagonal")
        inv = 1.0 / d
        return lambda r: inv * r
    if kind == "ilu":
        scale = float(np.max(np.abs(A.diagonal())))
        shift = 1e-10 * scale if op.singular else 0.0
        M = A.tocsc()
        if shift:
            M = (M + shift * sparse.eye(A.shape[0], format="csc")).tocsc()
        ilu = spilu(M, drop_tol=1e-5, fill_factor=12.0)
        return ilu.solve
    raise ConfigError(f"unknown preconditioner '{kind}'")


def krylov_solve(op, rhs, settings: KrylovSettings | None = None,
                 x0: np.ndarray | None = None,
                 precond=None) -> tuple[np.ndarray, int]:
    """Preconditioned BiCGSTAB on the assembled operator.

    Returns (x, iterations).  The singular pressure operator is handled by
    projecting the right-hand side onto the range (left-null component
    removed) and keeping the Krylov space clear of the constant null vector:
    every preconditioner application has its fluid mean removed.  For
    compatible data the returned x solves the original system exactly, with
    the fluid mean pinned to zero.
    """
    if settings is None:
        settings = KrylovSettings()
    A = op.matrix
    n = A.shape[0]
    b = np.asarray(rhs, dtype=float).ravel().copy()

    def matvec(x):
        return A @ x

    if precond is None and settings.preconditioner != "none":
        precond = build_preconditioner(op, settings.preconditioner)
    raw_m = precond if precond is not None else (lambda r: r)
    apply_m = raw_m

    if op.singular:
        a = op.left_null
        b -= a * (float(a @ b) / float(a @ a))
        f = op.fluid_mask
        nf = float(np.count_nonzero(f))

        def apply_m(r):
            z = np.array(raw_m(r), dtype=float, copy=True)
            z[f] -= z[f].sum() / nf
            return z

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel().copy()
    if op.singular:
        x[op.fluid_mask] -= x[op.fluid_mask].mean()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), 0
    target = settings.tol * bnorm

    r = b - matvec(x)
    rhat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros(n)
    p = np.zeros(n)
    restarted = False
    it = 0
    while it < settings.max_iter:
        it += 1
        rho_new = float(rhat @ r)
        if abs(rho_new) < 1e-300:
            if restarted:
                raise NonConvergenceError(
                    "bicgstab breakdown (rho ~ 0)",
                    residual=float(np.linalg.norm(r)), iterations=it)
            rhat = r.copy()
            rho = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            restarted = True
            continue
        beta = (rho_new / rho) * (alpha / omega)
        rho = rho_new
        p = r + beta * (p - omega * v)
        phat = apply_m(p)
        v = matvec(phat)
        denom = float(rhat @ v)
        if denom == 0.0:
            raise NonConvergenceError(
                "bicgstab breakdown (rhat . v = 0)",
                residual=float(np.linalg.norm(r)), iterations=it)
        alpha = rho / denom
        s = r - alpha * v
        if np.linalg.norm(s) <= target:
            x = x + alpha * phat
            r = s
            break
        shat = apply_m(s)
        t = matvec(shat)
        tt = float(t @ t)
        if tt == 0.0:
            raise NonConvergenceError(
                "bicgstab breakdown (t = 0)",
                residual=float(np.linalg.norm(s)), iterations=it)
        omega = float(t @ s) / tt
        x = x + alpha * phat + omega * shat
        r = s - omega * t
        if np.linalg.norm(r) <= target:
            break
        if omega == 0.0:
            raise NonConvergenceError(
                "bicgstab stagnated (omega = 0)",
                residual=float(np.linalg.norm(r)), iterations=it)
    else:
        raise NonConvergenceError(
            f"bicgstab: no convergence in {settings.max_iter} iterations",
            residual=float(np.linalg.norm(r)), iterations=settings.max_iter)

    if op.singular:
        f = op.fluid_mask
        x[f] -= x[f].mean()
        if op.solid_rows.size:
            x[op.solid_rows] = rhs[op.solid_rows]
    return x, it
