"""Direct solution of the saddle-point system and measurement tools.

The assembled matrix is reduced by eliminating Dirichlet velocity dofs
symmetrically (boundary values moved to the right-hand side) and by
fixing the one-dimensional pressure kernel, either with a scalar
mean-zero multiplier appended to the system (default) or by pinning one
pressure dof.  A sparse LU factorization is the only solve path; the
same factorization powers the inverse iteration of the condition-number
estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import BlockSystem, CouplingKind, pressure_integral_weights
from .femspace import FieldVector, element_geometry, make_rule
from .mesh import TriMesh


class SolverError(RuntimeError):
    """Factorization failed or the residual check did not pass."""


class EstimateError(RuntimeError):
    """Singular-value iteration hit the iteration cap.

    Carries the best available estimates in ``sigma_max``/``sigma_min``.
    """

    def __init__(self, message, sigma_max=None, sigma_min=None):
        super().__init__(message)
        self.sigma_max = sigma_max
        self.sigma_min = sigma_min


class _SuperLUFactor:
    """Thin wrapper around a SuperLU factorization."""

    def __init__(self, matrix: sp.csc_matrix):
        self.lu = splu(matrix)
        self.fill_nnz = self.lu.L.nnz + self.lu.U.nnz

    def solve(self, b, trans="N"):
        return self.lu.solve(b, trans=trans)


class _BorderedFactor:
    """LU of a matrix with a few dense-coupled unknowns eliminated last.

    The mean-zero pressure multiplier couples to every pressure dof;
    ordering heuristics choke on that dense row/column, so the border
    (one pressure dof plus the multiplier) is peeled off by a small
    Schur complement around a factorization of the nonsingular core.
    """

    def __init__(self, matrix: sp.csc_matrix, border: np.ndarray):
        from scipy.linalg import lu_factor, lu_solve

        self._lu_solve = lu_solve
        n = matrix.shape[0]
        border = np.asarray(border, dtype=np.int64)
        core = np.setdiff1d(np.arange(n), border)
        self.n = n
        self.core = core
        self.border = border
        acsr = matrix.tocsr()
        self.klu = splu(acsr[core][:, core].tocsc())
        self.b_cols = acsr[core][:, border].toarray()
        self.c_rows = acsr[border][:, core].toarray()
        d = acsr[border][:, border].toarray()
        self.kinv_b = self.klu.solve(self.b_cols)
        self.ktinv_ct = self.klu.solve(np.ascontiguousarray(self.c_rows.T), trans="T")
        self.schur = lu_factor(d - self.c_rows @ self.kinv_b)
        self.fill_nnz = self.klu.L.nnz + self.klu.U.nnz

    def solve(self, b, trans="N"):
        b1 = b[self.core]
        b2 = b[self.border]
        if trans == "N":
            y1 = self.klu.solve(b1)
            x2 = self._lu_solve(self.schur, b2 - self.c_rows @ y1)
            x1 = y1 - self.kinv_b @ x2
        else:
            y1 = self.klu.solve(b1, trans="T")
            x2 = self._lu_solve(self.schur, b2 - self.b_cols.T @ y1, trans=1)
            x1 = y1 - self.ktinv_ct @ x2
        out = np.empty(self.n)
        out[self.core] = x1
        out[self.border] = x2
        return out


def factorize(matrix: sp.spmatrix, border: np.ndarray | None = None):
    """Sparse LU with optional bordered elimination of dense rows/columns."""
    csc = matrix.tocsc()
    try:
        if border is not None and len(border):
            return _BorderedFactor(csc, border)
        return _SuperLUFactor(csc)
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc


@dataclass
class ReducedSystem:
    """Square nonsingular system after elimination and pressure fixing."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    keep: np.ndarray
    system: BlockSystem
    pressure_fix: str
    pressure_weights: np.ndarray
    augmented: bool
    border: np.ndarray | None


def reduce_system(
    system: BlockSystem, fluid_coarse: TriMesh, pressure_fix: str = "augment"
) -> ReducedSystem:
    """Eliminate constrained velocity dofs and fix the pressure kernel."""
    if pressure_fix not in ("augment", "pin"):
        raise ValueError("pressure_fix must be 'augment' or 'pin'")
    n = system.n_total
    off_p = system.offsets[3]  # start of the pressure block
    constrained = np.flatnonzero(system.u_map.constrained)
    dropped = constrained
    if pressure_fix == "pin":
        dropped = np.concatenate([constrained, [off_p]])
    keep = np.setdiff1d(np.arange(n), dropped)

    matrix = system.matrix.tocsr()
    reduced = matrix[keep][:, keep]
    rhs = system.rhs[keep].copy()
    u_bc = system.u_dirichlet
    if np.any(u_bc[constrained] != 0.0):
        rhs -= matrix[keep][:, constrained] @ u_bc[constrained]

    w = pressure_integral_weights(fluid_coarse, system.p_map)
    augmented = pressure_fix == "augment"
    border = None
    if augmented:
        p_rows = off_p + np.arange(system.p_map.n_dofs)
        pos = np.searchsorted(keep, p_rows)
        col = np.zeros(len(keep))
        col[pos] = w
        col = sp.csr_matrix(col[:, None])
        reduced = sp.bmat([[reduced, col], [col.T, None]], format="csr")
        rhs = np.concatenate([rhs, [0.0]])
        # core without one pressure dof and the multiplier is nonsingular
        border = np.array([pos[0], reduced.shape[0] - 1], dtype=np.int64)

    return ReducedSystem(reduced.tocsr(), rhs, keep, system, pressure_fix, w, augmented, border)


@dataclass
class LinearSolution:
    """Unpacked solution fields with the solve residual."""

    u: FieldVector
    p: FieldVector
    X: FieldVector
    lam: FieldVector
    residual: float
    factor_nnz: int


def solve(reduced: ReducedSystem, factor=None) -> LinearSolution:
    """Factorize and solve; one step of iterative refinement is applied.

    A singular factorization or a relative residual above 1e-10 raises
    SolverError: the formulation is solvable for any mesh intersection,
    so failure signals an assembly bug rather than a legitimate state.
    """
    a = reduced.matrix
    if factor is None:
        factor = factorize(a, reduced.border)
    x = factor.solve(reduced.rhs)
    x += factor.solve(reduced.rhs - a @ x)
    rhs_norm = np.linalg.norm(reduced.rhs)
    res = np.linalg.norm(a @ x - reduced.rhs)
    residual = res / rhs_norm if rhs_norm > 0 else res
    if not np.isfinite(residual) or residual > 1e-10:
        raise SolverError(f"solve residual {residual:.3e} exceeds 1e-10")

    system = reduced.system
    full = np.zeros(system.n_total)
    n_keep = len(reduced.keep)
    full[reduced.keep] = x[:n_keep]
    constrained = np.flatnonzero(system.u_map.constrained)
    full[constrained] = system.u_dirichlet[constrained]

    o_u, o_x, o_lam, o_p = (
        system.u_map.n_dofs,
        system.x_map.n_dofs,
        system.lam_map.n_dofs,
        system.p_map.n_dofs,
    )
    splits = np.cumsum([o_u, o_x, o_lam])
    u_vals, x_vals, lam_vals, p_vals = np.split(full, splits)
    if reduced.pressure_fix == "pin":
        area = reduced.pressure_weights.sum()
        p_vals = p_vals - (reduced.pressure_weights @ p_vals) / area
    return LinearSolution(
        FieldVector(u_vals, system.u_map),
        FieldVector(p_vals, system.p_map),
        FieldVector(x_vals, system.x_map),
        FieldVector(lam_vals, system.lam_map),
        float(residual),
        int(factor.fill_nnz),
    )


def solve_system(
    system: BlockSystem, fluid_coarse: TriMesh, pressure_fix: str = "augment"
) -> LinearSolution:
    return solve(reduce_system(system, fluid_coarse, pressure_fix))


@dataclass
class ConditionEstimate:
    """Extremal singular values from power/inverse iteration."""

    sigma_max: float
    sigma_min: float
    iterations: tuple[int, int]
    converged: tuple[bool, bool]

    @property
    def cond2(self) -> float:
        return self.sigma_max / self.sigma_min


def _extremal_sigma(apply_normal, n: int, rtol: float, max_iter: int, rng) -> tuple[float, int, bool]:
    """Largest eigenvalue of a PSD operator by power iteration.

    Convergence is declared from an Aitken-style error estimate on the
    Rayleigh quotient sequence.
    """
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam_prev = 0.0
    change_prev = np.inf
    for it in range(1, max_iter + 1):
        w = apply_normal(v)
        lam = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0, it, True
        v = w / norm_w
        change = abs(lam - lam_prev)
        if lam > 0.0 and it >= 3:
            if change == 0.0:
                return lam, it, True
            ratio = change / change_prev if change_prev > 0 else 0.0
            if ratio < 1.0:
                err = change * ratio / (1.0 - ratio)
                if err <= 0.25 * rtol * lam and change <= 0.25 * rtol * lam:
                    return lam, it, True
        lam_prev = lam
        change_prev = change
    return lam_prev, max_iter, False


def estimate_cond2(
    matrix: sp.spmatrix,
    rtol: float = 1e-6,
    max_iter: int = 10000,
    seed: int = 0,
    factor=None,
    border: np.ndarray | None = None,
) -> ConditionEstimate:
    """Euclidean condition number via normal-operator power iteration.

    sigma_max uses w -> A^T (A w); sigma_min uses inverse iteration with
    a single sparse factorization of A, applying A^{-1} and A^{-T}.  An
    existing factorization (e.g. from a solve of the same system) can be
    reused through ``factor``.
    """
    a = matrix.tocsc()
    n = a.shape[0]
    if a.shape[0] != a.shape[1]:
        raise ValueError("condition estimation needs a square matrix")
    at = a.T.tocsc()
    rng = np.random.default_rng(seed)

    lam_max, it_max, ok_max = _extremal_sigma(
        lambda v: at @ (a @ v), n, rtol, max_iter, rng
    )
    sigma_max = np.sqrt(max(lam_max, 0.0))

    if factor is None:
        try:
            factor = factorize(a, border)
        except SolverError as exc:
            raise SolverError(f"singular matrix in condition estimate: {exc}") from exc

    def apply_inverse_normal(v):
        return factor.solve(factor.solve(v, trans="T"))

    lam_inv, it_min, ok_min = _extremal_sigma(apply_inverse_normal, n, rtol, max_iter, rng)
    if lam_inv <= 0.0:
        raise EstimateError("inverse iteration collapsed", sigma_max=sigma_max)
    sigma_min = 1.0 / np.sqrt(lam_inv)

    if not (ok_max and ok_min):
        raise EstimateError(
            f"condition estimate did not converge within {max_iter} iterations "
            f"(best bounds sigma_max={sigma_max:.6e}, sigma_min={sigma_min:.6e})",
            sigma_max=sigma_max,
            sigma_min=sigma_min,
        )
    if sigma_max < sigma_min:
        sigma_max, sigma_min = sigma_min, sigma_max
    return ConditionEstimate(float(sigma_max), float(sigma_min), (it_max, it_min), (ok_max, ok_min))


@dataclass
class FieldErrors:
    """Discretization errors: u in H1, p in L2, X in H1, lambda in its norm."""

    u: float
    p: float
    X: float
    lam: float


def _h1_error(mesh: TriMesh, field: FieldVector, exact, exact_grad) -> float:
    rule = make_rule(6)
    geo = element_geometry(mesh)
    pts = rule.physical_points(mesh.corners())
    vals = np.asarray(exact(pts[..., 0], pts[..., 1]))
    grads = np.asarray(exact_grad(pts[..., 0], pts[..., 1]))
    nodal = field.nodal()[mesh.triangles]  # (n_t, 3, c)
    approx = np.einsum("kb,tbc->tkc", rule.points, nodal)
    approx_grad = np.einsum("tbc,tbx->tcx", nodal, geo.grads)
    diff2 = np.einsum("k,tkc->t", rule.weights, (vals - approx) ** 2)
    gdiff = grads - approx_grad[:, None]
    diff2 += np.einsum("k,tkcx->t", rule.weights, gdiff**2)
    return float(np.sqrt(np.sum(2.0 * geo.area * diff2)))


def _l2_error_scalar(mesh: TriMesh, field: FieldVector, exact) -> float:
    rule = make_rule(6)
    geo = element_geometry(mesh)
    pts = rule.physical_points(mesh.corners())
    vals = np.asarray(exact(pts[..., 0], pts[..., 1]))
    nodal = field.values[mesh.triangles]
    approx = np.einsum("kb,tb->tk", rule.points, nodal)
    diff2 = np.einsum("k,tk->t", rule.weights, (vals - approx) ** 2)
    return float(np.sqrt(np.sum(2.0 * geo.area * diff2)))


def dual_norm_error(lam_h: FieldVector, case, solid: TriMesh) -> float:
    """H1-dual norm of the multiplier error for the L2 coupling.

    Solves the auxiliary Neumann problem -lap(psi) + psi = lam - lam_h
    componentwise with P1 elements on the solid mesh and returns the H1
    norm of psi.
    """
    from .assembly import assemble_mass, assemble_stiffness

    dm = lam_h.dof_map
    op = (assemble_stiffness(solid, dm) + assemble_mass(solid, dm)).tocsc()
    rule = make_rule(6)
    geo = element_geometry(solid)
    pts = rule.physical_points(solid.corners())
    exact = np.asarray(case.lam(pts[..., 0], pts[..., 1]))  # (n_t, K, 2)
    nodal = lam_h.nodal()[solid.triangles]
    approx = np.einsum("kb,tbc->tkc", rule.points, nodal)
    local = 2.0 * geo.area[:, None, None] * np.einsum(
        "k,nkc,kb->nbc", rule.weights, exact - approx, rule.points
    )
    rhs = np.zeros(dm.n_dofs)
    np.add.at(rhs, dm.index[solid.triangles], local)
    psi = splu(op).solve(rhs)
    return float(np.sqrt(max(psi @ rhs, 0.0)))


def error_norms(
    sol: LinearSolution,
    case,
    fluid_coarse: TriMesh,
    fluid_half: TriMesh,
    solid: TriMesh,
    kind: CouplingKind,
) -> FieldErrors:
    """Per-field errors against the manufactured solution.

    The discrete pressure mean is removed before comparison (the exact
    pressure has zero mean by construction); the multiplier norm follows
    the coupling kind: H1-dual for C0, H1 for C1.
    """
    err_u = _h1_error(fluid_half, sol.u, case.u, case.grad_u)

    w = pressure_integral_weights(fluid_coarse, sol.p.dof_map)
    p_shift = (w @ sol.p.values) / w.sum()
    p_aligned = FieldVector(sol.p.values - p_shift, sol.p.dof_map)

    def exact_p(x, y):
        vals = np.asarray(case.p_smooth(x, y))
        if case.p_jump != 0.0:
            vals = vals + case.p_jump * case.in_solid(x, y)
        return vals

    err_p = _l2_error_scalar(fluid_coarse, p_aligned, exact_p)
    err_x = _h1_error(solid, sol.X, case.X, case.grad_X)
    if kind is CouplingKind.C0:
        err_lam = dual_norm_error(sol.lam, case, solid)
    else:
        err_lam = _h1_error(solid, sol.lam, case.lam, case.grad_lam)
    return FieldErrors(err_u, err_p, err_x, err_lam)


def fit_rate(values, hs) -> float:
    """Least-squares slope of log(value) against log(h)."""
    values = np.asarray(values, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if len(values) < 3:
        raise ValueError("rate fitting needs at least 3 levels")
    if np.any(values <= 0.0) or np.any(hs <= 0.0):
        raise ValueError("rate fitting needs positive values and mesh sizes")
    return float(np.polyfit(np.log(hs), np.log(values), 1)[0])


def save_fields(sol: LinearSolution, out_dir, tag: str = "") -> list:
    """Dump the solution fields as plain-text coefficient vectors."""
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    prefix = f"{tag}_" if tag else ""
    for name, vec in (("u", sol.u), ("p", sol.p), ("X", sol.X), ("lambda", sol.lam)):
        path = out_dir / f"{prefix}{name}.txt"
        np.savetxt(path, vec.values, header=f"{name} coefficients")
        written.append(path)
    return written
