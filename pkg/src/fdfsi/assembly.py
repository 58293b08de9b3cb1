"""Assembly of the coupled saddle-point system.

Block layout of the full matrix (unknowns u, X, lambda, p):

    [ A_f   0    C_f^T  -B_f^T ]
    [ 0     A_s  -C_s^T  0     ]
    [ -C_f  C_s  0       0     ]
    [ B_f   0    0       0     ]

A_f carries the fluid mass and symmetric-gradient stiffness, A_s the
solid mass and componentwise-gradient stiffness, B_f the divergence
pairing between the refined velocity mesh and the coarse pressure mesh.
C_s pairs multiplier and deformation on the solid mesh.  C_f is the only
block joining the two meshes: it pairs multiplier functions with fluid
velocity composed with the configuration map, assembled either exactly
(composite quadrature on the clipped intersection pieces) or inexactly
(one rule per solid element with point location).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .femspace import DofMap, FieldVector, element_geometry, make_rule
from .geometry import (
    BackgroundGrid,
    GeometryError,
    IntersectionTable,
    locate_point,
    triangle_areas,
)
from .mesh import TriMesh


class CouplingKind(Enum):
    """Multiplier pairing: plain L2 product (C0) or full H1 product (C1)."""

    C0 = "c0"
    C1 = "c1"


class AssemblyMode(Enum):
    EXACT = "exact"
    INEXACT = "inexact"


class ConsistencyError(RuntimeError):
    """The intersection table does not match the configuration map."""


@dataclass(frozen=True)
class Parameters:
    """Coefficients of the stationary forms.

    alpha scales the fluid mass term, beta the solid mass term, gamma
    the solid stiffness, nu the (constant) viscosity.
    """

    alpha: float
    beta: float
    gamma: float
    nu: float

    def __post_init__(self):
        if self.nu <= 0.0 or self.gamma <= 0.0:
            raise ValueError("nu and gamma must be positive")
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("alpha and beta must be nonnegative")


def _scatter(rows, cols, vals, shape) -> sp.csr_matrix:
    m = sp.coo_matrix((np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=shape)
    return m.tocsr()


def _ref_mass() -> np.ndarray:
    rule = make_rule(2)
    lam = rule.points  # (K, 3)
    return np.einsum("k,ki,kj->ij", rule.weights, lam, lam)


def assemble_mass(mesh: TriMesh, dof_map: DofMap) -> sp.csr_matrix:
    """Mass matrix; vector fields get a block-diagonal component layout."""
    geo = element_geometry(mesh)
    local = 2.0 * geo.area[:, None, None] * _ref_mass()[None]
    return _scatter_by_component(mesh, dof_map, local)


def assemble_stiffness(mesh: TriMesh, dof_map: DofMap) -> sp.csr_matrix:
    """Componentwise-gradient stiffness matrix."""
    geo = element_geometry(mesh)
    local = geo.area[:, None, None] * np.einsum("tix,tjx->tij", geo.grads, geo.grads)
    return _scatter_by_component(mesh, dof_map, local)


def _scatter_by_component(mesh: TriMesh, dof_map: DofMap, local: np.ndarray) -> sp.csr_matrix:
    """Scatter per-element 3x3 blocks into every field component."""
    n = dof_map.n_dofs
    tri_dofs = dof_map.index[mesh.triangles]  # (n_t, 3, ncomp)
    rows, cols, vals = [], [], []
    for c in range(dof_map.n_components):
        idx = tri_dofs[:, :, c]
        rows.append(np.repeat(idx, 3, axis=1))
        cols.append(np.tile(idx, (1, 3)))
        vals.append(local.reshape(len(local), 9))
    return _scatter(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (n, n))


def assemble_fluid_block(fluid_half: TriMesh, u_map: DofMap, params: Parameters) -> sp.csr_matrix:
    """alpha * vector mass + nu * symmetric-gradient stiffness on T_{h/2}.

    The symmetric gradient couples the two velocity components.
    """
    geo = element_geometry(fluid_half)
    g = geo.grads  # (n_t, 3, 2)
    gram = np.einsum("tix,tjx->tij", g, g)
    n_t = fluid_half.n_triangles
    local = np.zeros((n_t, 6, 6))
    mass = 2.0 * geo.area[:, None, None] * _ref_mass()[None]
    for a in range(2):
        for b in range(2):
            # nu/2 * (delta_ab grad_i.grad_j + dgrad_i[b] dgrad_j[a]) per area
            visc = 0.5 * params.nu * (
                (gram if a == b else 0.0) + np.einsum("ti,tj->tij", g[:, :, b], g[:, :, a])
            )
            block = geo.area[:, None, None] * visc
            if a == b:
                block = block + params.alpha * mass
            local[:, a::2, b::2] = block
    dofs = u_map.index[fluid_half.triangles].reshape(n_t, 6)
    rows = np.repeat(dofs, 6, axis=1)
    cols = np.tile(dofs, (1, 6))
    return _scatter(rows, cols, local.reshape(n_t, 36), (u_map.n_dofs, u_map.n_dofs))


def assemble_solid_block(solid: TriMesh, x_map: DofMap, params: Parameters) -> sp.csr_matrix:
    """beta * vector mass + gamma * componentwise-gradient stiffness."""
    mat = params.gamma * assemble_stiffness(solid, x_map)
    if params.beta != 0.0:
        mat = mat + params.beta * assemble_mass(solid, x_map)
    return mat.tocsr()


def assemble_divergence_block(
    fluid_half: TriMesh, fluid_coarse: TriMesh, u_map: DofMap, p_map: DofMap
) -> sp.csr_matrix:
    """B_f with entries (psi_i, div phi_j); exact with the centroid rule.

    The divergence of a P1 velocity is constant per refined element and
    the coarse pressure basis is linear there, so the integrand has
    degree one.
    """
    if fluid_half.parent_triangle is None:
        raise ValueError("fluid_half must carry parent links to the coarse mesh")
    geo = element_geometry(fluid_half)
    parents = fluid_half.parent_triangle
    coarse_corners = fluid_coarse.corners()[parents]  # (n_t, 3, 2)
    centroids = fluid_half.corners().mean(axis=1)

    d1 = coarse_corners[:, 1] - coarse_corners[:, 0]
    d2 = coarse_corners[:, 2] - coarse_corners[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    r = centroids - coarse_corners[:, 0]
    l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    psi = np.stack([1.0 - l1 - l2, l1, l2], axis=1)  # (n_t, 3)

    # local[t, i, (b, c)] = |T| * psi_i * dphi_b/dx_c
    local = geo.area[:, None, None, None] * psi[:, :, None, None] * geo.grads[:, None, :, :]
    n_t = fluid_half.n_triangles
    p_dofs = p_map.index[fluid_coarse.triangles[parents], 0]  # (n_t, 3)
    u_dofs = u_map.index[fluid_half.triangles].reshape(n_t, 6)
    rows = np.repeat(p_dofs, 6, axis=1)
    cols = np.tile(u_dofs, (1, 3))
    return _scatter(rows, cols, local.reshape(n_t, 18), (p_map.n_dofs, u_map.n_dofs))


def assemble_solid_coupling(
    solid: TriMesh, lam_map: DofMap, x_map: DofMap, kind: CouplingKind
) -> sp.csr_matrix:
    """C_s: L2 pairing of multiplier and deformation, plus gradients for C1."""
    if lam_map.n_dofs != x_map.n_dofs:
        raise ValueError("multiplier and deformation spaces must coincide")
    mat = assemble_mass(solid, x_map)
    if kind is CouplingKind.C1:
        mat = mat + assemble_stiffness(solid, x_map)
    return mat.tocsr()


def _pull_back_barycentric(corners: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of (n, k, 2) points in (n, 3, 2) triangles."""
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    r = points - corners[:, None, 0]
    l1 = (r[..., 0] * d2[:, None, 1] - r[..., 1] * d2[:, None, 0]) / det[:, None]
    l2 = (d1[:, None, 0] * r[..., 1] - d1[:, None, 1] * r[..., 0]) / det[:, None]
    return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)


def deformation_gradients(solid: TriMesh, mapped_vertices: np.ndarray) -> np.ndarray:
    """Per-element gradient F of the piecewise-affine configuration map."""
    ref = element_geometry(solid)
    mc = mapped_vertices[solid.triangles]
    mapped_jac = np.stack([mc[:, 1] - mc[:, 0], mc[:, 2] - mc[:, 0]], axis=-1)
    inv_ref = np.empty_like(ref.jac)
    inv_ref[:, 0, 0] = ref.jac[:, 1, 1]
    inv_ref[:, 0, 1] = -ref.jac[:, 0, 1]
    inv_ref[:, 1, 0] = -ref.jac[:, 1, 0]
    inv_ref[:, 1, 1] = ref.jac[:, 0, 0]
    inv_ref /= ref.det[:, None, None]
    return np.einsum("tmx,txk->tmk", mapped_jac, inv_ref)


def _check_table(table: IntersectionTable, solid: TriMesh, mapped: np.ndarray) -> None:
    mc = mapped[solid.triangles]
    areas = triangle_areas(mc)
    mismatch = np.abs(table.total_mapped_area - areas)
    bad = mismatch > 1e-10 * np.abs(areas)
    if np.any(bad):
        e = int(np.flatnonzero(bad)[0])
        raise ConsistencyError(
            f"intersection table is stale for the given map (element {e}: "
            f"covers {table.total_mapped_area[e]:.17g}, mapped area {areas[e]:.17g})"
        )
    ref = table.mapped_vertices
    if ref is not None:
        scale = max(float(np.abs(ref).max()), 1.0)
        if ref.shape != mapped.shape or np.abs(ref - mapped).max() > 1e-12 * scale:
            raise ConsistencyError(
                "intersection table was built for a different configuration map"
            )


def assemble_fluid_coupling(
    solid: TriMesh,
    xbar: FieldVector,
    fluid_half: TriMesh,
    lam_map: DofMap,
    u_map: DofMap,
    kind: CouplingKind,
    mode: AssemblyMode,
    table: IntersectionTable | None = None,
    grid: BackgroundGrid | None = None,
) -> sp.csr_matrix:
    """C_f: multiplier against fluid velocity composed with the map.

    Exact mode integrates piece by piece over the clipped intersection
    triangles, where the integrand is polynomial (degree-2 rule for the
    L2 part, one point for the C1 gradient part).  Inexact mode applies
    the same rules once per solid element, locating each mapped
    quadrature point in the fluid mesh.
    """
    mapped = xbar.nodal()
    if mode is AssemblyMode.EXACT:
        if table is None:
            raise ValueError("exact coupling assembly needs an intersection table")
        _check_table(table, solid, mapped)
        return _coupling_exact(solid, mapped, fluid_half, lam_map, u_map, kind, table)
    if grid is None:
        raise ValueError("inexact coupling assembly needs a background grid")
    return _coupling_inexact(solid, mapped, fluid_half, lam_map, u_map, kind, grid)


def _coupling_exact(solid, mapped, fluid_half, lam_map, u_map, kind, table) -> sp.csr_matrix:
    solid_ids, fluid_ids, tris = table.flat()
    shape = (lam_map.n_dofs, u_map.n_dofs)
    if len(solid_ids) == 0:
        return sp.csr_matrix(shape)

    mapped_corners = mapped[solid.triangles][solid_ids]  # (N, 3, 2)
    fluid_corners = fluid_half.corners()[fluid_ids]
    det_f = triangle_areas(mapped[solid.triangles]) / element_geometry(solid).area
    piece_area_s = triangle_areas(tris) / det_f[solid_ids]

    rule = make_rule(2)
    pts = rule.physical_points(tris)  # (N, K, 2)
    lam_s = _pull_back_barycentric(mapped_corners, pts)
    lam_f = _pull_back_barycentric(fluid_corners, pts)
    local = 2.0 * piece_area_s[:, None, None] * np.einsum(
        "k,nki,nkj->nij", rule.weights, lam_s, lam_f
    )

    if kind is CouplingKind.C1:
        geo_s = element_geometry(solid)
        geo_f = element_geometry(fluid_half)
        f_grad = deformation_gradients(solid, mapped)[solid_ids]  # (N, 2, 2)
        g_s = geo_s.grads[solid_ids]  # (N, 3, 2)
        g_ft = np.einsum("nmk,njm->njk", f_grad, geo_f.grads[fluid_ids])
        local += piece_area_s[:, None, None] * np.einsum("nik,njk->nij", g_s, g_ft)

    lam_dofs = lam_map.index[solid.triangles[solid_ids]]  # (N, 3, 2)
    u_dofs = u_map.index[fluid_half.triangles[fluid_ids]]
    rows, cols, vals = [], [], []
    for c in range(2):
        rows.append(np.repeat(lam_dofs[:, :, c], 3, axis=1))
        cols.append(np.tile(u_dofs[:, :, c], (1, 3)))
        vals.append(local.reshape(len(local), 9))
    return _scatter(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), shape)


def _coupling_inexact(solid, mapped, fluid_half, lam_map, u_map, kind, grid) -> sp.csr_matrix:
    shape = (lam_map.n_dofs, u_map.n_dofs)
    geo_s = element_geometry(solid)
    mapped_corners = mapped[solid.triangles]
    fluid_corners = fluid_half.corners()
    rows, cols, vals = [], [], []

    def locate_all(points):
        found = np.empty(len(points), dtype=np.int64)
        for i, p in enumerate(points):
            e = locate_point(grid, fluid_half, p)
            if e is None:
                raise GeometryError(
                    f"mapped quadrature point {tuple(p)} falls outside the fluid domain"
                )
            found[i] = e
        return found

    rule = make_rule(2)
    # mapped quadrature points: the map is P1, so compose with the basis
    pts = np.einsum("kb,nbx->nkx", rule.points, mapped_corners)  # (n_s, K, 2)
    n_s, n_k = pts.shape[:2]
    flat_pts = pts.reshape(-1, 2)
    fluid_ids = locate_all(flat_pts)
    lam_f = _pull_back_barycentric(
        fluid_corners[fluid_ids], flat_pts[:, None, :]
    ).reshape(n_s, n_k, 3)
    # local[n, k, i, j] scattered separately per point: the fluid element varies
    w = 2.0 * geo_s.area[:, None] * rule.weights[None, :]
    local = np.einsum("nk,ki,nkj->nkij", w, rule.points, lam_f)
    lam_dofs = lam_map.index[solid.triangles]  # (n_s, 3, 2)
    u_dofs = u_map.index[fluid_half.triangles[fluid_ids.reshape(n_s, n_k)]]  # (n_s, K, 3, 2)
    for c in range(2):
        r = np.repeat(lam_dofs[:, None, :, c], n_k, axis=1)
        rows.append(np.repeat(r, 3, axis=2).ravel())
        cols.append(np.tile(u_dofs[:, :, :, c], (1, 1, 3)).ravel())
        vals.append(local.ravel())

    if kind is CouplingKind.C1:
        rule1 = make_rule(1)
        cpts = np.einsum("kb,nbx->nkx", rule1.points, mapped_corners).reshape(-1, 2)
        fluid_c = locate_all(cpts)
        geo_f = element_geometry(fluid_half)
        f_grad = deformation_gradients(solid, mapped)
        g_ft = np.einsum("nmk,njm->njk", f_grad, geo_f.grads[fluid_c])
        local1 = geo_s.area[:, None, None] * np.einsum("nik,njk->nij", geo_s.grads, g_ft)
        u_dofs1 = u_map.index[fluid_half.triangles[fluid_c]]
        for c in range(2):
            rows.append(np.repeat(lam_dofs[:, :, c], 3, axis=1).ravel())
            cols.append(np.tile(u_dofs1[:, :, c], (1, 3)).ravel())
            vals.append(local1.ravel())

    return _scatter(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), shape)


@dataclass
class BlockSystem:
    """Assembled blocks, the full matrix, and the right-hand side."""

    fluid: sp.csr_matrix
    solid_block: sp.csr_matrix
    divergence: sp.csr_matrix
    coupling_solid: sp.csr_matrix
    coupling_fluid: sp.csr_matrix
    matrix: sp.csr_matrix
    rhs: np.ndarray
    u_map: DofMap
    p_map: DofMap
    x_map: DofMap
    lam_map: DofMap
    u_dirichlet: np.ndarray

    @property
    def offsets(self) -> tuple[int, int, int, int]:
        n_u = self.u_map.n_dofs
        n_x = self.x_map.n_dofs
        n_lam = self.lam_map.n_dofs
        return (0, n_u, n_u + n_x, n_u + n_x + n_lam)

    @property
    def n_total(self) -> int:
        return self.u_map.n_dofs + self.x_map.n_dofs + self.lam_map.n_dofs + self.p_map.n_dofs


def combine_blocks(a_f, a_s, b_f, c_s, c_f) -> sp.csr_matrix:
    """Arrange the five blocks in the saddle-point sign pattern."""
    return sp.bmat(
        [
            [a_f, None, c_f.T, -b_f.T],
            [None, a_s, -c_s.T, None],
            [-c_f, c_s, None, None],
            [b_f, None, None, None],
        ],
        format="csr",
    )


def build_block_system(
    fluid_coarse: TriMesh,
    fluid_half: TriMesh,
    solid: TriMesh,
    maps: dict[str, DofMap],
    params: Parameters,
    xbar: FieldVector,
    kind: CouplingKind,
    mode: AssemblyMode,
    table: IntersectionTable | None = None,
    grid: BackgroundGrid | None = None,
    rhs: np.ndarray | None = None,
    u_dirichlet: np.ndarray | None = None,
) -> BlockSystem:
    u_map, p_map = maps["velocity"], maps["pressure"]
    x_map, lam_map = maps["deformation"], maps["multiplier"]
    a_f = assemble_fluid_block(fluid_half, u_map, params)
    a_s = assemble_solid_block(solid, x_map, params)
    b_f = assemble_divergence_block(fluid_half, fluid_coarse, u_map, p_map)
    c_s = assemble_solid_coupling(solid, lam_map, x_map, kind)
    c_f = assemble_fluid_coupling(
        solid, xbar, fluid_half, lam_map, u_map, kind, mode, table=table, grid=grid
    )
    matrix = combine_blocks(a_f, a_s, b_f, c_s, c_f)
    n = matrix.shape[0]
    if rhs is None:
        rhs = np.zeros(n)
    if u_dirichlet is None:
        u_dirichlet = np.zeros(u_map.n_dofs)
    return BlockSystem(
        a_f, a_s, b_f, c_s, c_f, matrix, rhs, u_map, p_map, x_map, lam_map, u_dirichlet
    )


def pressure_integral_weights(fluid_coarse: TriMesh, p_map: DofMap) -> np.ndarray:
    """Integrals of the pressure basis functions (row enforcing zero mean)."""
    geo = element_geometry(fluid_coarse)
    w = np.zeros(p_map.n_dofs)
    np.add.at(w, p_map.index[fluid_coarse.triangles, 0], np.repeat(geo.area[:, None] / 3.0, 3, 1))
    return w


def assemble_rhs(
    case,
    fluid_half: TriMesh,
    solid: TriMesh,
    maps: dict[str, DofMap],
    xbar: FieldVector,
    table: IntersectionTable,
    kind: CouplingKind,
) -> np.ndarray:
    """Manufactured right-hand side, assembled variationally.

    The fluid functional is a_f(u, v) - (div v, p) + c(lambda, v(Xbar)),
    the solid one a_s(X, Y) - c(lambda, Y), and the constraint one
    c(mu, X - u(Xbar)); the pressure block vanishes.  Smooth factors use
    the degree-6 rule; terms involving the map go through the clipped
    intersection pieces, which also integrate the piecewise-constant
    pressure jump exactly.
    """
    u_map, p_map = maps["velocity"], maps["pressure"]
    x_map, lam_map = maps["deformation"], maps["multiplier"]
    params = case.params
    rule = make_rule(6)

    out_u = np.zeros(u_map.n_dofs)
    out_x = np.zeros(x_map.n_dofs)
    out_lam = np.zeros(lam_map.n_dofs)

    # fluid block: volume terms over the velocity mesh
    geo_f = element_geometry(fluid_half)
    pts = rule.physical_points(fluid_half.corners())  # (n_t, K, 2)
    x, y = pts[..., 0], pts[..., 1]
    u_vals = case.u(x, y)  # (n_t, K, 2)
    grad_u = case.grad_u(x, y)  # (n_t, K, 2, 2)
    sym = 0.5 * (grad_u + np.swapaxes(grad_u, -1, -2))
    w2a = 2.0 * geo_f.area
    lam_basis = rule.points  # (K, 3)
    local = params.alpha * np.einsum("k,nkc,kb->nbc", rule.weights, u_vals, lam_basis)
    local += params.nu * np.einsum("k,nkcx,nbx->nbc", rule.weights, sym, geo_f.grads)
    local *= w2a[:, None, None]
    p_vals = case.p_smooth(x, y)
    p_int = w2a * np.einsum("k,nk->n", rule.weights, p_vals)
    local -= p_int[:, None, None] * geo_f.grads  # -(div v, p): div(phi_b e_c) = dphi_b/dx_c
    np.add.at(out_u, u_map.index[fluid_half.triangles], local)

    # intersection pieces: coupling term and the pressure jump
    solid_ids, fluid_ids, tris = table.flat()
    mapped = xbar.nodal()
    mapped_corners = mapped[solid.triangles][solid_ids]
    geo_s = element_geometry(solid)
    det_f = triangle_areas(mapped[solid.triangles]) / geo_s.area
    piece_area = triangle_areas(tris)
    piece_area_s = piece_area / det_f[solid_ids]

    if case.p_jump != 0.0:
        jump_area = np.zeros(fluid_half.n_triangles)
        np.add.at(jump_area, fluid_ids, piece_area)
        np.add.at(
            out_u,
            u_map.index[fluid_half.triangles],
            -case.p_jump * jump_area[:, None, None] * geo_f.grads,
        )

    ppts = rule.physical_points(tris)  # (N, K, 2)
    lam_s = _pull_back_barycentric(mapped_corners, ppts)
    s_coords = np.einsum("nkb,nbx->nkx", lam_s, solid.corners()[solid_ids])
    lam_f = _pull_back_barycentric(fluid_half.corners()[fluid_ids], ppts)
    lam_exact = case.lam(s_coords[..., 0], s_coords[..., 1])  # (N, K, 2)
    # + c(lambda, v(Xbar)) into velocity rows
    piece_u = 2.0 * piece_area_s[:, None, None] * np.einsum(
        "k,nkc,nkb->nbc", rule.weights, lam_exact, lam_f
    )
    np.add.at(out_u, u_map.index[fluid_half.triangles[fluid_ids]], piece_u)
    # - c(mu, u(Xbar)) into multiplier rows
    u_at_map = case.u(ppts[..., 0], ppts[..., 1])
    piece_lam = -2.0 * piece_area_s[:, None, None] * np.einsum(
        "k,nkc,nkb->nbc", rule.weights, u_at_map, lam_s
    )
    if kind is CouplingKind.C1:
        f_grad = deformation_gradients(solid, mapped)[solid_ids]
        grad_lam = case.grad_lam(s_coords[..., 0], s_coords[..., 1])  # (N, K, 2, 2)
        g_ft = np.einsum("nmk,njm->njk", f_grad, element_geometry(fluid_half).grads[fluid_ids])
        piece_u1 = 2.0 * piece_area_s[:, None, None] * np.einsum(
            "k,nkcx,nbx->nbc", rule.weights, grad_lam, g_ft
        )
        np.add.at(out_u, u_map.index[fluid_half.triangles[fluid_ids]], piece_u1)
        grad_u_map = case.grad_u(ppts[..., 0], ppts[..., 1])  # (N, K, 2, 2)
        grad_comp = np.einsum("nkcm,nmx->nkcx", grad_u_map, f_grad)
        piece_lam -= 2.0 * piece_area_s[:, None, None] * np.einsum(
            "k,nkcx,nbx->nbc", rule.weights, grad_comp, geo_s.grads[solid_ids]
        )
    np.add.at(out_lam, lam_map.index[solid.triangles[solid_ids]], piece_lam)

    # solid blocks: volume terms over the solid mesh
    spts = rule.physical_points(solid.corners())
    s1, s2 = spts[..., 0], spts[..., 1]
    x_vals = case.X(s1, s2)
    grad_x = case.grad_X(s1, s2)
    lam_vals = case.lam(s1, s2)
    w2s = 2.0 * geo_s.area
    loc_x = params.beta * np.einsum("k,nkc,kb->nbc", rule.weights, x_vals, lam_basis)
    loc_x += params.gamma * np.einsum("k,nkcx,nbx->nbc", rule.weights, grad_x, geo_s.grads)
    loc_x -= np.einsum("k,nkc,kb->nbc", rule.weights, lam_vals, lam_basis)
    loc_lam = np.einsum("k,nkc,kb->nbc", rule.weights, x_vals, lam_basis)
    if kind is CouplingKind.C1:
        grad_lam_s = case.grad_lam(s1, s2)
        loc_x -= np.einsum("k,nkcx,nbx->nbc", rule.weights, grad_lam_s, geo_s.grads)
        loc_lam += np.einsum("k,nkcx,nbx->nbc", rule.weights, grad_x, geo_s.grads)
    np.add.at(out_x, x_map.index[solid.triangles], w2s[:, None, None] * loc_x)
    np.add.at(out_lam, lam_map.index[solid.triangles], w2s[:, None, None] * loc_lam)

    return np.concatenate([out_u, out_x, out_lam, np.zeros(p_map.n_dofs)])


def refine_table(table: IntersectionTable) -> IntersectionTable:
    """Split every fan triangle into four congruent children.

    Exact coupling assembly is invariant under this refinement (the
    quadrature is already exact per piece); used as a self-check.
    """
    from .geometry import PolygonPiece

    entries = []
    for pieces in table.entries:
        new_pieces = []
        for piece in pieces:
            t = piece.triangles
            m01 = 0.5 * (t[:, 0] + t[:, 1])
            m12 = 0.5 * (t[:, 1] + t[:, 2])
            m02 = 0.5 * (t[:, 0] + t[:, 2])
            children = np.concatenate(
                [
                    np.stack([t[:, 0], m01, m02], axis=1),
                    np.stack([t[:, 1], m12, m01], axis=1),
                    np.stack([t[:, 2], m02, m12], axis=1),
                    np.stack([m01, m12, m02], axis=1),
                ]
            )
            new_pieces.append(PolygonPiece(piece.fluid_element, piece.polygon, children))
        entries.append(new_pieces)
    return IntersectionTable(entries, table.total_mapped_area, table.mapped_element_area)


def export_matrix_market(matrix: sp.spmatrix, path) -> None:
    """Write a sparse matrix in MatrixMarket coordinate format."""
    from scipy.io import mmwrite

    mmwrite(path, sp.coo_matrix(matrix), symmetry="general")
