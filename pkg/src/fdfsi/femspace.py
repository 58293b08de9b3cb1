"""P1 reference elements, triangle quadrature, and degree-of-freedom maps.

Four fields share the same machinery: vector velocity on the refined
fluid mesh, scalar pressure on the coarse fluid mesh, and vector
deformation / multiplier on the solid mesh.  Everything is piecewise
linear; quadrature rules carry a certified polynomial exactness degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import TriMesh

# reference triangle (0,0), (1,0), (0,1); barycentric (l0, l1, l2)
REF_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
REF_GRADS.setflags(write=False)

N_COMPONENTS = {"velocity": 2, "pressure": 1, "deformation": 2, "multiplier": 2}


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle.

    ``points`` are barycentric triples; ``weights`` include the
    reference area, so they sum to 1/2 and a physical integral is
    2*|T| * sum(w_k f(x_k)).
    """

    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def __post_init__(self):
        p = np.ascontiguousarray(self.points, dtype=float)
        w = np.ascontiguousarray(self.weights, dtype=float)
        p.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    def physical_points(self, corners: np.ndarray) -> np.ndarray:
        """Map rule points into triangles given as (..., 3, 2) corners."""
        return np.einsum("kb,...bx->...kx", self.points, corners)


def p1_eval(barycentric) -> tuple[np.ndarray, np.ndarray]:
    """Nodal P1 basis values and reference gradients at a point.

    The values are the barycentric coordinates themselves; gradients are
    constant on the reference triangle.
    """
    lam = np.asarray(barycentric, dtype=float)
    if abs(lam.sum() - 1.0) > 1e-12:
        raise ValueError("barycentric coordinates must sum to 1")
    return lam, REF_GRADS


# 12-point degree-6 rule: symmetric orbits, coefficients solved from the
# moment equations to full double precision.
_D6_A1 = 0.063089014491502228
_D6_A2 = 0.249286745170910421
_D6_A3 = 0.310352451033784405
_D6_B3 = 0.053145049844816947
_D6_W1 = 0.025422453185103408
_D6_W2 = 0.058393137863189683
_D6_W3 = 0.041425537809186788


def _orbit3(a: float, w: float):
    b = 1.0 - 2.0 * a
    return [(b, a, a), (a, b, a), (a, a, b)], [w] * 3


def _orbit6(a: float, b: float, w: float):
    c = 1.0 - a - b
    pts = [(c, a, b), (c, b, a), (a, c, b), (b, c, a), (a, b, c), (b, a, c)]
    return pts, [w] * 6


@lru_cache(maxsize=None)
def make_rule(exact_degree: int) -> QuadratureRule:
    """Quadrature rule of certified exactness: degree 1, 2, 3 or 6.

    Degree 1 is the centroid rule, degree 2 the three edge midpoints,
    degree 3 a positive 4-point conical product (Gauss-Legendre x
    Gauss-Jacobi), degree 6 the 12-point symmetric rule.
    """
    if exact_degree == 1:
        pts = [(1 / 3, 1 / 3, 1 / 3)]
        wts = [0.5]
    elif exact_degree == 2:
        pts = [(0.5, 0.5, 0.0), (0.0, 0.5, 0.5), (0.5, 0.0, 0.5)]
        wts = [1 / 6] * 3
    elif exact_degree == 3:
        from scipy.special import roots_jacobi, roots_legendre

        xu, wu = roots_legendre(2)
        xu, wu = (xu + 1.0) / 2.0, wu / 2.0
        xv, wv = roots_jacobi(2, 1, 0)
        xv, wv = (xv + 1.0) / 2.0, wv / 4.0
        pts, wts = [], []
        for u, a in zip(xu, wu):
            for v, b in zip(xv, wv):
                x, y = (1.0 - v) * u, v
                pts.append((1.0 - x - y, x, y))
                wts.append(a * b)
    elif exact_degree == 6:
        pts, wts = [], []
        for orbit_pts, orbit_wts in (
            _orbit3(_D6_A1, _D6_W1),
            _orbit3(_D6_A2, _D6_W2),
            _orbit6(_D6_A3, _D6_B3, _D6_W3),
        ):
            pts.extend(orbit_pts)
            wts.extend(orbit_wts)
    else:
        raise ValueError(f"unsupported quadrature exactness degree {exact_degree}")
    return QuadratureRule(np.array(pts), np.array(wts), exact_degree)


@dataclass(frozen=True)
class DofMap:
    """Global indices for one field: (vertex, component) -> dof.

    Indices are dense and interleaved by component.  Velocity dofs at
    boundary vertices of the (refined) fluid mesh are flagged as
    Dirichlet-constrained; no other field carries constraints.
    """

    kind: str
    n_components: int
    index: np.ndarray
    constrained: np.ndarray

    @property
    def n_dofs(self) -> int:
        return self.index.size

    @property
    def n_constrained(self) -> int:
        return int(self.constrained.sum())

    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.constrained)


def build_dof_map(mesh: TriMesh, kind: str) -> DofMap:
    if kind not in N_COMPONENTS:
        raise ValueError(f"unknown field kind {kind!r}")
    ncomp = N_COMPONENTS[kind]
    index = np.arange(mesh.n_vertices * ncomp, dtype=np.int64).reshape(mesh.n_vertices, ncomp)
    constrained = np.zeros(index.size, dtype=bool)
    if kind == "velocity":
        constrained[index[mesh.boundary_vertex].ravel()] = True
    index.setflags(write=False)
    constrained.setflags(write=False)
    return DofMap(kind, ncomp, index, constrained)


@dataclass
class FieldVector:
    """Coefficients of a finite element field, aligned with its DofMap."""

    values: np.ndarray
    dof_map: DofMap

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.dof_map.n_dofs,):
            raise ValueError("coefficient vector does not match the dof map")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field coefficients must be finite")

    def nodal(self) -> np.ndarray:
        """Coefficients reshaped to (n_vertices, n_components)."""
        return self.values.reshape(-1, self.dof_map.n_components)

    def copy(self) -> "FieldVector":
        return FieldVector(self.values.copy(), self.dof_map)


def interpolate(f, dof_map: DofMap, mesh: TriMesh) -> FieldVector:
    """Nodal interpolant of a closed-form function.

    ``f(x, y)`` must be vectorized, returning shape (n,) for scalar
    fields or (n, 2) for vector fields.
    """
    vals = np.asarray(f(mesh.vertices[:, 0], mesh.vertices[:, 1]), dtype=float)
    ncomp = dof_map.n_components
    if ncomp == 1:
        vals = vals.reshape(-1)
        if vals.shape != (mesh.n_vertices,):
            raise ValueError("scalar interpolation target has wrong shape")
        return FieldVector(vals.copy(), dof_map)
    if vals.shape != (mesh.n_vertices, ncomp):
        raise ValueError("vector interpolation target has wrong shape")
    return FieldVector(vals.reshape(-1).copy(), dof_map)


@dataclass(frozen=True)
class ElementGeometry:
    """Per-element affine data: Jacobians, areas, physical P1 gradients."""

    jac: np.ndarray
    det: np.ndarray
    inv_jac_t: np.ndarray
    area: np.ndarray
    grads: np.ndarray


def element_geometry(mesh: TriMesh) -> ElementGeometry:
    c = mesh.corners()
    jac = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]], axis=-1)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_jac_t = np.empty_like(jac)
    inv_jac_t[:, 0, 0] = jac[:, 1, 1]
    inv_jac_t[:, 0, 1] = -jac[:, 1, 0]
    inv_jac_t[:, 1, 0] = -jac[:, 0, 1]
    inv_jac_t[:, 1, 1] = jac[:, 0, 0]
    inv_jac_t /= det[:, None, None]
    grads = np.einsum("txy,by->tbx", inv_jac_t, REF_GRADS)
    return ElementGeometry(jac, det, inv_jac_t, 0.5 * det, grads)


def eval_field(vec: FieldVector, mesh: TriMesh, element: int, barycentric):
    """Value and physical gradient of a P1 field inside one element.

    Returns arrays of shape (n_components,) and (n_components, 2).
    """
    lam, _ = p1_eval(barycentric)
    nodal = vec.nodal()[mesh.triangles[element]]  # (3, ncomp)
    geo = _cached_geometry(mesh)
    value = lam @ nodal
    grad = np.einsum("bc,bx->cx", nodal, geo.grads[element])
    return value, grad


# eval_field is called point-by-point in tests and error probes; cache the
# per-mesh geometry since meshes are immutable.
_GEOMETRY_CACHE: dict[int, tuple[TriMesh, ElementGeometry]] = {}


def _cached_geometry(mesh: TriMesh) -> ElementGeometry:
    hit = _GEOMETRY_CACHE.get(id(mesh))
    if hit is not None and hit[0] is mesh:
        return hit[1]
    geo = element_geometry(mesh)
    _GEOMETRY_CACHE[id(mesh)] = (mesh, geo)
    return geo
