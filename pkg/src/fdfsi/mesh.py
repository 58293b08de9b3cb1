"""Triangular mesh generation, refinement, and interrogation.

All meshes are plain triangulations with counterclockwise elements.
Generators cover the geometries used by the experiment drivers: a
structured box, a disk, a flower-shaped domain, and a circular annulus.
The curved domains are built from analytic parametrizations (concentric
rings, polar grids) so every run is reproducible without an external
mesh generator; the constructions are quasi-uniform.

Meshes are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

GEOM_TOL = 1e-12


class GeometryKind(Enum):
    UNIT_SQUARE_BOX = "unit-square-box"
    SQUARE_CONTAINER_4X4 = "square-container-4x4"
    DISK = "disk"
    FLOWER = "flower"
    ANNULUS = "annulus"


@dataclass(frozen=True)
class GeometryDescriptor:
    """Analytic description of a domain handled by the generators."""

    kind: GeometryKind
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    inner_radius: float = 0.0
    outer_radius: float = 0.0
    amplitude: float = 0.0
    petals: int = 0
    lo: tuple[float, float] = (0.0, 0.0)
    hi: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.kind is GeometryKind.DISK and self.radius <= 0.0:
            raise ValueError("disk radius must be positive")
        if self.kind is GeometryKind.ANNULUS:
            if not 0.0 < self.inner_radius < self.outer_radius:
                raise ValueError("annulus requires 0 < inner radius < outer radius")
        if self.kind is GeometryKind.FLOWER:
            if self.radius <= 0.0:
                raise ValueError("flower inscribed radius must be positive")
            if not 0.0 <= self.amplitude < 1.0:
                raise ValueError("flower amplitude must lie in [0, 1)")


@dataclass(frozen=True)
class TriMesh:
    """2D triangulation with boundary flags and optional refinement links.

    Attributes
    ----------
    vertices : (n_v, 2) float array
    triangles : (n_t, 3) int array
        Vertex indices, counterclockwise.
    boundary_vertex : (n_v,) bool array
        True exactly for vertices on the domain boundary.
    parent_triangle : (n_t,) int array or None
        For a midpoint-refined mesh, the coarse triangle each child
        came from.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_vertex: np.ndarray
    parent_triangle: np.ndarray | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        b = np.ascontiguousarray(self.boundary_vertex, dtype=bool)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError("vertices must have shape (n_v, 2)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise ValueError("triangles must have shape (n_t, 3)")
        if b.shape != (v.shape[0],):
            raise ValueError("boundary_vertex must have one flag per vertex")
        if t.size and (t.min() < 0 or t.max() >= v.shape[0]):
            raise ValueError("triangle refers to a vertex outside the mesh")
        for a in (v, t, b):
            a.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "boundary_vertex", b)
        if self.parent_triangle is not None:
            p = np.ascontiguousarray(self.parent_triangle, dtype=np.int64)
            p.setflags(write=False)
            object.__setattr__(self, "parent_triangle", p)
        if np.any(self.signed_areas() <= 0.0):
            raise ValueError("all triangles must be positively oriented")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def corners(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape (n_t, 3, 2)."""
        return self.vertices[self.triangles]

    def signed_areas(self) -> np.ndarray:
        c = self.corners()
        d1 = c[:, 1] - c[:, 0]
        d2 = c[:, 2] - c[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def total_area(self) -> float:
        return float(self.signed_areas().sum())

    def edge_lengths(self) -> np.ndarray:
        """Edge lengths per triangle, shape (n_t, 3)."""
        c = self.corners()
        out = np.empty((self.n_triangles, 3))
        for k in range(3):
            out[:, k] = np.linalg.norm(c[:, (k + 1) % 3] - c[:, k], axis=1)
        return out


def mesh_size(mesh: TriMesh) -> tuple[float, float]:
    """Return (h_max, h_min), the extreme triangle diameters."""
    diam = mesh.edge_lengths().max(axis=1)
    return float(diam.max()), float(diam.min())


def quasi_uniformity_ratio(mesh: TriMesh) -> float:
    h_max, h_min = mesh_size(mesh)
    return h_max / h_min


def build_structured_square(n: int, lo=(0.0, 0.0), hi=(1.0, 1.0)) -> TriMesh:
    """Uniform triangulation of a box: n x n cells, each split in two.

    Every cell is split along the lower-left to upper-right diagonal,
    giving 2*n**2 congruent triangles and (n+1)**2 vertices.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if not np.all(hi > lo):
        raise ValueError("hi must strictly dominate lo componentwise")

    xs = np.linspace(lo[0], hi[0], n + 1)
    ys = np.linspace(lo[1], hi[1], n + 1)
    xg, yg = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([xg.ravel(), yg.ravel()])

    def vid(ix, iy):
        return iy * (n + 1) + ix

    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    ix = ix.ravel()
    iy = iy.ravel()
    v00 = vid(ix, iy)
    v10 = vid(ix + 1, iy)
    v01 = vid(ix, iy + 1)
    v11 = vid(ix + 1, iy + 1)
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    on_edge = (
        (np.abs(vertices[:, 0] - lo[0]) <= GEOM_TOL)
        | (np.abs(vertices[:, 0] - hi[0]) <= GEOM_TOL)
        | (np.abs(vertices[:, 1] - lo[1]) <= GEOM_TOL)
        | (np.abs(vertices[:, 1] - hi[1]) <= GEOM_TOL)
    )
    return TriMesh(vertices, triangles, on_edge)


def refine_midpoint(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four by connecting edge midpoints.

    Shared midpoints are deduplicated, so the refined mesh has
    n_v + n_edges vertices and 4*n_t triangles.  Children record their
    parent; a midpoint is flagged as boundary exactly when its edge
    belongs to a single triangle.
    """
    t = mesh.triangles
    n_v = mesh.n_vertices

    edges = {}
    edge_count = {}
    for tri in t:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(a), int(b)) if a < b else (int(b), int(a))
            edge_count[key] = edge_count.get(key, 0) + 1
            if key not in edges:
                edges[key] = n_v + len(edges)

    new_vertices = np.empty((n_v + len(edges), 2))
    new_vertices[:n_v] = mesh.vertices
    new_boundary = np.zeros(n_v + len(edges), dtype=bool)
    new_boundary[:n_v] = mesh.boundary_vertex
    for (a, b), idx in edges.items():
        new_vertices[idx] = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
        new_boundary[idx] = edge_count[(a, b)] == 1

    children = np.empty((4 * mesh.n_triangles, 3), dtype=np.int64)
    parents = np.repeat(np.arange(mesh.n_triangles, dtype=np.int64), 4)
    for e, tri in enumerate(t):
        v0, v1, v2 = (int(v) for v in tri)
        m01 = edges[(v0, v1) if v0 < v1 else (v1, v0)]
        m12 = edges[(v1, v2) if v1 < v2 else (v2, v1)]
        m02 = edges[(v0, v2) if v0 < v2 else (v2, v0)]
        children[4 * e + 0] = (v0, m01, m02)
        children[4 * e + 1] = (v1, m12, m01)
        children[4 * e + 2] = (v2, m02, m12)
        children[4 * e + 3] = (m01, m12, m02)

    return TriMesh(new_vertices, children, new_boundary, parent_triangle=parents)


def _ring_counts(n_rings: int) -> list[int]:
    # ring j carries 6j vertices; ring 0 is the single center point
    return [max(1, 6 * j) for j in range(n_rings + 1)]


def _band_triangles(inner: np.ndarray, outer: np.ndarray) -> list[tuple[int, int, int]]:
    """Zig-zag triangulation between two concentric vertex rings.

    Both rings are ordered counterclockwise starting at angle 0.  A
    degenerate inner ring of one vertex produces a fan.
    """
    ni, no = len(inner), len(outer)
    tris = []
    if ni == 1:
        c = int(inner[0])
        for k in range(no):
            tris.append((int(outer[k]), int(outer[(k + 1) % no]), c))
        return tris
    i = o = 0
    while i < ni or o < no:
        next_inner = (i + 1) / ni
        next_outer = (o + 1) / no
        if o < no and (i == ni or next_outer <= next_inner):
            tris.append((int(outer[o % no]), int(outer[(o + 1) % no]), int(inner[i % ni])))
            o += 1
        else:
            tris.append((int(outer[o % no]), int(inner[(i + 1) % ni]), int(inner[i % ni])))
            i += 1
    return tris


def _concentric_unit_mesh(n_rings: int):
    """Ring vertices (radius, angle) of a quasi-uniform unit-disk mesh."""
    counts = _ring_counts(n_rings)
    radii = []
    angles = []
    ring_slices = []
    start = 0
    for j, cnt in enumerate(counts):
        theta = 2.0 * np.pi * np.arange(cnt) / cnt
        radii.append(np.full(cnt, j / n_rings))
        angles.append(theta)
        ring_slices.append(np.arange(start, start + cnt))
        start += cnt
    triangles = []
    for j in range(1, n_rings + 1):
        triangles.extend(_band_triangles(ring_slices[j - 1], ring_slices[j]))
    return np.concatenate(radii), np.concatenate(angles), np.array(triangles, dtype=np.int64), ring_slices[-1]


def build_disk_mesh(center=(0.0, 0.0), radius: float = 1.0, level: int = 0) -> TriMesh:
    """Quasi-uniform disk triangulation from concentric rings.

    Level ``l`` uses ``2**(l+1)`` rings; each level roughly halves the
    mesh size.  Boundary vertices sit exactly on the circle.
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    if level < 0:
        raise ValueError("level must be nonnegative")
    n_rings = 2 ** (level + 1)
    rho, theta, triangles, boundary_ids = _concentric_unit_mesh(n_rings)
    vertices = np.column_stack(
        [center[0] + radius * rho * np.cos(theta), center[1] + radius * rho * np.sin(theta)]
    )
    boundary = np.zeros(len(rho), dtype=bool)
    boundary[boundary_ids] = True
    return TriMesh(vertices, triangles, boundary)


def flower_radius(theta, r0: float, amplitude: float, petals: int):
    """Boundary radius of the flower: minimum r0 (the inscribed circle)."""
    return r0 * (1.0 + 0.5 * amplitude * (1.0 + np.cos(petals * theta)))


def build_flower_mesh(
    center=(0.0, 0.0),
    r0: float = 0.25,
    amplitude: float = 0.6,
    petals: int = 5,
    level: int = 0,
) -> TriMesh:
    """Triangulation of the flower-shaped domain with inscribed radius r0.

    The boundary r(theta) = r0*(1 + amplitude*(1 + cos(petals*theta))/2)
    is sampled at equal arclength; the interior is filled with a
    hexagonal lattice and triangulated with Delaunay (a ring mapping
    would lose quasi-uniformity in the petal valleys).  Boundary
    vertices lie exactly on the analytic curve.
    """
    from scipy.spatial import Delaunay

    if not 0.0 <= amplitude < 1.0:
        raise ValueError("amplitude must lie in [0, 1)")
    if amplitude > 0.0 and petals < 3:
        raise ValueError("petals must be at least 3")
    if level < 0:
        raise ValueError("level must be nonnegative")

    def radius(theta):
        return flower_radius(theta, r0, amplitude, petals)

    def dradius(theta):
        return -0.5 * r0 * amplitude * petals * np.sin(petals * theta)

    n = 2 ** (level + 1)
    r_mean = r0 * (1.0 + 0.5 * amplitude)
    target_h = 1.05 * r_mean * np.pi / (3 * n)

    # boundary samples, equally spaced in arclength
    t_dense = np.linspace(0.0, 2.0 * np.pi, 20000)
    ds = np.sqrt(radius(t_dense) ** 2 + dradius(t_dense) ** 2)
    arclen = np.concatenate([[0.0], np.cumsum(0.5 * (ds[1:] + ds[:-1]) * np.diff(t_dense))])
    total = arclen[-1]
    n_bnd = max(12, int(round(total / target_h)))
    theta_b = np.interp(np.arange(n_bnd) * total / n_bnd, arclen, t_dense)
    bnd = np.column_stack([radius(theta_b) * np.cos(theta_b), radius(theta_b) * np.sin(theta_b)])

    # hexagonal interior lattice, kept clear of the boundary
    dy = target_h * np.sqrt(3.0) / 2.0
    r_max = r0 * (1.0 + amplitude)
    interior = []
    n_rows = int(np.ceil(r_max / dy)) + 1
    n_cols = int(np.ceil(r_max / target_h)) + 1
    for j in range(-n_rows, n_rows + 1):
        y = j * dy
        offset = 0.5 * target_h if j % 2 else 0.0
        for i in range(-n_cols, n_cols + 1):
            x = i * target_h + offset
            rho = np.hypot(x, y)
            theta = np.arctan2(y, x)
            r = radius(theta)
            dist = (r - rho) * r / np.sqrt(r**2 + dradius(theta) ** 2)
            if dist > 0.55 * target_h:
                interior.append((x, y))
    points = np.vstack([bnd, np.asarray(interior).reshape(-1, 2)])

    tris = Delaunay(points).simplices
    centroid = points[tris].mean(axis=1)
    inside = np.hypot(centroid[:, 0], centroid[:, 1]) < radius(
        np.arctan2(centroid[:, 1], centroid[:, 0])
    )
    tris = tris[inside]
    d1 = points[tris[:, 1]] - points[tris[:, 0]]
    d2 = points[tris[:, 2]] - points[tris[:, 0]]
    flipped = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0.0
    tris[flipped] = tris[flipped][:, [0, 2, 1]]

    used = np.unique(tris)
    remap = -np.ones(points.shape[0], dtype=np.int64)
    remap[used] = np.arange(used.size)
    vertices = points[used] + np.asarray(center, dtype=float)
    boundary = np.zeros(used.size, dtype=bool)
    kept_bnd = remap[:n_bnd]
    boundary[kept_bnd[kept_bnd >= 0]] = True
    return TriMesh(vertices, remap[tris], boundary)


def build_annulus_mesh(
    center=(0.0, 0.0),
    r_in: float = 0.125,
    r_out: float = 0.25,
    level: int = 0,
    n_angular: int | None = None,
    n_radial: int | None = None,
) -> TriMesh:
    """Structured polar triangulation of an annulus.

    Level ``l`` uses ``16 * 2**l`` angular by ``2 * 2**l`` radial cells
    (2 triangles each); explicit counts may override the level, which
    lets callers match a prescribed solid/fluid mesh-size ratio.  Both
    circles are resolved exactly by the vertex rings.
    """
    if not 0.0 < r_in < r_out:
        raise ValueError("annulus requires 0 < r_in < r_out")
    if level < 0:
        raise ValueError("level must be nonnegative")
    na = n_angular if n_angular is not None else 16 * 2**level
    nr = n_radial if n_radial is not None else 2 * 2**level
    if na < 3 or nr < 1:
        raise ValueError("need at least 3 angular and 1 radial subdivisions")

    theta = 2.0 * np.pi * np.arange(na) / na
    radii = np.linspace(r_in, r_out, nr + 1)
    verts = []
    for r in radii:
        verts.append(np.column_stack([center[0] + r * np.cos(theta), center[1] + r * np.sin(theta)]))
    vertices = np.vstack(verts)

    def vid(j, k):
        return j * na + (k % na)

    triangles = []
    for j in range(nr):
        for k in range(na):
            a = vid(j, k)
            b = vid(j, k + 1)
            c = vid(j + 1, k + 1)
            d = vid(j + 1, k)
            triangles.append((a, d, c))
            triangles.append((a, c, b))
    triangles = np.array(triangles, dtype=np.int64)

    boundary = np.zeros(vertices.shape[0], dtype=bool)
    boundary[:na] = True
    boundary[nr * na :] = True
    return TriMesh(vertices, triangles, boundary)


def save_mesh(mesh: TriMesh, path) -> None:
    """Dump a mesh as plain text: header "nv nt", vertex and triangle lines."""
    with open(path, "w") as f:
        f.write(f"{mesh.n_vertices} {mesh.n_triangles}\n")
        for v, flag in zip(mesh.vertices, mesh.boundary_vertex):
            f.write(f"{v[0]:.17g} {v[1]:.17g} {int(flag)}\n")
        for tri in mesh.triangles:
            f.write(f"{tri[0]} {tri[1]} {tri[2]}\n")
