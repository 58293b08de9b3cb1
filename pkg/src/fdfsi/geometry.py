"""Toleranced computational geometry for non-matching mesh coupling.

Everything here runs in plain double precision with relative tolerances
(no exact arithmetic): the coupled formulation downstream is stable no
matter how the meshes intersect, so tiny clipping perturbations are
harmless.  Intersection polygons with area below 1e-14 of the mapped
element are dropped; smaller pieces sit beneath assembly roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .mesh import TriMesh

CLIP_REL_TOL = 1e-14
DROP_REL_TOL = 1e-14
AREA_CONSISTENCY_TOL = 1e-10
LOCATE_TOL = 1e-12


class GeometryError(RuntimeError):
    """A mapped element left the fluid domain or lost area while clipping."""


@dataclass(frozen=True)
class ConvexPolygon:
    """Counterclockwise convex polygon; empty or at least a triangle."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        if 0 < len(v) < 3:
            raise ValueError("a nonempty convex polygon needs at least 3 vertices")

    @property
    def is_empty(self) -> bool:
        return self.vertices.shape[0] == 0

    def area(self) -> float:
        v = self.vertices
        if len(v) < 3:
            return 0.0
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


EMPTY_POLYGON = ConvexPolygon(np.zeros((0, 2)))


def _signed_area(tri: np.ndarray) -> float:
    d1 = tri[1] - tri[0]
    d2 = tri[2] - tri[0]
    return 0.5 * float(d1[0] * d2[1] - d1[1] * d2[0])


def clip_triangles(subject: np.ndarray, clipper: np.ndarray) -> ConvexPolygon:
    """Convex intersection of two triangles by half-plane clipping.

    Sutherland-Hodgman specialized to convex inputs: the subject is cut
    by the three half-planes of the clipper.  Both triangles must be
    positively oriented and nondegenerate.  Runs on plain floats: this
    sits in the hot loop of intersection-table construction.
    """
    s = np.asarray(subject, dtype=float).reshape(3, 2)
    c = np.asarray(clipper, dtype=float).reshape(3, 2)
    sx0, sy0, sx1, sy1, sx2, sy2 = s[0, 0], s[0, 1], s[1, 0], s[1, 1], s[2, 0], s[2, 1]
    cx0, cy0, cx1, cy1, cx2, cy2 = c[0, 0], c[0, 1], c[1, 0], c[1, 1], c[2, 0], c[2, 1]

    scale = max(
        abs(sx1 - sx0), abs(sy1 - sy0), abs(sx2 - sx1), abs(sy2 - sy1),
        abs(sx0 - sx2), abs(sy0 - sy2), abs(cx1 - cx0), abs(cy1 - cy0),
        abs(cx2 - cx1), abs(cy2 - cy1), abs(cx0 - cx2), abs(cy0 - cy2),
    )
    eps = CLIP_REL_TOL * scale * scale
    area_s = 0.5 * ((sx1 - sx0) * (sy2 - sy0) - (sy1 - sy0) * (sx2 - sx0))
    area_c = 0.5 * ((cx1 - cx0) * (cy2 - cy0) - (cy1 - cy0) * (cx2 - cx0))
    if area_s <= eps or area_c <= eps:
        raise ValueError("clip_triangles requires positively oriented, nondegenerate triangles")

    xs = [sx0, sx1, sx2]
    ys = [sy0, sy1, sy2]
    cxs = (cx0, cx1, cx2, cx0)
    cys = (cy0, cy1, cy2, cy0)
    for k in range(3):
        ax, ay = cxs[k], cys[k]
        dx, dy = cxs[k + 1] - ax, cys[k + 1] - ay
        # signed cross: >= -eps counts as inside the left half-plane
        dist = [dx * (py - ay) - dy * (px - ax) for px, py in zip(xs, ys)]
        nxs: list[float] = []
        nys: list[float] = []
        m = len(xs)
        for i in range(m):
            j = i + 1 if i + 1 < m else 0
            di, dj = dist[i], dist[j]
            if di >= -eps:
                nxs.append(xs[i])
                nys.append(ys[i])
                if dj < -eps and di > eps:
                    t = di / (di - dj)
                    nxs.append(xs[i] + t * (xs[j] - xs[i]))
                    nys.append(ys[i] + t * (ys[j] - ys[i]))
            elif dj > eps:
                t = di / (di - dj)
                nxs.append(xs[i] + t * (xs[j] - xs[i]))
                nys.append(ys[i] + t * (ys[j] - ys[i]))
        if len(nxs) < 3:
            return EMPTY_POLYGON
        xs, ys = nxs, nys

    # drop duplicate consecutive vertices
    tol = CLIP_REL_TOL * scale
    kx: list[float] = []
    ky: list[float] = []
    for px, py in zip(xs, ys):
        if not kx or abs(px - kx[-1]) > tol or abs(py - ky[-1]) > tol:
            kx.append(px)
            ky.append(py)
    if len(kx) >= 2 and abs(kx[0] - kx[-1]) <= tol and abs(ky[0] - ky[-1]) <= tol:
        kx.pop()
        ky.pop()
    if len(kx) < 3:
        return EMPTY_POLYGON
    return ConvexPolygon(np.column_stack([kx, ky]))


def fan_triangulate(poly: ConvexPolygon) -> np.ndarray:
    """Split a convex polygon into triangles fanned from vertex 0.

    Returns coordinates with shape (n_vertices - 2, 3, 2); empty input
    gives an empty array.
    """
    v = poly.vertices
    if len(v) < 3:
        return np.zeros((0, 3, 2))
    m = len(v) - 2
    tris = np.empty((m, 3, 2))
    tris[:, 0] = v[0]
    tris[:, 1] = v[1 : m + 1]
    tris[:, 2] = v[2 : m + 2]
    return tris


def triangle_areas(tris: np.ndarray) -> np.ndarray:
    """Signed areas of a stack of triangles with shape (..., 3, 2)."""
    d1 = tris[..., 1, :] - tris[..., 0, :]
    d2 = tris[..., 2, :] - tris[..., 0, :]
    return 0.5 * (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0])


@dataclass(frozen=True)
class BackgroundGrid:
    """Uniform bucket grid over a fluid mesh for candidate lookup.

    Every fluid triangle is registered in every bucket its bounding box
    touches, so a bucket query can never miss an overlapping element.
    """

    lo: np.ndarray
    hi: np.ndarray
    shape: tuple[int, int]
    cell: np.ndarray
    buckets: list[np.ndarray]

    def _index(self, p, clamp: bool) -> tuple[int, int] | None:
        ij = np.floor((np.asarray(p, dtype=float) - self.lo) / self.cell).astype(int)
        if clamp:
            ij = np.clip(ij, 0, np.array(self.shape) - 1)
        elif np.any(ij < 0) or ij[0] >= self.shape[0] or ij[1] >= self.shape[1]:
            return None
        return int(ij[0]), int(ij[1])

    def bucket(self, p) -> np.ndarray:
        """Candidate fluid elements for the bucket containing p."""
        i, j = self._index(p, clamp=True)
        return self.buckets[i * self.shape[1] + j]

    def candidates_in_box(self, lo, hi) -> np.ndarray:
        """Candidate fluid elements for an axis-aligned box."""
        i0, j0 = self._index(lo, clamp=True)
        i1, j1 = self._index(hi, clamp=True)
        found = [
            self.buckets[i * self.shape[1] + j]
            for i in range(i0, i1 + 1)
            for j in range(j0, j1 + 1)
        ]
        if len(found) == 1:
            return found[0]
        return np.unique(np.concatenate(found))


def build_background_grid(fluid: TriMesh, bucket_size: float | None = None) -> BackgroundGrid:
    """Bucket the fluid triangles; bucket size defaults to the mesh size."""
    corners = fluid.corners()
    lo = fluid.vertices.min(axis=0)
    hi = fluid.vertices.max(axis=0)
    if bucket_size is None:
        from .mesh import mesh_size

        bucket_size = mesh_size(fluid)[0]
    extent = np.maximum(hi - lo, 1e-300)
    shape = (
        max(1, int(np.ceil(extent[0] / bucket_size))),
        max(1, int(np.ceil(extent[1] / bucket_size))),
    )
    cell = extent / np.array(shape)

    tmp: list[list[int]] = [[] for _ in range(shape[0] * shape[1])]
    blo = corners.min(axis=1)
    bhi = corners.max(axis=1)
    ilo = np.clip(np.floor((blo - lo) / cell).astype(int), 0, np.array(shape) - 1)
    ihi = np.clip(np.floor((bhi - lo) / cell).astype(int), 0, np.array(shape) - 1)
    for e in range(fluid.n_triangles):
        for i in range(ilo[e, 0], ihi[e, 0] + 1):
            for j in range(ilo[e, 1], ihi[e, 1] + 1):
                tmp[i * shape[1] + j].append(e)
    buckets = [np.array(b, dtype=np.int64) for b in tmp]
    return BackgroundGrid(lo, hi, shape, cell, buckets)


def barycentric_coordinates(tri: np.ndarray, p) -> np.ndarray:
    """Barycentric coordinates of p in a triangle (may be negative)."""
    d1 = tri[1] - tri[0]
    d2 = tri[2] - tri[0]
    det = d1[0] * d2[1] - d1[1] * d2[0]
    r = np.asarray(p, dtype=float) - tri[0]
    l1 = (r[0] * d2[1] - r[1] * d2[0]) / det
    l2 = (d1[0] * r[1] - d1[1] * r[0]) / det
    return np.array([1.0 - l1 - l2, l1, l2])


def locate_point(grid: BackgroundGrid, fluid: TriMesh, p) -> int | None:
    """Find a fluid element containing p, or None if p is outside.

    Containment is toleranced: barycentric coordinates >= -1e-12, or
    absolute distance to the element at most 1e-12.  On shared edges or
    vertices any incident element may be returned.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < grid.lo - LOCATE_TOL) or np.any(p > grid.hi + LOCATE_TOL):
        return None
    corners = fluid.corners()
    best = None
    best_dist = -np.inf
    for e in grid.bucket(p):
        tri = corners[e]
        lam = barycentric_coordinates(tri, p)
        worst = lam.min()
        if worst >= -LOCATE_TOL:
            return int(e)
        if worst > best_dist:
            # convert the worst barycentric deficit to a physical distance
            k = int(np.argmin(lam))
            edge = tri[(k + 2) % 3] - tri[(k + 1) % 3]
            two_area = 2.0 * abs(_signed_area(tri))
            dist = worst * two_area / max(np.linalg.norm(edge), 1e-300)
            if dist >= -LOCATE_TOL:
                return int(e)
            best_dist = worst
            best = int(e)
    return None


class PolygonPiece(NamedTuple):
    """One clipped overlap: fluid element, polygon, and its fan triangles."""

    fluid_element: int
    polygon: ConvexPolygon
    triangles: np.ndarray


@dataclass
class IntersectionTable:
    """Clipped overlap of a mapped solid mesh with the fluid mesh.

    ``entries[e]`` lists the pieces of mapped solid element ``e``; their
    areas sum to the mapped element area (that partition property is the
    backbone of exact coupling assembly).  ``flat()`` exposes all fan
    triangles at once for vectorized quadrature.  ``mapped_vertices``
    records the configuration the table was built for, so stale tables
    can be rejected.
    """

    entries: list[list[PolygonPiece]]
    total_mapped_area: np.ndarray
    mapped_element_area: np.ndarray
    mapped_vertices: np.ndarray | None = None
    _flat: tuple | None = field(default=None, repr=False)

    @property
    def n_solid_elements(self) -> int:
        return len(self.entries)

    def flat(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All fan triangles as (solid_element, fluid_element, coords)."""
        if self._flat is None:
            solid_ids, fluid_ids, tris = [], [], []
            for e, pieces in enumerate(self.entries):
                for piece in pieces:
                    m = len(piece.triangles)
                    solid_ids.extend([e] * m)
                    fluid_ids.extend([piece.fluid_element] * m)
                    tris.append(piece.triangles)
            coords = np.concatenate(tris) if tris else np.zeros((0, 3, 2))
            self._flat = (
                np.array(solid_ids, dtype=np.int64),
                np.array(fluid_ids, dtype=np.int64),
                coords,
            )
        return self._flat

    def min_piece_area(self) -> float:
        areas = [p.polygon.area() for pieces in self.entries for p in pieces]
        return min(areas) if areas else 0.0


def build_intersection_table(
    solid: TriMesh,
    mapped_vertices: np.ndarray,
    fluid: TriMesh,
    grid: BackgroundGrid,
) -> IntersectionTable:
    """Clip every mapped solid element against the fluid mesh.

    ``mapped_vertices`` holds the images of the solid mesh vertices
    under the piecewise-affine configuration map, so each mapped element
    is the triangle of its mapped corners.  Pieces with area below
    1e-14 of the mapped element are dropped.  If the collected pieces
    miss more than 1e-10 of a mapped element's area (the element escaped
    the fluid domain, typically), a GeometryError names it.
    """
    mapped_vertices = np.asarray(mapped_vertices, dtype=float)
    fluid_corners = fluid.corners()
    entries: list[list[PolygonPiece]] = []
    totals = np.zeros(solid.n_triangles)
    mapped_areas = np.zeros(solid.n_triangles)

    for e in range(solid.n_triangles):
        tri = mapped_vertices[solid.triangles[e]]
        area = _signed_area(tri)
        if area <= 0.0:
            raise GeometryError(f"mapped solid element {e} is inverted or degenerate")
        mapped_areas[e] = area
        drop = DROP_REL_TOL * area
        pieces: list[PolygonPiece] = []
        total = 0.0
        cand = grid.candidates_in_box(tri.min(axis=0), tri.max(axis=0))
        for f in cand:
            poly = clip_triangles(tri, fluid_corners[f])
            a = poly.area()
            if a < drop:
                continue
            pieces.append(PolygonPiece(int(f), poly, fan_triangulate(poly)))
            total += a
        if abs(total - area) > AREA_CONSISTENCY_TOL * area:
            raise GeometryError(
                f"mapped solid element {e} escapes the fluid domain: "
                f"covered {total:.17g} of {area:.17g}"
            )
        entries.append(pieces)
        totals[e] = total

    return IntersectionTable(entries, totals, mapped_areas, mapped_vertices.copy())


def dump_table(table: IntersectionTable, path) -> None:
    """Write one line per polygon: solid and fluid ids, area, vertices."""
    with open(path, "w") as f:
        for e, pieces in enumerate(table.entries):
            for piece in pieces:
                coords = " ".join(f"{c:.17g}" for c in piece.polygon.vertices.ravel())
                f.write(f"{e} {piece.fluid_element} {piece.polygon.area():.17g} {coords}\n")
