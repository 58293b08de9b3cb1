"""Independent brute-force oracles used only by the test suite.

These deliberately avoid the library's clipping/location code paths so
they can serve as cross-checks.
"""

import numpy as np


def points_in_triangle(tri, pts, tol=0.0):
    """Vectorized containment test via barycentric coordinates."""
    d1 = tri[1] - tri[0]
    d2 = tri[2] - tri[0]
    det = d1[0] * d2[1] - d1[1] * d2[0]
    r = pts - tri[0]
    l1 = (r[:, 0] * d2[1] - r[:, 1] * d2[0]) / det
    l2 = (d1[0] * r[:, 1] - d1[1] * r[:, 0]) / det
    return (l1 >= -tol) & (l2 >= -tol) & (1.0 - l1 - l2 >= -tol)


def monte_carlo_intersection_area(tri_a, tri_b, n_samples, seed=0):
    """Estimate |A ∩ B| by uniform sampling of the joint bounding box."""
    rng = np.random.default_rng(seed)
    lo = np.minimum(tri_a.min(axis=0), tri_b.min(axis=0))
    hi = np.maximum(tri_a.max(axis=0), tri_b.max(axis=0))
    box_area = np.prod(hi - lo)
    hits = 0
    chunk = 1_000_000
    remaining = n_samples
    while remaining > 0:
        m = min(chunk, remaining)
        pts = lo + rng.random((m, 2)) * (hi - lo)
        hits += int(np.sum(points_in_triangle(tri_a, pts) & points_in_triangle(tri_b, pts)))
        remaining -= m
    return box_area * hits / n_samples


def _segment_intersections(a0, a1, b0, b1, tol=1e-12):
    r = a1 - a0
    s = b1 - b0
    denom = r[0] * s[1] - r[1] * s[0]
    if abs(denom) < 1e-300:
        return []
    q = b0 - a0
    t = (q[0] * s[1] - q[1] * s[0]) / denom
    u = (q[0] * r[1] - q[1] * r[0]) / denom
    if -tol <= t <= 1 + tol and -tol <= u <= 1 + tol:
        return [a0 + t * r]
    return []


def halfplane_intersection_area(tri_a, tri_b, tol=1e-12):
    """Intersection area by vertex/crossing enumeration plus a convex hull.

    Candidate vertices are the corners of each triangle inside the other
    one and all edge-edge crossing points; the convex intersection is
    their hull, whose area follows from the shoelace formula.
    """
    pts = []
    pts.extend(tri_a[points_in_triangle(tri_b, tri_a, tol=tol)])
    pts.extend(tri_b[points_in_triangle(tri_a, tri_b, tol=tol)])
    for i in range(3):
        for j in range(3):
            pts.extend(
                _segment_intersections(
                    tri_a[i], tri_a[(i + 1) % 3], tri_b[j], tri_b[(j + 1) % 3], tol=tol
                )
            )
    if len(pts) < 3:
        return 0.0
    pts = np.array(pts)
    center = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]))
    pts = pts[order]
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def random_triangle(rng, min_area=1e-3):
    """Random positively oriented triangle in the unit box."""
    while True:
        tri = rng.random((3, 2))
        d1 = tri[1] - tri[0]
        d2 = tri[2] - tri[0]
        area = 0.5 * (d1[0] * d2[1] - d1[1] * d2[0])
        if abs(area) >= min_area:
            return tri if area > 0 else tri[[0, 2, 1]]
