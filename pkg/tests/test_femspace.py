import math

import numpy as np
import pytest

from fdfsi.femspace import (
    FieldVector,
    build_dof_map,
    element_geometry,
    eval_field,
    interpolate,
    make_rule,
    p1_eval,
)
from fdfsi.mesh import build_structured_square, refine_midpoint


def monomial_integral(p, q):
    """Exact integral of x^p y^q over the reference triangle."""
    return math.factorial(p) * math.factorial(q) / math.factorial(p + q + 2)


class TestP1Eval:
    def test_vertices(self):
        vals, _ = p1_eval((1.0, 0.0, 0.0))
        assert np.allclose(vals, [1, 0, 0])

    def test_centroid(self):
        vals, grads = p1_eval((1 / 3, 1 / 3, 1 / 3))
        assert np.allclose(vals, 1 / 3)
        assert np.allclose(grads.sum(axis=0), 0.0)

    def test_partition_of_unity(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a, b = rng.random(2)
            if a + b > 1:
                a, b = 1 - a, 1 - b
            vals, _ = p1_eval((1 - a - b, a, b))
            assert vals.sum() == pytest.approx(1.0, abs=1e-14)

    def test_rejects_bad_coordinates(self):
        with pytest.raises(ValueError):
            p1_eval((0.5, 0.5, 0.5))


class TestQuadrature:
    @pytest.mark.parametrize("degree", [1, 2, 3, 6])
    def test_monomial_sweep(self, degree):
        rule = make_rule(degree)
        assert np.all(rule.weights > 0)
        assert rule.weights.sum() == pytest.approx(0.5, abs=1e-15)
        x = rule.points[:, 1]
        y = rule.points[:, 2]
        for p in range(degree + 1):
            for q in range(degree + 1 - p):
                val = float(np.dot(rule.weights, x**p * y**q))
                exact = monomial_integral(p, q)
                assert abs(val - exact) <= 1e-14 * abs(exact), (degree, p, q)

    def test_degree2_quadratics(self):
        rule = make_rule(2)
        x, y, w = rule.points[:, 1], rule.points[:, 2], rule.weights
        assert np.dot(w, x**2) == pytest.approx(1 / 12, rel=1e-14)
        assert np.dot(w, x * y) == pytest.approx(1 / 24, rel=1e-14)
        assert np.dot(w, y**2) == pytest.approx(1 / 12, rel=1e-14)

    def test_degree1_constant(self):
        rule = make_rule(1)
        assert rule.weights.sum() == pytest.approx(0.5, abs=1e-16)

    def test_degree6_sextic(self):
        rule = make_rule(6)
        x = rule.points[:, 1]
        assert float(np.dot(rule.weights, x**6)) == pytest.approx(1 / 56, rel=1e-14)
        assert len(rule.weights) == 12

    def test_unsupported(self):
        with pytest.raises(ValueError):
            make_rule(4)


class TestDofMap:
    def test_velocity_counts(self):
        half = refine_midpoint(build_structured_square(32, (0, 0), (1, 1)))
        dm = build_dof_map(half, "velocity")
        assert dm.n_dofs == 8450
        assert dm.n_constrained == 512

    def test_pressure_counts(self):
        dm = build_dof_map(build_structured_square(32, (0, 0), (1, 1)), "pressure")
        assert dm.n_dofs == 1089
        assert dm.n_constrained == 0

    def test_multiplier_matches_deformation(self):
        mesh = build_structured_square(5, (0, 0), (1, 1))
        assert build_dof_map(mesh, "multiplier").n_dofs == build_dof_map(mesh, "deformation").n_dofs

    def test_bijective_indexing(self):
        mesh = build_structured_square(4, (0, 0), (1, 1))
        dm = build_dof_map(mesh, "velocity")
        assert np.array_equal(np.sort(dm.index.ravel()), np.arange(dm.n_dofs))


class TestInterpolate:
    def test_constant(self):
        mesh = build_structured_square(3, (0, 0), (1, 1))
        dm = build_dof_map(mesh, "pressure")
        vec = interpolate(lambda x, y: np.full_like(x, 2.5), dm, mesh)
        assert np.allclose(vec.values, 2.5)

    def test_linear_reproduced(self):
        mesh = build_structured_square(3, (0, 0), (1, 1))
        dm = build_dof_map(mesh, "deformation")
        vec = interpolate(lambda x, y: np.column_stack([1 + 2 * x + 3 * y, x - y]), dm, mesh)
        rng = np.random.default_rng(1)
        for _ in range(20):
            e = rng.integers(mesh.n_triangles)
            a, b = rng.random(2)
            if a + b > 1:
                a, b = 1 - a, 1 - b
            lam = (1 - a - b, a, b)
            value, grad = eval_field(vec, mesh, int(e), lam)
            x, y = np.asarray(lam) @ mesh.corners()[e]
            assert value[0] == pytest.approx(1 + 2 * x + 3 * y, abs=1e-14)
            assert value[1] == pytest.approx(x - y, abs=1e-14)
            assert np.allclose(grad, [[2, 3], [1, -1]], atol=1e-12)

    def test_interpolation_rate_two(self):
        errs, hs = [], []
        rule = make_rule(6)
        for n in (4, 8, 16, 32):
            mesh = build_structured_square(n, (0, 0), (1, 1))
            dm = build_dof_map(mesh, "pressure")
            vec = interpolate(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), dm, mesh)
            geo = element_geometry(mesh)
            pts = rule.physical_points(mesh.corners())
            exact = np.sin(np.pi * pts[..., 0]) * np.sin(np.pi * pts[..., 1])
            nodal = vec.values[mesh.triangles]
            approx = np.einsum("kb,tb->tk", rule.points, nodal)
            err2 = np.einsum("k,tk->t", rule.weights, (exact - approx) ** 2) * 2 * geo.area
            errs.append(np.sqrt(err2.sum()))
            hs.append(np.sqrt(2) / n)
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.1)


class TestEvalField:
    def test_nodal_values(self):
        mesh = build_structured_square(2, (0, 0), (1, 1))
        dm = build_dof_map(mesh, "pressure")
        vec = FieldVector(np.arange(dm.n_dofs, dtype=float), dm)
        tri = mesh.triangles[3]
        value, _ = eval_field(vec, mesh, 3, (1.0, 0.0, 0.0))
        assert value[0] == tri[0]

    def test_centroid_is_mean(self):
        mesh = build_structured_square(2, (0, 0), (1, 1))
        dm = build_dof_map(mesh, "pressure")
        vec = FieldVector(np.arange(dm.n_dofs, dtype=float), dm)
        value, _ = eval_field(vec, mesh, 1, (1 / 3, 1 / 3, 1 / 3))
        assert value[0] == pytest.approx(mesh.triangles[1].mean(), rel=1e-14)

    def test_rejects_mismatched_vector(self):
        mesh = build_structured_square(2, (0, 0), (1, 1))
        dm = build_dof_map(mesh, "pressure")
        with pytest.raises(ValueError):
            FieldVector(np.zeros(dm.n_dofs + 1), dm)
