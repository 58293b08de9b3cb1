import numpy as np
import pytest
from scipy.integrate import dblquad

from fdfsi.assembly import deformation_gradients
from fdfsi.cases import annulus_case, disk_case, flower_case, get_case, registry, square_case
from fdfsi.femspace import build_dof_map, interpolate


class TestRegistry:
    def test_four_cases(self):
        cases = registry()
        assert [c.name for c in cases] == ["square", "disk", "flower", "annulus"]

    def test_parameters(self):
        by_name = {c.name: c for c in registry()}
        for name in ("square", "disk", "flower"):
            p = by_name[name].params
            assert (p.alpha, p.beta, p.gamma) == (0.0, 0.0, 1.0)
        p = by_name["annulus"].params
        assert (p.alpha, p.beta, p.gamma) == (100.0, 200.0, 0.03)
        assert all(c.params.nu == 1.0 for c in registry())

    def test_get_case(self):
        assert get_case("disk").name == "disk"
        assert get_case("square", sigma=1e-3).shift == 1e-3
        with pytest.raises(ValueError):
            get_case("torus")
        with pytest.raises(ValueError):
            get_case("disk", sigma=1e-3)

    @pytest.mark.parametrize("case", registry(), ids=lambda c: c.name)
    def test_velocity_divergence_free(self, case):
        rng = np.random.default_rng(42)
        lo = np.asarray(case.fluid_lo)
        hi = np.asarray(case.fluid_hi)
        pts = lo + rng.random((1000, 2)) * (hi - lo)
        grad = case.grad_u(pts[:, 0], pts[:, 1])
        div = grad[..., 0, 0] + grad[..., 1, 1]
        assert np.abs(div).max() <= 1e-12

    @pytest.mark.parametrize("case", registry(), ids=lambda c: c.name)
    def test_gradients_match_finite_differences(self, case):
        rng = np.random.default_rng(3)
        lo = np.asarray(case.fluid_lo) + 0.1
        hi = np.asarray(case.fluid_hi) - 0.1
        pts = lo + rng.random((200, 2)) * (hi - lo)
        eps = 1e-6
        for f, g in ((case.u, case.grad_u), (case.X, case.grad_X), (case.lam, case.grad_lam)):
            gx = (f(pts[:, 0] + eps, pts[:, 1]) - f(pts[:, 0] - eps, pts[:, 1])) / (2 * eps)
            gy = (f(pts[:, 0], pts[:, 1] + eps) - f(pts[:, 0], pts[:, 1] - eps)) / (2 * eps)
            exact = g(pts[:, 0], pts[:, 1])
            assert np.abs(exact[..., 0] - gx).max() <= 1e-6 * (1 + np.abs(gx).max())
            assert np.abs(exact[..., 1] - gy).max() <= 1e-6 * (1 + np.abs(gy).max())

    @pytest.mark.parametrize("case", registry(), ids=lambda c: c.name)
    def test_pressure_zero_mean(self, case):
        lo, hi = case.fluid_lo, case.fluid_hi

        def f(y, x):
            return float(case.p_smooth(np.array(x), np.array(y)))

        mean, _ = dblquad(f, lo[0], hi[0], lo[1], hi[1], epsabs=1e-10)
        if case.p_jump != 0.0:
            mean += case.p_jump * np.pi * 0.2**2  # analytic solid area
        assert abs(mean) <= 1e-8

    def test_square_velocity_at_origin(self):
        u = square_case().u(np.array(0.0), np.array(0.0))
        assert np.abs(u).max() == 0.0

    def test_square_velocity_vanishes_on_boundary(self):
        case = square_case()
        t = np.linspace(-2, 2, 50)
        for x, y in ((t, np.full_like(t, 2.0)), (np.full_like(t, -2.0), t)):
            assert np.abs(case.u(x, y)).max() <= 1e-13

    def test_disk_pressure_jump_value(self):
        case = disk_case()
        a_s = np.pi / 25
        a_f = 1 - a_s
        assert case.p_jump == pytest.approx(0.5 + a_s / (2 * a_f), rel=1e-15)

    def test_annulus_map_is_isometry(self):
        case = annulus_case()
        solid = case.build_solid(1)
        x_map = build_dof_map(solid, "deformation")
        xbar = interpolate(case.xbar, x_map, solid)
        f = deformation_gradients(solid, xbar.nodal())
        det = f[:, 0, 0] * f[:, 1, 1] - f[:, 0, 1] * f[:, 1, 0]
        assert np.allclose(det, 1.0, atol=1e-13)
        # rigid: F^T F = I
        gram = np.einsum("tmi,tmj->tij", f, f)
        assert np.allclose(gram, np.eye(2), atol=1e-13)

    def test_annulus_image_inside_box(self):
        case = annulus_case()
        solid = case.build_solid(2)
        mapped = case.xbar(solid.vertices[:, 0], solid.vertices[:, 1])
        assert mapped.min() > 0.05
        assert mapped.max() < 0.95

    @pytest.mark.parametrize("case", registry(), ids=lambda c: c.name)
    def test_solid_mapped_inside_fluid_box(self, case):
        solid = case.build_solid(1)
        mapped = case.xbar(solid.vertices[:, 0], solid.vertices[:, 1])
        lo = np.asarray(case.fluid_lo)
        hi = np.asarray(case.fluid_hi)
        assert np.all(mapped > lo + 1e-6)
        assert np.all(mapped < hi - 1e-6)

    def test_fluid_recipe(self):
        case = disk_case()
        assert case.fluid_n(1) == 8
        assert case.fluid_n(4) == 64
        coarse, half = case.build_fluid(1)
        assert coarse.n_triangles == 128
        assert half.n_triangles == 512
        assert half.parent_triangle is not None

    def test_flower_trace_not_homogeneous(self):
        # the flower velocity has a nonzero boundary trace: the Dirichlet
        # data must be lifted from the closed form rather than zeroed
        case = flower_case()
        y = np.linspace(0, 1, 20)
        assert np.abs(case.u(np.ones_like(y), y)).max() > 0.1
