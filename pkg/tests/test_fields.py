import numpy as np
import pytest

from gwflow.constitutive import (
    effective_saturation,
    kr_of_thetae,
    theta_of_h,
)
from gwflow.fields import (
    BoundarySpec,
    CellField,
    Material,
    boundary_head_gradient,
    face_mobility,
    update_secondary_fields,
)
from gwflow.mesh import build_box_mesh



@pytest.fixture
def two_cell_mesh():
    return build_box_mesh(2, 1, 1, [(0, 0, 0), (2, 1, 1)])


def all_zero_flux(mesh):
    return {name: BoundarySpec.zero_flux(name) for name in mesh.patches}


class TestCellField:
    def test_basic(self):
        f = CellField("h", [1.0, 2.0, 3.0])
        assert f.values.dtype == float

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            CellField("h", [1.0, np.nan])

    def test_size_check(self, two_cell_mesh):
        with pytest.raises(ValueError, match="2-cell"):
            CellField("h", [1.0, 2.0, 3.0]).check_sized(two_cell_mesh)


class TestBoundarySpec:
    def test_zero_flux_is_zero_velocity(self):
        bc = BoundarySpec.zero_flux("top")
        assert bc.velocity == (0.0, 0.0, 0.0)
        np.testing.assert_array_equal(bc.velocity_vec, np.zeros(3))

    def test_fixed_head_has_no_velocity(self):
        bc = BoundarySpec.fixed_head("top", -0.75)
        with pytest.raises(ValueError, match="velocity"):
            bc.velocity_vec

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown boundary kind"):
            BoundarySpec("top", "seepage")

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            BoundarySpec.fixed_velocity("top", (np.inf, 0, 0))


class TestUpdateSecondaryFields:
    def test_uniform_head_gives_paper_theta(self, vg, fluid):
        mat = Material(vg, np.full(10, 9.4e-12))
        out = update_secondary_fields(np.full(10, -0.75), mat, fluid)
        np.testing.assert_allclose(out.theta, 0.20037, atol=5e-5)

    def test_saturated_everywhere(self, vg, fluid):
        mat = Material(vg, np.full(4, 9.4e-12))
        out = update_secondary_fields(np.full(4, 0.5), mat, fluid)
        np.testing.assert_array_equal(out.theta, vg.theta_s)
        np.testing.assert_array_equal(out.capacity, 0.0)
        np.testing.assert_array_equal(out.kr, 1.0)

    def test_permeability_untouched(self, vg, fluid):
        K = np.array([1e-12, 9e-12, 5e-12])
        mat = Material(vg, K)
        update_secondary_fields(np.full(3, -1.0), mat, fluid)
        np.testing.assert_array_equal(mat.permeability, K)

    def test_mobility_consistency(self, vg, fluid):
        mat = Material(vg, np.full(3, 9.4e-12))
        out = update_secondary_fields(np.full(3, -0.75), mat, fluid)
        np.testing.assert_allclose(
            out.mobility_total, out.mobility_phase * fluid.rho * fluid.g_mag
        )

    def test_non_finite_head_rejected(self, vg, fluid):
        mat = Material(vg, np.full(2, 9.4e-12))
        with pytest.raises(ValueError, match="non-finite"):
            update_secondary_fields(np.array([np.nan, -1.0]), mat, fluid)


class TestFaceMobility:
    def test_uniform_fields_reproduce_cell_value(self, vg, fluid, two_cell_mesh):
        mat = Material(vg, np.full(2, 9.4e-12))
        h = np.full(2, -0.75)
        out = update_secondary_fields(h, mat, fluid)
        m_face = face_mobility(two_cell_mesh, h, mat, fluid, all_zero_flux(two_cell_mesh))
        np.testing.assert_allclose(m_face, out.mobility_total[0], rtol=1e-13)

    def test_harmonic_mean_of_permeability(self, vg, fluid, two_cell_mesh):
        # K 1e-12 / 9e-12 with kr = 1 both sides: harmonic mean 1.8e-12
        mat = Material(vg, np.array([1e-12, 9e-12]))
        h = np.full(2, 0.1)  # saturated: kr = 1
        m_face = face_mobility(two_cell_mesh, h, mat, fluid, all_zero_flux(two_cell_mesh))
        coef = fluid.rho * fluid.g_mag / fluid.mu
        assert m_face[0] == pytest.approx(coef * 1.8e-12, rel=1e-13)

    def test_harmonic_mean_bounds(self, vg, fluid):
        mesh = build_box_mesh(10, 1, 1, [(0, 0, 0), (10, 1, 1)])
        rng = np.random.default_rng(7)
        K = rng.uniform(1e-13, 1e-11, mesh.n_cells)
        mat = Material(vg, K)
        h = np.full(mesh.n_cells, 0.2)  # saturated, kr := 1
        m_face = face_mobility(mesh, h, mat, fluid, all_zero_flux(mesh))
        coef = fluid.rho * fluid.g_mag / fluid.mu
        Ko = K[mesh.owner[: mesh.n_internal]]
        Kn = K[mesh.neighbor]
        K_face = m_face[: mesh.n_internal] / coef
        assert np.all(K_face >= np.minimum(Ko, Kn) - 1e-25)
        assert np.all(K_face <= np.maximum(Ko, Kn) + 1e-25)

    def test_upwind_takes_higher_total_head_side(self, vg, fluid, two_cell_mesh):
        mat = Material(vg, np.full(2, 9.4e-12))
        h = np.array([-0.5, -3.0])  # same z: flow from owner 0
        kr = kr_of_thetae(
            effective_saturation(theta_of_h(h, vg), vg), vg
        )
        m_face = face_mobility(
            two_cell_mesh, h, mat, fluid, all_zero_flux(two_cell_mesh), scheme="upwind"
        )
        coef = fluid.rho * fluid.g_mag / fluid.mu
        assert m_face[0] == pytest.approx(coef * 9.4e-12 * kr[0], rel=1e-13)

    def test_schemes_agree_on_uniform_field(self, vg, fluid):
        mesh = build_box_mesh(4, 2, 3, [(0, 0, -1), (4, 2, 2)])
        mat = Material(vg, np.full(mesh.n_cells, 9.4e-12))
        h = np.full(mesh.n_cells, -2.0) - mesh.cell_centroids[:, 2] * 0.0
        a = face_mobility(mesh, h, mat, fluid, all_zero_flux(mesh), scheme="arithmetic")
        b = face_mobility(mesh, h, mat, fluid, all_zero_flux(mesh), scheme="upwind")
        np.testing.assert_array_equal(a, b)

    def test_fixed_head_patch_uses_boundary_kr(self, vg, fluid, two_cell_mesh):
        mat = Material(vg, np.full(2, 9.4e-12))
        h = np.full(2, -10.0)
        bcs = all_zero_flux(two_cell_mesh)
        bcs["x+"] = BoundarySpec.fixed_head("x+", -0.75)
        m_face = face_mobility(two_cell_mesh, h, mat, fluid, bcs)
        kr_b = kr_of_thetae(
            effective_saturation(theta_of_h(-0.75, vg), vg), vg
        )
        coef = fluid.rho * fluid.g_mag / fluid.mu
        np.testing.assert_allclose(
            m_face[two_cell_mesh.patches["x+"]], coef * 9.4e-12 * kr_b, rtol=1e-13
        )
        # other boundary faces keep the (much smaller) cell-side kr
        kr_cell = kr_of_thetae(
            effective_saturation(theta_of_h(-10.0, vg), vg), vg
        )
        np.testing.assert_allclose(
            m_face[two_cell_mesh.patches["x-"]], coef * 9.4e-12 * kr_cell, rtol=1e-13
        )

    def test_unknown_scheme_rejected(self, vg, fluid, two_cell_mesh):
        mat = Material(vg, np.full(2, 9.4e-12))
        with pytest.raises(ValueError, match="scheme"):
            face_mobility(
                two_cell_mesh, np.zeros(2), mat, fluid,
                all_zero_flux(two_cell_mesh), scheme="qualia",
            )


class TestBoundaryHeadGradient:
    def test_no_flow_on_top_face_is_hydrostatic(self, fluid):
        # outward normal +z, gravity -z: dh/dn = g_hat.n = -1
        bc = BoundarySpec.zero_flux("top")
        grad = boundary_head_gradient(bc, np.array([[0.0, 0.0, 1.0]]), np.array([1e-5]), fluid)
        assert grad[0] == pytest.approx(-1.0, rel=1e-14)

    def test_inflow_shifts_gradient(self, fluid):
        q = 2e-5
        bc = BoundarySpec.fixed_velocity("top", (0.0, 0.0, -q))
        m_face = np.array([5e-5])
        grad = boundary_head_gradient(bc, np.array([[0.0, 0.0, 1.0]]), m_face, fluid)
        assert grad[0] == pytest.approx(-1.0 + q / m_face[0], rel=1e-13)

    def test_flux_reproduction(self, fluid):
        # reconstructing U.n from the gradient returns it to 1e-12 relative
        rng = np.random.default_rng(3)
        normals = rng.standard_normal((50, 3))
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        m_face = rng.uniform(1e-7, 1e-4, 50)
        velocity = (3e-6, -1e-6, -2e-5)
        bc = BoundarySpec.fixed_velocity("side", velocity)
        grad = boundary_head_gradient(bc, normals, m_face, fluid)
        u_n = normals @ np.array(velocity)
        reconstructed = -m_face * grad + m_face * (normals @ fluid.g_hat)
        np.testing.assert_allclose(reconstructed, u_n, rtol=1e-12)

    def test_zero_mobility_with_flow_rejected(self, fluid):
        bc = BoundarySpec.fixed_velocity("top", (0.0, 0.0, -1e-5))
        with pytest.raises(ValueError, match="zero mobility"):
            boundary_head_gradient(bc, np.array([[0.0, 0.0, 1.0]]), np.array([0.0]), fluid)

    def test_zero_mobility_without_flow_allowed(self, fluid):
        bc = BoundarySpec.zero_flux("top")
        grad = boundary_head_gradient(bc, np.array([[0.0, 0.0, 1.0]]), np.array([0.0]), fluid)
        assert np.isfinite(grad[0])

    def test_fixed_head_rejected(self, fluid):
        bc = BoundarySpec.fixed_head("top", -1.0)
        with pytest.raises(ValueError, match="fixed_head"):
            boundary_head_gradient(bc, np.array([[0.0, 0.0, 1.0]]), np.array([1e-5]), fluid)
