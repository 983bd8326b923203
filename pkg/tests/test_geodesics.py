"""测地线、平行移动、距离与径向导数"""

import math

import numpy as np
import pytest

from kahler_toolkit.core.errors import GeometryInputError
from kahler_toolkit.geometry.catalog import get_manifold, radial_point
from kahler_toolkit.geometry.curvature import adapted_frame
from kahler_toolkit.geometry.geodesics import (
    distance,
    exp_map,
    first_conjugate_time,
    index_form,
    integrate_geodesic,
    jacobi_profile,
    literal_j_profile,
    parallel_transport,
    radial_derivatives,
    sine_profile,
)

E1 = np.array([1.0, 0.0, 0.0, 0.0])


class TestGeodesic:
    def test_flat_straight_line(self):
        spec = get_manifold("flat-r2")
        path = integrate_geodesic(spec, [0.0, 0.0], [0.6, 0.8], 2.0)
        np.testing.assert_allclose(path.end, [1.2, 1.6], atol=1e-12)
        assert path.length == pytest.approx(2.0)
        assert path.speed_drift < 1e-12

    def test_half_sphere_equator_closes(self):
        spec = get_manifold("s2-half")
        path = integrate_geodesic(spec, [0.5, 0.0], [0.0, 1.0], math.pi)
        np.testing.assert_allclose(path.end, [0.5, 0.0], atol=1e-6)
        assert path.speed_drift < 1e-8

    def test_rows_layout(self):
        path = integrate_geodesic(get_manifold("flat-r2"), [0.0, 0.0], [1.0, 0.0], 0.01)
        rows = path.to_rows()
        assert list(rows[0]) == ["t", "x1", "x2", "v1", "v2"]
        assert len(rows) == path.steps + 1

    def test_rejects_non_unit_velocity(self, cp2):
        with pytest.raises(GeometryInputError):
            integrate_geodesic(cp2, np.zeros(4), [2.0, 0.0, 0.0, 0.0], 0.5)

    def test_rejects_non_positive_length(self, cp2):
        with pytest.raises(GeometryInputError):
            integrate_geodesic(cp2, np.zeros(4), E1, 0.0)

    def test_exp_map_flat(self):
        end = exp_map(get_manifold("flat-r2"), [1.0, 1.0], [0.3, -0.4])
        np.testing.assert_allclose(end, [1.3, 0.6], atol=1e-12)

    def test_exp_map_matches_closed_form(self, cp2):
        end = exp_map(cp2, np.zeros(4), 0.6 * E1)
        np.testing.assert_allclose(end, radial_point(cp2, E1, 0.6), atol=1e-8)


class TestTransport:
    def test_frame_stays_orthonormal_and_adapted(self, cp2):
        path = integrate_geodesic(cp2, np.zeros(4), E1, 1.0)
        frame = adapted_frame(cp2, path.start, path.v[0])
        transported = parallel_transport(cp2, path, frame)
        assert transported.orthonormality_drift(cp2) < 1e-8
        assert transported.structure_defect(cp2) < 1e-8

    def test_rejects_non_orthonormal_frame(self, cp2):
        path = integrate_geodesic(cp2, np.zeros(4), E1, 0.5)
        with pytest.raises(GeometryInputError):
            parallel_transport(cp2, path, 2.0 * np.eye(4))


class TestConjugatePoints:
    def test_sphere_equator(self):
        spec = get_manifold("s2-polar")
        t = first_conjugate_time(spec, [math.pi / 2, 0.0], [0.0, 1.0], 4.0)
        assert t == pytest.approx(math.pi, abs=1e-3)

    def test_flat_has_none(self):
        assert first_conjugate_time(get_manifold("flat-r2"), [0.0, 0.0], [1.0, 0.0], 3.0) is None


class TestDistance:
    def test_shooting_matches_closed_form(self):
        spec = get_manifold("cp1")
        q = radial_point(spec, [1.0, 0.0], 0.7)
        result = distance(spec, [0.0, 0.0], q, seed=0)
        assert result.value == pytest.approx(0.7, abs=1e-6)
        assert result.path.endpoint_error < 1e-6

    def test_same_point(self, cp2):
        with pytest.raises(GeometryInputError):
            distance(cp2, np.zeros(4), np.zeros(4))

    @staticmethod
    def off_origin_points(rng, count):
        """‖x‖ ≤ 0.25, 离无穷远超平面至少 π/2 − arctan 0.25"""
        x = rng.normal(size=(count, 4))
        return x / np.linalg.norm(x, axis=-1, keepdims=True) * rng.uniform(0.05, 0.25, size=(count, 1))

    def test_cp2_round_trip_off_origin(self, cp2, rng):
        # 粗扫方向会越过无穷远超平面, 只冻结这些方向
        starts = self.off_origin_points(rng, 4)
        for i, p in enumerate(starts):
            z = rng.normal(size=4)
            v = z / np.sqrt(z @ cp2.metric(p) @ z)
            t = rng.uniform(0.3, 0.8 * math.pi / 2)
            q = exp_map(cp2, p, t * v)
            result = distance(cp2, p, q, seed=i)
            assert result.value == pytest.approx(t, abs=1e-6)

    def test_cp2_triangle_inequality(self, cp2, rng):
        a, b, c = self.off_origin_points(rng, 3)
        ab = distance(cp2, a, b).value
        bc = distance(cp2, b, c).value
        ac = distance(cp2, a, c).value
        assert ac <= ab + bc + 1e-8
        assert distance(cp2, b, a).value == pytest.approx(ab, abs=1e-8)


class TestRadialDerivatives:
    R = 0.6

    def expected(self):
        lap = 2.0 / math.tan(self.R) + 2.0 / math.tan(2.0 * self.R)
        return lap, 2.0 / math.tan(self.R)

    @pytest.mark.parametrize("route, tol", [("closed-form", 1e-8), ("jacobi", 1e-4)])
    def test_cp2_laplacians(self, cp2, route, tol):
        x = radial_point(cp2, E1, self.R)
        result = radial_derivatives(cp2, np.zeros(4), x, route=route)
        lap, perp = self.expected()
        assert result.distance == pytest.approx(self.R, abs=1e-8)
        assert result.laplacian == pytest.approx(lap, abs=tol)
        assert result.orthogonal_laplacian == pytest.approx(perp, abs=tol)
        assert result.unit_error < tol

    def test_beyond_injectivity(self, cp2):
        x = radial_point(cp2, E1, 1.52)
        with pytest.raises(GeometryInputError):
            radial_derivatives(cp2, np.zeros(4), x, route="closed-form")

    def test_at_base(self, cp2):
        with pytest.raises(GeometryInputError):
            radial_derivatives(cp2, np.zeros(4), np.zeros(4))

    def test_unknown_route(self, cp2):
        with pytest.raises(GeometryInputError):
            radial_derivatives(cp2, np.zeros(4), radial_point(cp2, E1, 0.3), route="spline")


class TestIndexForm:
    def test_cp2_sine_profile(self, cp2):
        path = integrate_geodesic(cp2, np.zeros(4), E1, 1.0)
        report = index_form(cp2, path, sine_profile(1.0))
        assert report.value(1) == pytest.approx((math.pi**2 - 4.0) / 2.0, abs=1e-6)
        assert report.value(2) == pytest.approx((math.pi**2 - 1.0) / 2.0, abs=1e-6)
        assert report.aggregate_from == 2
        assert report.aggregate == pytest.approx(math.pi**2 - 1.0, abs=1e-5)

    def test_literal_profile_is_flagged(self, cp2):
        path = integrate_geodesic(cp2, np.zeros(4), E1, 1.0)
        profile = literal_j_profile(1.0)
        np.testing.assert_allclose(profile.fn(np.linspace(0.0, 1.0, 7)), 1.0)
        report = index_form(cp2, path, profile)
        assert report.flagged
        assert report.boundary_violation == pytest.approx(1.0)

    def test_jacobi_profile_vanishes_at_ends(self):
        profile = jacobi_profile(1.0, 1.2)
        assert profile.fn(np.array([0.0, 1.2])) == pytest.approx([0.0, 0.0], abs=1e-12)
        assert profile.fn(np.array([0.6]))[0] == pytest.approx(1.0)

    def test_boundary_condition_enforced(self, cp2):
        path = integrate_geodesic(cp2, np.zeros(4), E1, 1.0)
        with pytest.raises(GeometryInputError):
            index_form(cp2, path, sine_profile(2.0))
