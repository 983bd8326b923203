"""
目录项与点态曲率

闭式常数: ℂP² (Ric = 6g, H ≡ 4), ℍP¹ (Ric = 12g, Q ≡ 12), 平坦空间为零。
"""

import numpy as np
import pytest

from kahler_toolkit.core.errors import ConfigError, GeometryInputError
from kahler_toolkit.geometry.calculus import (
    bakry_emery_mz,
    be_denominator,
    laplacian,
    lie_derivative_metric,
    orthogonal_laplacian,
)
from kahler_toolkit.geometry.catalog import (
    FIXED_ENTRIES,
    LISTED_FLAT,
    catalog_names,
    describe_entry,
    get_manifold,
    perturb_conformal_text,
    sample_points,
    validate_catalog_entry,
)
from kahler_toolkit.geometry.curvature import (
    adapted_frame,
    chern_dictionary_residual,
    einstein_residual,
    holomorphic_sectional,
    j_invariance_residual,
    orthogonal_ricci,
    quaternionic_sectional,
    random_unit_vector,
    riemann,
    riemann_identity_residuals,
    sectional_curvature,
    structure_check,
)
from kahler_toolkit.geometry.manifold import ManifoldKind, ScalarField, VectorField

POINT_C2 = np.array([0.1, -0.2, 0.3, 0.05])
POINT_H1 = np.array([0.2, 0.1, -0.15, 0.3])


class TestCatalog:
    def test_names(self):
        names = catalog_names()
        assert set(LISTED_FLAT) <= set(names)
        assert set(FIXED_ENTRIES) <= set(names)

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            get_manifold("cp9x")

    def test_flat_family_any_dimension(self):
        spec = get_manifold("flat-c5")
        assert spec.dimension == 10
        assert spec.kind is ManifoldKind.KAHLER
        assert spec.n == 5

    @pytest.mark.parametrize(
        "name, kind, dimension, rank",
        [
            ("cp2", ManifoldKind.KAHLER, 4, 2),
            ("hp1", ManifoldKind.QUATERNIONIC, 4, 4),
            ("s2-polar", ManifoldKind.RIEMANNIAN, 2, 1),
            ("flat-h2", ManifoldKind.QUATERNIONIC, 8, 4),
        ],
    )
    def test_entry_shape(self, name, kind, dimension, rank):
        spec = get_manifold(name)
        assert spec.kind is kind
        assert spec.dimension == dimension
        assert spec.structure_rank == rank

    def test_describe_reports_constants(self, cp2):
        info = describe_entry(cp2)
        assert info["einstein"] == 6.0
        assert info["structure_constant"] == 4.0
        assert info["diameter"] == pytest.approx(np.pi / 2)
        assert info["status"] == "closed-form"

    def test_hp2_requires_validation(self):
        assert describe_entry(get_manifold("hp2"))["status"] == "requires-validation"

    @pytest.mark.parametrize("name", ["cp2", "hp1", "flat-c2", "cp1xcp1"])
    def test_validate_entry(self, name):
        result = validate_catalog_entry(get_manifold(name), samples=4, seed=1)
        assert result["status"] == "validated", result["checks"]

    def test_sample_points_reproducible(self, cp2):
        a = sample_points(cp2, np.random.default_rng(3), 5)
        b = sample_points(cp2, np.random.default_rng(3), 5)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (5, 4)


class TestCurvature:
    def test_cp2_einstein(self, cp2, rng):
        points = sample_points(cp2, rng, 4)
        assert einstein_residual(cp2, points, 6.0) < 1e-8

    def test_cp2_holomorphic_sectional(self, cp2, rng):
        g = cp2.metric(POINT_C2)
        for _ in range(5):
            v = random_unit_vector(g, rng)
            assert holomorphic_sectional(cp2, POINT_C2, v) == pytest.approx(4.0, abs=1e-8)

    def test_hp1_constants(self, hp1, rng):
        assert einstein_residual(hp1, POINT_H1[None, :], 12.0) < 1e-8
        v = random_unit_vector(hp1.metric(POINT_H1), rng)
        assert quaternionic_sectional(hp1, POINT_H1, v) == pytest.approx(12.0, abs=1e-8)

    def test_round_sphere_sectional(self):
        spec = get_manifold("s2-half")
        p = np.array([0.2, -0.1])
        assert sectional_curvature(spec, p, [1.0, 0.0], [0.0, 1.0]) == pytest.approx(4.0, abs=1e-8)

    def test_flat_is_flat(self, flat_c2):
        assert np.max(np.abs(riemann(flat_c2, POINT_C2))) == 0.0

    def test_riemann_identities(self, cp2):
        residuals = riemann_identity_residuals(riemann(cp2, POINT_C2))
        assert max(residuals.values()) < 1e-10

    def test_j_invariance(self, cp2):
        assert j_invariance_residual(cp2, POINT_C2) < 1e-8

    def test_chern_dictionary(self, cp2):
        assert chern_dictionary_residual(cp2, POINT_C2) < 1e-7

    def test_orthogonal_ricci_routes_agree(self, cp2, rng):
        v = random_unit_vector(cp2.metric(POINT_C2), rng)
        value = orthogonal_ricci(cp2, POINT_C2, v)
        assert value.via_decomposition == pytest.approx(2.0, abs=1e-8)
        assert value.difference < 1e-8

    def test_orthogonal_ricci_independent_of_completion(self, cp2, rng):
        v = random_unit_vector(cp2.metric(POINT_C2), rng)
        first = orthogonal_ricci(cp2, POINT_C2, v, completion=[0, 1, 2, 3])
        second = orthogonal_ricci(cp2, POINT_C2, v, completion=[3, 2, 1, 0])
        assert first.via_frame_sum == pytest.approx(second.via_frame_sum, abs=1e-9)

    def test_orthogonal_ricci_rejects_non_unit(self, cp2):
        with pytest.raises(GeometryInputError):
            orthogonal_ricci(cp2, POINT_C2, [1.0, 1.0, 0.0, 0.0])

    def test_riemannian_has_no_orthogonal_ricci(self):
        with pytest.raises(GeometryInputError):
            orthogonal_ricci(get_manifold("flat-r2"), [0.0, 0.0], [1.0, 0.0])

    def test_adapted_frame(self, cp2, rng):
        g = cp2.metric(POINT_C2)
        v = random_unit_vector(g, rng)
        frame = adapted_frame(cp2, POINT_C2, v)
        (jmat,) = cp2.structure_matrices(POINT_C2)
        assert frame.adapted_rank == 2
        assert frame.orthonormality_error(cp2) < 1e-10
        np.testing.assert_allclose(frame.vectors[1], jmat @ frame.vectors[0], atol=1e-12)

    def test_adapted_frame_rejects_zero(self, cp2):
        with pytest.raises(GeometryInputError):
            adapted_frame(cp2, POINT_C2, np.zeros(4))


class TestStructure:
    @pytest.mark.parametrize("name", ["cp2", "hp1", "flat-h1"])
    def test_catalog_structures_parallel(self, name):
        report = structure_check(get_manifold(name), sample_count=4, seed=0)
        assert report.passed
        assert not report.entries

    def test_conformal_perturbation_breaks_kahler(self, cp2):
        spec = perturb_conformal_text(cp2, "1 + 0.3*x1^2")
        report = structure_check(spec, sample_count=4, seed=0)
        assert not report.passed
        assert report.parallelism > report.parallel_tol


class TestCalculus:
    def test_flat_laplacian(self, flat_c2):
        f = ScalarField.from_text("x1^2 + 2*x2^2 - x3*x4", 4)
        assert laplacian(flat_c2, f, POINT_C2) == pytest.approx(6.0)

    def test_orthogonal_laplacian_routes_agree(self, cp2):
        f = ScalarField.from_text("x1 + 0.5*x2^2 - 0.3*x3*x4", 4)
        frame = orthogonal_laplacian(cp2, f, POINT_C2, route="frame")
        subtract = orthogonal_laplacian(cp2, f, POINT_C2, route="subtract")
        assert frame == pytest.approx(subtract, abs=1e-9)

    def test_orthogonal_laplacian_needs_gradient(self, flat_c2):
        f = ScalarField.from_text("x1^2", 4)
        with pytest.raises(GeometryInputError):
            orthogonal_laplacian(flat_c2, f, np.zeros(4))

    def test_lie_derivative_of_dilation(self, flat_c2):
        z = VectorField.from_texts(["x1", "x2", "x3", "x4"], 4)
        np.testing.assert_allclose(lie_derivative_metric(flat_c2, z, POINT_C2), 2.0 * np.eye(4))

    def test_bakry_emery_constant_field(self, flat_c2):
        z = VectorField.constant([1.0, 0.0, 0.0, 0.0])
        value = bakry_emery_mz(flat_c2, POINT_C2, [1.0, 0.0, 0.0, 0.0], m=6.0, z=z)
        assert value == pytest.approx(-0.5)

    def test_bakry_emery_zero_field_is_orthogonal_ricci(self, cp2, rng):
        v = random_unit_vector(cp2.metric(POINT_C2), rng)
        assert bakry_emery_mz(cp2, POINT_C2, v, m=4.0) == pytest.approx(2.0, abs=1e-8)

    def test_denominator_requires_free_dimension(self, flat_c2):
        z = VectorField.constant([1.0, 0.0, 0.0, 0.0])
        with pytest.raises(GeometryInputError):
            be_denominator(flat_c2, 4.0, z, "real-dim")
        assert be_denominator(flat_c2, 6.0, z, "real-dim") == 2.0
        assert be_denominator(flat_c2, 6.0, z, "printed") == 4.0

    def test_zero_texts_are_identically_zero(self, cp2, rng):
        z = VectorField.from_texts(["0", "-0", "2*0", "0"], 4)
        assert z.is_zero
        assert be_denominator(cp2, 4.0, z, "real-dim") is None
        v = random_unit_vector(cp2.metric(POINT_C2), rng)
        assert bakry_emery_mz(cp2, POINT_C2, v, m=4.0, z=z) == pytest.approx(2.0, abs=1e-8)

    def test_non_zero_texts_still_need_free_dimension(self, cp2):
        z = VectorField.from_texts(["0", "0.1*x1", "0", "0"], 4)
        assert not z.is_zero
        with pytest.raises(GeometryInputError):
            be_denominator(cp2, 4.0, z, "real-dim")
