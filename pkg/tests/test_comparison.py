"""比较函数、直径上界、Riccati 界与积分引理"""

import math

import numpy as np
import pytest

from kahler_toolkit.core.errors import GeometryInputError
from kahler_toolkit.geometry.catalog import get_manifold, sample_points
from kahler_toolkit.geometry.comparison import (
    ComparisonModel,
    ComparisonReport,
    Flavor,
    ModelKind,
    comparison_rhs,
    diameter_bound,
    gradient_lemma_check,
    hypothesis_coefficient,
    lie_lemma_check,
    measure_constants,
    riccati_blowdown,
    riccati_coefficients,
    riccati_ode_solve,
)
from kahler_toolkit.geometry.geodesics import integrate_geodesic, sine_profile
from kahler_toolkit.geometry.manifold import ScalarField, VectorField


class TestModel:
    def test_defaults(self):
        model = ComparisonModel(k=1.0, n=2)
        assert model.m == 4.0
        assert model.free_dimension == 2
        assert model.barrier == pytest.approx(math.pi / 2)

    def test_quaternionic_barriers(self):
        printed = ComparisonModel(k=1.0, n=1, kind=ModelKind.QUATERNIONIC)
        derived = printed.with_(variant="derived")
        assert printed.barrier == pytest.approx(math.pi / (2 * math.sqrt(3)))
        assert printed.barrier == pytest.approx(0.9069, abs=1e-4)
        assert derived.barrier == pytest.approx(math.pi / 2)
        assert printed.free_dimension == 0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"k": 0.0, "n": 2},
            {"k": 1.0, "n": 2, "m": 3.0},
            {"k": 1.0, "n": 2, "C": -1.0},
            {"k": 1.0, "n": 0},
            {"k": 1.0, "n": 2, "variant": "other"},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(GeometryInputError):
            ComparisonModel(**kwargs)


class TestComparisonRhs:
    def test_hand_value(self):
        assert comparison_rhs(ComparisonModel(k=1.0, n=2, m=4.0), math.pi / 4) == pytest.approx(2.0)

    @pytest.mark.parametrize(
        "model",
        [
            ComparisonModel(k=1.0, n=2, m=5.5),
            ComparisonModel(k=2.0, n=3),
            ComparisonModel(k=1.0, n=2, kind=ModelKind.QUATERNIONIC),
            ComparisonModel(k=1.0, n=2, kind=ModelKind.QUATERNIONIC, variant="derived"),
        ],
    )
    def test_small_r_limit(self, model):
        r = 1e-5
        assert r * comparison_rhs(model, r) == pytest.approx(model.m - 1.0, abs=1e-6)

    def test_vectorised(self):
        values = comparison_rhs(ComparisonModel(k=1.0, n=2), np.array([0.2, 0.4, 0.8]))
        assert values.shape == (3,)
        assert np.all(np.diff(values) < 0)

    @pytest.mark.parametrize("r", [0.0, -0.1, math.pi / 2, 2.0])
    def test_outside_interval(self, r):
        with pytest.raises(GeometryInputError):
            comparison_rhs(ComparisonModel(k=1.0, n=2), r)

    def test_cp2_distance_laplacian_is_equality(self):
        r = 0.6
        rhs = comparison_rhs(ComparisonModel(k=1.0, n=2, m=4.0), r)
        assert rhs == pytest.approx(2.0 / math.tan(r) + 2.0 / math.tan(2 * r), abs=1e-12)


class TestDiameter:
    def test_non_gradient(self):
        assert diameter_bound(ComparisonModel(k=1.0, n=2)) == pytest.approx(math.pi / 2)

    def test_quaternionic_printed(self):
        model = ComparisonModel(k=1.0, n=2, kind=ModelKind.QUATERNIONIC)
        assert diameter_bound(model) == pytest.approx(math.pi / (2 * math.sqrt(3)))

    def test_bounded_phi(self):
        model = ComparisonModel(k=1.0, n=3, C=0.5, flavor=Flavor.GRADIENT_BOUNDED_PHI)
        assert diameter_bound(model) == pytest.approx(math.pi * math.sqrt(1.0 + math.sqrt(2) * 0.5 / 2))
        assert diameter_bound(model.with_(C=0.0)) == pytest.approx(math.pi)

    def test_riccati_matches_blowdown(self):
        model = ComparisonModel(k=1.0, n=3, C=0.5, flavor=Flavor.GRADIENT_RICCATI)
        assert riccati_blowdown(model) == pytest.approx(diameter_bound(model), rel=1e-12)

    def test_requires_n_at_least_two(self):
        with pytest.raises(GeometryInputError):
            diameter_bound(ComparisonModel(k=1.0, n=1))


class TestRiccati:
    def test_zero_c_blowdown(self):
        model = ComparisonModel(k=1.0, n=2, flavor=Flavor.GRADIENT_RICCATI)
        assert riccati_blowdown(model) == pytest.approx(math.pi)

    def test_coefficients(self):
        model = ComparisonModel(k=1.0, n=3, C=1.0, flavor=Flavor.GRADIENT_RICCATI)
        coef = riccati_coefficients(model)
        assert coef["alpha"] == pytest.approx(2.0)
        assert coef["c2"] == pytest.approx(2.0 / (4.0 + 8.0 + 4.0))
        assert coef["c0"] == pytest.approx(4.0)
        assert coef["head"] == pytest.approx(5.0)

    def test_alpha_required_when_c_positive(self):
        model = ComparisonModel(k=1.0, n=3, C=1.0, flavor=Flavor.GRADIENT_RICCATI)
        with pytest.raises(GeometryInputError):
            riccati_coefficients(model, alpha=0.0)

    def test_ode_solution_blows_down_at_pi(self):
        model = ComparisonModel(k=1.0, n=2, flavor=Flavor.GRADIENT_RICCATI)
        solution = riccati_ode_solve(model)
        assert solution.blowdown == pytest.approx(math.pi, abs=1e-4)
        grid = np.linspace(0.05, 3.0, 30)
        assert np.min(solution.bound_margin(grid)) > -1e-6

    def test_ode_requires_riccati_flavor(self):
        with pytest.raises(GeometryInputError):
            riccati_ode_solve(ComparisonModel(k=1.0, n=2))


class TestHypothesis:
    def test_coefficients(self):
        model = ComparisonModel(k=1.0, n=2, m=6.0)
        assert hypothesis_coefficient(model, "proof") == 4.0
        assert hypothesis_coefficient(model, "printed") == 10.0
        quaternionic = ComparisonModel(k=1.0, n=1, kind=ModelKind.QUATERNIONIC)
        assert hypothesis_coefficient(quaternionic, "proof") == 0.0

    def test_cp2_measures_unit_k(self, cp2, rng):
        points = sample_points(cp2, rng, 3)
        measured = measure_constants(cp2, ComparisonModel(k=1.0, n=2), points, directions=10, seed=1)
        assert measured.k == pytest.approx(1.0, abs=1e-7)
        assert measured.k_structure == pytest.approx(1.0, abs=1e-7)
        assert not measured.vacuous

    def test_hp1_proof_reading_is_vacuous(self, hp1, rng):
        model = ComparisonModel(k=1.0, n=1, kind=ModelKind.QUATERNIONIC)
        measured = measure_constants(hp1, model, sample_points(hp1, rng, 2), directions=5)
        assert measured.vacuous
        assert measured.k == pytest.approx(1.0, abs=1e-7)


class TestReport:
    def test_equality_and_holds(self):
        r = np.array([0.1, 0.2])
        report = ComparisonReport(r, lhs=np.array([1.0, 2.0]), rhs=np.array([1.0 + 1e-6, 2.0]))
        assert report.equality
        assert report.holds
        assert len(report.rows()) == 2

    def test_violation(self):
        report = ComparisonReport(np.array([0.1]), lhs=np.array([2.0]), rhs=np.array([1.0]))
        assert not report.holds
        assert report.worst_margin == pytest.approx(-1.0)


class TestLemmas:
    def test_gradient_lemma_on_flat(self, flat_c2):
        path = integrate_geodesic(flat_c2, np.zeros(4), [1.0, 0.0, 0.0, 0.0], 1.0)
        phi = ScalarField.from_text("0.1*x1^2", 4, role="phi")
        check = gradient_lemma_check(flat_c2, phi, path, sine_profile(1.0), samples=16)
        assert check.lhs == pytest.approx(0.1, abs=1e-6)
        assert check.C == pytest.approx(0.1)
        assert check.holds

    def test_gradient_lemma_rejects_small_c(self, flat_c2):
        path = integrate_geodesic(flat_c2, np.zeros(4), [1.0, 0.0, 0.0, 0.0], 1.0)
        phi = ScalarField.from_text("0.1*x1^2", 4, role="phi")
        with pytest.raises(GeometryInputError):
            gradient_lemma_check(flat_c2, phi, path, sine_profile(1.0), C=0.01, samples=16)

    def test_lie_lemma_killing_field(self, flat_c2):
        path = integrate_geodesic(flat_c2, np.zeros(4), [1.0, 0.0, 0.0, 0.0], 1.0)
        rotation = VectorField.from_texts(["-x2", "x1", "-x4", "x3"], 4)
        check = lie_lemma_check(flat_c2, rotation, path, sine_profile(1.0), factor=4.0, samples=16)
        assert check.lhs == pytest.approx(0.0, abs=1e-12)
        assert check.holds
        assert check.derived_rhs == pytest.approx(check.rhs)
