"""修正Bochner公式逐项校验"""

import math

import numpy as np
import pytest

from kahler_toolkit.core.errors import GeometryInputError
from kahler_toolkit.geometry.bochner import bochner_terms, bochner_terms_two_frames, modified_bochner_margin
from kahler_toolkit.geometry.catalog import get_manifold, radial_point
from kahler_toolkit.geometry.manifold import ScalarField


def test_flat_identity_in_both_frames(flat_c2):
    f = ScalarField.from_text("x1 + 0.3*x1^2*x3 - 0.2*x2*x4 + 0.5*x3^2", 4)
    first, second = bochner_terms_two_frames(flat_c2, f, np.zeros(4))
    assert first.frame == "index-order"
    assert second.frame == "reversed-order"
    assert abs(first.residual) < 1e-9
    assert abs(second.residual) < 1e-9
    assert first.ric_perp == 0.0


def test_cp2_identity_at_origin(cp2):
    f = ScalarField.from_text("x1 + 0.2*x2^2 - 0.1*x1*x3 + 0.3*x4^3", 4)
    terms = bochner_terms(cp2, f, np.zeros(4))
    assert abs(terms.residual) < 1e-8
    assert not terms.vacuous
    data = terms.to_dict()
    assert data["rhs"] == pytest.approx(terms.rhs)
    assert data["residual"] == pytest.approx(terms.residual)


def test_hp1_is_vacuous(hp1):
    f = ScalarField.from_text("x1 + 0.1*x2^2", 4)
    terms = bochner_terms(hp1, f, np.zeros(4))
    assert terms.vacuous
    assert terms.lhs == 0.0
    assert terms.rhs == pytest.approx(0.0, abs=1e-9)


def test_requires_unit_gradient(cp2):
    f = ScalarField.from_text("2*x1", 4)
    with pytest.raises(GeometryInputError):
        bochner_terms(cp2, f, np.zeros(4))


def test_riemannian_rejected():
    spec = get_manifold("flat-r2")
    with pytest.raises(GeometryInputError):
        bochner_terms(spec, ScalarField.from_text("x1", 2), np.zeros(2))


def test_unknown_quaternionic_form(hp1):
    with pytest.raises(GeometryInputError):
        bochner_terms(hp1, ScalarField.from_text("x1", 4), np.zeros(4), quaternionic_form="literal")


def test_distance_function_saturates_modified_inequality(cp2):
    base = np.zeros(4)
    r = ScalarField(lambda x: cp2.distance_jet_fn(base, x))
    q = radial_point(cp2, [1.0, 0.0, 0.0, 0.0], 0.6)
    terms = bochner_terms(cp2, r, q)
    assert terms.orthogonal_laplacian == pytest.approx(2.0 / math.tan(0.6), abs=1e-6)
    assert terms.ric_perp == pytest.approx(2.0, abs=1e-6)
    assert modified_bochner_margin(terms, 2, 4) == pytest.approx(0.0, abs=1e-6)


def test_margin_without_free_directions(hp1):
    terms = bochner_terms(hp1, ScalarField.from_text("x1", 4), np.zeros(4))
    assert modified_bochner_margin(terms, 4, 4) == 0.0
