"""Jet 自动微分"""

import numpy as np
import pytest

from kahler_toolkit.core.errors import DSLDomainError
from kahler_toolkit.geometry.jet import Jet, finite_difference_partials, inverse


def test_coordinates_have_unit_first_derivatives():
    x = Jet.coordinates([1.0, 2.0, 3.0], 2)
    np.testing.assert_allclose(x.derivative(1), np.eye(3))
    assert np.all(x.derivative(2) == 0)


def test_constant_has_zero_derivatives():
    c = Jet.constant(4.0, 2, 3)
    assert c.order == 3
    assert np.all(c.derivative(3) == 0)


def test_product_and_chain_rule():
    x = Jet.coordinates([0.5, -1.0], 3)
    f = (x[..., 0] * x[..., 1]).exp()
    v = np.exp(-0.5)
    assert float(f.v) == pytest.approx(v)
    np.testing.assert_allclose(f.derivative(1), [-1.0 * v, 0.5 * v])
    np.testing.assert_allclose(
        f.derivative(2),
        [[1.0 * v, (1.0 + (-0.5)) * v], [(1.0 + (-0.5)) * v, 0.25 * v]],
    )


def test_third_order_matches_polynomial():
    x = Jet.coordinates([2.0], 3)[..., 0]
    f = x ** 3 - 2.0 * x
    assert float(f.v) == pytest.approx(4.0)
    assert f.derivative(1)[0] == pytest.approx(10.0)
    assert f.derivative(2)[0, 0] == pytest.approx(12.0)
    assert f.derivative(3)[0, 0, 0] == pytest.approx(6.0)


def test_matrix_inverse_derivative():
    x = Jet.coordinates([0.3], 2)[..., 0]
    one = Jet.constant(1.0, 1, 2)
    a = (one + x * x) * Jet.constant(np.eye(2), 1, 2)
    a_inv = inverse(a)
    expected = 1.0 / (1.0 + 0.09)
    np.testing.assert_allclose(a_inv.v, expected * np.eye(2))
    slope = -2 * 0.3 / (1.0 + 0.09) ** 2
    np.testing.assert_allclose(a_inv.derivative(1)[..., 0], slope * np.eye(2))


def test_finite_difference_reference():
    value, grad, hess = finite_difference_partials(lambda y: y[0] ** 2 * y[1], [1.0, 2.0], 2)
    assert float(value) == pytest.approx(2.0)
    np.testing.assert_allclose(grad, [4.0, 1.0], atol=1e-8)
    np.testing.assert_allclose(hess, [[4.0, 2.0], [2.0, 0.0]], atol=1e-5)


def test_sqrt_at_zero_is_not_differentiable():
    x = Jet.coordinates([0.0], 1)[..., 0]
    with pytest.raises(DSLDomainError):
        x.sqrt()


def test_derivative_beyond_order():
    with pytest.raises(ValueError):
        Jet.coordinates([1.0], 1).derivative(2)
