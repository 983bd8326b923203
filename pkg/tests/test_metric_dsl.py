"""度量表达式语言: 解析、求值与错误定位"""

import numpy as np
import pytest

from kahler_toolkit.core.errors import DSLDomainError, DSLNameError, DSLSyntaxError, EXIT_CONFIG, EXIT_NUMERIC
from kahler_toolkit.geometry.jet import finite_difference_partials
from kahler_toolkit.geometry.metric_dsl import (
    evaluate,
    evaluate_jet,
    parse_expression,
    random_expression,
    scaled,
)


class TestParse:
    def test_literal(self):
        expr = parse_expression("1", 2)
        assert expr.is_constant()
        assert float(evaluate(expr, [0.3, 0.7])) == 1.0

    def test_conformal_factor_at_origin(self):
        expr = parse_expression("1/(1+x1^2+x2^2)^2", 2)
        assert float(evaluate(expr, [0.0, 0.0])) == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "text, expected",
        [
            ("8-3-2", 3.0),
            ("8/4/2", 1.0),
            ("2^3^2", 512.0),
            ("2+3*4", 14.0),
            ("(2+3)*4", 20.0),
            ("-2^2", 4.0),
        ],
    )
    def test_precedence_and_associativity(self, text, expected):
        assert float(evaluate(parse_expression(text, 1), [0.0])) == pytest.approx(expected)

    @pytest.mark.parametrize("text, zero", [("0", True), ("-0", True), ("2*0 + 0/3", True), ("1 - 1", True), ("0*x1", False), ("1", False)])
    def test_is_zero(self, text, zero):
        assert parse_expression(text, 2).is_zero() is zero

    def test_constant_domain_error_is_not_zero(self):
        assert not parse_expression("log(0)", 1).is_zero()

    def test_whitespace_is_insignificant(self):
        assert parse_expression("x1 *  x2 + 1", 2) == parse_expression("x1*x2+1", 2)

    def test_pretty_reparses_to_same_tree(self):
        expr = parse_expression("sin(x1)^2 - x2/(1 + exp(-x1))", 2)
        assert parse_expression(expr.pretty(), 2) == expr

    def test_variable_out_of_range(self):
        with pytest.raises(DSLNameError):
            parse_expression("x3", 2)

    def test_unknown_identifier(self):
        with pytest.raises(DSLNameError) as info:
            parse_expression("1 + cosh(x1)", 1)
        assert info.value.exit_code == EXIT_CONFIG

    def test_syntax_error_reports_offset_and_expected(self):
        with pytest.raises(DSLSyntaxError) as info:
            parse_expression("1 + * x1", 1)
        assert info.value.offset == 4
        assert "number" in info.value.expected
        assert "variable" in info.value.expected

    def test_offset_is_in_bytes(self):
        with pytest.raises(DSLSyntaxError) as info:
            parse_expression("x1\u3000+ *", 1)
        assert info.value.offset == 7

    def test_unclosed_parenthesis(self):
        with pytest.raises(DSLSyntaxError) as info:
            parse_expression("(x1 + 1", 1)
        assert info.value.expected == (")",)

    def test_empty_text(self):
        with pytest.raises(DSLSyntaxError):
            parse_expression("   ", 2)


class TestEvaluate:
    def test_bilinear_jet(self):
        jet = evaluate_jet(parse_expression("x1*x2", 2), [3.0, 5.0], 2)
        assert float(jet.v) == 15.0
        np.testing.assert_allclose(jet.derivative(1), [5.0, 3.0])
        np.testing.assert_allclose(jet.derivative(2), [[0.0, 1.0], [1.0, 0.0]])

    def test_sine_taylor(self):
        jet = evaluate_jet(parse_expression("sin(x1)", 1), [0.0], 3)
        assert float(jet.v) == 0.0
        assert jet.derivative(1)[0] == pytest.approx(1.0)
        assert jet.derivative(2)[0, 0] == pytest.approx(0.0)
        assert jet.derivative(3)[0, 0, 0] == pytest.approx(-1.0)

    def test_rational_function(self):
        jet = evaluate_jet(parse_expression("1/(1+x1^2)", 1), [1.0], 3)
        assert float(jet.v) == pytest.approx(0.5)
        assert jet.derivative(1)[0] == pytest.approx(-0.5)
        assert jet.derivative(2)[0, 0] == pytest.approx(0.5)
        assert jet.derivative(3)[0, 0, 0] == pytest.approx(0.0, abs=1e-14)

    def test_batch_points(self):
        expr = parse_expression("x1 + 2*x2", 2)
        values = evaluate(expr, np.array([[1.0, 1.0], [0.0, 2.0], [3.0, -1.0]]))
        np.testing.assert_allclose(values, [3.0, 4.0, 1.0])

    def test_matches_finite_differences(self, rng):
        point = np.array([0.2, -0.3, 0.4])
        checked = 0
        for _ in range(20):
            expr = random_expression(rng, 3, depth=4)
            try:
                jet = evaluate_jet(expr, point, 2)
                reference = finite_difference_partials(lambda y: float(evaluate(expr, y)), point, 2)
            except DSLDomainError:
                continue
            scale = 1.0 + max(abs(float(jet.v)), np.abs(jet.derivative(1)).max(), np.abs(jet.derivative(2)).max())
            if scale > 50:
                continue
            np.testing.assert_allclose(jet.derivative(1), reference[1], atol=1e-4 * scale)
            np.testing.assert_allclose(jet.derivative(2), reference[2], atol=1e-3 * scale)
            checked += 1
        assert checked > 0

    def test_division_by_zero_names_subexpression(self):
        expr = parse_expression("1 + 1/x1", 1)
        with pytest.raises(DSLDomainError) as info:
            evaluate(expr, [0.0])
        assert "x1" in info.value.subexpression
        assert info.value.exit_code == EXIT_NUMERIC

    def test_log_of_negative(self):
        with pytest.raises(DSLDomainError):
            evaluate(parse_expression("log(x1)", 1), [-1.0])

    def test_order_out_of_range(self):
        with pytest.raises(ValueError):
            evaluate_jet(parse_expression("x1", 1), [0.0], 4)

    def test_point_dimension_mismatch(self):
        with pytest.raises(DSLNameError):
            evaluate(parse_expression("x1", 2), [0.0])

    def test_scaled(self):
        expr = scaled(parse_expression("x1^2", 1), -3.0)
        assert float(evaluate(expr, [2.0])) == pytest.approx(-12.0)
