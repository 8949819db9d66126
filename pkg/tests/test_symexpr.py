import math

import pytest
import sympy as sp

from geomech.symexpr import (DEFAULT_SEED, PROVED_ZERO, Assumption, EvaluationDomainExhausted,
                             ParseError, all_zero, compile_expr, is_zero, normalize, parse,
                             rationalize, substitute, symbol, to_text)

x, y, t = sp.symbols("x y t", real=True)
S = {"x": x, "y": y, "t": t}


def test_parse_products_and_sums():
    q1, q2, v1, v2 = sp.symbols("q1 q2 v1 v2", real=True)
    e = parse("v1*v2 - q1*q2", {"q1": q1, "q2": q2, "v1": v1, "v2": v2})
    assert e == v1 * v2 - q1 * q2
    assert len(e.free_symbols) == 4


def test_rational_literal():
    e = parse("1/2*(x^2+y^2)", S)
    assert e == sp.Rational(1, 2) * (x**2 + y**2)


def test_division_after_power_is_not_an_exponent():
    assert parse("x^2/2", S) == x**2 / 2
    assert parse("2/3^2", S) == sp.Rational(2, 9)
    assert parse("x^(1/2)", S) == sp.sqrt(x)


def test_power_is_right_associative():
    assert parse("2^3^2", S) == 512


def test_unary_minus_binds_looser_than_power():
    assert parse("-x^2", S) == -x**2


def test_functions_and_derivatives():
    e = parse("V(sqrt(x^2 + y^2))", S, {"V": 1})
    assert e.func.__name__ == "V"
    d = parse("diff(a(x, y), y)", S, {"a": 2})
    assert isinstance(d, sp.Derivative)


@pytest.mark.parametrize("src", ["x +", "sin x", "V(x, y)", "(x", "x $ y", "diff(x^2, 2)"])
def test_parse_errors(src):
    with pytest.raises(ParseError):
        parse(src, S, {"V": 1})


def test_to_text_roundtrip():
    exprs = [x**2 / 3, x ** sp.Rational(2, 3), 2 / (3 * x**2), sp.sin(x) * sp.sqrt(y + 1),
             sp.asin(x / sp.sqrt(2 * t)), sp.exp(-x) - sp.log(y)]
    for e in exprs:
        assert sp.simplify(parse(to_text(e), S) - e) == 0


def test_normalize_pythagorean():
    assert normalize(sp.sin(x)**2 + sp.cos(x)**2 - 1) == 0
    assert normalize(sp.tan(x) * sp.cos(x) - sp.sin(x)) == 0


def test_normalize_cancels_rational_functions():
    assert normalize((x**2 - y**2) / (x - y) - x - y) == 0


def test_substitute_is_simultaneous():
    assert substitute(x - y, {x: y, y: x}) == y - x


def test_is_zero_tiers():
    assert is_zero(sp.expand((x + y)**2) - x**2 - 2 * x * y - y**2) is PROVED_ZERO
    v = is_zero(x * y - 1)
    assert v.status == "proved_nonzero" and v.witness
    r = symbol("r", positive=True)
    v = is_zero(sp.sqrt(r**2) - r)
    assert v.vanishes


def test_is_zero_probably_zero_for_radical_identity():
    # sqrt(x^2) = x only where x > 0; sampling respects the assumption
    v = is_zero(sp.sqrt(x**2) - x, assumptions=(Assumption(x, "positive"),))
    assert v.vanishes
    v = is_zero(sp.sqrt(x**2) - x)
    assert v.nonzero


def test_is_zero_with_abstract_functions():
    V = sp.Function("V", real=True)
    assert is_zero(sp.diff(V(x * y), x) - y * sp.Subs(sp.diff(V(t), t), t, x * y)).vanishes
    assert is_zero(sp.diff(V(x), x)).nonzero


def test_is_zero_deterministic():
    e = sp.sin(x) * y - x
    assert is_zero(e, seed=7).to_dict() == is_zero(e, seed=7).to_dict()
    assert is_zero(e).witness == is_zero(e, seed=DEFAULT_SEED).witness


def test_is_zero_domain_exhausted():
    with pytest.raises(EvaluationDomainExhausted):
        is_zero(sp.log(-x**2 - 1) * y + x, n_points=2)


def test_all_zero_reports_first_failure():
    assert all_zero([0, x - x]).proved_zero
    assert all_zero([0, x]).nonzero


def test_compile_expr_float_and_precise():
    f = compile_expr(sp.sin(x) + sp.sqrt(y), [x, y])
    assert math.isclose(f([0.5, 4.0]), math.sin(0.5) + 2.0)
    g = compile_expr(x / y, [x, y], precise=True)
    assert abs(g([1, 3]) - sp.Rational(1, 3)) < 1e-30


def test_rationalize():
    assert rationalize(0.125) == sp.Rational(1, 8)
    assert rationalize(1 / 3) == sp.Rational(1, 3)
