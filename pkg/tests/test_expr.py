import math
import random

import pytest

from tdnh.expr import (
    Binary,
    DualValue,
    EvalDomainError,
    Num,
    ParseError,
    TimeVar,
    Unary,
    UnknownIdentifierError,
    evaluate,
    evaluate_dual,
    parse,
    to_source,
)


def central_difference(ast, t, h=1e-5):
    return (evaluate(ast, t + h) - evaluate(ast, t - h)) / (2 * h)


class TestParse:
    def test_linear(self):
        assert parse("2*t+1") == Binary("+", Binary("*", Num(2.0), TimeVar()), Num(1.0))

    def test_function_with_constants(self):
        ast = parse("cos(2*pi*t)")
        assert isinstance(ast, Unary) and ast.op == "cos"
        assert evaluate(ast, 0.25) == pytest.approx(0.0, abs=1e-15)

    def test_unbalanced_paren_offset(self):
        with pytest.raises(ParseError) as err:
            parse("sin(")
        assert err.value.offset == 4
        assert err.value.expected  # the expected-token set is reported

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifierError) as err:
            parse("2*foo(t)")
        assert err.value.name == "foo"
        assert err.value.offset == 2

    def test_trailing_garbage(self):
        with pytest.raises(ParseError):
            parse("1+2)")

    def test_power_binds_tighter_than_neg(self):
        assert evaluate(parse("-t^2"), 3.0) == -9.0

    def test_power_right_associative(self):
        assert evaluate(parse("2^3^2"), 0.0) == 512.0

    def test_negative_exponent(self):
        assert evaluate(parse("2^-3"), 0.0) == 0.125

    def test_neg_binds_tighter_than_mul(self):
        # -x*y parses as (-x)*y
        assert parse("-t*2") == Binary("*", Unary("neg", TimeVar()), Num(2.0))


class TestEvaluate:
    def test_linear(self):
        assert evaluate(parse("2*t+1"), 1.0) == 3.0

    def test_cos_zero(self):
        for t in (0.0, 1.7, -3.2):
            assert evaluate(parse("cos(0)"), t) == 1.0

    def test_poly(self):
        assert evaluate(parse("t^2 - 2"), 2.0) == 2.0

    def test_division_by_zero(self):
        ast = parse("1/(t-1)")
        with pytest.raises(EvalDomainError):
            evaluate(ast, 1.0)

    def test_log_domain(self):
        with pytest.raises(EvalDomainError) as err:
            evaluate(parse("log(t)"), -1.0)
        assert err.value.offset == 0

    def test_sqrt_domain(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("sqrt(t-2)"), 0.0)

    def test_overflow_is_loud(self):
        with pytest.raises(EvalDomainError):
            evaluate(parse("exp(exp(t))"), 10.0)


class TestEvaluateDual:
    def test_square(self):
        d = evaluate_dual(parse("t^2"), 2.0)
        assert (d.value, d.derivative) == (4.0, 4.0)

    def test_sin_at_zero(self):
        d = evaluate_dual(parse("sin(t)"), 0.0)
        assert d.value == 0.0
        assert d.derivative == 1.0

    def test_exp_matches_finite_difference(self):
        ast = parse("exp(2*t)")
        d = evaluate_dual(ast, 0.5)
        assert d.value == pytest.approx(math.e)
        assert d.derivative == pytest.approx(2 * math.e)
        fd = central_difference(ast, 0.5)
        assert abs(d.derivative - fd) <= 1e-6 * abs(d.derivative)

    def test_quotient(self):
        ast = parse("sin(t)/t")
        d = evaluate_dual(ast, 1.3)
        fd = central_difference(ast, 1.3)
        assert abs(d.derivative - fd) <= 1e-8

    def test_power_of_t(self):
        ast = parse("t^t")
        d = evaluate_dual(ast, 1.5)
        expected = 1.5**1.5 * (math.log(1.5) + 1.0)
        assert d.derivative == pytest.approx(expected, rel=1e-14)


class TestDualArithmetic:
    def test_product_rule(self):
        a = DualValue(2.0, 3.0)
        b = DualValue(5.0, 7.0)
        assert (a * b).derivative == 2.0 * 7.0 + 5.0 * 3.0

    def test_quotient_rule(self):
        a = DualValue(1.0, 2.0)
        b = DualValue(4.0, -1.0)
        q = a / b
        assert q.value == 0.25
        assert q.derivative == pytest.approx((2.0 * 4.0 - 1.0 * -1.0) / 16.0)

    def test_scalar_mixing(self):
        d = 3.0 * DualValue(2.0, 1.0) - 1.0
        assert (d.value, d.derivative) == (5.0, 3.0)

    def test_neg(self):
        assert (-DualValue(1.0, -2.0)) == DualValue(-1.0, 2.0)


# ---------------------------------------------------------------------------
# Randomized round-trip and derivative properties
# ---------------------------------------------------------------------------

FUNCS = ("sin", "cos", "tanh", "atan")  # bounded, total on the real line


def random_ast(rng, depth):
    if depth == 0:
        return rng.choice(
            [TimeVar(), Num(round(rng.uniform(0.1, 3.0), 3)), TimeVar()]
        )
    kind = rng.random()
    if kind < 0.3:
        return Unary(rng.choice(FUNCS), random_ast(rng, depth - 1))
    if kind < 0.4:
        return Unary("neg", random_ast(rng, depth - 1))
    if kind < 0.5:
        # exponentials and powers enter with bounded arguments
        inner = Unary("atan", random_ast(rng, depth - 1))
        if rng.random() < 0.5:
            return Unary("exp", inner)
        return Binary("^", Unary("exp", inner), Num(float(rng.randint(1, 3))))
    op = rng.choice(["+", "-", "*", "/"])
    left = random_ast(rng, depth - 1)
    right = random_ast(rng, depth - 1)
    if op == "/":
        # bounded-away-from-zero denominator with tame derivatives
        right = Binary("+", Unary("cosh", right), Num(1.0))
    return Binary(op, left, right)


def test_random_corpus_round_trip_and_derivatives():
    rng = random.Random(20260809)
    checked = 0
    for _ in range(100):
        ast = random_ast(rng, rng.randint(1, 6))
        assert parse(to_source(ast)) == ast
        for _ in range(10):
            t = rng.uniform(-2.0, 2.0)
            try:
                d = evaluate_dual(ast, t)
            except EvalDomainError:
                continue  # overflow in a nested exp; domain errors are loud by design
            if abs(d.value) > 1e6 or abs(d.derivative) > 1e6:
                continue  # beyond the difference oracle's representable range
            fd = central_difference(ast, t)
            assert abs(d.derivative - fd) <= 1e-5 * (1.0 + abs(d.derivative))
            checked += 1
    assert checked > 500  # the corpus must actually exercise the comparison


def test_round_trip_parsed_sources():
    sources = [
        "2*t+1",
        "cos(2*pi*t)",
        "-t^2",
        "2^3^2",
        "t/(1+t^2)",
        "1 - 2 - 3",
        "1/(2*3)",
        "exp(-(t-1)^2)",
        "sqrt(cosh(t))",
        "atan(t)*e",
    ]
    for source in sources:
        ast = parse(source)
        assert parse(to_source(ast)) == ast


def test_subtraction_grouping_survives_round_trip():
    ast = Binary("-", Num(1.0), Binary("-", Num(2.0), Num(3.0)))  # 1-(2-3)
    assert parse(to_source(ast)) == ast
    assert evaluate(ast, 0.0) == 2.0
