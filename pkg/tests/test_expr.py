import pytest

from qverify import expr
from qverify.errors import DomainError
from qverify.mpreal import context

mp = context(128)


def ev(src, **env):
    return expr.evaluate(src, {k: mp.mpf(v) for k, v in env.items()}, mp)


def test_arithmetic_and_precedence():
    assert ev("1 + 2 * 3 ** 2") == 19
    assert ev("-a ** 2", a=3) == -9
    assert ev("(a + b) / 4", a=1, b=1) == mp.mpf("0.5")


def test_functions():
    assert ev("abs(x)", x=-2) == 2
    assert abs(ev("sqrt(2) ** 2") - 2) < 1e-35
    assert ev("log(1)") == 0


def test_comparisons_chain_and_conjunction():
    assert ev("0 < x < 1", x="0.5") is True
    assert ev("0 < x < 1", x="1.5") is False
    assert ev("x > 0 and x != 2", x=2) is False


def test_quantified_constraint():
    assert ev("forall n in 0..10: 1 - a * q**n != 0", a=3, q="0.5") is True
    assert ev("forall n in 0..10: 1 - a * q**n != 0", a=4, q="0.5") is False


def test_names_exclude_functions_and_bound_index():
    assert expr.names("forall n in 0..5: abs(a * q**n) < b") == {"a", "q", "b"}


@pytest.mark.parametrize("src", ["__import__('os')", "a.b", "[1, 2]", "a if b else c", "x or y",
                                 "lambda: 1", "f(1)", "abs(1, 2)", "1 +"])
def test_rejects_unsupported_constructs(src):
    with pytest.raises(DomainError):
        expr.parse(src)


def test_domain_errors_at_evaluation():
    with pytest.raises(DomainError):
        ev("(-2) ** 0.5")
    with pytest.raises(DomainError):
        ev("sqrt(-1)")
    with pytest.raises(DomainError):
        ev("y + 1")
    with pytest.raises(ZeroDivisionError):
        ev("1 / (a - a)", a=1)


def test_negative_base_with_integer_exponent_is_fine():
    assert ev("(-2) ** 3") == -8
