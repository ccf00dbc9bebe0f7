from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from qverify.errors import DivergenceError, DomainError, NumericalFailure, SingularParameterError
from qverify.hyper import (
    BasicSeriesSpec,
    ClassicalSeriesSpec,
    Monomial,
    QPoly,
    RationalWeight,
    basic_terms,
    classical_terms,
    eval_basic,
    eval_classical,
    eval_weighted_series,
    sum_terms,
)
from qverify.mpreal import PrecisionPolicy, context
from qverify.qcore import QContext, qpoch_exact, qpoch_infinite


def rel(x, y):
    return abs(x - y) / max(abs(x), abs(y))


def test_geometric_series_stops_at_target():
    policy = PrecisionPolicy(192)
    mp = policy.mp
    x = mp.mpf("0.9")
    res = sum_terms((x**n for n in range(10**6)), policy)
    assert rel(res.value, 1 / (1 - x)) < 1e-40
    assert res.last_term_magnitude <= policy.target * abs(res.value)


def test_parity_modes_select_partial_sums():
    policy = PrecisionPolicy(128)
    mp = policy.mp

    def terms():
        n = 0
        while True:
            yield mp.mpf((-1) ** n) * (1 + mp.mpf(2) ** -n)
            n += 1

    even = sum_terms(terms(), policy, partial_sums="even").value
    odd = sum_terms(terms(), policy, partial_sums="odd").value
    # even: 2 + sum_k (2^-2k - 2^-(2k-1)) = 5/3; odd: sum_k (2^-2k - 2^-(2k+1)) = 2/3
    assert rel(even, mp.mpf(5) / 3) < 1e-30
    assert rel(odd, mp.mpf(2) / 3) < 1e-30
    with pytest.raises(DomainError):
        sum_terms(terms(), policy, partial_sums="sideways")


def test_divergent_stream_is_detected():
    policy = PrecisionPolicy(128)
    mp = policy.mp
    with pytest.raises(DivergenceError):
        sum_terms((mp.mpf(n) for n in range(1, 10**6)), policy)


def test_term_budget_is_enforced():
    policy = PrecisionPolicy(128)
    mp = policy.mp
    with pytest.raises(NumericalFailure):
        sum_terms((mp.mpf(1) / (n + 1) ** 2 for n in range(10**6)), policy, max_terms=500)


@settings(max_examples=30, deadline=None)
@given(a=st.fractions(-3, 3, max_denominator=100), b=st.fractions(-3, 3, max_denominator=100),
       c=st.fractions(Fraction(1, 10), 4, max_denominator=100),
       x=st.fractions(Fraction(-3, 4), Fraction(3, 4), max_denominator=100))
def test_classical_2f1_against_mpmath(a, b, c, x):
    res = eval_classical(ClassicalSeriesSpec([a, b], [c], x))
    with mpmath.workdps(60):
        ref = mpmath.hyp2f1(*(mpmath.mpf(v.numerator) / v.denominator for v in (a, b, c, x)))
    if ref != 0:
        assert abs(res.value - ref) <= 1e-35 * max(1, abs(ref))


def test_classical_term_ratio():
    mp = context(128)
    spec = ClassicalSeriesSpec([Fraction(1, 2), 3], [Fraction(5, 2)], Fraction(1, 3))
    terms = classical_terms(spec, mp)
    t = [next(terms) for _ in range(6)]
    for n in range(5):
        expected = (Fraction(1, 2) + n) * (3 + n) / ((Fraction(5, 2) + n) * (n + 1)) * Fraction(1, 3)
        assert abs(t[n + 1] / t[n] - mp.mpf(expected.numerator) / expected.denominator) < 1e-35


def test_gauss_sum_at_unit_argument_uses_acceleration():
    a, b, c = Fraction(1, 3), Fraction(1, 4), Fraction(2)
    res = eval_classical(ClassicalSeriesSpec([a, b], [c], 1))
    g = lambda v: mpmath.gamma(mpmath.mpf(v.numerator) / v.denominator)  # noqa: E731
    with mpmath.workdps(60):
        ref = g(c) * g(c - a - b) / (g(c - a) * g(c - b))
    assert rel(res.value, ref) < 1e-30


def test_terminating_series_sums_exactly():
    res = eval_classical(ClassicalSeriesSpec([-4, Fraction(1, 2)], [3], 5))
    exact = sum(
        Fraction(_rising(-4, n) * _rising(Fraction(1, 2), n), _factorial(n)) / _rising(3, n) * 5**n
        for n in range(5)
    )
    mp = context(192)
    assert abs(res.value - mp.mpf(exact.numerator) / exact.denominator) < 1e-40


def _rising(a, n):
    out = Fraction(1)
    for k in range(n):
        out *= a + k
    return out


def _factorial(n):
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def test_singular_lower_parameter():
    with pytest.raises(SingularParameterError):
        ClassicalSeriesSpec([1], [-2], Fraction(1, 2))


def test_basic_terms_match_exact_brackets():
    q = Fraction(1, 3)
    ctx = QContext(q)
    up, lo, x = [Fraction(1, 5), Fraction(-2)], [Fraction(3, 7)], Fraction(1, 2)
    terms = basic_terms(up, lo, x, ctx)
    for n in range(8):
        exact = qpoch_exact(up[0], q, n) * qpoch_exact(up[1], q, n) / (
            qpoch_exact(lo[0], q, n) * qpoch_exact(q, q, n)) * x**n
        assert abs(next(terms) - ctx.scalar(exact)) < 1e-45


@pytest.mark.parametrize("q,a,b,c,x", [("0.5", "0.3", "-0.4", "0.6", "0.7"),
                                       ("0.9", "0.2", "0.5", "0.1", "-0.5")])
def test_basic_2phi1_against_mpmath(q, a, b, c, x):
    ctx = QContext(q)
    res = eval_basic(BasicSeriesSpec([ctx.scalar(a), ctx.scalar(b)], [ctx.scalar(c)], x, ctx))
    with mpmath.workdps(60):
        ref = mpmath.qhyper([mpmath.mpf(a), mpmath.mpf(b)], [mpmath.mpf(c)], mpmath.mpf(q), mpmath.mpf(x))
    assert rel(res.value, ref) < 1e-35


@settings(max_examples=25, deadline=None)
@given(q=st.fractions(Fraction(1, 20), Fraction(9, 10), max_denominator=1000),
       a=st.fractions(-2, 2, max_denominator=1000),
       x=st.fractions(Fraction(-4, 5), Fraction(4, 5), max_denominator=1000))
def test_q_binomial_theorem(q, a, x):
    ctx = QContext(q)
    lhs = eval_basic(BasicSeriesSpec([a], [], x, ctx)).value
    rhs = qpoch_infinite(a * x, ctx) / qpoch_infinite(x, ctx)
    assert abs(lhs - rhs) <= 1e-38 * max(abs(lhs), 1)


def test_divergent_basic_argument_is_rejected():
    with pytest.raises(DomainError):
        BasicSeriesSpec([Fraction(1, 2)], [], 2, QContext(Fraction(1, 2)))


def test_qpoly_bind_matches_exact():
    poly = QPoly((Monomial(3, 1, 2), Monomial(-2, 0, 1), Monomial(5, 2, 0)))
    q = Fraction(2, 5)
    mp = context(192)
    at = poly.bind(q, mp)
    for n in range(6):
        assert abs(at(n) - mp.mpf(poly.exact(q, n).numerator) / poly.exact(q, n).denominator) < 1e-50


def test_rational_weight_sign_and_singularity():
    q = Fraction(1, 2)
    one_minus = QPoly((Monomial(1, 0, 0), Monomial(-1, 0, 1)))     # 1 - q^n
    mp = context(128)
    w = RationalWeight(q, numerators=(one_minus,), alternating=True).bind(mp)
    assert w(1) == -mp.mpf(1) / 2 and w(2) == mp.mpf(3) / 4
    inv = RationalWeight(q, denominators=(one_minus,)).bind(mp)
    with pytest.raises(SingularParameterError):
        inv(0)


def test_weighted_series_matches_manual_sum():
    ctx = QContext(Fraction(1, 2))
    base = BasicSeriesSpec([Fraction(1, 3)], [], Fraction(1, 2), ctx)
    weight = lambda mp, n: mp.mpf(n + 1)  # noqa: E731
    res = eval_weighted_series(weight, base)
    terms = basic_terms(base.upper, base.lower, base.argument, ctx)
    manual = sum((n + 1) * next(terms) for n in range(400))
    assert rel(res.value, manual) < 1e-40
