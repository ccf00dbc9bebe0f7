import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qverify.abel import (
    _boundary_limit,
    AbelPair,
    RationalCoefficients,
    RationalFunction,
    SequenceSpec,
    abel_lhs,
    abel_rhs,
    abel_rhs_parts,
    certify_transformation,
    linear_form,
    random_admissible_pair,
    relative_deviation,
    sequence_from_coefficients,
    solve_vanishing_coefficient,
)
from qverify.errors import DegenerateError, DivergenceError, NoSolutionError
from qverify.qcore import QContext


def test_sequence_spec_iterates_from_ratio():
    s = SequenceSpec(Fraction(3), lambda n: Fraction(1, n + 2), start_index=0)
    assert [v for _, v in zip(range(4), (v for _, v in s.iterate()))] == [3, Fraction(3, 2),
                                                                           Fraction(1, 2), Fraction(1, 8)]
    assert s.at(3) == Fraction(1, 8)
    with pytest.raises(ValueError):
        SequenceSpec(1, lambda n: 1, start_index=2).at(0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.fractions(-5, 5, max_denominator=50), min_size=12, max_size=12),
       st.lists(st.fractions(-5, 5, max_denominator=50), min_size=12, max_size=12))
def test_finite_summation_by_parts_is_exact(a, b):
    # A_0..A_10 and B_1..B_11 exactly; the finite lemma has no limit term to estimate
    A, B = a[:11], [None] + b[:11]
    n_max = 10
    lhs = sum(B[n] * (A[n] - A[n - 1]) for n in range(1, n_max + 1))
    rhs = A[n_max] * B[n_max + 1] - A[0] * B[1] + sum(A[n] * (B[n] - B[n + 1]) for n in range(1, n_max + 1))
    assert lhs == rhs


def test_fifty_random_pairs_satisfy_the_lemma():
    rng = random.Random(20240601)
    for _ in range(50):
        q = Fraction(rng.randint(5, 80), 100)
        ctx = QContext(q)
        pair = random_admissible_pair(rng, ctx)
        lhs, rhs = abel_lhs(pair, ctx).value, abel_rhs(pair, ctx).value
        assert relative_deviation(lhs, rhs, ctx.mp.mpf(10) ** -60) <= 1e-25


def test_geometric_pair_against_closed_form():
    # A_n = r^n, B_n = s^(n-1): lhs = (r - 1) sum r^(n-1) s^(n-1) = (r - 1)/(1 - r s)
    ctx = QContext(Fraction(1, 2))
    mp = ctx.mp
    r, s = mp.mpf("0.6"), mp.mpf("-0.7")
    pair = AbelPair(SequenceSpec(mp.mpf(1), lambda n: r), SequenceSpec(mp.mpf(1), lambda n: s, start_index=1))
    expected = (r - 1) / (1 - r * s)
    assert abs(abel_lhs(pair, ctx).value - expected) < 1e-40
    parts = abel_rhs_parts(pair, ctx)
    assert parts.boundary == 0
    assert abs(parts.value - expected) < 1e-40


def test_boundary_term_is_kept_when_it_does_not_vanish():
    # A_n -> 2, B_n -> 3 with geometric corrections; the limit term is 6
    ctx = QContext(Fraction(1, 2))
    mp = ctx.mp
    A = SequenceSpec(mp.mpf(1), lambda n: (2 - mp.mpf(2) ** -(n + 1)) / (2 - mp.mpf(2) ** -n))
    B = SequenceSpec(mp.mpf(3) - mp.mpf(3) ** -1, lambda n: (3 - mp.mpf(3) ** -(n + 1)) / (3 - mp.mpf(3) ** -n),
                     start_index=1)
    pair = AbelPair(A, B)
    parts = abel_rhs_parts(pair, ctx)
    assert abs(parts.boundary - 6) < 1e-35
    assert abs(abel_lhs(pair, ctx).value - parts.value) < 1e-35


def test_unsettled_boundary_raises():
    # A_n = n + 1 and B_n = 1, so A_m B_(m+1) grows without limit
    ctx = QContext(Fraction(1, 2))
    mp = ctx.mp
    pair = AbelPair(SequenceSpec(mp.mpf(1), lambda n: mp.mpf(n + 2) / (n + 1)),
                    SequenceSpec(mp.mpf(1), lambda n: mp.mpf(1), start_index=1))
    with pytest.raises(DivergenceError):
        _boundary_limit(pair, 10, mp.mpf(1), ctx)


def test_pair_index_conventions():
    with pytest.raises(ValueError):
        AbelPair(SequenceSpec(1, lambda n: 1, start_index=1), SequenceSpec(1, lambda n: 1, start_index=1))


def test_coefficients_must_not_both_vanish():
    with pytest.raises(DegenerateError):
        RationalCoefficients(0, 0)


def test_solver_rejects_degenerate_and_unsolvable_ratios():
    ctx = QContext(Fraction(1, 2))
    with pytest.raises(DegenerateError):
        solve_vanishing_coefficient(RationalFunction([2, 1], [2, 1]), ctx)
    with pytest.raises(NoSolutionError):
        solve_vanishing_coefficient(RationalFunction([3, 1], [1, 1]), ctx)


def test_solver_excludes_roots_on_the_q_lattice():
    # r1(t) = 1 only at t = 1/4 = q^2, which would put a pole into A_2
    ctx = QContext(Fraction(1, 2))
    with pytest.raises(NoSolutionError):
        solve_vanishing_coefficient(RationalFunction([Fraction(-1, 4), 2], [0, 1]), ctx)


def test_solved_coefficients_cancel_the_pole():
    q = Fraction(1, 3)
    ctx = QContext(q)
    r1 = RationalFunction([Fraction(2, 5), Fraction(-6, 5)], [1, -q])
    coeffs = solve_vanishing_coefficient(r1, ctx)
    assert isinstance(coeffs.a2, Fraction)
    assert r1(coeffs.t_star) == 1
    assert linear_form(coeffs, ctx, coeffs.t_star) == 0


# The closed forms below are typed independently of the solver.


@pytest.mark.parametrize("q,a,b", [(Fraction(1, 2), 3, 2), (Fraction(1, 3), 2, 5), (Fraction(2, 7), 4, 1)])
def test_gosper_coefficient_is_exact(q, a, b):
    from qverify.proofs import gosper_ratio

    beta, x = q ** (1 - a), Fraction(b, a + b)
    coeffs = solve_vanishing_coefficient(gosper_ratio(beta, x, q), QContext(q))
    expected = (-q + beta * x - x + 1) / ((1 - q) * (q - beta * x))
    assert coeffs.a2 == expected


@pytest.mark.parametrize("s", [Fraction(1, 2), Fraction(1, 3), Fraction(3, 5)])
def test_cantarini_coefficient_is_exact(s):
    from qverify.proofs import cantarini_ratio

    coeffs = solve_vanishing_coefficient(cantarini_ratio(s), QContext(s * s))
    expected = -(-s - 2) / ((s + 1) ** 2 * s)
    assert coeffs.a2 == expected


def test_sequence_from_coefficients_is_the_reciprocal_linear_form():
    ctx = QContext(Fraction(1, 2))
    coeffs = RationalCoefficients(Fraction(1), Fraction(3, 7))
    seq = sequence_from_coefficients(coeffs, ctx)
    for n in range(5):
        t = Fraction(1, 2) ** n
        expected = 1 / linear_form(coeffs, ctx, t)
        assert abs(seq.at(n) - ctx.scalar(expected)) < 1e-45


def test_certify_transformation_flags_a_wrong_claim():
    ctx = QContext(Fraction(1, 2))

    def pair(c):
        mp = c.mp
        return AbelPair(SequenceSpec(mp.mpf(1), lambda n: mp.mpf("0.5")),
                        SequenceSpec(mp.mpf(1), lambda n: mp.mpf("0.25"), start_index=1))

    truth = lambda c: (c.mp.mpf("0.5") - 1) / (1 - c.mp.mpf("0.125"))  # noqa: E731
    assert certify_transformation(pair, truth, ctx).passed
    wrong = lambda c: truth(c) * (1 + c.mp.mpf(10) ** -20)  # noqa: E731
    report = certify_transformation(pair, wrong, ctx)
    assert not report.passed and report.deviations["lhs_rhs"] < 1e-40
