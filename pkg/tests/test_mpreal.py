import pickle
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from qverify.errors import DomainError, EscalationExhausted, PrecisionLossError
from qverify.mpreal import (
    PrecisionPolicy,
    context,
    default_target,
    escalate,
    gamma,
    gamma_with_bound,
    pow,
    promote,
    spouge_error_bound,
    spouge_parameter,
    to_scalar,
)


def test_contexts_are_cached_and_fixed():
    assert context(192) is context(192)
    assert context(192).prec == 192
    assert context(256).prec == 256


def test_context_rejects_tiny_precision():
    with pytest.raises(DomainError):
        context(32)


def test_default_target_is_three_quarters_of_the_bits():
    assert default_target(192) == 2.0**-144
    assert PrecisionPolicy(192).target == 2.0**-144


def test_to_scalar_is_exact_for_fractions():
    mp = context(256)
    x = to_scalar(Fraction(1, 3), mp)
    assert abs(x * 3 - 1) < mp.mpf(2) ** -250


def test_promote_uses_the_most_precise_context():
    a, b = context(128).mpf(1) / 3, context(256).mpf(2)
    pa, pb = promote(a, b)
    assert pa.context.prec == pb.context.prec == 256


def test_pow_matches_mpmath():
    mp = context(192)
    x = mp.mpf("0.37")
    assert abs(pow(x, Fraction(7, 3)) - mpmath.mpf("0.37") ** (mpmath.mpf(7) / 3)) < 1e-15
    with pytest.raises(DomainError):
        pow(mp.mpf(-1), mp.mpf("0.5"))


def test_scalars_survive_pickling():
    x = context(200).mpf(2) / 7
    y = pickle.loads(pickle.dumps(x))
    assert y == x and y.context is x.context


def test_spouge_bound_decreases_and_parameter_meets_target():
    assert spouge_error_bound(20) < spouge_error_bound(10)
    a = spouge_parameter(1e-40)
    assert spouge_error_bound(a) < 1e-40 / 4


@pytest.mark.parametrize("x", ["0.125", "0.25", "0.5", "1", "2.5", "7", "33.3"])
def test_gamma_against_mpmath(x):
    mp = context(192)
    value, bound = gamma_with_bound(mp.mpf(x))
    with mpmath.workdps(80):
        ref = mpmath.gamma(mpmath.mpf(x))
    assert bound < 1e-40
    assert abs(value - ref) / ref < 1e-40


def test_gamma_known_values():
    mp = context(192)
    assert abs(gamma(mp.mpf(5)) - 24) < 1e-40
    assert abs(gamma(mp.mpf("0.5")) - mp.sqrt(mp.pi)) < 1e-40


@settings(max_examples=40, deadline=None)
@given(st.fractions(min_value=Fraction(1, 20), max_value=20))
def test_gamma_recurrence(x):
    mp = context(160)
    z = to_scalar(x, mp)
    assert abs(gamma(z + 1) - z * gamma(z)) <= 1e-35 * gamma(z + 1)


def test_gamma_rejects_nonpositive():
    with pytest.raises(DomainError):
        gamma(context(128).mpf(-1))


def test_escalate_doubles_precision_until_success():
    seen = []

    def fn(policy):
        seen.append(policy.working_bits)
        if policy.working_bits < 384:
            raise PrecisionLossError("not yet")
        return "ok"

    assert escalate(fn, PrecisionPolicy(96, max_escalations=2)) == ("ok", 2)
    assert seen == [96, 192, 384]


def test_escalate_gives_up():
    def fn(policy):
        raise PrecisionLossError("never")

    with pytest.raises(EscalationExhausted):
        escalate(fn, PrecisionPolicy(96, max_escalations=1))
