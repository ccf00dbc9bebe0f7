"""Summation of classical and basic hypergeometric series.

Every evaluator reduces to :func:`sum_terms`, which consumes a stream of
terms and applies one stopping contract: stop once ``|term| <
target * |partial sum|`` for three consecutive terms (or three consecutive
pairs when only even-indexed partial sums are meaningful).  Series on the
unit circle (classical ``|x| = 1``) converge algebraically and are summed
with Levin's u-transform instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

from .errors import (
    DivergenceError,
    DomainError,
    NumericalFailure,
    PrecisionLossError,
    SingularParameterError,
)
from .mpreal import PrecisionPolicy, context, escalate, to_scalar
from .qcore import QContext

MAX_TERMS = 10**6
CONSECUTIVE_SMALL = 3
PARITIES = {"all": None, "even": 0, "odd": 1}
GUARD_BITS = 12
LEVIN_STEP = 8
LEVIN_MAX_ORDER = 400


@dataclass(frozen=True)
class SeriesResult:
    value: object
    terms_used: int
    last_term_magnitude: object
    escalations: int = 0
    method: str = "direct"


@dataclass(frozen=True)
class ClassicalSeriesSpec:
    """``rFs[upper; lower; argument]``."""

    upper: Sequence
    lower: Sequence
    argument: object

    def __post_init__(self):
        for j, b in enumerate(self.lower):
            if _is_nonpositive_integer(b):
                raise SingularParameterError(
                    f"lower parameter #{j} = {b} is a non-positive integer", parameter=j
                )


@dataclass(frozen=True)
class BasicSeriesSpec:
    """``r phi r-1 [upper; lower; q, argument]`` with ``q`` taken from ``ctx``."""

    upper: Sequence
    lower: Sequence
    argument: object
    ctx: QContext = field(compare=False)
    require_convergent: bool = True

    def __post_init__(self):
        if self.require_convergent and not abs(self.ctx.scalar(self.argument)) < 1:
            raise DomainError(f"basic series needs |x| < 1, got x = {self.argument}")


def _is_nonpositive_integer(v) -> bool:
    if isinstance(v, (int, Fraction)):
        return v <= 0 and Fraction(v).denominator == 1
    if hasattr(v, "context"):
        return v <= 0 and v == int(v)
    return False


# --- the shared summation loop ---------------------------------------------


def sum_terms(
    terms: Iterator,
    policy: PrecisionPolicy,
    *,
    partial_sums: str = "all",
    max_terms: int = MAX_TERMS,
) -> SeriesResult:
    """Sum a term stream under the stopping contract.

    ``partial_sums="even"`` takes the limit along partial sums ending at an
    even stream index, ``t0 + (t1 + t2) + (t3 + t4) + ...``; ``"odd"`` along
    those ending at an odd index, ``(t0 + t1) + (t2 + t3) + ...``.  This gives
    a value to alternating series whose terms tend to ``±c``.
    """
    if partial_sums not in PARITIES:
        raise DomainError(f"partial_sums must be one of {sorted(PARITIES)}")
    parity = PARITIES[partial_sums]
    mp = policy.mp
    target = policy.target
    total = mp.mpf(0)
    biggest = mp.mpf(0)
    small_run = 0
    n = -1
    pending = None
    last = mp.mpf(0)
    window_max = [mp.mpf(0)]
    next_check = 2048
    for n, term in enumerate(terms):
        if n >= max_terms:
            raise NumericalFailure(f"series not converged after {max_terms} terms")
        total += term
        mag = abs(term)
        if mag > biggest:
            biggest = mag
        if parity is not None:
            if n % 2 != parity:
                pending = term
                continue
            if n == 0:
                continue
            mag = abs(pending + term)
        if mag > window_max[-1]:
            window_max[-1] = mag
        last = mag
        if mag <= target * abs(total):
            small_run += 1
            if small_run >= CONSECUTIVE_SMALL:
                break
        else:
            small_run = 0
        if n + 1 == next_check:
            # probation: the largest term of the latest window must shrink
            if len(window_max) >= 3 and window_max[-1] >= window_max[-2] >= window_max[-3]:
                raise DivergenceError(f"term magnitudes not decreasing after {n + 1} terms")
            window_max.append(mp.mpf(0))
            next_check *= 2
    _check_cancellation(total, biggest, policy)
    return SeriesResult(value=total, terms_used=n + 1, last_term_magnitude=last)


def _check_cancellation(total, biggest, policy: PrecisionPolicy):
    if total == 0 or biggest == 0:
        return
    lost = float(policy.mp.log(biggest / abs(total), 2))
    needed = -math.log2(policy.target_rel_error) + GUARD_BITS
    if policy.working_bits - max(lost, 0.0) < needed:
        raise PrecisionLossError(
            f"cancellation lost {lost:.0f} of {policy.working_bits} bits"
        )


# --- Levin u-transform --------------------------------------------------------


def levin_sum(make_terms: Callable, policy: PrecisionPolicy) -> SeriesResult:
    """Sum an algebraically converging series with Levin's u-transform.

    ``make_terms(mp)`` must return an iterator of terms computed in ``mp``.
    The transform runs at twice the working precision plus guard bits, and
    orders are raised in steps of ``LEVIN_STEP`` until two consecutive
    estimates agree to the target.
    """
    wmp = context(2 * policy.working_bits + 64)
    target = policy.target_rel_error
    it = make_terms(wmp)
    terms = []
    partial = []
    s = wmp.mpf(0)
    previous = None
    agreed = 0
    for order in range(LEVIN_STEP, LEVIN_MAX_ORDER + 1, LEVIN_STEP):
        while len(terms) <= order:
            try:
                a = next(it)
            except StopIteration:
                # a terminating series is its own sum
                value = policy.mp.mpf(s)
                return SeriesResult(value, len(terms), policy.mp.mpf(0), method="exact")
            s += a
            terms.append(a)
            partial.append(s)
        estimate, cond = _levin_u(terms[: order + 1], partial[: order + 1], wmp)
        lost = float(wmp.log(cond, 2)) if cond > 1 else 0.0
        if wmp.prec - lost < -math.log2(target) + GUARD_BITS:
            raise PrecisionLossError(f"Levin transform of order {order} lost {lost:.0f} bits")
        if previous is not None:
            change = abs(estimate - previous)
            if change <= target * abs(estimate) / 4:
                agreed += 1
                if agreed >= 2:
                    return SeriesResult(
                        value=policy.mp.mpf(estimate),
                        terms_used=order + 1,
                        last_term_magnitude=policy.mp.mpf(change),
                        method="levin",
                    )
            else:
                agreed = 0
        previous = estimate
    raise NumericalFailure(f"Levin transform not converged at order {LEVIN_MAX_ORDER}")


def _levin_u(terms, partial, mp, beta=1):
    k = len(terms) - 1
    num = mp.mpf(0)
    den = mp.mpf(0)
    scale = mp.mpf(0)
    binom = mp.mpf(1)
    for j in range(k + 1):
        if j:
            binom = binom * (k - j + 1) / j
        if terms[j] == 0:
            raise DomainError("Levin transform needs non-zero terms")
        w = binom * (mp.mpf(beta + j) / (beta + k)) ** (k - 1) / ((beta + j) * terms[j])
        if j % 2:
            w = -w
        num += w * partial[j]
        den += w
        scale += abs(w * partial[j])
    estimate = num / den
    return estimate, scale / abs(num)


# --- term generators -----------------------------------------------------------


def classical_terms(spec: ClassicalSeriesSpec, mp) -> Iterator:
    upper = [to_scalar(a, mp) for a in spec.upper]
    lower = [to_scalar(b, mp) for b in spec.lower]
    x = to_scalar(spec.argument, mp)
    term = mp.mpf(1)
    n = 0
    while True:
        yield term
        ratio = x / (n + 1)
        for a in upper:
            ratio *= a + n
        for b in lower:
            ratio /= b + n
        if ratio == 0:
            return
        term *= ratio
        n += 1


def basic_terms(upper, lower, argument, ctx: QContext) -> Iterator:
    """Terms of an ``r phi r-1`` series; stops after an exactly vanishing factor."""
    upper = [ctx.scalar(a) for a in upper]
    lower = [ctx.scalar(b) for b in lower]
    x = ctx.scalar(argument)
    q = ctx.q
    term = ctx.mp.mpf(1)
    qn = ctx.mp.mpf(1)
    n = 0
    while True:
        yield term
        num = x
        for a in upper:
            num *= 1 - a * qn
        if num == 0:
            return
        den = 1 - qn * q
        for j, b in enumerate(lower):
            f = 1 - b * qn
            if f == 0:
                raise SingularParameterError(
                    f"lower parameter #{j} vanishes at n={n}", parameter=j, index=n
                )
            den *= f
        term *= num / den
        qn *= q
        n += 1


def _terminates_classical(spec: ClassicalSeriesSpec) -> bool:
    return any(_is_nonpositive_integer(a) for a in spec.upper) or spec.argument == 0


def _on_unit_circle(x) -> bool:
    return abs(x) == 1


# --- public evaluators ----------------------------------------------------------


def eval_classical(spec: ClassicalSeriesSpec, policy: PrecisionPolicy | None = None) -> SeriesResult:
    """Sum ``rFs`` from its term ratio.

    Terminating series are summed exactly to their last term.  For
    ``|x| < 1`` the direct stopping rule applies; for ``|x| = 1`` the caller
    asserts convergence and the sum is accelerated.
    """
    policy = policy or PrecisionPolicy()
    return eval_weighted_classical(None, spec, policy)


def eval_basic(spec: BasicSeriesSpec) -> SeriesResult:
    return eval_weighted_series(None, spec)


def eval_weighted_classical(weight, spec: ClassicalSeriesSpec, policy: PrecisionPolicy | None = None,
                            partial_sums: str = "all") -> SeriesResult:
    """``sum_n weight(mp, n) * term_n`` over a classical base series."""
    policy = policy or PrecisionPolicy()
    x = to_scalar(spec.argument, policy.mp)
    terminating = _terminates_classical(spec)
    if not terminating and abs(x) > 1:
        raise DomainError(f"|x| = {x} > 1: analytic continuation is not supported")

    def make(mp):
        base = classical_terms(spec, mp)
        if weight is None:
            return base
        return _weighted(weight, base, mp)

    def run(p: PrecisionPolicy):
        if terminating:
            return sum_terms(make(p.mp), p)
        if _on_unit_circle(x):
            return levin_sum(make, p)
        return sum_terms(make(p.mp), p, partial_sums=partial_sums)

    result, escalations = escalate(run, policy)
    return _with_escalations(result, escalations)


def eval_weighted_series(weight, base: BasicSeriesSpec, partial_sums: str = "all") -> SeriesResult:
    """``sum_n weight(mp, n) * term_n`` over a basic hypergeometric base series.

    ``weight`` is ``None``, an object with ``bind(mp) -> f(n)`` such as
    :class:`RationalWeight`, or a plain callable ``(mp, n) -> Scalar``.
    """

    def run(p: PrecisionPolicy):
        ctx = base.ctx.with_policy(p)
        terms = basic_terms(base.upper, base.lower, base.argument, ctx)
        if weight is not None:
            terms = _weighted(weight, terms, ctx.mp)
        return sum_terms(terms, p, partial_sums=partial_sums)

    result, escalations = escalate(run, base.ctx.policy)
    return _with_escalations(result, escalations)


def _weighted(weight, terms, mp):
    at = weight.bind(mp) if hasattr(weight, "bind") else (lambda n: weight(mp, n))
    for n, term in enumerate(terms):
        yield at(n) * term


def _with_escalations(result: SeriesResult, escalations: int) -> SeriesResult:
    if escalations == 0:
        return result
    return SeriesResult(result.value, result.terms_used, result.last_term_magnitude,
                        escalations, result.method)


# --- polynomial weights in q^n -----------------------------------------------------


@dataclass(frozen=True)
class Monomial:
    """``coef * q**q_offset * q**(n_mult * n)``; coef and q_offset may be real."""

    coef: object
    q_offset: object = 0
    n_mult: int = 0


@dataclass(frozen=True)
class QPoly:
    """A polynomial in ``q^n`` stored as a tuple of :class:`Monomial`."""

    monomials: tuple

    def bind(self, q, mp) -> Callable[[int], object]:
        q = to_scalar(q, mp)
        coeffs = [(to_scalar(m.coef, mp) * _qpow(q, m.q_offset, mp), m.n_mult) for m in self.monomials]
        degree = max((k for _, k in coeffs), default=0)

        def at(n: int):
            t = q**n
            powers = [mp.mpf(1)]
            for _ in range(degree):
                powers.append(powers[-1] * t)
            total = mp.mpf(0)
            for c, k in coeffs:
                total += c * powers[k]
            return total

        return at

    def exact(self, q, n: int) -> Fraction:
        """Evaluate with rational ``q`` and integer exponents only."""
        q = Fraction(q)
        total = Fraction(0)
        for m in self.monomials:
            total += Fraction(m.coef) * q ** int(m.q_offset) * q ** (m.n_mult * n)
        return total


def _qpow(q, e, mp):
    if isinstance(e, int) or (isinstance(e, Fraction) and e.denominator == 1):
        return q ** int(e)
    return q ** to_scalar(e, mp)


@dataclass(frozen=True)
class RationalWeight:
    """``sign(n) * prod(numerators) / prod(denominators)`` with factors in q^n."""

    q: object
    numerators: tuple = ()
    denominators: tuple = ()
    alternating: bool = False

    def bind(self, mp) -> Callable[[int], object]:
        nums = [p.bind(self.q, mp) for p in self.numerators]
        dens = [p.bind(self.q, mp) for p in self.denominators]

        def at(n: int):
            value = mp.mpf(-1 if self.alternating and n % 2 else 1)
            for f in nums:
                value *= f(n)
            for f in dens:
                d = f(n)
                if d == 0:
                    raise SingularParameterError(f"weight denominator vanishes at n={n}", index=n)
                value /= d
            return value

        return at

    def __call__(self, mp, n: int):
        return self.bind(mp)(n)

    def exact(self, n: int) -> Fraction:
        value = Fraction(-1 if self.alternating and n % 2 else 1)
        for p in self.numerators:
            value *= p.exact(self.q, n)
        for p in self.denominators:
            value /= p.exact(self.q, n)
        return value
