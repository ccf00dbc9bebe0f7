"""Summation by parts in executable form.

For sequences ``A_n`` (n >= 0) and ``B_n`` (n >= 1), Abel summation gives

    sum_{n>=1} B_n (A_n - A_{n-1})
        = lim_m A_m B_{m+1} - A_0 B_1 + sum_{n>=1} A_n (B_n - B_{n+1}).

:func:`abel_lhs` and :func:`abel_rhs` evaluate the two sides independently.
:func:`solve_vanishing_coefficient` picks ``a2`` in ``A_n = 1/(a1 [n]_q + a2)``
so that ``A_n (1 - B_{n+1}/B_n)`` loses its pole, which is what turns the
right-hand series into something with a closed form.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath

from .errors import (
    DegenerateError,
    DivergenceError,
    NoSolutionError,
)
from .hyper import SeriesResult, sum_terms
from .mpreal import PrecisionPolicy, escalate
from .qcore import QContext


@dataclass(frozen=True)
class SequenceSpec:
    """``s_{start}`` = ``initial`` and ``s_{n+1} = ratio(n) * s_n``.

    ``closed_form``, when given, is used only for consistency checks.
    """

    initial: object
    ratio: Callable[[int], object]
    start_index: int = 0
    closed_form: Callable[[int], object] | None = None

    def iterate(self, start: int | None = None):
        """Yield ``(n, s_n)`` from ``start`` (default ``start_index``) onwards."""
        n = self.start_index
        value = self.initial
        start = n if start is None else start
        if start < n:
            raise ValueError(f"sequence starts at {n}, cannot produce index {start}")
        while True:
            if n >= start:
                yield n, value
            value = value * self.ratio(n)
            n += 1

    def at(self, n: int):
        for k, value in self.iterate(n):
            return value


@dataclass(frozen=True)
class AbelPair:
    """The two sequences of the lemma plus the partial-sum convention.

    ``partial_sums="even"`` restricts every limit in the lemma to indices
    ``m`` (and partial sums ending at ``n``) that are even; this is needed
    when ``B_n`` alternates without decaying.
    """

    A: SequenceSpec
    B: SequenceSpec
    partial_sums: str = "all"

    def __post_init__(self):
        if self.A.start_index > 0:
            raise ValueError("A must be defined from n = 0")
        if self.B.start_index > 1:
            raise ValueError("B must be defined from n = 1")


@dataclass(frozen=True)
class RationalCoefficients:
    a1: object
    a2: object
    a3: object = None
    a4: object = None
    t_star: object = None

    def __post_init__(self):
        if self.a1 == 0 and self.a2 == 0:
            raise DegenerateError("(a1, a2) must not both vanish")


@dataclass(frozen=True)
class RationalFunction:
    """``num(t) / den(t)`` with coefficient lists in increasing degree."""

    num: Sequence
    den: Sequence

    def __call__(self, t):
        return _horner(self.num, t) / _horner(self.den, t)


def _horner(coeffs, t):
    value = 0
    for c in reversed(coeffs):
        value = value * t + c
    return value


def _series_parity(pair: AbelPair) -> str:
    # the summed streams start at n = 1, so "even n" is an odd stream index
    return {"all": "all", "even": "odd", "odd": "even"}[pair.partial_sums]


# --- the two sides of the lemma --------------------------------------------------


def abel_lhs(pair: AbelPair, ctx: QContext) -> SeriesResult:
    """``sum_{n>=1} B_n (A_n - A_{n-1})``."""

    def terms():
        a_iter = pair.A.iterate(0)
        _, previous = next(a_iter)
        for (_, a), (_, b) in zip(a_iter, pair.B.iterate(1)):
            yield b * (a - previous)
            previous = a

    return sum_terms(terms(), ctx.policy, partial_sums=_series_parity(pair))


@dataclass(frozen=True)
class AbelRHS:
    value: object
    boundary: object
    a0b1: object
    series: SeriesResult


def abel_rhs_parts(pair: AbelPair, ctx: QContext) -> AbelRHS:
    """The three pieces of the right-hand side, kept separate for reporting."""

    def terms():
        b_iter = pair.B.iterate(1)
        _, b = next(b_iter)
        for (_, a), (_, b_next) in zip(pair.A.iterate(1), b_iter):
            yield a * (b - b_next)
            b = b_next

    series = sum_terms(terms(), ctx.policy, partial_sums=_series_parity(pair))
    a0b1 = pair.A.at(0) * pair.B.at(1)
    scale = max(abs(series.value), abs(a0b1), ctx.mp.mpf(2) ** (-ctx.mp.prec // 3))
    boundary = _boundary_limit(pair, series.terms_used, scale, ctx)
    return AbelRHS(boundary - a0b1 + series.value, boundary, a0b1, series)


def abel_rhs(pair: AbelPair, ctx: QContext) -> SeriesResult:
    """``lim_m A_m B_{m+1} - A_0 B_1 + sum_{n>=1} A_n (B_n - B_{n+1})``."""
    parts = abel_rhs_parts(pair, ctx)
    s = parts.series
    return SeriesResult(parts.value, s.terms_used, s.last_term_magnitude, s.escalations)


def _boundary_product(pair: AbelPair, m: int):
    return pair.A.at(m) * pair.B.at(m + 1)


def _boundary_limit(pair: AbelPair, m: int, scale, ctx: QContext, doublings: int = 6):
    m = max(2 * m, 16)
    if pair.partial_sums == "even":
        m += m % 2
    tol = ctx.target * scale
    near = _boundary_product(pair, m)
    for _ in range(doublings):
        far = _boundary_product(pair, 2 * m)
        if abs(near) < tol and abs(far) < tol:
            return ctx.mp.mpf(0)
        if abs(near - far) <= ctx.target * max(abs(far), scale):
            return far
        # a slowly decaying product may still settle further out
        if abs(far) > abs(near) / 2:
            break
        near, m = far, 2 * m
    raise DivergenceError(
        f"A_m B_(m+1) does not settle: {mpmath.nstr(near, 10)} at m={m}, "
        f"{mpmath.nstr(far, 10)} at m={2 * m}"
    )


# --- the coefficient technique --------------------------------------------------------


def solve_vanishing_coefficient(r1: RationalFunction, ctx: QContext, a1=1, a3=None, a4=None,
                                root_hint=None, horizon: int = 2000) -> RationalCoefficients:
    """Choose ``a2`` so that ``A_n = 1/(a1 [n]_q + a2)`` cancels the pole.

    ``r1`` is ``B_{n+1}/B_n`` as a rational function of ``t = q^n``.  The
    pole of ``A_n`` sits where ``a1 (1 - t)/(1 - q) + a2 = 0``; its residue
    in ``A_n (1 - r1)`` vanishes exactly when ``r1 = 1`` there, so we solve
    ``r1(t*) = 1`` and set ``a2 = a1 (t* - 1)/(1 - q)``.  With exact
    rational inputs the result is exact.  ``a3``/``a4`` (the numerator of
    the second form of ``A_n``) do not affect the condition and are passed
    through.
    """
    diff = _poly_sub(list(r1.num), list(r1.den))
    while diff and diff[-1] == 0:
        diff.pop()
    if not diff:
        raise DegenerateError("r1(t) is identically 1")
    if len(diff) == 1:
        raise NoSolutionError("r1(t) = 1 has no solution (r1 - 1 is a non-zero constant)")

    q_exact = ctx.q_input if isinstance(ctx.q_input, (int, Fraction)) else None
    exact = q_exact is not None and all(isinstance(c, (int, Fraction)) for c in diff) \
        and isinstance(a1, (int, Fraction))
    candidates = _real_roots(diff, ctx, exact)
    q = Fraction(q_exact) if exact else ctx.q
    admissible = [t for t in candidates if not _is_power_of_q(t, q, horizon, ctx)]
    if not admissible:
        raise NoSolutionError("no root of r1(t) = 1 keeps A_n finite for every n")
    if len(admissible) > 1:
        if root_hint is None:
            raise NoSolutionError(f"{len(admissible)} admissible roots; pass root_hint to choose")
        admissible.sort(key=lambda t: abs(t - root_hint))
    t_star = admissible[0]
    a2 = a1 * (t_star - 1) / (1 - q)
    return RationalCoefficients(a1=a1, a2=a2, a3=a3, a4=a4, t_star=t_star)


def _poly_sub(p, r):
    n = max(len(p), len(r))
    p = p + [0] * (n - len(p))
    r = r + [0] * (n - len(r))
    return [x - y for x, y in zip(p, r)]


def _real_roots(coeffs, ctx: QContext, exact: bool):
    mp = ctx.mp
    if len(coeffs) == 2:
        c0, c1 = coeffs
        return [Fraction(-c0) / c1] if exact else [-ctx.scalar(c0) / ctx.scalar(c1)]
    # mpmath wants the leading coefficient first
    numeric = mp.polyroots([ctx.scalar(c) for c in reversed(coeffs)], maxsteps=200, extraprec=2 * mp.prec)
    tol = mp.mpf(2) ** (-mp.prec // 2)
    reals = [mp.re(r) for r in numeric if abs(mp.im(r)) <= tol * max(1, abs(r))]
    if not exact:
        return reals
    # a rational root's denominator divides the leading coefficient once
    # the polynomial is cleared to integers
    lcm = 1
    for c in coeffs:
        lcm = lcm * Fraction(c).denominator // _gcd(lcm, Fraction(c).denominator)
    lead = abs(int(Fraction(coeffs[-1]) * lcm))
    roots = []
    for r in reals:
        candidate = Fraction(str(mp.nstr(r, mp.dps))).limit_denominator(lead)
        if _horner([Fraction(c) for c in coeffs], candidate) == 0:
            roots.append(candidate)
        else:
            roots.append(r)
    return roots


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


def _is_power_of_q(t, q, horizon, ctx):
    if t <= 0 or t > 1:
        return False
    if isinstance(t, Fraction) and isinstance(q, Fraction):
        qn = Fraction(1)
        for _ in range(horizon):
            if qn == t:
                return True
            if qn < t:
                return False
            qn *= q
        return False
    n = mpmath.log(t) / mpmath.log(q)
    k = int(mpmath.nint(n))
    return abs(t - q**k) <= ctx.target * abs(t)


def linear_form(coeffs: RationalCoefficients, ctx: QContext, t):
    """``a1 (1 - t)/(1 - q) + a2``: the denominator of ``A_n`` at ``t = q^n``."""
    q = ctx.q
    if isinstance(t, Fraction) and isinstance(ctx.q_input, (int, Fraction)):
        q = Fraction(ctx.q_input)
    return coeffs.a1 * (1 - t) / (1 - q) + coeffs.a2


def sequence_from_coefficients(coeffs: RationalCoefficients, ctx: QContext) -> SequenceSpec:
    """``A_n = 1/(a1 [n]_q + a2)``, or ``(a3 [n]_q + a4)/(a1 [n]_q + a2)``."""
    mp = ctx.mp
    q = ctx.q
    a1, a2 = ctx.scalar(coeffs.a1), ctx.scalar(coeffs.a2)
    a3 = None if coeffs.a3 is None else ctx.scalar(coeffs.a3)
    a4 = None if coeffs.a4 is None else ctx.scalar(coeffs.a4)

    def value(n):
        bracket = (1 - q**n) / (1 - q)
        den = a1 * bracket + a2
        num = mp.mpf(1) if a3 is None else a3 * bracket + a4
        return num / den

    return SequenceSpec(initial=value(0), ratio=lambda n: value(n + 1) / value(n),
                        start_index=0, closed_form=value)


# --- certification ----------------------------------------------------------------


@dataclass(frozen=True)
class CertificationReport:
    lhs: object
    rhs: object
    claimed: object
    deviations: dict
    tolerance: float
    passed: bool
    bits: int
    terms_lhs: int
    terms_rhs: int
    details: dict = field(default_factory=dict)


def relative_deviation(x, y, floor):
    return abs(x - y) / max(abs(x), abs(y), floor)


def certify_transformation(pair_factory: Callable[[QContext], AbelPair],
                           claimed_closed_form: Callable[[QContext], object],
                           ctx: QContext, tolerance: float = 1e-25,
                           details: Callable[[QContext], dict] | None = None) -> CertificationReport:
    """Three-way check: lemma LHS, lemma RHS and the claimed closed form agree.

    ``pair_factory`` and ``claimed_closed_form`` are called with the
    (possibly escalated) context so nothing is evaluated at stale precision.
    """

    def run(policy: PrecisionPolicy):
        c = ctx.with_policy(policy)
        pair = pair_factory(c)
        return c, abel_lhs(pair, c), abel_rhs(pair, c), claimed_closed_form(c)

    (c, lhs, rhs, claimed), _ = escalate(run, ctx.policy)
    floor = c.mp.mpf(10) ** (-(c.mp.prec // 3))
    deviations = {
        "lhs_rhs": relative_deviation(lhs.value, rhs.value, floor),
        "lhs_claimed": relative_deviation(lhs.value, claimed, floor),
        "rhs_claimed": relative_deviation(rhs.value, claimed, floor),
    }
    passed = all(d <= tolerance for d in deviations.values())
    return CertificationReport(
        lhs=lhs.value, rhs=rhs.value, claimed=claimed, deviations=deviations,
        tolerance=tolerance, passed=passed, bits=c.mp.prec,
        terms_lhs=lhs.terms_used, terms_rhs=rhs.terms_used,
        details=details(c) if details else {},
    )


# --- randomized admissible pairs ----------------------------------------------------------


def random_admissible_pair(rng: random.Random, ctx: QContext) -> AbelPair:
    """A pair with rational-in-``q^n`` ratios for which both sides converge.

    ``A_{n+1}/A_n = c (1 - alpha t)/(1 - gamma t)`` and ``B`` follows a basic
    hypergeometric term ratio with argument ``x``; ``|x| <= 0.8`` and
    ``|c x| <= 0.8`` make every series in the lemma converge geometrically.
    """
    q = ctx.q
    mp = ctx.mp

    def draw(lo, hi):
        return mp.mpf(rng.uniform(lo, hi))

    x = draw(-0.8, 0.8)
    c = draw(-1.0, 1.0) if abs(x) > 0.8 / 1.0 else draw(-1.2, 1.2)
    while abs(c * x) > 0.8:
        c = draw(-1.2, 1.2)
    alpha, gamma = draw(-2, 2), draw(-0.9, 0.9)
    n_up = rng.randint(1, 3)
    ups = [draw(-2, 2) for _ in range(n_up)]
    downs = [draw(-0.9, 0.9) for _ in range(n_up - 1)]
    a0 = draw(0.5, 2) * rng.choice([-1, 1])
    b1 = draw(0.5, 2) * rng.choice([-1, 1])

    def ratio_a(n):
        t = q**n
        return c * (1 - alpha * t) / (1 - gamma * t)

    def ratio_b(n):
        t = q**n
        num = x
        for u in ups:
            num *= 1 - u * t
        den = 1 - q * t
        for d in downs:
            den *= 1 - d * t
        return num / den

    return AbelPair(SequenceSpec(a0, ratio_a, 0), SequenceSpec(b1, ratio_b, 1))
