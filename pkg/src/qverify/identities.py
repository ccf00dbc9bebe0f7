"""The identity registry.

Each :class:`IdentityRecord` carries its parameter box, derived quantities
and constraints as expression strings (see :mod:`qverify.expr`) plus two
evaluators.  Evaluators only use :mod:`hyper`, :mod:`qcore` and
:mod:`mpreal`; the summation-by-parts engine is a separate check.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from . import expr
from .errors import DomainError, RejectedPointError, SamplerStarvation
from .hyper import (
    BasicSeriesSpec,
    ClassicalSeriesSpec,
    Monomial,
    QPoly,
    RationalWeight,
    SeriesResult,
    eval_weighted_classical,
    eval_weighted_series,
    sum_terms,
)
from .mpreal import PrecisionPolicy, context, escalate, gamma
from .qcore import BracketRatio, QContext, bracket_ratio

SAMPLE_DENOMINATOR = 10**6
MAX_REJECTIONS = 10**4
SAMPLING_BITS = 96


@dataclass(frozen=True)
class Param:
    name: str
    lo: str
    hi: str

    def draw(self, rng: random.Random) -> Fraction:
        lo, hi = Fraction(self.lo), Fraction(self.hi)
        k = rng.randint(0, SAMPLE_DENOMINATOR)
        return lo + (hi - lo) * Fraction(k, SAMPLE_DENOMINATOR)


@dataclass(frozen=True)
class Evaluation:
    value: object
    terms: int = 0


@dataclass
class Env:
    """Parameters and derived quantities of one point at one precision."""

    point: dict
    policy: PrecisionPolicy
    values: dict = field(default_factory=dict)

    @property
    def mp(self):
        return self.policy.mp

    @property
    def ctx(self) -> QContext:
        return QContext(self.point["q"], self.policy)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None


@dataclass(frozen=True)
class IdentityRecord:
    id: str
    citation: str
    params: tuple
    lhs: Callable[[Env], Evaluation]
    rhs: Callable[[Env], Evaluation]
    derived: tuple = ()
    constraints: tuple = ()
    guards: tuple = ()
    tolerance: float = 1e-30
    experimental: bool = False
    note: str = ""

    @property
    def param_names(self):
        return [p.name for p in self.params]

    def environment(self, point: dict, policy: PrecisionPolicy) -> Env:
        mp = policy.mp
        values = {name: _to_mp(point[name], mp) for name in self.param_names}
        for name, src in self.derived:
            values[name] = expr.evaluate(src, values, mp)
        return Env(point, policy, values)

    def violated(self, point: dict, include_guards: bool = False, bits: int = SAMPLING_BITS):
        """The first failing predicate, or ``None``."""
        env = self.environment(point, PrecisionPolicy(bits))
        checks = self.constraints + (self.guards if include_guards else ())
        for src in checks:
            try:
                ok = expr.evaluate(src, env.values, env.mp)
            except (DomainError, ZeroDivisionError):
                ok = False
            if not ok:
                return src
        return None

    def describe(self) -> dict:
        return {
            "id": self.id,
            "citation": self.citation,
            "params": [{"name": p.name, "lo": p.lo, "hi": p.hi} for p in self.params],
            "derived": {name: src for name, src in self.derived},
            "constraints": list(self.constraints),
            "sampling_guards": list(self.guards),
            "tolerance": repr(self.tolerance),
            "experimental": self.experimental,
        }


def _to_mp(value, mp):
    if isinstance(value, Fraction):
        return mp.mpf(value.numerator) / value.denominator
    return mp.mpf(value)


# --- evaluator helpers ---------------------------------------------------------------


def _series(result: SeriesResult) -> Evaluation:
    return Evaluation(result.value, result.terms_used)


def _phi(env: Env, upper, lower, x, weight=None, ctx=None, partial_sums="all") -> SeriesResult:
    ctx = ctx or env.ctx
    spec = BasicSeriesSpec(upper, lower, x, ctx, require_convergent=partial_sums == "all")
    return eval_weighted_series(weight, spec, partial_sums=partial_sums)


def _products(env: Env, nums, dens, ctx=None):
    return bracket_ratio(BracketRatio(nums, dens, math.inf), ctx or env.ctx)


def _classical(env: Env, upper, lower, x, weight=None) -> SeriesResult:
    return eval_weighted_classical(weight, ClassicalSeriesSpec(upper, lower, x), env.policy)


def _gamma(env: Env, x):
    return gamma(x, env.policy.target_rel_error / 16)


# --- Gosper and its q-analogues ------------------------------------------------------


def _g1_lhs(e: Env):
    return _series(_classical(e, [1 - e.a, e.b], [e.b + 2], e.b / (e.a + e.b)))


def _g1_rhs(e: Env):
    return Evaluation((e.b + 1) * (e.a / (e.a + e.b)) ** e.a)


def _g2_lhs(e: Env):
    q = e.q
    return _series(_phi(e, [q ** (1 - e.a), q**e.b], [q ** (e.b + 2)], e.lam))


def _g2_rhs(e: Env):
    q = e.q
    return Evaluation((1 - q ** (e.b + 1)) / (1 - q) * _products(e, [e.lam * q ** (-e.a)], [e.lam]))


def g3_p_factors(a, b):
    """``p(n)`` as two polynomials in ``t = q^n``, monomial for monomial."""
    first = QPoly((
        Monomial(b, a, 1),        # b q^(a+n)
        Monomial(a, a, 1),        # a q^(a+n)
        Monomial(-a, a, 0),       # -a q^a
        Monomial(-b, 0, 1),       # -b q^n
    ))
    second = QPoly((
        Monomial(b, a + 1, 1),    # b q^(a+n+1)
        Monomial(a, a + 1, 1),    # a q^(a+n+1)
        Monomial(-a, a, 0),       # -a q^a
        Monomial(-b, 1, 1),       # -b q^(n+1)
    ))
    return first, second


def _g3_lhs(e: Env):
    q, a, b = e.q, e.a, e.b
    weight = RationalWeight(q, denominators=g3_p_factors(a, b))
    s = _phi(e, [q ** (1 - a)], [], b * q / (a + b), weight=weight)
    return Evaluation((a + b) * (1 - q) ** 2 * q ** (2 * a - 1) * s.value, s.terms_used)


def _g3_rhs(e: Env):
    q, a, b = e.q, e.a, e.b
    first = (a + b) * (1 - q) * q ** (2 * a - 1) / (b * (1 - q**a) * (a * q**a - b * (1 - q**a)))
    s = _phi(e, [q ** (1 - a), q], [q**2], e.x)
    return Evaluation(first - s.value / (q * (a + b - b * q ** (-a))), s.terms_used)


# --- Heine ------------------------------------------------------------------------


def _h1_lhs(e: Env):
    return _series(_phi(e, [e.a, e.b], [e.c], e.c / (e.a * e.b)))


def _h1_rhs(e: Env):
    a, b, c = e.a, e.b, e.c
    return Evaluation(_products(e, [c / a, c / b], [c, c / (a * b)]))


def _h2_lhs(e: Env):
    q, a, b, c, d = e.q, e.a, e.b, e.c, e.d
    return _series(_phi(e, [a, b, d], [c, d * q**2], c * q**2 / (a * b)))


def _h2_rhs(e: Env):
    q, a, b, c, d = e.q, e.a, e.b, e.c, e.d
    scale = -(a * b - c * q) * (1 - d) * (1 - d * q) * q / ((1 - q) * (q - a) * (q - b) * c)
    return Evaluation(scale * _products(e, [c * q / a, c * q / b], [c, c * q**2 / (a * b)]))


# --- Bailey-Daum and its variants ------------------------------------------------------


def _bailey_daum_factor(e: Env, s: int, t: int):
    """``[-q^s; -q^s/b, aq/b]_inf [aq^t, aq^(t+1)/b^2; q^2]_inf``."""
    q, a, b = e.q, e.a, e.b
    first = _products(e, [-(q**s)], [-(q**s) / b, a * q / b])
    second = _products(e, [a * q**t, a * q ** (t + 1) / b**2], [], ctx=e.ctx.squared())
    return first * second


def _k1_lhs(e: Env):
    q, a, b = e.q, e.a, e.b
    return _series(_phi(e, [a, b], [a * q / b], -q / b))


def _k1_rhs(e: Env):
    return Evaluation(_bailey_daum_factor(e, 1, 1))


def _k2_lhs(e: Env):
    q, a, b = e.q, e.a, e.b
    ra, rq = e.mp.sqrt(a), e.mp.sqrt(q)
    upper = [a, ra * q, -ra * q, ra / rq, -ra / rq, b]
    lower = [ra, -ra, ra * q * rq, -ra * q * rq, a * q / b]
    return _series(_phi(e, upper, lower, -q**2 / b))


def _k2_rhs(e: Env):
    return Evaluation((1 - e.a * e.q) * _bailey_daum_factor(e, 2, 2))


def _k3_lhs(e: Env):
    q, a, b = e.q, e.a, e.b
    upper = [a, b, (a + b) / (q + b), (a + b) * q / (1 + b)]
    lower = [a * q / b, (a + b) * q**2 / (q + b), (a + b) / (1 + b)]
    return _series(_phi(e, upper, lower, -q**2 / b))


def _k3_rhs(e: Env):
    q, a, b = e.q, e.a, e.b
    return Evaluation((q - a * q + b - b * q) / b * _bailey_daum_factor(e, 1, 2))


def _k4_lhs(e: Env):
    q, a, b = e.q, e.a, e.b
    upper = [a, b, (q + b) * a / ((a + b) * q), (1 + b) * a * q / (a + b)]
    lower = [a * q / b, (q + b) * a * q / (a + b), (1 + b) * a / (a + b)]
    return _series(_phi(e, upper, lower, -q / b))


def _k4_rhs(e: Env):
    q, a, b = e.q, e.a, e.b
    return Evaluation((a + b - a * q - a * b) / b * _bailey_daum_factor(e, 1, 2))


def _k5_lhs(e: Env):
    q, a, b, c, d = e.q, e.a, e.b, e.c, e.d
    ra = e.mp.sqrt(a)
    upper = [a, ra * q, -ra * q, b, c, d]
    lower = [ra, -ra, a * q / b, a * q / c, a * q / d]
    return _series(_phi(e, upper, lower, a * q / (b * c * d)))


def _k5_rhs(e: Env):
    q, a, b, c, d = e.q, e.a, e.b, e.c, e.d
    aq = a * q
    return Evaluation(_products(e, [aq, aq / (b * c), aq / (b * d), aq / (c * d)],
                                [aq / b, aq / c, aq / d, aq / (b * c * d)]))


# --- Dougall ---------------------------------------------------------------------------


def _d1_lhs(e: Env):
    a, b, c, d = e.a, e.b, e.c, e.d
    return _series(_classical(e, [a, a / 2 + 1, b, c, d], [a / 2, a - b + 1, a - c + 1, a - d + 1], 1))


def _d1_rhs(e: Env):
    a, b, c, d = e.a, e.b, e.c, e.d
    g = lambda x: _gamma(e, x)  # noqa: E731
    num = g(a - b + 1) * g(a - c + 1) * g(a - d + 1) * g(a - b - c - d + 1)
    den = g(a + 1) * g(a - b - c + 1) * g(a - b - d + 1) * g(a - c - d + 1)
    return Evaluation(num / den)


def _d2_lhs(e: Env):
    a, b, c = e.a, e.b, e.c
    return _series(_classical(e, [a, a / 2 + 1, b, c], [a / 2, a - b + 1, a - c + 1], -1))


def _d2_rhs(e: Env):
    a, b, c = e.a, e.b, e.c
    g = lambda x: _gamma(e, x)  # noqa: E731
    return Evaluation(g(a - b + 1) * g(a - c + 1) / (g(a + 1) * g(a - b - c + 1)))


# --- central binomial series ----------------------------------------------------------
# binom(2n, n)^3 / (-64)^n is the term of 3F2[1/2, 1/2, 1/2; 1, 1; -1]


def _binomial_cubed_series(e: Env, weight) -> SeriesResult:
    half = Fraction(1, 2)
    return _classical(e, [half, half, half], [1, 1], -1, weight=weight)


def cantarini_weight(mp, n):
    return mp.mpf((4 * n + 1) ** 2) / ((4 * n - 1) * (4 * n + 3))


def c3_weight(mp, n):
    return mp.mpf((2 * n + 1) * (4 * n * n + 8 * n + 5)) / (n + 1) ** 3


def _c1_lhs(e: Env):
    return _series(_binomial_cubed_series(e, cantarini_weight))


def _c1_rhs(e: Env):
    mp = e.mp
    quarter, eighth = mp.mpf(1) / 4, mp.mpf(1) / 8
    return Evaluation(-32 * (2 + mp.sqrt(2)) * _gamma(e, quarter) ** 2 / _gamma(e, eighth) ** 4)


def _b1_lhs(e: Env):
    return _series(_binomial_cubed_series(e, lambda mp, n: mp.mpf(4 * n + 1)))


def _b1_rhs(e: Env):
    return Evaluation(2 / e.mp.pi)


def _c3_lhs(e: Env):
    return _series(_binomial_cubed_series(e, c3_weight))


def _c3_rhs(e: Env):
    # consistency with the q -> 1 limit of both C2 sides, not a closed form
    s = _binomial_cubed_series(e, cantarini_weight)
    return Evaluation(8 + 8 * s.value, s.terms_used)


# --- the q-Cantarini identity ------------------------------------------------------------


def _m(coef, offset, mult):
    return Monomial(coef, offset, mult)


RHO1 = QPoly((
    _m(-8, 0, 2), _m(-7, 1, 2), _m(-6, 2, 2), _m(-9, 3, 2), _m(-4, 4, 2), _m(-1, 5, 2),
    _m(2, 6, 2), _m(1, 7, 2), _m(4, 1, 4), _m(8, 2, 4), _m(4, 3, 4), _m(16, 1, 0),
))
RHO2 = QPoly((
    _m(-11, 2, 2), _m(2, 3, 2), _m(-2, 5, 2), _m(-1, 6, 2), _m(-1, 3, 4), _m(12, 4, 4),
    _m(1, 5, 4), _m(-1, 6, 4), _m(1, 8, 4), _m(-4, 6, 6), _m(1, 4, 0), _m(1, 3, 0),
    _m(-1, 2, 0), _m(-1, 1, 0), _m(4, 0, 0),
))
C2_LHS_DEN = (
    QPoly((_m(1, 0, 2), _m(1, 1, 2), _m(-2, 1, 0))),     # q^(2n) + q^(2n+1) - 2q
    QPoly((_m(1, 1, 2), _m(1, 2, 2), _m(-2, 0, 0))),     # q^(2n+1) + q^(2n+2) - 2
)
_ONE_MINUS = QPoly((_m(1, 0, 0), _m(-1, 1, 1)))          # 1 - q^(n+1)
_ONE_PLUS = QPoly((_m(1, 1, 1), _m(1, 0, 0)))            # q^(n+1) + 1
C2_RHS_DEN = (_ONE_MINUS,) * 3 + (_ONE_PLUS,) * 3


def c2_base(e: Env, weight) -> SeriesResult:
    """``sum (-1)^n [q, q, q; q^2, q^2, q^2; q^2]_n w(n)`` along even partial sums."""
    q = e.q
    return _phi(e, [q, q, q], [q**2, q**2], 1, weight=weight, ctx=e.ctx.squared(),
                partial_sums="even")


def c2_infinite_bracket(e: Env):
    q = e.q
    return _products(e, [q, q, q], [q**2, q**2, q**2], ctx=e.ctx.squared())


def _c2_lhs(e: Env):
    weight = RationalWeight(e.q, numerators=(RHO1,), denominators=C2_LHS_DEN, alternating=True)
    return _series(c2_base(e, weight))


def _c2_rhs(e: Env):
    q = e.q
    weight = RationalWeight(q, numerators=(RHO2,), denominators=C2_RHS_DEN, alternating=True)
    s = c2_base(e, weight)
    head = (1 - q) * (1 + q) ** 2 * q / 2 * c2_infinite_bracket(e) - (1 + q) ** 2 * q**2
    return Evaluation(head + s.value, s.terms_used)


# --- q-binomial theorem ---------------------------------------------------------------


def _qb_lhs(e: Env):
    return _series(_phi(e, [e.alpha], [], e.x))


def _qb_rhs(e: Env):
    return Evaluation(_products(e, [e.alpha * e.x], [e.x]))


# --- the double series --------------------------------------------------------------------


def _x1_lhs(e: Env):
    mp, policy = e.mp, e.policy

    def inner(n):
        u = mp.mpf(2 * n + 1) / (8 * (n + 1))
        v = mp.mpf(2 * n - 1) / (8 * n)

        def terms():
            um = vm = mp.mpf(1)
            m = 0
            while True:
                yield (n * um - (n + 1) * vm) / (m + n + 1)
                um *= u
                vm *= v
                m += 1

        return sum_terms(terms(), policy).value

    def outer():
        central = mp.mpf(1)          # binom(2n, n) / 16^n
        n = 1
        while True:
            central *= mp.mpf(2 * (2 * n - 1)) / (16 * n)
            yield central / (n * (n + 1)) * inner(n)
            n += 1

    return _series(sum_terms(outer(), policy))


def _x1_rhs(e: Env):
    mp = e.mp
    r3 = mp.sqrt(3)
    return Evaluation(16 - 8 * r3 + 8 * mp.log(7 * (2 + r3) ** 2 / 128))


# --- the registry ------------------------------------------------------------------------

_LOWER_NONZERO = "forall n in 0..400: abs(1 - {p} * q**n) > 1e-9"


def _nonzero(*params):
    return tuple(_LOWER_NONZERO.format(p=f"({p})") for p in params)


_Q = Param("q", "0.05", "0.8")

RECORDS = (
    IdentityRecord(
        "G1", "Gosper's strange 2F1 evaluation",
        (Param("a", "0.1", "5"), Param("b", "0.1", "5")),
        _g1_lhs, _g1_rhs,
        derived=(("x", "b/(a+b)"),),
        constraints=("a > 0", "b > 0", "abs(x) < 1"),
        guards=("x <= 0.95",),
        note="non-integer a gives a non-terminating series",
    ),
    IdentityRecord(
        "G2", "q-analogue of Gosper's evaluation at argument lambda",
        (Param("q", "0.05", "0.98"), Param("a", "0.1", "5"), Param("b", "0.1", "5")),
        _g2_lhs, _g2_rhs,
        derived=(("lam", "(1 - q**b) * q**(a+1) / (1 - q**(a+b))"),),
        constraints=("abs(lam) < 1",),
    ),
    IdentityRecord(
        "G3", "second q-analogue of Gosper's evaluation, weighted by 1/p(n)",
        (_Q, Param("a", "0.1", "5"), Param("b", "0.1", "5")),
        _g3_lhs, _g3_rhs,
        derived=(("x", "b/(a+b)"),),
        constraints=(
            "abs(x) < 1",
            "forall n in 0..400: (b*q**(a+n) + a*q**(a+n) - a*q**a - b*q**n) != 0",
            "(1 - q**a) * (a*q**a - b*(1 - q**a)) != 0",
            "a + b - b*q**(-a) != 0",
        ),
        guards=(
            "forall n in 0..400: abs(b*q**(a+n) + a*q**(a+n) - a*q**a - b*q**n) > 1e-6",
            "abs(a*q**a - b*(1 - q**a)) > 1e-3",
            "abs(a + b - b*q**(-a)) > 1e-3",
        ),
    ),
    IdentityRecord(
        "H1", "Heine's q-analogue of Gauss' summation",
        (_Q, Param("a", "0.2", "2.5"), Param("b", "0.2", "2.5"), Param("c", "0.05", "0.95")),
        _h1_lhs, _h1_rhs,
        constraints=("abs(c/(a*b)) < 1",),
        guards=("abs(c/(a*b)) <= 0.9",),
    ),
    IdentityRecord(
        "H2", "3phi2 variant of Heine's q-Gauss summation",
        (_Q, Param("a", "0.2", "2.5"), Param("b", "0.2", "2.5"), Param("c", "0.05", "0.95")),
        _h2_lhs, _h2_rhs,
        derived=(("d", "(a*b*q + a*b*c - a*c*q - b*c*q) / ((a*b - c*q) * q)"),),
        constraints=("abs(c*q**2/(a*b)) < 1", "a*b != c*q", "a != q", "b != q"),
        guards=("abs(c*q**2/(a*b)) <= 0.9", "abs(a*b - c*q) > 0.01", "abs(a - q) > 0.01",
                "abs(b - q) > 0.01") + _nonzero("d*q**2", "c"),
        note="d is read as (abq + abc - acq - bcq) / ((ab - cq) q)",
    ),
    IdentityRecord(
        "K1", "Bailey-Daum q-analogue of Kummer's summation",
        (_Q, Param("a", "0.05", "0.95"), Param("b", "0.3", "5")),
        _k1_lhs, _k1_rhs,
        constraints=("abs(q/b) < 1",),
        guards=("abs(q/b) <= 0.9",) + _nonzero("a*q/b"),
    ),
    IdentityRecord(
        "K2", "6phi5 variant of the Bailey-Daum summation",
        (_Q, Param("a", "0.05", "0.95"), Param("b", "0.3", "5")),
        _k2_lhs, _k2_rhs,
        constraints=("abs(q**2/b) < 1", "a > 0"),
        guards=("abs(q**2/b) <= 0.9",) + _nonzero("a*q/b", "sqrt(a)", "sqrt(a)*q*sqrt(q)"),
        note="square roots of a and q are taken positive",
    ),
    IdentityRecord(
        "K3", "4phi3 variant of the Bailey-Daum summation at argument -q^2/b",
        (_Q, Param("a", "0.05", "0.95"), Param("b", "0.3", "5")),
        _k3_lhs, _k3_rhs,
        constraints=("abs(q**2/b) < 1", "q + b != 0", "1 + b != 0", "a + b != 0"),
        guards=("abs(q**2/b) <= 0.9",) + _nonzero("a*q/b", "(a+b)*q**2/(q+b)", "(a+b)/(1+b)"),
    ),
    IdentityRecord(
        "K4", "4phi3 variant of the Bailey-Daum summation at argument -q/b",
        (_Q, Param("a", "0.05", "0.95"), Param("b", "0.3", "5")),
        _k4_lhs, _k4_rhs,
        constraints=("abs(q/b) < 1", "a + b != 0"),
        guards=("abs(q/b) <= 0.9",) + _nonzero("a*q/b", "(q+b)*a*q/(a+b)", "(1+b)*a/(a+b)"),
    ),
    IdentityRecord(
        "K5", "very-well-poised 6phi5 summation",
        (_Q, Param("a", "0.05", "0.95"), Param("b", "0.5", "4"), Param("c", "0.5", "4"),
         Param("d", "0.5", "4")),
        _k5_lhs, _k5_rhs,
        constraints=("abs(a*q/(b*c*d)) < 1", "a > 0"),
        guards=("abs(a*q/(b*c*d)) <= 0.9",) + _nonzero("a*q/b", "a*q/c", "a*q/d", "sqrt(a)"),
    ),
    IdentityRecord(
        "D1", "Dougall's 5F4 summation",
        (Param("a", "1", "6"), Param("b", "0.1", "1.5"), Param("c", "0.1", "1.5"),
         Param("d", "0.1", "1.5")),
        _d1_lhs, _d1_rhs,
        constraints=("a - b - c - d + 1 > 0", "a - b - c + 1 > 0", "a - b - d + 1 > 0",
                     "a - c - d + 1 > 0", "a - b + 1 > 0", "a - c + 1 > 0", "a - d + 1 > 0",
                     "a > 0"),
        guards=("a - b - c - d + 1 >= 0.5",),
        tolerance=1e-25,
        note="all Gamma arguments are kept positive",
    ),
    IdentityRecord(
        "D2", "Dougall's summation in the limit d -> -infinity (4F3 at -1)",
        (Param("a", "0.5", "6"), Param("b", "0.1", "2"), Param("c", "0.1", "2")),
        _d2_lhs, _d2_rhs,
        constraints=("a - 2*b - 2*c + 2 > 0", "a - b - c + 1 > 0", "a - b + 1 > 0",
                     "a - c + 1 > 0", "a > 0"),
        guards=("a - b - c + 1 >= 0.2", "a - 2*b - 2*c + 2 >= 0.5"),
        tolerance=1e-25,
        note="the alternating series converges when a - 2b - 2c + 2 > 0",
    ),
    IdentityRecord(
        "C1", "Cantarini's series for Gamma(1/4)^2 / Gamma(1/8)^4",
        (), _c1_lhs, _c1_rhs, tolerance=1e-25,
    ),
    IdentityRecord(
        "C2", "q-analogue of Cantarini's series",
        (_Q,), _c2_lhs, _c2_rhs,
        note="both series are summed along partial sums ending at an even index",
    ),
    IdentityRecord(
        "C3", "q -> 1 limit of the right-hand series of C2",
        (), _c3_lhs, _c3_rhs, tolerance=1e-25,
        note="checked against 8 + 8*C1, the relation implied by the q -> 1 limit of C2",
    ),
    IdentityRecord(
        "B1", "Bauer-Ramanujan series for 2/pi",
        (), _b1_lhs, _b1_rhs,
    ),
    IdentityRecord(
        "QB", "q-binomial theorem",
        (Param("q", "0.05", "0.9"), Param("alpha", "-2", "2"), Param("x", "-0.9", "0.9")),
        _qb_lhs, _qb_rhs,
        constraints=("abs(x) < 1",),
    ),
    IdentityRecord(
        "X1", "double series with central binomial weights",
        (), _x1_lhs, _x1_rhs, experimental=True,
        note="read as an equality; reported but never gates the exit status",
    ),
)

REGISTRY = {r.id: r for r in RECORDS}


def get(identity_id: str) -> IdentityRecord:
    try:
        return REGISTRY[identity_id]
    except KeyError:
        raise KeyError(f"unknown identity {identity_id!r}") from None


def registry_json() -> str:
    return json.dumps([r.describe() for r in RECORDS], indent=2)


# --- evaluation and verification ----------------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    id: str
    params: dict
    lhs: object
    rhs: object
    rel_error: object
    terms_lhs: int
    terms_rhs: int
    bits: int
    tolerance: float
    passed: bool
    experimental: bool = False

    def as_strings(self) -> dict:
        """JSON-ready form; numbers become decimal strings."""
        digits = max(20, int(self.bits * math.log10(2)))
        fmt = lambda v: _decimal(v, digits)  # noqa: E731
        return {
            "params": {k: str(v) for k, v in self.params.items()},
            "lhs": fmt(self.lhs),
            "rhs": fmt(self.rhs),
            "rel_error": _decimal(self.rel_error, 6),
            "terms_lhs": self.terms_lhs,
            "terms_rhs": self.terms_rhs,
            "bits": self.bits,
            "pass": self.passed,
        }


def _decimal(value, digits):
    import mpmath

    return mpmath.nstr(value, digits, min_fixed=-5, max_fixed=5, strip_zeros=False)


def relative_error(lhs, rhs, bits: int):
    mp = context(bits)
    floor = mp.mpf(10) ** (-mp.mpf(bits) / 3)
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), floor)


def check_point(record: IdentityRecord, point: dict):
    if set(point) != set(record.param_names):
        raise RejectedPointError(
            f"{record.id} takes parameters {record.param_names}, got {sorted(point)}", predicate=None
        )
    failed = record.violated(point)
    if failed:
        raise RejectedPointError(f"{record.id}: point violates {failed!r}", predicate=failed)


def evaluate(identity_id: str, point: dict, policy: PrecisionPolicy | None = None,
             tolerance: float | None = None, rhs_factor=None) -> VerificationReport:
    """Evaluate both sides of one identity at one point.

    ``rhs_factor`` multiplies the right-hand side; it exists for negative
    controls.
    """
    record = get(identity_id)
    policy = policy or PrecisionPolicy()
    point = {k: Fraction(v) for k, v in point.items()}
    check_point(record, point)
    tolerance = record.tolerance if tolerance is None else tolerance

    def run(p: PrecisionPolicy):
        env = record.environment(point, p)
        return p, record.lhs(env), record.rhs(env)

    (p, lhs, rhs), _ = escalate(run, policy)
    rhs_value = rhs.value
    if rhs_factor is not None:
        rhs_value = rhs_value * p.mp.mpf(rhs_factor)
    bits = p.working_bits
    err = relative_error(lhs.value, rhs_value, bits)
    return VerificationReport(
        id=record.id, params=point, lhs=lhs.value, rhs=rhs_value, rel_error=err,
        terms_lhs=lhs.terms, terms_rhs=rhs.terms, bits=bits, tolerance=tolerance,
        passed=bool(err <= tolerance), experimental=record.experimental,
    )


def sample_point(identity_id: str, seed: int, index: int = 0) -> dict:
    """Deterministic rejection sample from the record's box."""
    record = get(identity_id)
    rng = random.Random(f"{identity_id}:{seed}:{index}")
    for _ in range(MAX_REJECTIONS):
        point = {p.name: p.draw(rng) for p in record.params}
        if record.violated(point, include_guards=True) is None:
            return point
    raise SamplerStarvation(f"{identity_id}: no admissible point after {MAX_REJECTIONS} draws")


def sample_points(identity_id: str, n_samples: int, seed: int) -> list:
    """``n_samples`` points; parameter-free records yield a single point."""
    if n_samples < 1:
        raise DomainError("n_samples must be at least 1")
    if not get(identity_id).params:
        return [{}]
    return [sample_point(identity_id, seed, i) for i in range(n_samples)]


@dataclass(frozen=True)
class VerificationSummary:
    id: str
    reports: tuple
    max_rel_error: object
    passed: bool
    experimental: bool


def summarize(identity_id: str, reports) -> VerificationSummary:
    reports = tuple(reports)
    return VerificationSummary(
        id=identity_id, reports=reports,
        max_rel_error=max(r.rel_error for r in reports),
        passed=all(r.passed for r in reports),
        experimental=get(identity_id).experimental,
    )


def verify(identity_id: str, n_samples: int = 25, policy: PrecisionPolicy | None = None,
           tolerance: float | None = None, seed: int = 0, rhs_factor=None,
           mapper=map) -> VerificationSummary:
    """Evaluate at ``n_samples`` sampled points.

    ``mapper`` may be an executor's ``map``; results keep point order.
    """
    points = sample_points(identity_id, n_samples, seed)
    policy = policy or PrecisionPolicy()
    jobs = [(identity_id, p, policy, tolerance, rhs_factor) for p in points]
    return summarize(identity_id, mapper(_evaluate_job, jobs))


def _evaluate_job(job):
    return evaluate(*job)
