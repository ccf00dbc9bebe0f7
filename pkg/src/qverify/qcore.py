"""q-shifted factorials, bracket ratios and q-brackets.

Floating evaluation goes through a :class:`QContext`; the ``*_exact``
functions repeat the finite-length definitions in ``Fraction`` arithmetic
and serve as oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

from .errors import DomainError, SingularParameterError
from .mpreal import PrecisionPolicy, to_scalar

# direct multiplication is abandoned for the log series beyond this many factors
_DIRECT_FACTOR_LIMIT = 4000


@dataclass(frozen=True)
class QContext:
    """The base ``q`` together with the precision policy of an evaluation.

    ``q`` may be given as an int, Fraction, decimal string or Scalar; the
    original input is kept so escalated contexts convert it afresh.
    """

    q_input: object
    policy: PrecisionPolicy = field(default_factory=PrecisionPolicy)

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise DomainError(f"q must lie in (0, 1), got {self.q_input}")

    @classmethod
    def make(cls, q, bits: int = 192, **policy_kw) -> "QContext":
        return cls(q, PrecisionPolicy(working_bits=bits, **policy_kw))

    @property
    def mp(self):
        return self.policy.mp

    @cached_property
    def q(self):
        return to_scalar(self.q_input, self.mp)

    @property
    def target(self):
        return self.policy.target

    def scalar(self, value):
        return to_scalar(value, self.mp)

    def with_policy(self, policy: PrecisionPolicy) -> "QContext":
        return QContext(self.q_input, policy)

    def with_base(self, q) -> "QContext":
        return QContext(q, self.policy)

    def squared(self) -> "QContext":
        """Same policy, base ``q**2``."""
        q = self.q_input
        if isinstance(q, (int, Fraction)):
            return QContext(Fraction(q) ** 2, self.policy)
        return QContext(self.q * self.q, self.policy)

    def escalated(self) -> "QContext":
        return self.with_policy(self.policy.escalated())


def qpoch_finite(a, ctx: QContext, n: int):
    """``(a; q)_n`` by the recurrence ``(a;q)_k = (a;q)_{k-1} (1 - a q^{k-1})``."""
    if n < 0:
        raise DomainError("n must be non-negative")
    a = ctx.scalar(a)
    value = ctx.mp.mpf(1)
    aqk = a
    for _ in range(n):
        value *= 1 - aqk
        aqk *= ctx.q
    return value


def _log_qpoch_tail(z, ctx: QContext):
    """``log (z; q)_inf`` for ``|z| <= 1/2`` via ``-sum z^m / (m (1 - q^m))``."""
    mp = ctx.mp
    q = ctx.q
    eps = ctx.target / 4
    total = mp.mpf(0)
    zm = mp.mpf(1)
    qm = mp.mpf(1)
    absz = abs(z)
    m = 0
    while True:
        m += 1
        zm *= z
        qm *= q
        total -= zm / (m * (1 - qm))
        # remaining terms are bounded by a geometric series in |z|
        bound = absz ** (m + 1) / ((m + 1) * (1 - q) * (1 - absz))
        if bound < eps:
            return total


def qpoch_infinite(a, ctx: QContext):
    """``(a; q)_inf`` to the context's relative error target.

    Factors are multiplied directly until the remaining tail is provably
    below target.  When that would take more than a few thousand factors
    (q close to 1), the tail is summed through its logarithmic series instead.
    """
    mp = ctx.mp
    q = ctx.q
    z = ctx.scalar(a)
    eps = ctx.target / 4
    value = mp.mpf(1)
    # |log tail| <= |z| / ((1 - q) (1 - |z|)) once |z| = |a q^k| < 1
    while True:
        absz = abs(z)
        if absz < 1 and absz / ((1 - q) * (1 - absz)) < eps:
            return value
        factor = 1 - z
        if factor == 0:
            return mp.mpf(0)
        if absz <= 0.5:
            remaining = mp.log(eps * (1 - q) / (2 * absz)) / mp.log(q)
            if remaining > _DIRECT_FACTOR_LIMIT:
                return value * mp.exp(_log_qpoch_tail(z, ctx))
        value *= factor
        z *= q


@dataclass(frozen=True)
class BracketRatio:
    """``[n_1, ..., n_r; d_1, ..., d_s; q]_length``; ``length`` may be ``math.inf``."""

    numerators: Sequence
    denominators: Sequence
    length: int | float

    def __post_init__(self):
        if self.length != math.inf and (int(self.length) != self.length or self.length < 0):
            raise DomainError(f"length must be a non-negative integer or inf, got {self.length}")


def bracket_ratio(spec: BracketRatio, ctx: QContext):
    mp = ctx.mp
    nums = [ctx.scalar(v) for v in spec.numerators]
    dens = [ctx.scalar(v) for v in spec.denominators]
    if spec.length == math.inf:
        value = mp.mpf(1)
        for v in nums:
            value *= qpoch_infinite(v, ctx)
        for j, v in enumerate(dens):
            d = qpoch_infinite(v, ctx)
            if d == 0:
                raise SingularParameterError(
                    f"denominator parameter #{j} makes (b;q)_inf vanish", parameter=j
                )
            value /= d
        return value

    value = mp.mpf(1)
    qk = mp.mpf(1)
    for k in range(int(spec.length)):
        for j, v in enumerate(dens):
            f = 1 - v * qk
            if f == 0:
                raise SingularParameterError(
                    f"denominator parameter #{j} vanishes at factor k={k}", parameter=j, index=k
                )
            value /= f
        for v in nums:
            value *= 1 - v * qk
        qk *= ctx.q
    return value


def qbracket(n: int, ctx: QContext):
    """The q-number ``(1 - q^n) / (1 - q)``."""
    return (1 - ctx.q**n) / (1 - ctx.q)


# --- exact rational oracles -------------------------------------------------


def qpoch_exact(a, q, n: int) -> Fraction:
    a, q = Fraction(a), Fraction(q)
    value = Fraction(1)
    for k in range(n):
        value *= 1 - a * q**k
    return value


def bracket_ratio_exact(numerators, denominators, q, n: int) -> Fraction:
    value = Fraction(1)
    for v in numerators:
        value *= qpoch_exact(v, q, n)
    for j, v in enumerate(denominators):
        d = qpoch_exact(v, q, n)
        if d == 0:
            raise SingularParameterError(f"denominator parameter #{j} vanishes", parameter=j)
        value /= d
    return value


def qbracket_exact(n: int, q) -> Fraction:
    q = Fraction(q)
    return (1 - q**n) / (1 - q)
