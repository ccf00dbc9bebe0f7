"""Arbitrary-precision reals on top of per-precision mpmath contexts.

A "Scalar" here is an ``mpf`` created by a context returned from
:func:`context`.  Its precision is ``x.context.prec``.  Contexts are cached
per bit count and never have their precision changed after creation, so
they can be shared freely; code that needs more bits asks for a different
context instead of mutating one.
"""

from __future__ import annotations

import copyreg
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache

import mpmath

from .errors import DomainError, EscalationExhausted, PrecisionLossError

MIN_BITS = 64


@lru_cache(maxsize=None)
def context(bits: int) -> mpmath.MPContext:
    """Return the shared mpmath context working at ``bits`` bits."""
    bits = int(bits)
    if bits < MIN_BITS:
        raise DomainError(f"precision must be at least {MIN_BITS} bits, got {bits}")
    ctx = mpmath.MPContext()
    ctx.prec = bits
    # each context has its own number classes; teach pickle to rebuild them
    copyreg.pickle(ctx.mpf, lambda x: (_rebuild_mpf, (bits, x._mpf_)))
    copyreg.pickle(ctx.mpc, lambda z: (_rebuild_mpc, (bits, z._mpc_)))
    return ctx


def _rebuild_mpf(bits, raw):
    return context(bits).make_mpf(raw)


def _rebuild_mpc(bits, raw):
    return context(bits).make_mpc(raw)


def default_target(bits: int) -> float:
    # three quarters of the working bits; the rest absorbs rounding in long sums
    return 2.0 ** -((3 * int(bits)) // 4)


@dataclass(frozen=True)
class PrecisionPolicy:
    working_bits: int = 192
    target_rel_error: float | None = None
    max_escalations: int = 2

    def __post_init__(self):
        if self.working_bits < MIN_BITS:
            raise DomainError(f"working_bits must be >= {MIN_BITS}")
        if self.target_rel_error is None:
            object.__setattr__(self, "target_rel_error", default_target(self.working_bits))
        if not 0 < self.target_rel_error < 1:
            raise DomainError("target_rel_error must lie in (0, 1)")
        if self.max_escalations < 0:
            raise DomainError("max_escalations must be non-negative")

    @property
    def mp(self) -> mpmath.MPContext:
        return context(self.working_bits)

    @property
    def target(self):
        """The target relative error as a Scalar of this policy's context."""
        return self.mp.mpf(self.target_rel_error)

    def escalated(self) -> "PrecisionPolicy":
        """Double the working bits.  The error target is kept."""
        return replace(self, working_bits=2 * self.working_bits)


def precision_of(x) -> int:
    return x.context.prec


def to_scalar(value, mp: mpmath.MPContext):
    """Convert ints, Fractions, decimal strings, floats or mpfs into ``mp``."""
    if isinstance(value, Fraction):
        return mp.mpf(value.numerator) / value.denominator
    return mp.mpf(value)


def promote(*xs):
    """Convert Scalars to the context of the most precise among them."""
    bits = max(precision_of(x) for x in xs if hasattr(x, "context"))
    mp = context(bits)
    return tuple(to_scalar(x, mp) for x in xs)


def const_pi(bits: int = 192):
    return context(bits).pi + 0


def pow(x, y):  # noqa: A001 - mirrors the mathematical name
    """Real power ``x**y`` for ``x > 0`` at the higher precision of the two."""
    if not hasattr(x, "context") and not hasattr(y, "context"):
        raise TypeError("pow needs at least one Scalar argument")
    if not hasattr(x, "context"):
        x = to_scalar(x, y.context)
    if not hasattr(y, "context"):
        y = to_scalar(y, x.context)
    x, y = promote(x, y)
    if x <= 0:
        raise DomainError(f"pow requires a positive base, got {x}")
    mp = x.context
    if y == 0:
        return mp.mpf(1)
    return mp.exp(y * mp.ln(x))


# --- Gamma via Spouge's approximation -------------------------------------


def spouge_error_bound(a: int) -> float:
    """A-priori relative error bound of Spouge's formula with parameter ``a``."""
    return a ** -0.5 * (2 * math.pi) ** -(a + 0.5)


def spouge_parameter(target_rel_error: float) -> int:
    """Smallest ``a`` whose error bound is below a quarter of the target."""
    a = 2
    while spouge_error_bound(a) >= target_rel_error / 4:
        a += 1
    return a


@lru_cache(maxsize=64)
def _spouge_coefficients(a: int, bits: int):
    # the alternating coefficient sum cancels roughly log2((2*pi)**a) bits
    mp = context(bits + math.ceil(2.7 * a) + 32)
    coeffs = [mp.sqrt(2 * mp.pi)]
    fact = mp.mpf(1)
    for k in range(1, a):
        if k > 1:
            fact *= k - 1
        sign = 1 if k % 2 == 1 else -1
        ak = mp.mpf(a - k)
        coeffs.append(sign * ak ** (k - mp.mpf(1) / 2) * mp.exp(ak) / fact)
    return mp, tuple(coeffs)


def gamma_with_bound(x, target_rel_error: float | None = None):
    """Return ``(Gamma(x), bound)`` where ``bound`` is the method's relative error bound."""
    mp = x.context
    if x <= 0:
        raise DomainError(f"gamma is implemented for positive arguments only, got {x}")
    if target_rel_error is None:
        target_rel_error = default_target(mp.prec)
    a = spouge_parameter(target_rel_error)
    wmp, coeffs = _spouge_coefficients(a, mp.prec)

    z = to_scalar(x, wmp)
    shift = wmp.mpf(1)
    # Gamma(x) = Gamma(x + 1) / x keeps z = x - 1 positive
    while z < 1:
        shift *= z
        z += 1
    z -= 1
    series = coeffs[0]
    for k in range(1, a):
        series += coeffs[k] / (z + k)
    za = z + a
    value = wmp.exp((z + wmp.mpf(1) / 2) * wmp.ln(za) - za) * series / shift
    bound = spouge_error_bound(a) + 2.0 ** (-mp.prec + 8)
    return mp.mpf(value), bound


def gamma(x, target_rel_error: float | None = None):
    return gamma_with_bound(x, target_rel_error)[0]


# --- precision escalation ---------------------------------------------------


def escalate(fn, policy: PrecisionPolicy):
    """Call ``fn(policy)``, doubling precision on :class:`PrecisionLossError`.

    Returns ``(result, escalations)``.
    """
    current = policy
    for attempt in range(policy.max_escalations + 1):
        try:
            return fn(current), attempt
        except PrecisionLossError as exc:
            last = exc
            current = current.escalated()
    raise EscalationExhausted(
        f"no accepted result after {policy.max_escalations} escalations "
        f"(last at {current.working_bits // 2} bits): {last}"
    )
