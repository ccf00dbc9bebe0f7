"""Summation-by-parts data behind the q-identities.

Each :class:`ProofPair` names the registry identity whose proof it carries,
builds the sequences ``A_n`` and ``B_n`` from their term ratios, and gives
the value the transformation is supposed to produce.  The claimed values
use registry right-hand sides or direct closed forms, never the lemma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from . import identities
from .abel import (
    AbelPair,
    CertificationReport,
    RationalCoefficients,
    RationalFunction,
    SequenceSpec,
    certify_transformation,
    solve_vanishing_coefficient,
)
from .hyper import BasicSeriesSpec, RationalWeight, eval_basic
from .mpreal import PrecisionPolicy
from .qcore import BracketRatio, QContext, bracket_ratio


@dataclass(frozen=True)
class ProofPair:
    id: str
    identity: str
    description: str
    pair: Callable[[identities.Env], AbelPair]
    claimed: Callable[[identities.Env], object]
    details: Callable[[identities.Env], dict] | None = None


def _env(identity_id: str, point: dict, ctx: QContext) -> identities.Env:
    return identities.get(identity_id).environment(point, ctx.policy)


def _hyper_b(e, nums, dens, x, shift=1):
    """``B_n = [nums; q, dens; q]_(n-shift) x^(n-shift)`` as a ratio sequence from ``n = 1``."""
    q = e.q

    def ratio(n):
        k = n - shift
        num = x
        for u in nums:
            num *= 1 - u * q**k
        den = 1 - q ** (k + 1)
        for d in dens:
            den *= 1 - d * q**k
        return num / den

    return SequenceSpec(e.mp.mpf(1), ratio, start_index=1)


def _from_closed_form(f, start=0):
    return SequenceSpec(f(start), lambda n: f(n + 1) / f(n), start_index=start, closed_form=f)


def _first_difference_scale(A):
    # B_1 = 1 and the summand ratio is hypergeometric, so the first term fixes the scale
    return A(1) - A(0)


# --- the Gosper q-analogue ----------------------------------------------------------


def _g2_A(e):
    q, b = e.q, e.b
    return lambda n: (1 - q) * q**n / (1 - q ** (b + n))


def _g2_pair(e):
    q = e.q
    return AbelPair(_from_closed_form(_g2_A(e)), _hyper_b(e, [q ** (1 - e.a)], [], e.lam / q))


def _g2_claimed(e):
    q, a, b, lam = e.q, e.a, e.b, e.lam
    ratio = bracket_ratio(BracketRatio([lam * q ** (-a)], [lam], math.inf), e.ctx)
    return -(1 - q) / (1 - q**b) * ratio


# --- Heine variant ---------------------------------------------------------------------


def _h2_A(e):
    q, a, b, c = e.q, e.a, e.b, e.c
    big = a * b * q + a * b * c - a * c * q - b * c * q
    return lambda n: (1 - q) * (a * b - c * q) * q ** (n - 1) / (a * b - c * q - big * q ** (n - 1))


def _h2_pair(e):
    q, a, b, c = e.q, e.a, e.b, e.c
    return AbelPair(_from_closed_form(_h2_A(e)), _hyper_b(e, [a, b], [c], c * q / (a * b)))


def _h2_claimed(e):
    return _first_difference_scale(_h2_A(e)) * identities.get("H2").rhs(e).value


# --- Bailey-Daum variants ---------------------------------------------------------------------


def _k2_A(e):
    q, a = e.q, e.a
    return lambda n: (1 - q) * (-q) ** n / (1 - a * q ** (2 * n - 1))


def _k3_A(e):
    q, a, b = e.q, e.a, e.b
    return lambda n: (1 - q) * (-b) ** n / (q + b - (a + b) * q**n)


def _k4_A(e):
    q, a, b = e.q, e.a, e.b
    return lambda n: (1 - q) / (a + b - (q + b) * a * q ** (n - 1)) * (-q / b) ** (n - 1)


def _k_pair(make_A, x_of):
    def build(e):
        q, a, b = e.q, e.a, e.b
        return AbelPair(_from_closed_form(make_A(e)), _hyper_b(e, [a, b], [a * q / b], x_of(e)))

    return build


def _k_claimed(identity_id, make_A):
    def claimed(e):
        return _first_difference_scale(make_A(e)) * identities.get(identity_id).rhs(e).value

    return claimed


# --- the second Gosper q-analogue ------------------------------------------------------------


def gosper_ratio(beta, x, q) -> RationalFunction:
    """``B_(n+1)/B_n = x (1 - beta t)/(1 - q t)`` for ``B_n = x^n [beta; q]_n``."""
    return RationalFunction(num=[x, -x * beta], den=[1, -q])


def gosper_coefficients(e, a1=1) -> RationalCoefficients:
    beta, x = e.q ** (1 - e.a), e.x
    return solve_vanishing_coefficient(gosper_ratio(beta, x, e.q), e.ctx, a1=a1)


def _bracket_A(coeffs, ctx, base=None):
    q = base if base is not None else ctx.q
    a1, a2 = ctx.scalar(coeffs.a1), ctx.scalar(coeffs.a2)
    return lambda n: 1 / (a1 * (1 - q**n) / (1 - q) + a2)


def _g3_pair(e):
    q, x = e.q, e.x
    beta = q ** (1 - e.a)
    A = _bracket_A(gosper_coefficients(e), e.ctx)
    b1 = x * (1 - beta) / (1 - q)
    B = SequenceSpec(b1, lambda n: x * (1 - beta * q**n) / (1 - q ** (n + 1)), start_index=1)
    return AbelPair(_from_closed_form(A), B)


def _g3_claimed(e):
    """``-A_0 B_1 + (beta x - q x)/(a1 - a2 q) * sum_(n>=1) B_n/(q^(n+1) - 1)``.

    ``sum_(n>=0) B_n/(1 - q^(n+1)) = 2phi1[beta, q; q^2; q, x]/(1 - q)``.
    """
    q, x = e.q, e.x
    beta = q ** (1 - e.a)
    coeffs = gosper_coefficients(e)
    a1, a2 = e.ctx.scalar(coeffs.a1), e.ctx.scalar(coeffs.a2)
    A = _bracket_A(coeffs, e.ctx)
    b1 = x * (1 - beta) / (1 - q)
    phi = eval_basic(BasicSeriesSpec([beta, q], [q**2], x, e.ctx)).value
    tail = (1 - phi) / (1 - q)
    return -A(0) * b1 + (beta * x - q * x) / (a1 - a2 * q) * tail


def _g3_details(e):
    c = gosper_coefficients(e)
    return {"a1": c.a1, "a2": c.a2, "t_star": c.t_star}


# --- the q-Cantarini identity ------------------------------------------------------------------


def cantarini_ratio(s) -> RationalFunction:
    """``B_(n+1)/B_n = -(1 - s t)^3/(1 - s^2 t)^3`` in base ``s^2``, ``t = (s^2)^n``."""
    q = s * s
    num = [-1, 3 * s, -3 * s * s, s**3]               # -(1 - s t)^3
    den = [1, -3 * q, 3 * q * q, -(q**3)]             # (1 - q t)^3
    return RationalFunction(num=num, den=den)


def cantarini_coefficients(e, a1=1) -> RationalCoefficients:
    """Coefficients in base ``q^2`` (so that ``sqrt(base) = q``)."""
    q = e.point["q"]
    s = Fraction(q) if isinstance(q, (int, Fraction)) else e.q
    return solve_vanishing_coefficient(cantarini_ratio(s), e.ctx.squared(), a1=a1)


def _c2_pair(e):
    q = e.q
    A = _bracket_A(cantarini_coefficients(e), e.ctx, base=q * q)
    b1 = -((1 - q) / (1 - q * q)) ** 3
    B = SequenceSpec(b1, lambda n: -(((1 - q ** (2 * n + 1)) / (1 - q ** (2 * n + 2))) ** 3),
                     start_index=1)
    return AbelPair(_from_closed_form(A), B, partial_sums="even")


def _c2_claimed(e):
    """``4 Phi - (A_0 - A_(-1)) - C2 right-hand side``.

    The C2 left-hand summand is ``B_n (4 - nabla A_n)`` for ``n >= 0`` with
    ``Phi = sum_(n>=0) B_n``, all along even partial sums.
    """
    q = e.q
    A = _bracket_A(cantarini_coefficients(e), e.ctx, base=q * q)
    phi = identities.c2_base(e, RationalWeight(q, alternating=True)).value
    return 4 * phi - (A(0) - A(-1)) - identities.get("C2").rhs(e).value


def _c2_details(e):
    c = cantarini_coefficients(e)
    return {"a1": c.a1, "a2": c.a2, "t_star": c.t_star}


PROOFS = (
    ProofPair("G2", "G2", "q-Gosper evaluation at argument lambda", _g2_pair, _g2_claimed),
    ProofPair("G3", "G3", "second q-Gosper evaluation, with a2 solved for",
              _g3_pair, _g3_claimed, _g3_details),
    ProofPair("H2", "H2", "3phi2 variant of Heine's summation", _h2_pair, _h2_claimed),
    ProofPair("K2", "K2", "6phi5 Bailey-Daum variant",
              _k_pair(_k2_A, lambda e: e.q / e.b), _k_claimed("K2", _k2_A)),
    ProofPair("K3", "K3", "4phi3 Bailey-Daum variant at -q^2/b",
              _k_pair(_k3_A, lambda e: (e.q / e.b) ** 2), _k_claimed("K3", _k3_A)),
    ProofPair("K4", "K4", "4phi3 Bailey-Daum variant at -q/b",
              _k_pair(_k4_A, lambda e: e.mp.mpf(1)), _k_claimed("K4", _k4_A)),
    ProofPair("C2", "C2", "q-Cantarini series, with a2 solved for",
              _c2_pair, _c2_claimed, _c2_details),
)

PROOF_REGISTRY = {p.id: p for p in PROOFS}


def get(proof_id: str) -> ProofPair:
    try:
        return PROOF_REGISTRY[proof_id]
    except KeyError:
        raise KeyError(f"no summation-by-parts data for {proof_id!r}") from None


def certify(proof_id: str, point: dict, policy: PrecisionPolicy | None = None,
            tolerance: float = 1e-25, claimed_factor=None) -> CertificationReport:
    """Run the three-way check for one proof at one parameter point."""
    proof = get(proof_id)
    point = {k: Fraction(v) for k, v in point.items()}
    identities.check_point(identities.get(proof.identity), point)
    ctx = QContext(point["q"], policy or PrecisionPolicy())

    def env(c):
        return _env(proof.identity, point, c)

    def claimed(c):
        value = proof.claimed(env(c))
        return value if claimed_factor is None else value * c.mp.mpf(claimed_factor)

    details = (lambda c: proof.details(env(c))) if proof.details else None
    return certify_transformation(lambda c: proof.pair(env(c)), claimed, ctx, tolerance, details)


def certify_samples(proof_id: str, n_samples: int = 10, seed: int = 0,
                    policy: PrecisionPolicy | None = None, tolerance: float = 1e-25,
                    claimed_factor=None, mapper=map):
    proof = get(proof_id)
    points = [identities.sample_point(proof.identity, seed, i) for i in range(n_samples)]
    jobs = [(proof_id, p, policy, tolerance, claimed_factor) for p in points]
    return list(zip(points, mapper(_certify_job, jobs)))


def _certify_job(job):
    return certify(*job)
