"""q -> 1 limits by Richardson extrapolation.

A family is evaluated at ``q_j = 1 - 2^-j`` and the values are extrapolated
to ``h = 1 - q = 0`` assuming an expansion in powers ``h, h^(1+s), h^(1+2s), ...``
with ``s = 1`` unless a schedule says otherwise.  Families that contain an
infinite product such as ``(q; q^2)_inf`` pick up half-integer powers.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from functools import partial
from fractions import Fraction
from typing import Callable

from . import expr, identities
from .errors import DomainError, ExtrapolationError, SamplerStarvation
from .identities import Env, Param
from .mpreal import PrecisionPolicy, context, gamma
from .qcore import QContext


@dataclass(frozen=True)
class LimitSchedule:
    j0: int = 4
    j1: int = 12
    order: int = 3
    target_rel_error: float = 1e-24
    power_step: Fraction = Fraction(1)

    def __post_init__(self):
        if self.order < 1:
            raise DomainError("extrapolation order must be at least 1")
        if self.j1 - self.j0 < self.order + 2:
            raise DomainError("schedule needs j1 - j0 >= order + 2")
        if self.j0 < 1:
            raise DomainError("j0 must be positive")

    @property
    def indices(self):
        return range(self.j0, self.j1 + 1)

    def q_at(self, j: int) -> Fraction:
        return 1 - Fraction(1, 2**j)

    def bits_at(self, j: int) -> int:
        return max(192, 64 + 16 * j)

    def policy_at(self, j: int) -> PrecisionPolicy:
        return PrecisionPolicy(self.bits_at(j), target_rel_error=self.target_rel_error)

    @property
    def exponents(self):
        return [1 + k * Fraction(self.power_step) for k in range(self.order)]

    def with_order(self, order: int) -> "LimitSchedule":
        return replace(self, order=order)


@dataclass(frozen=True)
class LimitEstimate:
    value: object
    error: object
    samples: tuple = field(repr=False)


def richardson(values, exponents):
    """Extrapolate ``values[i] = f(2^-(j0+i))`` to ``h = 0``.

    ``exponents`` lists the powers of ``h`` eliminated in turn.  Returns
    ``(estimate, error)``; the error is the larger of the last two
    increments of the tableau.
    """
    order = len(exponents)
    if len(values) < order + 2:
        raise ExtrapolationError("not enough samples for the requested order")
    mp = values[0].context
    table = [list(values)]
    for p in exponents:
        prev = table[-1]
        p = Fraction(p)
        factor = mp.mpf(2) ** (mp.mpf(p.numerator) / p.denominator) - 1
        table.append([prev[i] + (prev[i] - prev[i - 1]) / factor for i in range(1, len(prev))])
    best = table[order]
    estimate = best[-1]
    error = max(abs(best[-1] - best[-2]), abs(best[-1] - table[order - 1][-1]))
    return estimate, error


def _check_residuals(values):
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    scale = max(abs(v) for v in values) or 1
    tail = diffs[-3:]
    if all(d <= 1e-40 * scale for d in tail):
        return
    if not (tail[0] >= tail[1] >= tail[2]):
        raise ExtrapolationError(
            "successive differences do not decrease: "
            + ", ".join(f"{float(d):.3e}" for d in tail)
        )


def q_limit(family: Callable[[QContext], object], schedule: LimitSchedule | None = None,
            mapper=map) -> LimitEstimate:
    """Richardson limit of ``family(ctx)`` as ``q -> 1``."""
    schedule = schedule or LimitSchedule()
    ctxs = [QContext(schedule.q_at(j), schedule.policy_at(j)) for j in schedule.indices]
    raw = list(mapper(family, ctxs))
    mp = context(max(schedule.bits_at(j) for j in schedule.indices))
    values = [mp.mpf(v) for v in raw]
    _check_residuals(values)
    estimate, error = richardson(values, schedule.exponents)
    return LimitEstimate(estimate, error, tuple(values))


# --- registered pairs ------------------------------------------------------------------------


def _q_env(identity_id: str, ctx: QContext, values: dict) -> Env:
    """An evaluation environment for ``identity_id`` with ``q`` taken from ``ctx``."""
    record = identities.get(identity_id)
    mp = ctx.mp
    env_values = {"q": ctx.q}
    env_values.update({k: v for k, v in values.items()})
    for name, src in record.derived:
        env_values[name] = expr.evaluate(src, env_values, mp)
    return Env({"q": ctx.q_input}, ctx.policy, env_values)


def _classical_env(identity_id: str, point: dict, policy: PrecisionPolicy) -> Env:
    return identities.get(identity_id).environment(point, policy)


def _mp_point(point, mp):
    return {k: mp.mpf(v.numerator) / v.denominator for k, v in point.items()}


@dataclass(frozen=True)
class Side:
    """One q-family and its classical counterpart."""

    label: str
    q_family: Callable[[dict, QContext], object]
    classical: Callable[[dict, PrecisionPolicy], object]


@dataclass(frozen=True)
class LimitPair:
    id: str
    description: str
    params: tuple
    sides: tuple
    guards: tuple = ()
    kind: str = "value"
    schedule: LimitSchedule = field(default_factory=LimitSchedule)


def _side_g2_lhs(point, ctx):
    v = _mp_point(point, ctx.mp)
    return identities.get("G2").lhs(_q_env("G2", ctx, v)).value


def _g1_lhs(point, policy):
    return identities.get("G1").lhs(_classical_env("G1", point, policy)).value


def _g3_family(which, point, ctx):
    v = _mp_point(point, ctx.mp)
    record = identities.get("G3")
    side = record.lhs if which == "lhs" else record.rhs
    return side(_q_env("G3", ctx, v)).value


def _side_g3(which):
    return partial(_g3_family, which)


def _g3_scaled_g1(point, policy):
    mp = policy.mp
    a, b = (mp.mpf(point[k].numerator) / point[k].denominator for k in "ab")
    return (a + b) / (a**2 * b * (b + 1)) * _g1_lhs(point, policy)


def _g3_rhs_limit(point, policy):
    mp = policy.mp
    a, b = (mp.mpf(point[k].numerator) / point[k].denominator for k in "ab")
    return (a / (a + b)) ** a * (a + b) / (a**2 * b)


def _side_h1(point, ctx):
    v = _mp_point(point, ctx.mp)
    q = ctx.q
    values = {k: q ** v[k] for k in "abc"}
    return identities.get("H1").lhs(_q_env("H1", ctx, values)).value


def _gauss(point, policy):
    mp = policy.mp
    a, b, c = (mp.mpf(point[k].numerator) / point[k].denominator for k in "abc")
    g = lambda x: gamma(x, policy.target_rel_error / 16)  # noqa: E731
    return g(c) * g(c - a - b) / (g(c - a) * g(c - b))


def _k_family(identity_id, point, ctx):
    v = _mp_point(point, ctx.mp)
    q = ctx.q
    values = {"a": q ** v["a"], "b": q ** v["b"]}
    return identities.get(identity_id).lhs(_q_env(identity_id, ctx, values)).value


def _side_k(identity_id):
    return partial(_k_family, identity_id)


def _d2_lhs_half(point, policy):
    a, b = point["a"], point["b"]
    d2_point = {"a": a, "b": b, "c": (a - 1) / 2}
    return identities.get("D2").lhs(_classical_env("D2", d2_point, policy)).value


def _c2_family(which, point, ctx):
    record = identities.get("C2")
    side = record.lhs if which == "lhs" else record.rhs
    return side(_q_env("C2", ctx, {})).value


def _side_c2(which):
    return partial(_c2_family, which)


def _c1_series(point, policy):
    return identities.get("C1").lhs(_classical_env("C1", {}, policy)).value


def _g1_constant(point, ctx):
    return _g1_lhs(point, ctx.policy)


_AB = (Param("a", "0.5", "4"), Param("b", "0.5", "4"))
_K_POINT = (Param("a", "0.5", "4"), Param("b", "0.1", "0.9"))

PAIRS = (
    LimitPair("G2:G1", "q-Gosper left-hand side tends to Gosper's series", _AB,
              (Side("lhs", _side_g2_lhs, _g1_lhs),)),
    LimitPair("G3:G1", "second q-Gosper identity tends to a scaled Gosper identity", _AB,
              (Side("lhs", _side_g3("lhs"), _g3_scaled_g1),
               Side("rhs", _side_g3("rhs"), _g3_rhs_limit)),
              guards=("forall n in 0..10: abs(a - b - n) > 0.1",)),
    LimitPair("H1:Gauss", "Heine's sum at q^a, q^b, q^c tends to Gauss' evaluation",
              (Param("a", "0.2", "1.5"), Param("b", "0.2", "1.5"), Param("c", "0.5", "4")),
              (Side("lhs", _side_h1, _gauss),),
              guards=("c - a - b >= 0.5",)),
    LimitPair("K2:D2", "6phi5 variant at q^a, q^b tends to the 4F3 at -1 with c = (a-1)/2",
              _K_POINT, (Side("lhs", _side_k("K2"), _d2_lhs_half),),
              schedule=LimitSchedule(4, 10, 3)),
    LimitPair("K3:D2", "4phi3 variant at -q^2/b tends to the 4F3 at -1 with c = (a-1)/2",
              _K_POINT, (Side("lhs", _side_k("K3"), _d2_lhs_half),),
              schedule=LimitSchedule(4, 10, 3)),
    LimitPair("K4:D2", "4phi3 variant at -q/b tends to the 4F3 at -1 with c = (a-1)/2",
              _K_POINT, (Side("lhs", _side_k("K4"), _d2_lhs_half),),
              schedule=LimitSchedule(4, 10, 3)),
    LimitPair("C2:C1", "both sides of the q-Cantarini identity, divided by Cantarini's series",
              (), (Side("lhs", _side_c2("lhs"), _c1_series),
                   Side("rhs", _side_c2("rhs"), _c1_series)),
              kind="ratio", schedule=LimitSchedule(3, 10, 5, power_step=Fraction(1, 2))),
    LimitPair("G1:G1", "sanity pair: a constant family", _AB,
              (Side("lhs", _g1_constant, _g1_lhs),), schedule=LimitSchedule(4, 9, 3)),
)

PAIR_REGISTRY = {p.id: p for p in PAIRS}


def get(pair_id: str) -> LimitPair:
    try:
        return PAIR_REGISTRY[pair_id]
    except KeyError:
        raise KeyError(f"unknown limit pair {pair_id!r}") from None


@dataclass(frozen=True)
class SideReport:
    label: str
    limit: object
    error: object
    classical: object
    deviation: object      # |limit - classical| for values, the ratio for "ratio" pairs


@dataclass(frozen=True)
class LimitReport:
    id: str
    point: dict
    kind: str
    sides: tuple
    tolerance: float
    passed: bool
    ratio_spread: object = None


def check_limit_pair(pair_id: str, point: dict | None = None, schedule: LimitSchedule | None = None,
                     tolerance: float = 1e-6, ratio_tolerance: float = 1e-4,
                     mapper=map) -> LimitReport:
    """Compare each q-family's limit with its classical counterpart.

    For ``"value"`` pairs a side passes when ``|limit - classical|`` is at
    most the extrapolation error plus ``tolerance``.  For ``"ratio"`` pairs
    only the agreement of the ratios across sides is checked.
    """
    pair = get(pair_id)
    point = {k: Fraction(v) for k, v in (point or {}).items()}
    if set(point) != {p.name for p in pair.params}:
        raise DomainError(f"{pair_id} takes parameters {[p.name for p in pair.params]}")
    schedule = schedule or pair.schedule
    policy = PrecisionPolicy(max(schedule.bits_at(j) for j in schedule.indices),
                             target_rel_error=schedule.target_rel_error)
    reports = []
    for side in pair.sides:
        est = q_limit(_Bound(side.q_family, point), schedule, mapper=mapper)
        classical = side.classical(point, policy)
        if pair.kind == "ratio":
            deviation = est.value / classical
        else:
            deviation = abs(est.value - classical)
        reports.append(SideReport(side.label, est.value, est.error, classical, deviation))
    if pair.kind == "ratio":
        ratios = [r.deviation for r in reports]
        spread = max(ratios) - min(ratios)
        slack = max(r.error / abs(r.classical) for r in reports)
        passed = bool(spread <= ratio_tolerance and slack <= ratio_tolerance)
        return LimitReport(pair_id, point, pair.kind, tuple(reports), ratio_tolerance, passed, spread)
    passed = all(r.deviation <= r.error + tolerance for r in reports)
    return LimitReport(pair_id, point, pair.kind, tuple(reports), tolerance, bool(passed))


@dataclass(frozen=True)
class _Bound:
    """A picklable ``ctx -> value`` closure over a fixed point."""

    family: Callable
    point: dict

    def __call__(self, ctx):
        return self.family(self.point, ctx)


def sample_point(pair_id: str, seed: int, index: int = 0) -> dict:
    pair = get(pair_id)
    rng = random.Random(f"{pair_id}:{seed}:{index}")
    mp = context(96)
    for _ in range(identities.MAX_REJECTIONS):
        point = {p.name: p.draw(rng) for p in pair.params}
        values = _mp_point(point, mp)
        if all(expr.evaluate(g, values, mp) for g in pair.guards):
            return point
    raise SamplerStarvation(f"{pair_id}: no admissible point")
