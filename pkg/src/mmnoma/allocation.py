"""Power and beam-gain allocation for the two-user NOMA downlink.

With ideal (side-lobe free) beams the normalized gains obey
``c1/|l1|^2 + c2/|l2|^2 = N`` and the powers obey ``p1 + p2 = P``, so the
relaxed problem has two free variables ``(c1, p1)``.  User 2 is decoded
first, which requires ``c1 >= c2``.  The objective

    f(c1, p1) = log2(1 + c1 p1 / s2) + log2(1 + c2 (P - p1) / (c2 p1 + s2))

has a single stationary point, a saddle, so the optimum lies on one of the
three constraint boundaries:

* Boundary 1, ``R1 = r1``  (``p1 = (2^r1 - 1) s2 / c1``),
* Boundary 2, ``R2 = r2``,
* Boundary 3, ``c1 = c2``  (where ``f`` does not depend on ``p1``).

The closed-form maximizers along boundaries 1 and 2 are clamped to the range
of ``c1`` over which the feasible set is nonempty; when both land on
boundary 3 the saddle value is optimal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import EffectiveChannel
from .errors import Infeasible, NoPositiveRoot
from .rate import RateReport, SystemConfig, rates_case2

TIE_TOL = 1e-6
CASE_REL_TOL = 1e-9


class CaseTag(str, Enum):
    SADDLE = "Saddle"
    BOUNDARY1 = "Boundary1"
    BOUNDARY2 = "Boundary2"
    INFEASIBLE = "Infeasible"


class OrderVerdict(str, Enum):
    CASE2_OPTIMAL = "Case2Optimal"
    INDIFFERENT = "Indifferent"


@dataclass(frozen=True)
class EffectivePair:
    """Two effective channels ordered so that ``|l1| >= |l2|``.

    Construction swaps the users when needed and records it in ``swapped``.
    """

    user1: EffectiveChannel
    user2: EffectiveChannel
    swapped: bool = False

    def __post_init__(self):
        if self.user1.n_antennas != self.user2.n_antennas:
            raise ValueError("users must see the same array")
        if abs(self.user2.gain) > abs(self.user1.gain):
            u1, u2 = self.user1, self.user2
            object.__setattr__(self, "user1", u2)
            object.__setattr__(self, "user2", u1)
            object.__setattr__(self, "swapped", not self.swapped)

    @classmethod
    def from_gains(cls, lambda1, lambda2, omega1, omega2, n):
        return cls(EffectiveChannel(lambda1, omega1, n), EffectiveChannel(lambda2, omega2, n))

    @property
    def a(self) -> float:
        return self.user1.power

    @property
    def b(self) -> float:
        return self.user2.power

    @property
    def n_antennas(self) -> int:
        return self.user1.n_antennas


@dataclass(frozen=True)
class GainPowerAllocation:
    c1: float
    c2: float
    p1: float
    p2: float
    objective: float
    case_tag: CaseTag
    notes: tuple[str, ...] = ()

    def rates(self, sigma2: float) -> RateReport:
        return rates_case2(self.c1, self.c2, self.p1, self.p2, sigma2)

    def to_dict(self) -> dict:
        return {
            "c1": self.c1,
            "c2": self.c2,
            "p1": self.p1,
            "p2": self.p2,
            "objective": self.objective,
            "case_tag": self.case_tag.value,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class BoundaryPoint:
    c1: float
    p1: float
    # True when the closed form degenerated to its linear limit
    singular: bool = False


@dataclass(frozen=True)
class FinalPower:
    p1: float
    p2: float
    rates: RateReport


def _floors(cfg: SystemConfig):
    return 2.0 ** cfg.rate_floor_1 - 1.0, 2.0 ** cfg.rate_floor_2 - 1.0


def partner_gain(pair: EffectivePair, c1):
    """User 2's ideal gain implied by the beam-gain budget."""
    return pair.b * (pair.n_antennas - c1 / pair.a)


def objective(pair: EffectivePair, cfg: SystemConfig, c1, p1):
    """Relaxed sum rate ``f(c1, p1)``; broadcasts over arrays."""
    s2, P = cfg.noise_power, cfg.total_power
    c2 = partner_gain(pair, c1)
    return np.log2(1 + c1 * p1 / s2) + np.log2((c2 * P + s2) / (c2 * p1 + s2))


def saddle_point(pair: EffectivePair, cfg: SystemConfig):
    """Stationary point ``(c1m, p1m)`` of ``f`` and the value there.

    ``c1m`` is also where ``c1 = c2``.
    """
    A, B, N = pair.a, pair.b, pair.n_antennas
    P, s2 = cfg.total_power, cfg.noise_power
    c1m = A * B * N / (A + B)
    p1m = B * (A + B) * P * s2 / (A * A * B * N * P + (A + B) ** 2 * s2)
    f = math.log2(1 + A * B * N * P / ((A + B) * s2))
    return c1m, p1m, f


def boundary1_solution(pair: EffectivePair, cfg: SystemConfig) -> BoundaryPoint:
    """Maximizer of ``f`` along ``R1 = r1``.

    Raises
    ------
    NoPositiveRoot
        When the discriminant is negative; ``f`` then increases along the
        whole boundary and has no interior stationary point.
    """
    A, B, N = pair.a, pair.b, pair.n_antennas
    P, s2 = cfg.total_power, cfg.noise_power
    J = 2.0 ** cfg.rate_floor_1 - 1.0
    if J == 0.0:
        # zero floor: the boundary is p1 = 0 and f falls with c1 along it
        return BoundaryPoint(0.0, 0.0)
    G = J * A * B * N**2 * P**2 + (J * A - J * J * B) * N * P * s2
    if G < 0:
        raise NoPositiveRoot(f"discriminant G={G:.6g} < 0")
    # rationalized form of A (J B N P - sqrt(G)) / (P (J B - A)); it stays
    # finite when J B = A, where it equals the linear-limit root
    c11 = A * J * N * (B * N * P + s2) / (J * B * N * P + math.sqrt(G))
    singular = abs(J * B - A) <= 1e-12 * A
    if not c11 > 0:
        raise NoPositiveRoot(f"boundary-1 root c11={c11:.6g} is not positive")
    return BoundaryPoint(c11, J * s2 / c11, singular)


def _boundary2_stationary(pair, cfg) -> float:
    A, B, N = pair.a, pair.b, pair.n_antennas
    P, s2 = cfg.total_power, cfg.noise_power
    K = 2.0 ** cfg.rate_floor_2 - 1.0
    return A * (N - math.sqrt(K * N * P * s2) / (math.sqrt(B) * P))


def _arc2_power(pair, cfg, c1) -> float:
    """Largest ``p1`` meeting ``R2 >= r2`` at gain ``c1`` (may be negative)."""
    K = 2.0 ** cfg.rate_floor_2 - 1.0
    if K == 0.0:
        return cfg.total_power
    c2 = partner_gain(pair, c1)
    if c2 <= 0:
        return -math.inf
    return (c2 * cfg.total_power - K * cfg.noise_power) / (2.0**cfg.rate_floor_2 * c2)


def _arc1_power(cfg, c1) -> float:
    J = 2.0 ** cfg.rate_floor_1 - 1.0
    if J == 0.0:
        return 0.0
    return J * cfg.noise_power / c1


def boundary2_solution(pair: EffectivePair, cfg: SystemConfig) -> BoundaryPoint:
    """Maximizer of ``f`` along ``R2 = r2``.

    Raises
    ------
    NoPositiveRoot
        If the maximizer has a negative gain or needs ``p1`` outside [0, P].
    """
    c12 = _boundary2_stationary(pair, cfg)
    if c12 < 0:
        raise NoPositiveRoot(f"boundary-2 gain c12={c12:.6g} is negative")
    p12 = _arc2_power(pair, cfg, c12)
    if not 0.0 <= p12 <= cfg.total_power:
        raise NoPositiveRoot(f"boundary-2 power p12={p12:.6g} outside [0, P]")
    return BoundaryPoint(c12, p12)


def feasible_gain_interval(pair: EffectivePair, cfg: SystemConfig):
    """Range of ``c1`` on which some ``p1`` meets both rate floors and ``c1 >= c2``.

    For fixed ``c1`` the feasible powers form ``[J s2 / c1, p1max(c1)]``; the
    interval is nonempty where a concave quadratic in ``c1`` is non-negative.

    Raises
    ------
    Infeasible
        When the region is empty.
    """
    A, B, N = pair.a, pair.b, pair.n_antennas
    P, s2 = cfg.total_power, cfg.noise_power
    J, K = _floors(cfg)
    gamma = B / A
    # q(c1) = P*gamma*c1^2 - bq*c1 + cq <= 0
    qa = P * gamma
    bq = P * B * N - K * s2 + 2.0**cfg.rate_floor_2 * J * s2 * gamma
    cq = 2.0**cfg.rate_floor_2 * J * s2 * B * N
    disc = bq * bq - 4 * qa * cq
    if disc < 0 or bq <= 0:
        raise Infeasible("allocation", "rate floors exceed what any gain split supports")
    big = (bq + math.sqrt(disc)) / (2 * qa)
    small = cq / (qa * big)
    c1m = saddle_point(pair, cfg)[0]
    lo = max(c1m, small)
    hi = min(N * A, big)
    tol = CASE_REL_TOL * N * A
    if lo > hi + tol or (lo > hi and not _powers_exist(pair, cfg, hi)):
        raise Infeasible(
            "allocation",
            f"feasible gain interval [{lo:.6g}, {hi:.6g}] is empty",
        )
    return min(lo, hi), hi


def _powers_exist(pair, cfg, c1) -> bool:
    """Whether some ``p1`` in [0, P] meets both floors at gain ``c1``."""
    if c1 <= 0:
        return cfg.rate_floor_1 == 0.0 and _arc2_power(pair, cfg, c1) >= 0
    low = _arc1_power(cfg, c1)
    high = min(_arc2_power(pair, cfg, c1), cfg.total_power)
    return 0.0 <= high and low <= high * (1 + 1e-12)


def allocate(pair: EffectivePair, cfg: SystemConfig) -> GainPowerAllocation:
    """Optimal ``(c1, c2, p1, p2)`` of the relaxed allocation problem.

    The result is the sum-rate upper bound for the joint design.

    Raises
    ------
    Infeasible
        If no allocation meets both rate floors.
    """
    A, N = pair.a, pair.n_antennas
    P, s2 = cfg.total_power, cfg.noise_power
    J, _ = _floors(cfg)
    tol = CASE_REL_TOL * N * A
    c1m, _, _ = saddle_point(pair, cfg)
    lo, hi = feasible_gain_interval(pair, cfg)
    notes = []

    try:
        bp1 = boundary1_solution(pair, cfg)
        s1 = bp1.c1
        if bp1.singular:
            notes.append("boundary1_linear_limit")
    except NoPositiveRoot:
        s1 = math.inf
    s2_gain = _boundary2_stationary(pair, cfg)
    k1 = min(max(s1, lo), hi)
    k2 = min(max(s2_gain, lo), hi)
    if k1 != s1:
        notes.append("boundary1_clamped")
    if k2 != s2_gain:
        notes.append("boundary2_clamped")

    saddle_feasible = lo <= c1m + tol
    if saddle_feasible and k1 <= c1m + tol and k2 <= c1m + tol:
        p_low = J * s2 / c1m
        p_high = min(_arc2_power(pair, cfg, c1m), P)
        c1, p1, tag = c1m, 0.5 * (p_low + p_high), CaseTag.SADDLE
    else:
        p_a = _arc1_power(cfg, k1)
        p_b = min(_arc2_power(pair, cfg, k2), P)
        f1 = float(objective(pair, cfg, k1, p_a))
        f2 = float(objective(pair, cfg, k2, p_b))
        if f1 >= f2 - TIE_TOL:
            c1, p1, tag = k1, p_a, CaseTag.BOUNDARY1
            if abs(f1 - f2) <= TIE_TOL and k1 != k2:
                notes.append("boundary_tie")
        else:
            c1, p1, tag = k2, p_b, CaseTag.BOUNDARY2

    c2 = float(partner_gain(pair, c1))
    p2 = P - p1
    rates = rates_case2(c1, c2, p1, p2, s2)
    if not (rates.r1 >= cfg.rate_floor_1 - 1e-9 and rates.r2 >= cfg.rate_floor_2 - 1e-9):
        raise Infeasible("allocation", "rate floors cannot be met at the candidate optimum")
    return GainPowerAllocation(c1, c2, p1, p2, rates.sum, tag, tuple(notes))


def decoding_order_check(pair: EffectivePair, cfg: SystemConfig, grid=None) -> OrderVerdict:
    """Compare both SIC orders by brute force when the users share a rate floor.

    Raises
    ------
    ValueError
        If ``rate_floor_1 != rate_floor_2``; the ordering result only covers
        equal floors.
    RuntimeError
        If decoding User 1 first turns out strictly better.
    """
    from .oracle import GridSpec, grid_allocate
    from .rate import DecodeOrder

    if cfg.rate_floor_1 != cfg.rate_floor_2:
        raise ValueError("decoding order comparison requires equal rate floors")
    grid = grid or GridSpec(400, 400)
    best = {}
    for order in (DecodeOrder.USER1_FIRST, DecodeOrder.USER2_FIRST):
        try:
            best[order] = grid_allocate(pair, cfg, grid, order).objective
        except Infeasible:
            best[order] = -math.inf
    v1, v2 = best[DecodeOrder.USER1_FIRST], best[DecodeOrder.USER2_FIRST]
    if v1 == v2 or abs(v2 - v1) <= TIE_TOL:
        return OrderVerdict.INDIFFERENT
    if v2 > v1:
        return OrderVerdict.CASE2_OPTIMAL
    raise RuntimeError(f"decoding User 1 first wins: {v1:.9f} > {v2:.9f}")


def finalize_power(c1: float, c2: float, cfg: SystemConfig) -> FinalPower:
    """Re-split the power for the gains a concrete beam actually achieves.

    The sum rate is monotone in ``p1`` (increasing when ``c1 >= c2``), so the
    optimum is an end of the interval allowed by the two rate floors.

    Raises
    ------
    Infeasible
        If no ``p1`` in [0, P] meets both floors.
    """
    P, s2 = cfg.total_power, cfg.noise_power
    J, K = _floors(cfg)
    if c1 < 0 or c2 < 0:
        raise ValueError("beam gains must be non-negative")
    if J == 0.0:
        lo = 0.0
    elif c1 > 0:
        lo = J * s2 / c1
    else:
        raise Infeasible("finalize", "User 1 has zero beam gain")
    if K == 0.0:
        hi = P
    elif c2 > 0:
        hi = min(P, (c2 * P - K * s2) / (2.0**cfg.rate_floor_2 * c2))
    else:
        raise Infeasible("finalize", "User 2 has zero beam gain")
    if hi < 0:
        raise Infeasible("finalize", "User 2 misses its floor even with all power")
    if lo > hi * (1 + 1e-12):
        raise Infeasible("finalize", f"power interval [{lo:.6g}, {hi:.6g}] is empty")
    hi = max(hi, lo)

    def g(p):
        return np.log2(1 + c1 * p / s2) + np.log2((c2 * P + s2) / (c2 * p + s2))

    probe = g(np.linspace(lo, hi, 9))
    steps = np.diff(probe)
    increasing = c1 >= c2
    slack = 1e-12 * max(1.0, float(np.max(np.abs(probe))))
    if increasing and np.any(steps < -slack) or not increasing and np.any(steps > slack):
        raise RuntimeError("sum rate is not monotone in p1 on the feasible interval")
    p1 = hi if increasing else lo
    rates = rates_case2(c1, c2, p1, P - p1, s2)
    if rates.r1 < cfg.rate_floor_1 - 1e-9 or rates.r2 < cfg.rate_floor_2 - 1e-9:
        raise Infeasible("finalize", "rate floors violated at the chosen power split")
    return FinalPower(p1, P - p1, rates)
