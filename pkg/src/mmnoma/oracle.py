"""Brute-force reference solvers used as ground truth in the test suite.

Nothing here reuses the closed forms from :mod:`mmnoma.allocation` or the
dual beam solver; every routine works by exhaustive evaluation or plain
quadrature.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .allocation import CaseTag, EffectivePair, GainPowerAllocation
from .channel import steering_matrix, steering_vector
from .errors import Infeasible
from .rate import DecodeOrder, SystemConfig

_GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class GridSpec:
    c1_points: int = 2000
    p1_points: int = 2000

    def __post_init__(self):
        if self.c1_points < 2 or self.p1_points < 2:
            raise ValueError("a grid needs at least two points per axis")


def _grid_rates(c1, c2, p1, P, s2, order):
    p2 = P - p1
    if order is DecodeOrder.USER2_FIRST:
        r1 = np.log2(1 + c1 * p1 / s2)
        r2 = np.log2(1 + c2 * p2 / (c2 * p1 + s2))
    else:
        r1 = np.log2(1 + c1 * p1 / (c1 * p2 + s2))
        r2 = np.log2(1 + c2 * p2 / s2)
    return r1, r2


def _constraint_slacks(c1, p1, pair, cfg, order):
    A, B, N = pair.a, pair.b, pair.n_antennas
    c2 = B * (N - c1 / A)
    r1, r2 = _grid_rates(c1, c2, p1, cfg.total_power, cfg.noise_power, order)
    gap = c1 - c2 if order is DecodeOrder.USER2_FIRST else c2 - c1
    return np.array([r1 - cfg.rate_floor_1, r2 - cfg.rate_floor_2, gap])


def _classify(c1, p1, pair, cfg, order, dc, dp):
    """Tag the binding constraint, measured in grid steps.

    A point within one step of the gain-equality boundary counts as lying
    on it, because the closed form files the corners of that boundary under
    the saddle case.
    """
    tags = (CaseTag.BOUNDARY1, CaseTag.BOUNDARY2, CaseTag.SADDLE)
    base = _constraint_slacks(c1, p1, pair, cfg, order)
    step = np.abs(_constraint_slacks(c1 + dc, p1, pair, cfg, order) - base) + np.abs(
        _constraint_slacks(c1, p1 + dp, pair, cfg, order) - base
    )
    steps = base / np.maximum(step, 1e-300)
    if steps[2] <= 1.0:
        return CaseTag.SADDLE
    return tags[int(np.argmin(steps))]


def grid_allocate(
    pair: EffectivePair,
    cfg: SystemConfig,
    grid: GridSpec = GridSpec(),
    order: DecodeOrder = DecodeOrder.USER2_FIRST,
) -> GainPowerAllocation:
    """Exhaustive search of the relaxed problem on a uniform ``(c1, p1)`` grid.

    ``c1`` spans ``[0, N |l1|^2]`` and ``p1`` spans ``[0, P]``; ``c2`` follows
    from the beam-gain budget.  Points violating a rate floor or the
    decoding order's gain inequality are discarded.

    Raises
    ------
    Infeasible
        If no grid point is feasible.
    """
    order = DecodeOrder(order)
    A, B, N = pair.a, pair.b, pair.n_antennas
    P, s2 = cfg.total_power, cfg.noise_power
    c1 = np.linspace(0.0, N * A, grid.c1_points)
    p1 = np.linspace(0.0, P, grid.p1_points)
    best_val, best_idx = -np.inf, None
    chunk = max(1, 2_000_000 // grid.p1_points)
    with np.errstate(divide="ignore", invalid="ignore"):
        for start in range(0, c1.size, chunk):
            cc = c1[start : start + chunk, None]
            cc2 = B * (N - cc / A)
            r1, r2 = _grid_rates(cc, cc2, p1[None, :], P, s2, order)
            ok = (r1 >= cfg.rate_floor_1) & (r2 >= cfg.rate_floor_2)
            ok &= cc >= cc2 if order is DecodeOrder.USER2_FIRST else cc2 >= cc
            total = np.where(ok, r1 + r2, -np.inf)
            k = int(np.argmax(total))
            if total.flat[k] > best_val:
                best_val = float(total.flat[k])
                best_idx = (start + k // p1.size, k % p1.size)
    if best_idx is None:
        raise Infeasible("oracle", "no grid point meets the constraints")
    bc1, bp1 = float(c1[best_idx[0]]), float(p1[best_idx[1]])
    dc, dp = c1[1] - c1[0], p1[1] - p1[0]
    tag = _classify(bc1, bp1, pair, cfg, order, dc, dp)
    bc2 = float(B * (N - bc1 / A))
    return GainPowerAllocation(bc1, bc2, bp1, P - bp1, best_val, tag, ("grid", order.value))


def quantized_beam_search(target, n: int, phase_levels: int = 16) -> np.ndarray:
    """Best constant-modulus beam with phases from a uniform ``phase_levels`` alphabet.

    Maximizes ``min_i |a_i^H w|^2 / b_i`` over users with a nonzero target.
    The first element's phase is fixed at zero because a global phase does
    not change any gain.  Returns a unit-norm vector.
    """
    if n != target.n_antennas:
        raise ValueError("n must match the target's antenna count")
    if n > 8:
        raise ValueError("exhaustive enumeration is limited to n <= 8")
    users = [(b, om) for b, om in ((target.b1, target.omega1), (target.b2, target.omega2)) if b > 0]
    if not users:
        return np.ones(n, dtype=complex) / math.sqrt(n)
    alphabet = np.exp(2j * np.pi * np.arange(phase_levels) / phase_levels)
    # contrib[u][i, l]: element i at level l added to conj(a_u)^T w
    contrib = [
        np.conj(steering_vector(n, om))[:, None] * alphabet[None, :] / math.sqrt(n)
        for _, om in users
    ]
    # enumerate a head block fully and loop over the remaining tail elements
    head = 1
    while head < n and phase_levels ** head <= 1 << 20:
        head += 1
    head_sums = []
    for c in contrib:
        acc = c[0, :1]
        for i in range(1, head):
            acc = (acc[:, None] + c[i][None, :]).ravel()
        head_sums.append(acc)
    best_score, best_code = -np.inf, None
    for tail in itertools.product(range(phase_levels), repeat=n - head):
        score = np.full(head_sums[0].size, np.inf)
        for (b, _), acc, c in zip(users, head_sums, contrib):
            shift = sum(c[head + j, lvl] for j, lvl in enumerate(tail))
            score = np.minimum(score, np.abs(acc + shift) ** 2 / b)
        k = int(np.argmax(score))
        if score[k] > best_score:
            best_score, best_code = float(score[k]), (k, tail)
    k, tail = best_code
    levels = []
    for _ in range(head - 1):
        levels.append(k % phase_levels)
        k //= phase_levels
    levels = [0] + levels[::-1] + list(tail)
    return alphabet[levels] / math.sqrt(n)


def quantized_score(w, target) -> float:
    """The min gain ratio that :func:`quantized_beam_search` maximizes."""
    vals = []
    for b, om in ((target.b1, target.omega1), (target.b2, target.omega2)):
        if b > 0:
            vals.append(abs(np.vdot(steering_vector(target.n_antennas, om), w)) ** 2 / b)
    return min(vals) if vals else math.inf


def verify_lemma1(w, quad_points: int) -> float:
    """Trapezoid estimate of ``(1/2) * integral_{-1}^{1} |a(N, omega)^H w|^2``.

    The integrand is a trigonometric polynomial of period 2 in ``omega``, so
    a grid comfortably finer than ``N`` points resolves it.
    """
    x = np.asarray(getattr(w, "weights", w))
    if quad_points < 64 * x.size:
        raise ValueError(f"need at least {64 * x.size} quadrature points")
    grid = np.linspace(-1.0, 1.0, quad_points)
    pattern = np.abs(steering_matrix(x.size, grid).conj() @ x) ** 2
    return 0.5 * float(np.trapezoid(pattern, grid))


def golden_section_max(func, a: float, b: float, tol: float = 1e-12, max_iter: int = 500):
    """Maximize a unimodal function on ``[a, b]``; returns ``(x, f(x))``."""
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = func(x1), func(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = func(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = func(x1)
    cands = [(a, func(a)), (x1, f1), (x2, f2), (b, func(b))]
    return max(cands, key=lambda t: t[1])


def power_split_oracle(c1, c2, cfg: SystemConfig, penalty: float = 1e4):
    """Golden-section maximization of the sum rate over ``p1`` in ``[0, P]``.

    Rate-floor violations are charged through an exact penalty, which keeps
    the penalized objective unimodal.
    """
    P, s2 = cfg.total_power, cfg.noise_power

    def penalized(p):
        r1 = math.log2(1 + c1 * p / s2)
        r2 = math.log2(1 + c2 * (P - p) / (c2 * p + s2))
        miss = max(0.0, cfg.rate_floor_1 - r1) + max(0.0, cfg.rate_floor_2 - r2)
        return r1 + r2 - penalty * miss

    return golden_section_max(penalized, 0.0, P)
