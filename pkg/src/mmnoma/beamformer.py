"""Constant-modulus analog beam synthesis for two simultaneous users.

Given normalized gain targets ``b1, b2`` towards ``omega1, omega2`` we look
for the beam with the smallest peak element power that meets both gain
constraints.  Fixing the phase of User 2's response to one of ``M``
candidates makes each sub-problem convex:

    minimize   max_i |w_i|^2
    subject to Re(a1^H w) >= sqrt(b1)
               Re(e^{j 2 pi m / M} a2^H w) >= sqrt(b2)

The best of the ``M`` solutions is scaled to unit norm and then projected
onto the constant-modulus set by keeping only the element phases.

The default solver works on the Lagrange dual.  With constraint vectors
``g1, g2`` and right-hand sides ``s1, s2`` the optimal peak modulus is

    t* = max_{0<=rho<=1} ((1-rho) s1 + rho s2) / ||(1-rho) g1 + rho g2||_1

which is a one-dimensional quasi-concave search, and the primal optimum is
``w = t* v / |v|`` elementwise for the maximizing ``v``.  The alternative
``method="projection"`` bisects on the peak modulus and tests feasibility by
alternating projections; it is slower and kept as a cross-check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .channel import steering_matrix, steering_vector
from .errors import ConvergenceError

RESIDUAL_TOL = 1e-8
BISECTION_WIDTH = 1e-10
MAX_PROJECTION_CYCLES = 100_000
_COARSE_POINTS = 65
_TIE_REL = 1e-12


@dataclass(frozen=True)
class BeamTarget:
    """Normalized gains ``b_i = c_i / |l_i|^2`` and user directions."""

    b1: float
    b2: float
    omega1: float
    omega2: float
    n_antennas: int

    def __post_init__(self):
        if self.b1 < 0 or self.b2 < 0:
            raise ValueError("gain targets must be non-negative")
        if self.b1 + self.b2 > self.n_antennas + 1e-6:
            raise ValueError(
                f"targets b1+b2={self.b1 + self.b2:.6g} exceed the budget N={self.n_antennas}"
            )
        for om in (self.omega1, self.omega2):
            if not -1.0 <= om <= 1.0:
                raise ValueError(f"direction {om} outside [-1, 1]")

    @classmethod
    def from_allocation(cls, alloc, pair) -> "BeamTarget":
        n = pair.n_antennas
        b1 = max(alloc.c1 / pair.a, 0.0)
        b2 = max(alloc.c2 / pair.b, 0.0)
        # the gain budget holds to rounding; trim the excess so validation passes
        excess = b1 + b2 - n
        if excess > 0:
            b2 = max(b2 - excess, 0.0)
        return cls(b1, b2, pair.user1.direction, pair.user2.direction, n)

    @property
    def overlapping(self) -> bool:
        return abs(self.omega1 - self.omega2) < 2.0 / self.n_antennas


@dataclass(frozen=True)
class BeamVector:
    """Antenna weight vector plus solver metadata.

    ``is_cm`` vectors have every modulus equal to ``1/sqrt(N)``; others have
    unit 2-norm.
    """

    weights: np.ndarray
    is_cm: bool
    phase_index: int | None = None
    objective: float | None = None
    target_ratios: tuple[float, float] | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        w = np.array(self.weights, dtype=complex)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        n = w.size
        if self.is_cm:
            if not np.allclose(np.abs(w), 1 / math.sqrt(n), rtol=1e-12, atol=0):
                raise ValueError("constant-modulus vector has unequal moduli")
        elif abs(np.linalg.norm(w) - 1.0) > 1e-9:
            raise ValueError("beam vector must have unit norm")

    @property
    def n_antennas(self) -> int:
        return self.weights.size


def _constraints(target: BeamTarget, m: int, M: int):
    n = target.n_antennas
    g1 = steering_vector(n, target.omega1)
    g2 = np.exp(-2j * np.pi * m / M) * steering_vector(n, target.omega2)
    return g1, g2, math.sqrt(target.b1), math.sqrt(target.b2)


def _re_inner(g, w) -> float:
    return float(np.real(np.vdot(g, w)))


# -- dual method -------------------------------------------------------------


def _dual_value(rho, g1, g2, s1, s2):
    v = (1 - rho) * g1 + rho * g2
    d = np.abs(v).sum()
    num = (1 - rho) * s1 + rho * s2
    return math.inf if d <= 1e-14 * g1.size else num / d


def _dual_slope(rho, g1, g2, s1, s2):
    """Sign-carrying part of the derivative of the dual objective."""
    v = (1 - rho) * g1 + rho * g2
    mod = np.abs(v)
    u = np.divide(v, mod, out=np.zeros_like(v), where=mod > 0)
    d = mod.sum()
    dd = float(np.real(np.vdot(u, g2 - g1)))
    return (s2 - s1) * d - ((1 - rho) * s1 + rho * s2) * dd


def _coarse_dual(target: BeamTarget, M: int):
    """Dual values on a grid of ``rho`` for every phase, shape ``(M, R)``."""
    n = target.n_antennas
    rhos = np.linspace(0.0, 1.0, _COARSE_POINTS)
    a1 = steering_vector(n, target.omega1)
    a2 = steering_vector(n, target.omega2)
    rot = np.exp(-2j * np.pi * np.arange(1, M + 1) / M)
    v = (1 - rhos)[None, :, None] * a1 + (rhos[None, :, None] * rot[:, None, None]) * a2
    d = np.abs(v).sum(axis=-1)
    num = (1 - rhos) * math.sqrt(target.b1) + rhos * math.sqrt(target.b2)
    with np.errstate(divide="ignore"):
        vals = np.where(d > 1e-14 * n, num / d, np.inf)
    return rhos, vals


def _fix_kink(w, v, g1, g2, s1, s2, t):
    """Re-solve the elements whose dual weight vanishes so both constraints bind.

    Those elements are free inside the disk ``|z| <= t``; the minimum-norm
    solution of the two residual equations is tried on them.
    """
    mod = np.abs(v)
    free = mod <= 1e-9 * mod.max()
    if not np.any(free):
        free[int(np.argmin(mod))] = True
    rest = w.copy()
    rest[free] = 0
    rhs = np.array([s1 - _re_inner(g1, rest), s2 - _re_inner(g2, rest)])
    # Re(conj(g) z) = g.real * x + g.imag * y
    mat = np.array([
        np.concatenate([g1[free].real, g1[free].imag]),
        np.concatenate([g2[free].real, g2[free].imag]),
    ])
    xy, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    if np.max(np.abs(mat @ xy - rhs)) > 1e-9 * max(1.0, np.abs(rhs).max()):
        return None
    k = int(free.sum())
    z = xy[:k] + 1j * xy[k:]
    if np.max(np.abs(z)) > t * (1 + 1e-9):
        return None
    if k > 1:
        # several vanishing weights force g2 = -g1 there, so a component along
        # j*g1 changes neither constraint and lifts every modulus to t
        z = z + 1j * g1[free] * np.sqrt(np.maximum(t * t - np.abs(z) ** 2, 0.0))
    rest[free] = z
    return rest


def _make_feasible(w, g1, g2, s1, s2):
    # a uniform scale keeps the modulus structure and lifts tiny deficits
    scale = 1.0
    for g, s in ((g1, s1), (g2, s2)):
        if s > 0:
            val = _re_inner(g, w)
            if 0 < val < s:
                scale = max(scale, s / val)
    return w * scale


def _solve_dual(target: BeamTarget, m: int, M: int, tol: float, coarse=None):
    g1, g2, s1, s2 = _constraints(target, m, M)
    n = target.n_antennas
    if s1 == 0 and s2 == 0:
        return np.zeros(n, dtype=complex), 0.0
    if s2 == 0 or s1 == 0:
        # the remaining constraint alone: a scaled matched filter
        g, s = (g1, s1) if s2 == 0 else (g2, s2)
        w = (s / n) * g
        return w, (s / n) ** 2

    if coarse is None:
        rhos = np.linspace(0.0, 1.0, _COARSE_POINTS)
        vals = np.array([_dual_value(r, g1, g2, s1, s2) for r in rhos])
    else:
        rhos, vals = coarse
    if not np.all(np.isfinite(vals)):
        raise ConvergenceError("constraints are contradictory for this phase")
    k = int(np.argmax(vals))
    lo = rhos[max(k - 1, 0)]
    hi = rhos[min(k + 1, len(rhos) - 1)]

    def slope(r):
        return _dual_slope(r, g1, g2, s1, s2)

    h_lo, h_hi = slope(lo), slope(hi)
    if lo == 0.0 and h_lo <= 0:
        rho = 0.0
    elif hi == 1.0 and h_hi >= 0:
        rho = 1.0
    elif h_lo > 0 > h_hi:
        rho = brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    else:
        cands = [lo, rhos[k], hi]
        rho = max(cands, key=lambda r: _dual_value(r, g1, g2, s1, s2))

    t = _dual_value(rho, g1, g2, s1, s2)
    v = (1 - rho) * g1 + rho * g2
    mod = np.abs(v)
    w = t * np.divide(v, mod, out=np.zeros_like(v), where=mod > 0)
    residuals = (_re_inner(g1, w) - s1, _re_inner(g2, w) - s2)
    if min(residuals) < -tol:
        fixed = _fix_kink(w, v, g1, g2, s1, s2, t)
        if fixed is None:
            raise ConvergenceError(
                "dual recovery left a constraint violated", best=w, residuals=residuals
            )
        w = fixed
    w = _make_feasible(w, g1, g2, s1, s2)
    residuals = (_re_inner(g1, w) - s1, _re_inner(g2, w) - s2)
    alpha = float(np.max(np.abs(w)) ** 2)
    if min(residuals) < -tol or alpha - t * t > max(tol, 1e-9 * t * t):
        raise ConvergenceError(
            "fixed-phase solve missed its tolerance", best=w, residuals=residuals
        )
    return w, alpha


# -- bisection + alternating projections ------------------------------------


def _project_halfspaces(x, g1, g2, s1, s2):
    """Euclidean projection onto ``{Re(g_k^H w) >= s_k, k = 1, 2}``."""
    if _re_inner(g1, x) >= s1 and _re_inner(g2, x) >= s2:
        return x
    n1, n2 = np.vdot(g1, g1).real, np.vdot(g2, g2).real
    for g, s, nn in ((g1, s1, n1), (g2, s2, n2)):
        y = x + max(0.0, s - _re_inner(g, x)) / nn * g
        if _re_inner(g1, y) >= s1 - 1e-15 and _re_inner(g2, y) >= s2 - 1e-15:
            return y
    # both active: y = x + mu1 g1 + mu2 g2 with equalities
    gram = np.array([[n1, _re_inner(g1, g2)], [_re_inner(g2, g1), n2]])
    rhs = np.array([s1 - _re_inner(g1, x), s2 - _re_inner(g2, x)])
    mu = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    return x + mu[0] * g1 + mu[1] * g2


def _clip_modulus(x, t):
    mod = np.abs(x)
    return np.where(mod > t, x * (t / np.maximum(mod, 1e-300)), x)


def _feasible_at(t, x0, g1, g2, s1, s2, tol, max_cycles, check_every=50):
    x = x0
    checkpoint = math.inf
    for k in range(max_cycles):
        y = _clip_modulus(_project_halfspaces(x, g1, g2, s1, s2), t)
        res = max(s1 - _re_inner(g1, y), s2 - _re_inner(g2, y))
        if res < tol:
            return True, y
        if k % check_every == check_every - 1:
            # disjoint sets: the residual levels off at the gap between them
            if res > 0.999 * checkpoint:
                return False, y
            checkpoint = res
        x = y
    return False, x


def _solve_projection(target, m, M, tol, max_cycles=MAX_PROJECTION_CYCLES, width=BISECTION_WIDTH):
    g1, g2, s1, s2 = _constraints(target, m, M)
    n = target.n_antennas
    if s1 == 0 and s2 == 0:
        return np.zeros(n, dtype=complex), 0.0
    lo = max(s1, s2) / n
    hi = 2.0 * math.sqrt(max(target.b1, target.b2) / n)
    x = np.zeros(n, dtype=complex)
    for _ in range(60):
        ok, y = _feasible_at(hi, x, g1, g2, s1, s2, tol, max_cycles)
        if ok:
            best = y
            break
        lo, hi = hi, 2 * hi
    else:
        raise ConvergenceError("no feasible modulus bound found", best=x)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        ok, y = _feasible_at(mid, best, g1, g2, s1, s2, tol, max_cycles)
        if ok:
            hi, best = mid, y
        else:
            lo = mid
    best = _make_feasible(best, g1, g2, s1, s2)
    return best, float(np.max(np.abs(best)) ** 2)


def solve_fixed_phase(
    target: BeamTarget, m: int, M: int, tol: float = RESIDUAL_TOL, method: str = "dual"
) -> np.ndarray:
    """Min-max-modulus beam for candidate phase ``m`` of ``M``.

    A zero target drops its constraint, since ``|a^H w| >= 0`` always holds.

    Raises
    ------
    ConvergenceError
        If the solve misses ``tol``; the exception carries the best iterate.
    """
    if not 1 <= m <= M:
        raise ValueError(f"phase index m={m} outside 1..{M}")
    if method == "dual":
        return _solve_dual(target, m, M, tol)[0]
    if method == "projection":
        return _solve_projection(target, m, M, tol)[0]
    raise ValueError(f"unknown method {method!r}")


def solve_beam(target: BeamTarget, cfg, tol: float = RESIDUAL_TOL, method: str = "dual") -> BeamVector:
    """Best of the ``cfg.phase_sweep`` fixed-phase beams, scaled to unit norm.

    Ties go to the lowest phase index.
    """
    M = cfg.phase_sweep
    n = target.n_antennas
    flags = ["overlapping_beams"] if target.overlapping else []
    if target.b1 == 0 and target.b2 == 0:
        flags.append("zero_target")
        return BeamVector(np.ones(n) / math.sqrt(n), False, None, 0.0, None, tuple(flags))

    best = None  # (alpha, m, w)
    failures = []
    if method == "dual" and target.b1 > 0 and target.b2 > 0:
        rhos, vals = _coarse_dual(target, M)
        lower = vals.max(axis=1) ** 2  # dual values bound each optimum from below
        for idx in np.argsort(lower, kind="stable"):
            m = int(idx) + 1
            if best is not None and lower[idx] > best[0] * (1 + _TIE_REL):
                break
            try:
                w, alpha = _solve_dual(target, m, M, tol, coarse=(rhos, vals[idx]))
            except ConvergenceError as exc:
                failures.append((m, exc))
                continue
            if best is None or alpha < best[0] * (1 - _TIE_REL) or (
                alpha <= best[0] * (1 + _TIE_REL) and m < best[1]
            ):
                best = (alpha, m, w)
    else:
        solver = _solve_dual if method == "dual" else _solve_projection
        for m in range(1, M + 1):
            try:
                w, alpha = solver(target, m, M, tol)
            except ConvergenceError as exc:
                failures.append((m, exc))
                continue
            if best is None or alpha < best[0] * (1 - _TIE_REL):
                best = (alpha, m, w)
    if best is None:
        raise ConvergenceError(f"all {M} fixed-phase solves failed: {failures[0][1]}")

    alpha, m, w0 = best
    a1 = steering_vector(n, target.omega1)
    a2 = steering_vector(n, target.omega2)
    ratios = tuple(
        abs(np.vdot(a, w0)) ** 2 / b if b > 0 else math.nan
        for a, b in ((a1, target.b1), (a2, target.b2))
    )
    w1 = w0 / np.linalg.norm(w0)
    return BeamVector(w1, False, m, alpha, ratios, tuple(flags))


def cm_normalize(w: BeamVector) -> BeamVector:
    """Project onto the constant-modulus set, keeping each element's phase.

    A zero element has no phase; it is set to ``1/sqrt(N)`` and flagged.
    """
    x = np.asarray(w.weights)
    n = x.size
    mod = np.abs(x)
    flags = list(w.flags)
    zero = mod == 0
    if np.any(zero):
        warnings.warn(f"{int(zero.sum())} zero weight(s) given phase 0", RuntimeWarning)
        flags.append("zero_element_phase_undefined")
    unit = np.divide(x, mod, out=np.ones_like(x), where=~zero)
    return BeamVector(
        unit / math.sqrt(n), True, w.phase_index, w.objective, w.target_ratios, tuple(flags)
    )


def beam_pattern(w, grid) -> np.ndarray:
    """``|a(N, omega)^H w|^2`` for every ``omega`` in ``grid``."""
    x = np.asarray(getattr(w, "weights", w))
    grid = np.asarray(grid, dtype=float)
    if np.any(np.abs(grid) > 1):
        raise ValueError("pattern grid must lie in [-1, 1]")
    return np.abs(steering_matrix(x.size, grid).conj() @ x) ** 2


def ideal_pattern(target: BeamTarget, grid) -> np.ndarray:
    """Side-lobe free reference: height ``b_i`` over width ``2/N`` at each user."""
    grid = np.asarray(grid, dtype=float)
    half = 1.0 / target.n_antennas
    out = np.zeros_like(grid)
    for b, om in ((target.b1, target.omega1), (target.b2, target.omega2)):
        out = np.where(np.abs(grid - om) <= half, out + b, out)
    return out


def write_weights_csv(path, w) -> None:
    x = np.asarray(getattr(w, "weights", w))
    with open(path, "w") as fh:
        fh.write("k,re,im,modulus\n")
        for k, z in enumerate(x, start=1):
            fh.write(f"{k},{z.real:.17g},{z.imag:.17g},{abs(z):.17g}\n")


def write_pattern_csv(path, grid, gains) -> None:
    with open(path, "w") as fh:
        fh.write("omega,gain\n")
        for om, g in zip(grid, gains):
            fh.write(f"{om:.17g},{g:.17g}\n")
