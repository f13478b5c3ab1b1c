"""Achievable rates of the two-user downlink under both SIC decoding orders."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from enum import Enum

import numpy as np


class DecodeOrder(str, Enum):
    # Case 1: s1 is decoded first (User 2 runs SIC); Case 2: s2 first.
    USER1_FIRST = "DecodeUser1First"
    USER2_FIRST = "DecodeUser2First"


@dataclass(frozen=True)
class SystemConfig:
    """Physical and solver parameters.

    Powers are in mW, rate floors in bps/Hz.  ``phase_sweep`` is the number
    of candidate phases tried for User 2's beam term.
    """

    n_antennas: int = 32
    total_power: float = 100.0
    noise_power: float = 1.0
    rate_floor_1: float = 0.0
    rate_floor_2: float = 0.0
    phase_sweep: int = 20

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be positive")
        if self.total_power <= 0 or self.noise_power <= 0:
            raise ValueError("total_power and noise_power must be positive")
        if self.rate_floor_1 < 0 or self.rate_floor_2 < 0:
            raise ValueError("rate floors must be non-negative")
        if self.phase_sweep < 1:
            raise ValueError("phase_sweep must be positive")

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class RateReport:
    r1: float
    r2: float
    order: DecodeOrder
    sic_valid: bool

    @property
    def sum(self) -> float:
        return self.r1 + self.r2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["order"] = self.order.value
        d["sum"] = self.sum
        return d


def _log2_1p(x) -> float:
    return float(np.log1p(x) / np.log(2.0))


def rates_case2(c1, c2, p1, p2, sigma2) -> RateReport:
    """Rates when User 2's signal is decoded (and cancelled) first.

    User 1 removes s2 and sees no interference; User 2 treats s1 as noise.
    SIC is valid iff ``c1 >= c2``.
    """
    r1 = _log2_1p(c1 * p1 / sigma2)
    r2 = _log2_1p(c2 * p2 / (c2 * p1 + sigma2))
    return RateReport(r1, r2, DecodeOrder.USER2_FIRST, bool(c1 >= c2))


def rates_case1(c1, c2, p1, p2, sigma2) -> RateReport:
    """Rates when User 1's signal is decoded first; SIC valid iff ``c2 >= c1``."""
    r1 = _log2_1p(c1 * p1 / (c1 * p2 + sigma2))
    r2 = _log2_1p(c2 * p2 / sigma2)
    return RateReport(r1, r2, DecodeOrder.USER1_FIRST, bool(c2 >= c1))


def sinr_case2(c1, c2, p1, p2, sigma2):
    """SINRs for decoding s2 at User 1 and at User 2 under decoding order 2.

    SIC at User 1 is reliable when the first value is at least the second.
    """
    return c1 * p2 / (c1 * p1 + sigma2), c2 * p2 / (c2 * p1 + sigma2)


def tdma_sum_rate(lambda1, lambda2, cfg: SystemConfig) -> float:
    """Two equal time slots, full power ``P`` and beam gain ``N/2`` per user."""
    gain = cfg.n_antennas / 2.0
    snr = cfg.total_power / cfg.noise_power
    return sum(
        0.5 * _log2_1p(gain * abs(lam) ** 2 * snr) for lam in (lambda1, lambda2)
    )


def config_dict(cfg: SystemConfig) -> dict:
    return asdict(cfg)
