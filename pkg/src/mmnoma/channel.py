"""Sparse multipath channels for a half-wavelength uniform linear array.

A channel is a short list of propagation paths, each with a complex gain and
a direction given as the cosine of the angle of departure (``omega`` in
[-1, 1]).  The array response towards ``omega`` is the steering vector
``a(N, omega)[k] = exp(j*pi*k*omega)``, ``k = 0..N-1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

LOS_NLOS_PRESETS_DB = (-10.0, -15.0)


class ChannelKind(str, Enum):
    LOS = "LOS"
    NLOS = "NLOS"


@dataclass(frozen=True)
class PathComponent:
    gain: complex
    direction: float

    def __post_init__(self):
        if not -1.0 <= self.direction <= 1.0:
            raise ValueError(f"direction must lie in [-1, 1], got {self.direction}")
        object.__setattr__(self, "gain", complex(self.gain))
        object.__setattr__(self, "direction", float(self.direction))


@dataclass(frozen=True)
class Channel:
    n_antennas: int
    paths: tuple[PathComponent, ...]
    seed: int | None = None

    def __post_init__(self):
        if self.n_antennas < 2:
            raise ValueError("a channel needs at least two antennas")
        paths = tuple(self.paths)
        if not paths:
            raise ValueError("a channel needs at least one path")
        object.__setattr__(self, "paths", paths)

    def scaled(self, factor: float) -> "Channel":
        """Return a copy with every path gain multiplied by ``factor``."""
        return Channel(
            self.n_antennas,
            tuple(PathComponent(p.gain * factor, p.direction) for p in self.paths),
            self.seed,
        )


@dataclass(frozen=True)
class EffectiveChannel:
    """Single-path reduction ``h = gain * a(N, direction)``."""

    gain: complex
    direction: float
    n_antennas: int

    def __post_init__(self):
        if abs(self.gain) <= 0:
            raise ValueError("effective channel gain must be nonzero")
        if not -1.0 <= self.direction <= 1.0:
            raise ValueError(f"direction must lie in [-1, 1], got {self.direction}")

    @property
    def power(self) -> float:
        return abs(self.gain) ** 2

    def vector(self) -> np.ndarray:
        return self.gain * steering_vector(self.n_antennas, self.direction)


def steering_vector(n: int, omega: float) -> np.ndarray:
    """Array response of an ``n``-element half-wavelength ULA towards ``omega``."""
    if n < 1:
        raise ValueError("n must be positive")
    return np.exp(1j * np.pi * np.arange(n) * omega)


def steering_matrix(n: int, omegas) -> np.ndarray:
    """Stack of steering vectors, shape ``(len(omegas), n)``."""
    omegas = np.asarray(omegas, dtype=float)
    return np.exp(1j * np.pi * np.outer(omegas, np.arange(n)))


def channel_vector(ch: Channel) -> np.ndarray:
    h = np.zeros(ch.n_antennas, dtype=complex)
    for p in ch.paths:
        h += p.gain * steering_vector(ch.n_antennas, p.direction)
    return h


def effective_channel(ch: Channel) -> EffectiveChannel:
    """Keep only the strongest path; ties go to the lowest path index."""
    mags = [abs(p.gain) for p in ch.paths]
    # np.argmax returns the first maximum, which is the declared tie-break
    best = ch.paths[int(np.argmax(mags))]
    return EffectiveChannel(best.gain, best.direction, ch.n_antennas)


def _complex_gaussian(rng, power, size):
    scale = np.sqrt(power / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def sample_channel(
    n: int,
    kind: ChannelKind | str,
    n_paths: int,
    nlos_power: float,
    rng_seed: int,
    los_gain: float = 1.0,
    normalized_nlos: bool = False,
) -> Channel:
    """Draw a random multipath channel.

    Parameters
    ----------
    n : int
        Number of antennas.
    kind : ChannelKind or str
        ``LOS``: path 1 has modulus ``los_gain`` (uniform random phase) and the
        remaining paths are CN(0, ``nlos_power``).  ``NLOS``: every path is
        CN(0, 1/sqrt(n_paths)), or CN(0, 1/n_paths) when ``normalized_nlos``.
        ``nlos_power`` is ignored for NLOS channels.
    n_paths : int
        Number of paths, at least 1.
    nlos_power : float
        Average power of each scattered path of a LOS channel (linear scale).
    rng_seed : int
        Seed; the same seed always yields the same channel.

    Returns
    -------
    Channel
    """
    kind = ChannelKind(kind)
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if nlos_power <= 0:
        raise ValueError("nlos_power must be positive")
    rng = np.random.default_rng(rng_seed)
    directions = rng.uniform(-1.0, 1.0, n_paths)
    if kind is ChannelKind.LOS:
        gains = np.empty(n_paths, dtype=complex)
        gains[0] = los_gain * np.exp(2j * np.pi * rng.uniform())
        gains[1:] = _complex_gaussian(rng, nlos_power, n_paths - 1)
    else:
        per_path = 1.0 / n_paths if normalized_nlos else 1.0 / np.sqrt(n_paths)
        gains = _complex_gaussian(rng, per_path, n_paths)
    paths = tuple(PathComponent(g, d) for g, d in zip(gains, directions))
    return Channel(n, paths, rng_seed)


def beam_gain(h, w) -> float:
    """Squared modulus of ``h^H w``."""
    h = np.asarray(h)
    w = np.asarray(w)
    if h.shape != w.shape:
        raise ValueError(f"length mismatch: {h.shape} vs {w.shape}")
    return float(abs(np.vdot(h, w)) ** 2)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


# -- line-oriented JSON ensembles ------------------------------------------


def channel_to_record(ch: Channel) -> dict:
    return {
        "n": ch.n_antennas,
        "paths": [
            {"re": p.gain.real, "im": p.gain.imag, "omega": p.direction}
            for p in ch.paths
        ],
        "seed": ch.seed,
    }


def channel_from_record(rec: dict) -> Channel:
    paths = tuple(
        PathComponent(complex(p["re"], p["im"]), p["omega"]) for p in rec["paths"]
    )
    return Channel(int(rec["n"]), paths, rec.get("seed"))


def write_channels_jsonl(path, channels: Iterable[Channel]) -> None:
    with open(path, "w") as fh:
        for ch in channels:
            fh.write(json.dumps(channel_to_record(ch)) + "\n")


def read_channels_jsonl(path) -> Iterator[Channel]:
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield channel_from_record(json.loads(line))


def mean_path_power(channels: Sequence[Channel]) -> np.ndarray:
    """Per-path average power over an ensemble of equally sized channels."""
    gains = np.array([[p.gain for p in ch.paths] for ch in channels])
    return np.mean(np.abs(gains) ** 2, axis=0)
