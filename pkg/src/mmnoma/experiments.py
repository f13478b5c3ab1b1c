"""End-to-end pipeline and the experiment drivers behind the CLI.

The pipeline for one channel pair is::

    allocate -> solve_beam -> cm_normalize -> finalize_power

Every driver writes CSV with 17 significant digits so that reruns with the
same configuration can be compared byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .allocation import EffectivePair, FinalPower, GainPowerAllocation, allocate, finalize_power
from .beamformer import (
    BeamTarget,
    BeamVector,
    beam_pattern,
    cm_normalize,
    ideal_pattern,
    solve_beam,
)
from .channel import (
    ChannelKind,
    LOS_NLOS_PRESETS_DB,
    channel_vector,
    db_to_linear,
    effective_channel,
    sample_channel,
    steering_vector,
)
from .errors import Infeasible
from .rate import SystemConfig, rates_case2, tdma_sum_rate

SWEEP_VARIABLES = ("rate_floor", "power_ratio", "n_antennas")
DEFAULT_SWEEPS = {
    "rate_floor": (0.5, 4.5, 0.5),
    "power_ratio": (10.0, 30.0, 2.5),
    "n_antennas": (16, 64, 8),
}
SWEEP_COLUMNS = (
    "sweep_value", "bound_r1", "bound_r2", "bound_sum", "designed_r1", "designed_r2",
    "designed_sum", "c1_ideal", "c2_ideal", "c1_real", "c2_real", "p1", "p2", "status",
)
MC_COLUMNS = (
    "series", "sweep_value", "n_used", "n_overlap", "n_infeasible",
    "theoretical_mean", "theoretical_se", "practical_mean", "practical_se",
    "tdma_mean", "tdma_se",
)


def fmt(x) -> str:
    """17-significant-digit text for floats; ``nan`` for missing values."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else f"{x:.17g}"


# -- configuration -----------------------------------------------------------


def _parse_list(text, kind=float) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(kind(v) for v in text)
    return tuple(kind(v) for v in str(text).split(",") if v.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description; key names carry their units."""

    n_antennas: int = 32
    power_mw: float = 100.0
    noise_mw: float = 1.0
    rate1_bps_hz: float = 3.0
    rate2_bps_hz: float = 3.0
    phase_sweep: int = 20
    lambda1: float = 0.8
    lambda2: float = 0.5
    omega1: float = -0.25
    omega2: float = 0.4
    sweep_variable: str = "rate_floor"
    sweep_start: float | None = None
    sweep_stop: float | None = None
    sweep_step: float | None = None
    channel_kind: str = "all"
    nlos_power_db: tuple = LOS_NLOS_PRESETS_DB
    normalized_nlos: bool = False
    n_paths: int = 4
    user2_scale: float = 0.3
    seed: int = 2024
    realizations: int = 1000
    workers: int = 1
    n_list: tuple = (16, 32, 64)
    output: str = "-"

    def __post_init__(self):
        object.__setattr__(self, "nlos_power_db", _parse_list(self.nlos_power_db))
        object.__setattr__(self, "n_list", _parse_list(self.n_list, int))
        if self.realizations < 1:
            raise ValueError("realizations must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep_variable must be one of {SWEEP_VARIABLES}")
        if self.channel_kind not in ("all", "LOS", "NLOS"):
            raise ValueError("channel_kind must be LOS, NLOS or all")
        if self.sweep_step is not None and self.sweep_step <= 0:
            raise ValueError("sweep_step must be positive")
        self.system()  # validate the physical parameters early

    def system(self) -> SystemConfig:
        return SystemConfig(
            n_antennas=int(self.n_antennas),
            total_power=float(self.power_mw),
            noise_power=float(self.noise_mw),
            rate_floor_1=float(self.rate1_bps_hz),
            rate_floor_2=float(self.rate2_bps_hz),
            phase_sweep=int(self.phase_sweep),
        )

    def pair(self, n: int | None = None) -> EffectivePair:
        return EffectivePair.from_gains(
            self.lambda1, self.lambda2, self.omega1, self.omega2, n or int(self.n_antennas)
        )

    def sweep_values(self) -> list[float]:
        start, stop, step = DEFAULT_SWEEPS[self.sweep_variable]
        start = start if self.sweep_start is None else self.sweep_start
        stop = stop if self.sweep_stop is None else self.sweep_stop
        step = step if self.sweep_step is None else self.sweep_step
        if stop < start:
            return []
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]

    def with_(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["nlos_power_db"] = list(self.nlos_power_db)
        d["n_list"] = list(self.n_list)
        return d

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(known[key], raw)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        values = read_config_text(open(path).read())
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)


def _coerce(f: dataclasses.Field, raw):
    if not isinstance(raw, str):
        return raw
    kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", "")
    if raw.lower() in ("none", "") and "None" in kind:
        return None
    if kind.startswith("int"):
        return int(raw)
    if kind.startswith("float"):
        return float(raw)
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{f.name}: not a boolean: {raw!r}")
    return raw


def read_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def apply_sweep(cfg: SystemConfig, variable: str, value: float) -> SystemConfig:
    """System configuration at one sweep point.

    ``rate_floor`` sets both floors; ``power_ratio`` is ``P / sigma^2`` in dB
    with the noise power held fixed.
    """
    if variable == "rate_floor":
        return cfg.with_(rate_floor_1=value, rate_floor_2=value)
    if variable == "power_ratio":
        return cfg.with_(total_power=cfg.noise_power * 10.0 ** (value / 10.0))
    if variable == "n_antennas":
        return cfg.with_(n_antennas=int(round(value)))
    raise ValueError(f"unknown sweep variable {variable!r}")


# -- single pipeline ---------------------------------------------------------


@dataclass(frozen=True)
class Design:
    pair: EffectivePair
    cfg: SystemConfig
    bound: GainPowerAllocation
    target: BeamTarget
    beam: BeamVector
    beam_cm: BeamVector
    c1: float
    c2: float
    final: FinalPower
    flags: tuple = field(default=())


def realized_gains(pair: EffectivePair, w) -> tuple[float, float]:
    """Effective-channel beam gains ``|l_i|^2 |a_i^H w|^2``."""
    x = np.asarray(getattr(w, "weights", w))
    n = x.size
    return tuple(
        abs(u.gain) ** 2 * abs(np.vdot(steering_vector(n, u.direction), x)) ** 2
        for u in (pair.user1, pair.user2)
    )


def design(pair: EffectivePair, cfg: SystemConfig, method: str = "dual") -> Design:
    """Run the full pipeline for one effective channel pair.

    Raises
    ------
    Infeasible
        With ``stage`` set to ``allocation`` or ``finalize``.
    """
    bound = allocate(pair, cfg)
    target = BeamTarget.from_allocation(bound, pair)
    beam = solve_beam(target, cfg, method=method)
    beam_cm = cm_normalize(beam)
    c1, c2 = realized_gains(pair, beam_cm)
    final = finalize_power(c1, c2, cfg)
    return Design(pair, cfg, bound, target, beam, beam_cm, c1, c2, final, beam_cm.flags)


def run_single(cfg: ExperimentConfig) -> dict:
    """JSON-ready report of one pipeline run at the configured parameters."""
    d = design(cfg.pair(), cfg.system())
    bound_rates = d.bound.rates(d.cfg.noise_power)
    return {
        "status": "ok",
        "config": cfg.to_dict(),
        "swapped_users": d.pair.swapped,
        "bound": {**d.bound.to_dict(), "r1": bound_rates.r1, "r2": bound_rates.r2,
                  "sum": bound_rates.sum},
        "beam": {
            "phase_index": d.beam.phase_index,
            "objective": d.beam.objective,
            "target_ratios": list(d.beam.target_ratios) if d.beam.target_ratios else None,
            "flags": list(d.flags),
        },
        "realized": {"c1": d.c1, "c2": d.c2},
        "final": {"p1": d.final.p1, "p2": d.final.p2, **d.final.rates.to_dict()},
    }


def infeasible_report(exc: Infeasible) -> dict:
    return {"status": "infeasible", "stage": exc.stage, "reason": exc.reason}


# -- deterministic sweeps ----------------------------------------------------


def sweep_rows(cfg: ExperimentConfig, variable: str) -> list[list[str]]:
    rows = []
    base = cfg.system()
    for value in cfg.sweep_values():
        syscfg = apply_sweep(base, variable, value)
        pair = cfg.pair(syscfg.n_antennas)
        try:
            d = design(pair, syscfg)
        except Infeasible as exc:
            rows.append([fmt(value)] + ["nan"] * 12 + [f"infeasible:{exc.stage}"])
            continue
        b = d.bound.rates(syscfg.noise_power)
        f = d.final.rates
        status = "ok" if not d.flags else "ok:" + "+".join(d.flags)
        rows.append([fmt(v) for v in (
            value, b.r1, b.r2, b.sum, f.r1, f.r2, f.sum,
            d.bound.c1, d.bound.c2, d.c1, d.c2, d.final.p1, d.final.p2,
        )] + [status])
    return rows


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def sweep(cfg: ExperimentConfig, variable: str | None = None, path=None) -> list[list[str]]:
    """Bound and designed rates per sweep point, written as CSV to ``path``."""
    rows = sweep_rows(cfg, variable or cfg.sweep_variable)
    if path is not None:
        write_csv(path, SWEEP_COLUMNS, rows)
    return rows


# -- beam patterns and gain errors -------------------------------------------


def pattern_target(cfg: ExperimentConfig, n: int) -> tuple[EffectivePair, BeamTarget]:
    """Target with ``c1* = N/2`` and the rest of the gain budget on User 2."""
    pair = cfg.pair(n)
    c1 = n / 2.0
    c2 = (n - c1 / pair.a) * pair.b
    return pair, BeamTarget(c1 / pair.a, c2 / pair.b, pair.user1.direction,
                            pair.user2.direction, n)


def beampattern(cfg: ExperimentConfig, path=None, points: int = 2048) -> list[list[str]]:
    """Ideal, pre-CM and post-CM patterns (in ``b`` units) for each N in ``n_list``."""
    grid = np.linspace(-1.0, 1.0, points)
    rows = []
    for n in cfg.n_list:
        _, target = pattern_target(cfg, n)
        beam = solve_beam(target, cfg.system().with_(n_antennas=n))
        cm = cm_normalize(beam)
        ideal = ideal_pattern(target, grid)
        pre, post = beam_pattern(beam, grid), beam_pattern(cm, grid)
        for om, a, b, c in zip(grid, ideal, pre, post):
            rows.append([str(n), fmt(om), fmt(a), fmt(b), fmt(c)])
    if path is not None:
        write_csv(path, ("n_antennas", "omega", "ideal", "pre_cm", "post_cm"), rows)
    return rows


@dataclass(frozen=True)
class GainErrors:
    n_antennas: int
    c1_ideal: float
    c2_ideal: float
    c1_pre: float
    c2_pre: float
    c1_post: float
    c2_post: float

    @property
    def errors(self) -> tuple[float, float, float]:
        """Relative shortfall of User 1, User 2 and the sum after CM normalization."""
        e1 = abs(self.c1_ideal - self.c1_post) / self.c1_ideal
        e2 = abs(self.c2_ideal - self.c2_post) / self.c2_ideal
        total = self.c1_ideal + self.c2_ideal
        es = abs(total - self.c1_post - self.c2_post) / total
        return e1, e2, es


def gain_errors(cfg: ExperimentConfig, n: int) -> tuple[GainErrors, BeamVector, BeamVector]:
    pair, target = pattern_target(cfg, n)
    beam = solve_beam(target, cfg.system().with_(n_antennas=n))
    cm = cm_normalize(beam)
    pre = realized_gains(pair, beam)
    post = realized_gains(pair, cm)
    ideal = (target.b1 * pair.a, target.b2 * pair.b)
    return GainErrors(n, *ideal, *pre, *post), beam, cm


# -- Monte Carlo -------------------------------------------------------------


def series_list(cfg: ExperimentConfig) -> list[tuple[str, str, float]]:
    """``(label, kind, scattered-path power)`` for every requested channel family."""
    out = []
    if cfg.channel_kind in ("all", "LOS"):
        out += [(f"LOS{db:g}dB", "LOS", db_to_linear(db)) for db in cfg.nlos_power_db]
    if cfg.channel_kind in ("all", "NLOS"):
        out.append(("NLOS", "NLOS", 1.0))
    return out


def realization_seeds(master: int, index: int) -> tuple[int, int]:
    """Independent per-user seeds for one realization, stable across workers."""
    ss = np.random.SeedSequence(master, spawn_key=(index,))
    a, b = ss.generate_state(2, dtype=np.uint64)
    return int(a), int(b)


def _one_realization(args):
    cfg, index = args
    base = cfg.system()
    s1, s2 = realization_seeds(cfg.seed, index)
    values = cfg.sweep_values()
    out = []
    for label, kind, nlos_power in series_list(cfg):
        ch1 = sample_channel(base.n_antennas, kind, cfg.n_paths, nlos_power, s1,
                             normalized_nlos=cfg.normalized_nlos)
        ch2 = sample_channel(base.n_antennas, kind, cfg.n_paths, nlos_power, s2,
                             normalized_nlos=cfg.normalized_nlos).scaled(cfg.user2_scale)
        e1, e2 = effective_channel(ch1), effective_channel(ch2)
        pair = EffectivePair(e1, e2)
        h1, h2 = channel_vector(ch1), channel_vector(ch2)
        if pair.swapped:
            h1, h2 = h2, h1
        rows = []
        for value in values:
            syscfg = apply_sweep(base, cfg.sweep_variable, value)
            tdma = tdma_sum_rate(pair.user1.gain, pair.user2.gain, syscfg)
            if abs(pair.user1.direction - pair.user2.direction) < 2.0 / syscfg.n_antennas:
                rows.append(("overlap", math.nan, math.nan, tdma))
                continue
            try:
                d = design(pair, syscfg)
            except Infeasible:
                rows.append(("infeasible", math.nan, math.nan, tdma))
                continue
            w = d.beam_cm.weights
            g1, g2 = abs(np.vdot(h1, w)) ** 2, abs(np.vdot(h2, w)) ** 2
            practical = rates_case2(g1, g2, d.final.p1, d.final.p2, syscfg.noise_power)
            rows.append(("ok", d.final.rates.sum, practical.sum, tdma))
        out.append(rows)
    return out


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(np.mean(x)), se


def montecarlo(cfg: ExperimentConfig, path=None, meta_path=None) -> list[list[str]]:
    """Average theoretical, practical and TDMA sum rates per series and sweep point.

    Realizations whose beams overlap or whose floors are infeasible are left
    out of the means and counted.  TDMA is averaged over the same
    realizations as NOMA.
    """
    jobs = [(cfg, i) for i in range(cfg.realizations)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_one_realization, jobs, chunksize=16))
    else:
        results = [_one_realization(j) for j in jobs]
    values = cfg.sweep_values()
    rows = []
    for s, (label, _, _) in enumerate(series_list(cfg)):
        for k, value in enumerate(values):
            recs = [res[s][k] for res in results]
            ok = [r for r in recs if r[0] == "ok"]
            th = _mean_se([r[1] for r in ok])
            pr = _mean_se([r[2] for r in ok])
            td = _mean_se([r[3] for r in ok])
            rows.append([
                label, fmt(value), str(len(ok)),
                str(sum(r[0] == "overlap" for r in recs)),
                str(sum(r[0] == "infeasible" for r in recs)),
                *(fmt(v) for v in (*th, *pr, *td)),
            ])
    if path is not None:
        write_csv(path, MC_COLUMNS, rows)
    if meta_path is not None:
        with open(meta_path, "w") as fh:
            json.dump(montecarlo_metadata(cfg), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return rows


def montecarlo_metadata(cfg: ExperimentConfig) -> dict:
    return {
        "config": cfg.to_dict(),
        "aod_distribution": "uniform[-1,1]",
        "los_phase": "uniform[0,2pi)",
        "nlos_path_power": "1/L" if cfg.normalized_nlos else "1/sqrt(L)",
        "user2_amplitude_scale": cfg.user2_scale,
        "tdma": "half time each, full power, beam gain N/2",
        "excluded": "overlapping beams (|omega1-omega2| < 2/N) and infeasible rate floors",
        "seeding": "numpy SeedSequence(seed, spawn_key=(realization,)), two user seeds",
    }
