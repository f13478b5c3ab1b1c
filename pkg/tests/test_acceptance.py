"""End-to-end acceptance criteria.

Each test records one ``PASS``/``FAIL`` line, printed immediately and again in
the terminal summary, then asserts.  Run directly with
``python tests/test_acceptance.py`` or through pytest.
"""

import filecmp
import math
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from mmnoma.allocation import EffectivePair, allocate, finalize_power
from mmnoma.beamformer import BeamTarget, solve_fixed_phase
from mmnoma.cli import main as cli_main
from mmnoma.errors import ConvergenceError, Infeasible
from mmnoma.experiments import (
    ExperimentConfig,
    design,
    gain_errors,
    montecarlo,
    realized_gains,
    sweep,
)
from mmnoma.channel import steering_vector
from mmnoma.oracle import GridSpec, grid_allocate, quantized_beam_search, verify_lemma1
from mmnoma.rate import DecodeOrder, SystemConfig

PHASES = 20
SIZES = (8, 16, 32, 64)


def record(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  [{number:>2}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def reference_system(r):
    return SystemConfig(n_antennas=32, total_power=100.0, noise_power=1.0,
                        rate_floor_1=r, rate_floor_2=r, phase_sweep=PHASES)


# -- 1 ------------------------------------------------------------------------


def test_01_allocation_matches_grid():
    pair = EffectivePair.from_gains(0.8, 0.5, -0.25, 0.4, 32)
    worst_gap, worst_time = 0.0, 0.0
    for r in (1.0, 2.0, 3.0, 4.0):
        cfg = reference_system(r)
        t0 = time.perf_counter()
        closed = allocate(pair, cfg).objective
        grid = grid_allocate(pair, cfg, GridSpec(2000, 2000)).objective
        worst_time = max(worst_time, time.perf_counter() - t0)
        worst_gap = max(worst_gap, abs(closed - grid))
    record(1, "allocation vs 2000x2000 grid", worst_gap <= 1e-3 and worst_time < 60.0,
           f"max |diff|={worst_gap:.2e} bps/Hz, slowest point {worst_time:.2f} s")


# -- 2 ------------------------------------------------------------------------


def test_02_user2_first_order_dominates():
    rng = np.random.default_rng(202)
    grid = GridSpec(2000, 2000)
    wins, tried, worst = 0, 0, math.inf
    while tried < 100:
        n = int(rng.choice(SIZES[1:]))
        a = rng.uniform(0.2, 1.0)
        b = a * rng.uniform(0.05, 0.95)
        om1, om2 = rng.uniform(-1, 1, size=2)
        pair = EffectivePair.from_gains(math.sqrt(a), math.sqrt(b), om1, om2, n)
        r = rng.uniform(0.25, 4.0)
        cfg = SystemConfig(n_antennas=n, total_power=100.0, noise_power=1.0,
                           rate_floor_1=r, rate_floor_2=r, phase_sweep=PHASES)
        try:
            one = grid_allocate(pair, cfg, grid, DecodeOrder.USER1_FIRST).objective
        except Infeasible:
            one = -math.inf
        try:
            two = grid_allocate(pair, cfg, grid, DecodeOrder.USER2_FIRST).objective
        except Infeasible:
            two = -math.inf
        if one == two == -math.inf:
            continue  # no decoding order meets the floors; redraw
        tried += 1
        margin = two - one
        worst = min(worst, margin)
        wins += margin >= -1e-6
    record(2, "stronger-user-last decoding order is never worse", wins == 100,
           f"{wins}/100 instances, smallest margin {worst:.3e}")


# -- 3 and 4 ------------------------------------------------------------------


def random_targets(rng, n, count):
    out = []
    for _ in range(count):
        om1, om2 = rng.uniform(-1, 1, size=2)
        total = n * rng.uniform(0.1, 1.0)
        split = rng.uniform(0.05, 0.95)
        out.append(BeamTarget(total * split, total * (1 - split), om1, om2, n))
    return out


@pytest.fixture(scope="module")
def fixed_phase_solutions():
    rng = np.random.default_rng(303)
    sols, failures = {}, []
    for n in SIZES:
        sols[n] = []
        for target in random_targets(rng, n, 50):
            for m in range(1, PHASES + 1):
                try:
                    sols[n].append(solve_fixed_phase(target, m, PHASES))
                except ConvergenceError as exc:
                    failures.append((n, m, str(exc)))
    return sols, failures


def test_03_fixed_phase_modulus_structure(fixed_phase_solutions):
    sols, failures = fixed_phase_solutions
    bad, worst = 0, 0.0
    for n, ws in sols.items():
        for w in ws:
            mod = np.sort(np.abs(w))
            top = mod[-1]
            # N-1 largest moduli equal within 1e-5 relative; the smallest is no larger
            spread = (top - mod[1]) / top
            worst = max(worst, spread)
            bad += spread > 1e-5 or mod[0] > top * (1 + 1e-12)
    total = sum(len(ws) for ws in sols.values()) + len(failures)
    record(3, "fixed-phase optimum has N-1 equal moduli", bad == 0 and not failures,
           f"{total - bad - len(failures)}/{total} solutions, {len(failures)} solver failures, "
           f"max spread {worst:.2e}")


def test_04_cm_projection_error_bound(fixed_phase_solutions):
    sols, _ = fixed_phase_solutions
    rng = np.random.default_rng(404)
    trials, violations, worst = 0, 0, 0.0
    for n, ws in sols.items():
        bound = 2 / math.sqrt(n)
        for w in ws:
            w1 = w / np.linalg.norm(w)
            wcm = np.exp(1j * np.angle(w1)) / math.sqrt(n)
            probes = np.exp(2j * np.pi * rng.random((1000, n)))
            gap = np.abs(np.abs(probes.conj() @ w1) - np.abs(probes.conj() @ wcm))
            trials += gap.size
            violations += int(np.sum(gap >= bound))
            worst = max(worst, float(gap.max() / bound))
    record(4, "CM projection changes |b^H w| by < 2/sqrt(N)", violations == 0,
           f"{trials - violations}/{trials} probes, max gap/bound {worst:.3f}")


# -- 5 ------------------------------------------------------------------------


def test_05_pattern_integral_identity():
    rng = np.random.default_rng(505)
    worst = 0.0
    for n in SIZES:
        for _ in range(100):
            w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            norm2 = float(np.vdot(w, w).real)
            worst = max(worst, abs(verify_lemma1(w, 64 * n) - norm2) / norm2)
    record(5, "half pattern integral equals squared norm", worst < 1e-4,
           f"400 vectors, max rel err {worst:.2e}")


# -- 6 ------------------------------------------------------------------------


def test_06_gain_errors_after_cm():
    cfg = ExperimentConfig()
    worst_err, worst_n, worst_ratio = 0.0, None, 0.0
    for n in range(16, 65):
        ge, beam, cm = gain_errors(cfg, n)
        err = max(ge.errors)
        if err > worst_err:
            worst_err, worst_n = err, n
        bound = 2 / math.sqrt(n)
        for om in (cfg.omega1, cfg.omega2):
            a = steering_vector(n, om)
            gap = abs(abs(np.vdot(a, beam.weights)) - abs(np.vdot(a, cm.weights)))
            worst_ratio = max(worst_ratio, gap / bound)
    ok = worst_err <= 0.15 and worst_ratio < 1.0
    record(6, "gain error after CM normalization, N=16..64", ok,
           f"max rel error {worst_err:.4f} (N={worst_n}), "
           f"max lobe-centre gap/bound {worst_ratio:.2e}")


# -- 7 ------------------------------------------------------------------------


@pytest.mark.parametrize("variable", ["rate_floor", "power_ratio"])
def test_07_designed_rate_close_to_bound(variable):
    rows = sweep(ExperimentConfig(sweep_variable=variable))
    worst_frac, worst_r2, failed = math.inf, 0.0, []
    for row in rows:
        if row[-1] != "ok":
            failed.append(row[0])
            continue
        value, _, _, bsum, _, d2, dsum = (float(v) for v in row[:7])
        r2 = value if variable == "rate_floor" else 3.0
        worst_frac = min(worst_frac, dsum / bsum)
        worst_r2 = max(worst_r2, abs(d2 - r2))
    ok = not failed and worst_frac >= 0.9 and worst_r2 <= 1e-3
    record(7, f"designed vs bound sum rate, {variable} sweep", ok,
           f"{len(rows)} points, min designed/bound {worst_frac:.4f}, "
           f"max |R2 - r2| {worst_r2:.1e}, failed points {failed}")


# -- 8 ------------------------------------------------------------------------


@pytest.mark.slow
@pytest.mark.parametrize("variable", ["rate_floor", "power_ratio"])
def test_08_noma_beats_tdma_montecarlo(variable):
    cfg = ExperimentConfig(sweep_variable=variable, realizations=1000)
    t0 = time.perf_counter()
    rows = montecarlo(cfg)
    elapsed = time.perf_counter() - t0
    lose, worst_rel, empty = 0, 0.0, 0
    for row in rows:
        used = int(row[2])
        if used == 0:
            empty += 1
            continue
        th, pr, td = float(row[5]), float(row[7]), float(row[9])
        lose += not (th > td and pr > td)
        worst_rel = max(worst_rel, abs(th - pr) / th)
    ok = lose == 0 and empty == 0 and worst_rel <= 0.03 and elapsed < 900
    record(8, f"Monte Carlo NOMA vs TDMA, {variable} sweep", ok,
           f"{len(rows)} rows, {lose} rows with NOMA <= TDMA, {empty} empty rows, "
           f"max theory/practice gap {100 * worst_rel:.2f}%, {elapsed:.0f} s")


# -- 9 ------------------------------------------------------------------------


def test_09_quantized_search_small_array():
    n = 6
    pair = EffectivePair.from_gains(0.8, 0.5, -0.25, 0.4, n)
    worst = math.inf
    for r in (0.5, 1.0, 2.0, 3.0):
        cfg = SystemConfig(n_antennas=n, total_power=100.0, noise_power=1.0,
                           rate_floor_1=r, rate_floor_2=r, phase_sweep=PHASES)
        pipeline = design(pair, cfg).final.rates.sum
        target = BeamTarget.from_allocation(allocate(pair, cfg), pair)
        w = quantized_beam_search(target, n, 16)
        c1, c2 = realized_gains(pair, w)
        try:
            quantized = finalize_power(c1, c2, cfg).rates.sum
        except Infeasible:
            quantized = 0.0
        worst = min(worst, quantized / pipeline)
    record(9, "16-level quantized search at N=6 vs pipeline", worst >= 0.95,
           f"min quantized/pipeline sum rate {worst:.4f} over r in 0.5..3")


# -- 10 -----------------------------------------------------------------------


def test_10_cli_reruns_are_byte_identical(tmp_path):
    commands = {
        "sweep-rate": [],
        "sweep-power": [],
        "beampattern": [],
        "montecarlo": ["--realizations", "20", "--seed", "7"],
    }
    same = []
    for name, extra in commands.items():
        paths = [tmp_path / f"{name}-{k}.csv" for k in (0, 1)]
        for p in paths:
            assert cli_main([name, *extra, "--output", str(p)]) == 0
        same.append(filecmp.cmp(*paths, shallow=False))
    record(10, "CLI reruns give byte-identical CSV", all(same),
           f"{sum(same)}/{len(same)} commands identical ({', '.join(commands)})")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
