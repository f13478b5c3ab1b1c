import json
import math

import numpy as np
import pytest

from mmnoma.cli import main
from mmnoma.experiments import (
    ExperimentConfig,
    apply_sweep,
    gain_errors,
    montecarlo,
    read_config_text,
    realization_seeds,
    run_single,
    sweep,
)
from mmnoma.errors import Infeasible
from mmnoma.rate import SystemConfig


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(
        "# reference defaults\n"
        "n_antennas = 16\n"
        "power_mw = 50   # total\n"
        "rate1_bps_hz = 2\n"
        "normalized_nlos = true\n"
        "nlos_power_db = -10\n"
        "sweep_start = none\n"
    )
    cfg = ExperimentConfig.from_file(path, rate2_bps_hz="1.5")
    assert cfg.n_antennas == 16 and cfg.power_mw == 50.0 and cfg.rate2_bps_hz == 1.5
    assert cfg.normalized_nlos is True and cfg.nlos_power_db == (-10.0,)
    assert cfg.sweep_start is None


@pytest.mark.parametrize("text", ["bogus_key = 1", "no equals sign"])
def test_config_errors(tmp_path, text):
    with pytest.raises(ValueError):
        ExperimentConfig.from_mapping(read_config_text(text))


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(realizations=0)
    with pytest.raises(ValueError):
        ExperimentConfig(sweep_variable="noise")
    with pytest.raises(ValueError):
        ExperimentConfig(power_mw=-1)


def test_sweep_values():
    assert ExperimentConfig().sweep_values() == [0.5 * k for k in range(1, 10)]
    power = ExperimentConfig(sweep_variable="power_ratio").sweep_values()
    assert power[0] == 10.0 and power[-1] == 30.0 and len(power) == 9
    assert ExperimentConfig(sweep_start=3.0, sweep_stop=1.0).sweep_values() == []


def test_apply_sweep():
    base = SystemConfig(noise_power=2.0)
    assert apply_sweep(base, "power_ratio", 20.0).total_power == pytest.approx(200.0)
    cfg = apply_sweep(base, "rate_floor", 1.5)
    assert cfg.rate_floor_1 == cfg.rate_floor_2 == 1.5
    assert apply_sweep(base, "n_antennas", 48.0).n_antennas == 48


def test_run_single_reference():
    rep = run_single(ExperimentConfig())
    assert rep["final"]["r2"] == pytest.approx(3.0, abs=1e-9)
    assert rep["final"]["sum"] <= rep["bound"]["sum"]
    assert rep["bound"]["case_tag"] == "Boundary2"
    json.dumps(rep)


def test_run_single_zero_floors_is_matched_filter():
    rep = run_single(ExperimentConfig(rate1_bps_hz=0, rate2_bps_hz=0))
    n = 32
    assert rep["realized"]["c1"] == pytest.approx(n * 0.64)
    assert rep["final"]["p1"] == pytest.approx(100.0)


def test_run_single_infeasible():
    with pytest.raises(Infeasible):
        run_single(ExperimentConfig(rate1_bps_hz=9, rate2_bps_hz=9))


def _rows_as_floats(rows):
    return [[float(v) for v in r[:-1]] for r in rows]


@pytest.mark.parametrize("variable", ["rate_floor", "power_ratio"])
def test_sweep_invariants(variable):
    cfg = ExperimentConfig(sweep_variable=variable)
    rows = sweep(cfg)
    for row, status in zip(_rows_as_floats(rows), (r[-1] for r in rows)):
        assert status == "ok"
        value, b1, b2, bsum, d1, d2, dsum = row[:7]
        r = value if variable == "rate_floor" else 3.0
        assert dsum <= bsum + 1e-12
        assert d1 >= r - 1e-6 and d2 >= r - 1e-6


def test_sweep_records_infeasible_points():
    rows = sweep(ExperimentConfig(sweep_start=8.0, sweep_stop=9.0, sweep_step=1.0))
    assert [r[-1] for r in rows] == ["infeasible:allocation"] * 2


def test_sweep_empty_writes_header(tmp_path):
    path = tmp_path / "s.csv"
    sweep(ExperimentConfig(sweep_start=2.0, sweep_stop=1.0), path=path)
    assert path.read_text().count("\n") == 1


def test_gain_errors_reference():
    ge, beam, cm = gain_errors(ExperimentConfig(), 32)
    assert max(ge.errors) <= 0.15
    assert ge.c1_ideal == pytest.approx(16.0)


def test_realization_seeds_stable():
    assert realization_seeds(5, 3) == realization_seeds(5, 3)
    assert realization_seeds(5, 3) != realization_seeds(5, 4)


def test_montecarlo_single_realization_deterministic():
    cfg = ExperimentConfig(realizations=1, sweep_start=3.0, sweep_stop=3.0, seed=42)
    a, b = montecarlo(cfg), montecarlo(cfg)
    assert a == b
    assert [r[0] for r in a] == ["LOS-10dB", "LOS-15dB", "NLOS"]


def test_montecarlo_workers_do_not_change_results():
    cfg = ExperimentConfig(realizations=6, sweep_start=2.0, sweep_stop=3.0, sweep_step=1.0,
                           channel_kind="NLOS")
    assert montecarlo(cfg) == montecarlo(cfg.with_(workers=2))


def test_montecarlo_counts():
    cfg = ExperimentConfig(realizations=20, sweep_start=3.0, sweep_stop=3.0, channel_kind="LOS",
                           nlos_power_db="-10")
    (row,) = montecarlo(cfg)
    used, overlap, infeasible = int(row[2]), int(row[3]), int(row[4])
    assert used + overlap + infeasible == 20
    assert float(row[5]) > float(row[9])  # NOMA above TDMA


def test_cli_solve_exit_codes(capsys):
    assert main(["solve"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "ok"
    assert main(["solve", "--rate1-bps-hz", "9", "--rate2-bps-hz", "9"]) == 2
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "infeasible" and out["stage"] == "allocation"
    assert main(["solve", "--n-antennas", "zero"]) == 1


def test_cli_writes_files(tmp_path):
    out = tmp_path / "mc.csv"
    assert main(["montecarlo", "--realizations", "2", "--sweep-start", "3", "--sweep-stop", "3",
                 "--output", str(out)]) == 0
    assert out.read_text().startswith("series,sweep_value")
    meta = json.loads((tmp_path / "mc.csv.meta.json").read_text())
    assert meta["aod_distribution"] == "uniform[-1,1]"
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("n_list = 16\noutput = %s\n" % (tmp_path / "bp.csv"))
    assert main(["beampattern", "--config", str(cfgfile)]) == 0
    lines = (tmp_path / "bp.csv").read_text().splitlines()
    assert lines[0] == "n_antennas,omega,ideal,pre_cm,post_cm" and len(lines) == 2049


def test_cli_verify(capsys):
    assert main(["verify"]) == 0
    assert "FAIL" not in capsys.readouterr().out
