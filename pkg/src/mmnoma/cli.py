"""Command-line entry point: ``mmnoma <command> [options]``.

Exit status is 0 on success, 2 when a single solve is infeasible and 1 on
any other error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .errors import Infeasible
from .experiments import (
    SWEEP_COLUMNS,
    MC_COLUMNS,
    ExperimentConfig,
    beampattern,
    gain_errors,
    infeasible_report,
    montecarlo,
    montecarlo_metadata,
    run_single,
    sweep,
    write_csv,
)

log = logging.getLogger("mmnoma")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value configuration file")
    for f in dataclasses.fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        kind = f.type if isinstance(f.type, str) else ""
        if kind == "bool":
            p.add_argument(flag, dest=f.name, action="store_const", const="true", default=None)
        else:
            p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmnoma",
        description="Power allocation and constant-modulus beamforming for 2-user mmWave NOMA.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "run the pipeline once and print a JSON report",
        "sweep-rate": "bound and designed rates versus the common rate floor",
        "sweep-power": "bound and designed rates versus P/noise in dB",
        "beampattern": "ideal, pre-CM and post-CM beam patterns",
        "montecarlo": "NOMA versus TDMA averaged over random channels",
        "verify": "run the brute-force oracle checks",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _add_config_flags(p)
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {
        f.name: getattr(args, f.name)
        for f in dataclasses.fields(ExperimentConfig)
        if getattr(args, f.name, None) is not None
    }
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig.from_mapping(overrides)


def _emit_csv(cfg, header, rows) -> None:
    if cfg.output == "-":
        sys.stdout.write(",".join(header) + "\n")
        for row in rows:
            sys.stdout.write(",".join(row) + "\n")
    else:
        write_csv(cfg.output, header, rows)
        log.info("wrote %d rows to %s", len(rows), cfg.output)


def cmd_solve(cfg: ExperimentConfig) -> int:
    try:
        report = run_single(cfg)
    except Infeasible as exc:
        print(json.dumps(infeasible_report(exc), indent=2))
        return EXIT_INFEASIBLE
    text = json.dumps(report, indent=2)
    if cfg.output == "-":
        print(text)
    else:
        with open(cfg.output, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, variable: str) -> int:
    cfg = cfg.with_(sweep_variable=variable)
    _emit_csv(cfg, SWEEP_COLUMNS, sweep(cfg, variable))
    return EXIT_OK


def cmd_beampattern(cfg: ExperimentConfig) -> int:
    _emit_csv(cfg, ("n_antennas", "omega", "ideal", "pre_cm", "post_cm"), beampattern(cfg))
    return EXIT_OK


def cmd_montecarlo(cfg: ExperimentConfig) -> int:
    rows = montecarlo(cfg)
    _emit_csv(cfg, MC_COLUMNS, rows)
    if cfg.output != "-":
        with open(cfg.output + ".meta.json", "w") as fh:
            json.dump(montecarlo_metadata(cfg), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig) -> int:
    """Quick oracle cross-checks at the configured parameters."""
    import numpy as np

    from .allocation import allocate
    from .oracle import GridSpec, grid_allocate, verify_lemma1

    failures = 0

    def report(ok, label, detail):
        nonlocal failures
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {label:<40} {detail}")

    syscfg, pair = cfg.system(), cfg.pair()
    try:
        closed = allocate(pair, syscfg).objective
        grid = grid_allocate(pair, syscfg, GridSpec(2000, 2000)).objective
        report(abs(closed - grid) <= 1e-3, "allocation vs 2000x2000 grid",
               f"closed={closed:.6f} grid={grid:.6f}")
    except Infeasible as exc:
        report(False, "allocation vs 2000x2000 grid", f"infeasible at {exc.stage}")
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for n in (8, 16, 32, 64):
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        q = verify_lemma1(w, 64 * n)
        worst = max(worst, abs(q - np.vdot(w, w).real) / np.vdot(w, w).real)
    report(worst < 1e-4, "pattern integral equals squared norm", f"max rel err={worst:.2e}")
    for n in (16, 32, 64):
        ge, _, _ = gain_errors(cfg, n)
        err = max(ge.errors)
        report(err <= 0.15, f"gain error after CM, N={n}", f"max={err:.4f}")
    return EXIT_OK if failures == 0 else EXIT_ERROR


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "sweep-rate":
            return cmd_sweep(cfg, "rate_floor")
        if args.command == "sweep-power":
            return cmd_sweep(cfg, "power_ratio")
        if args.command == "beampattern":
            return cmd_beampattern(cfg)
        if args.command == "montecarlo":
            return cmd_montecarlo(cfg)
        return cmd_verify(cfg)
    except Exception as exc:  # report and map to the documented exit status
        log.error("%s: %s", type(exc).__name__, exc)
        if args.verbose:
            raise
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
