#!/usr/bin/env python3
# main.py - Command-line entry point for the hyperentanglement storage simulator

import sys
import os

# Add the package directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import argparse
import json
import logging

import numpy as np

from chsh import DOFS, PhaseOffsets
from constants import PEAKS
from errors import ConfigurationError, SimulationError
from experiment import (TABLE1_HEADER, POLARIZATION_BASES, TIMEBIN_BASES, RunReport, calibrate,
                        comb_profile, crosscheck, efficiency_report, heralded_profile, run_chsh,
                        run_table1, scan_hwp, scan_phase, simulate, table1_rows, true_offsets)
from experiment_config import load_config
from storage import ResultStorage

logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "scan-phase", "scan-hwp", "chsh", "table1", "comb-spectrum", "efficiency", "crosscheck")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperstore",
        description="Simulate storage of polarization/energy-time hyperentangled photons in an AFC memory.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML parameter file merged over the defaults")
    common.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
    common.add_argument("--out", default=None, help="output folder (default ./results)")
    common.add_argument("--format", choices=("csv", "json"), default="json",
                        help="csv also writes the plot-ready tables")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="command", required=True)
    simulate_cmd = sub.add_parser("simulate", parents=[common], help="one run at the default settings")
    simulate_cmd.add_argument("--duration", type=float, help="acquisition time in seconds")
    simulate_cmd.add_argument("--timestamps", action="store_true", help="also export every click")
    sub.add_parser("scan-phase", parents=[common], help="Franson phase scan")
    sub.add_parser("scan-hwp", parents=[common], help="signal HWP scan for the Bell phase")
    chsh_cmd = sub.add_parser("chsh", parents=[common], help="one CHSH test")
    chsh_cmd.add_argument("--dof", choices=DOFS, default="polarization")
    chsh_cmd.add_argument("--basis", help=f"fixed basis of the other DOF: {tuple(TIMEBIN_BASES)} "
                                          f"or {tuple(POLARIZATION_BASES)}")
    chsh_cmd.add_argument("--ideal-offsets", action="store_true",
                          help="set the analyzers from the true offsets instead of calibrating")
    sub.add_parser("table1", parents=[common], help="all CHSH tests, transmitted and stored")
    sub.add_parser("comb-spectrum", parents=[common], help="comb and heralded photon spectra")
    sub.add_parser("efficiency", parents=[common], help="memory efficiency and sandwich report")
    sub.add_parser("crosscheck", parents=[common], help="Monte Carlo against closed form")
    return parser


def _offsets_dict(offsets: PhaseOffsets) -> dict:
    return {"theta": offsets.theta, "phi_offset": offsets.phi_offset,
            "sigma_theta": offsets.sigma_theta, "sigma_phi": offsets.sigma_phi}


def run_command(args, config, storage: ResultStorage) -> RunReport:
    seed = config.run.seed
    digest = config.digest()
    csv_out = args.format == "csv"

    if args.command == "simulate":
        counts = simulate(config, seed, duration=args.duration, keep_timestamps=args.timestamps)
        outputs = {
            "duration_s": counts.duration,
            "pairs": counts.pairs,
            "singles": counts.singles,
            "peaks": [
                {"branch": b, "signal_detector": s, "idler_detector": i,
                 **{name: getattr(p, name) for name in PEAKS}, "accidental_floor": p.accidental_floor}
                for (b, s, i), p in sorted(counts.peaks.items())
            ],
        }
        if csv_out:
            storage.write_histograms("histograms.csv", counts.histograms)
        if args.timestamps:
            storage.write_timestamps("timestamps.csv", counts.timestamps)
        report = RunReport("simulate", seed, digest, outputs)

    elif args.command in ("scan-phase", "scan-hwp"):
        scan = scan_phase(config, seed) if args.command == "scan-phase" else scan_hwp(config, seed)
        if csv_out:
            storage.write_csv(f"{args.command}.csv", scan.header(), scan.rows())
        report = RunReport(args.command, seed, digest, scan.to_dict())

    elif args.command == "chsh":
        basis = args.basis or ("tau1" if args.dof == "polarization" else "pi1")
        calibration_seed, chsh_seed = np.random.SeedSequence(seed).spawn(2)
        calibration = None
        if args.ideal_offsets:
            offsets = true_offsets(config)
        else:
            calibration = calibrate(config, calibration_seed)
            offsets = calibration.offsets
        chsh_run = run_chsh(config, args.dof, basis, offsets, chsh_seed)
        cells = [chsh_run.cell(branch) for branch in chsh_run.results]
        outputs = {"offsets": _offsets_dict(offsets),
                   "calibration": calibration.to_dict() if calibration else None,
                   "cells": cells}
        if csv_out:
            storage.write_csv("chsh.csv", TABLE1_HEADER, table1_rows(RunReport("chsh", seed, digest, outputs)))
        report = RunReport("chsh", seed, digest, outputs)

    elif args.command == "table1":
        report = run_table1(config, seed)
        if csv_out:
            storage.write_csv("table1.csv", TABLE1_HEADER, table1_rows(report))

    elif args.command == "comb-spectrum":
        grid, depth = comb_profile(config)
        spectrum = heralded_profile(config)
        storage.write_csv("comb_spectrum.csv", ["detuning_hz", "optical_depth", "transmission"],
                          zip(grid, depth, np.exp(-depth)))
        if csv_out:
            storage.write_csv("heralded_spectrum.csv", ["detuning_hz", "density"],
                              zip(spectrum.frequencies, spectrum.density))
        outputs = {"comb_points": int(grid.size), "heralded_fwhm_hz": spectrum.fwhm,
                   "heralded_linewidth_hz": spectrum.linewidth}
        report = RunReport("comb-spectrum", seed, digest, outputs)

    elif args.command == "efficiency":
        report = RunReport("efficiency", seed, digest, efficiency_report(config))

    else:
        report = crosscheck(config, seed)

    storage.write_json(f"{args.command}.json", report.to_dict())
    report.files = list(storage.written)
    return report


def main(argv=None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        overrides = {"run": {"seed": args.seed}} if args.seed is not None else None
        config = load_config(args.config, overrides)
        storage = ResultStorage(args.out)
        report = run_command(args, config, storage)
    except SimulationError as e:
        error = {"success": False, "error": str(e), "type": type(e).__name__}
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
        return 2 if isinstance(e, ConfigurationError) else 1
    except OSError as e:
        print(json.dumps({"success": False, "error": str(e), "type": "OSError"}, sort_keys=True),
              file=sys.stderr)
        return 1

    print(json.dumps({"success": report.success, "scenario": report.scenario, "files": report.files},
                     sort_keys=True))
    return 0 if report.success else 1


if __name__ == "__main__":
    sys.exit(main())
