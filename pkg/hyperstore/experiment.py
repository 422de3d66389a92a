# experiment.py - Scenarios: calibration scans, CHSH runs, Table-1 sweep, crosscheck

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from afc_memory import (afc_efficiency, comb_spectrum, effective_optical_depth, storage_time,
                        temporal_mode_capacity, thermal_od_ratio)
from analyzers import (MeasurementSettings, PolarizationAnalyzer, TimeBinAnalyzer, outcome_phase_flip,
                       wrap_phase)
from chsh import ChshResult, PhaseOffsets, chsh_S, correlator, fit_visibility, optimal_settings
from constants import BRANCHES, IDLER_DETECTORS, SIGNAL_DETECTORS, STORED, TRANSMITTED
from engines import AnalyticEngine, MonteCarloEngine, RunCounts, spawn_seeds
from errors import DomainError
from source import FilterElement, cascade_span, check_cascade, coherence_time_from_fwhm, heralded_spectrum

logger = logging.getLogger(__name__)

# Fixed bases of the degree of freedom not under test
TIMEBIN_BASES = {"tau1": 0.0, "tau2": np.pi / 4.0}        # Franson phase sum
POLARIZATION_BASES = {"pi1": 0.0, "pi2": np.pi / 8.0}     # HWP angle: {H,V} and {+,-}

TABLE1_TESTS = (
    ("polarization", "tau1"),
    ("polarization", "tau2"),
    ("timebin", "pi1"),
    ("timebin", "pi2"),
)

# Correlator count order
CORRELATOR_OUTCOMES = ((1, 1), (2, 2), (1, 2), (2, 1))

CROSSCHECK_LIMIT = 4.0


def _channel(k: int, l: int) -> tuple:
    return SIGNAL_DETECTORS[k - 1], IDLER_DETECTORS[l - 1]


def _circular_mean(*phases) -> float:
    return float(np.angle(np.sum(np.exp(1j * np.asarray(phases)))))


def _signed(phase: float) -> float:
    """Map a phase onto (-pi, pi]."""
    return float(np.angle(np.exp(1j * phase)))


def true_offsets(config) -> PhaseOffsets:
    """Offsets the simulated source and interferometers actually have."""
    return PhaseOffsets(theta=wrap_phase(config.source.bell_phase_theta),
                        phi_offset=wrap_phase(config.true_phase_offset))


def build_settings(config, signal_phase: float = 0.0, idler_phase: float = 0.0,
                   signal_pol: Optional[PolarizationAnalyzer] = None,
                   idler_pol: Optional[PolarizationAnalyzer] = None) -> MeasurementSettings:
    """Settings with phases applied on top of each interferometer's own offset."""
    s, i = config.signal_side, config.idler_side
    return MeasurementSettings(
        signal_tb=TimeBinAnalyzer(config.delay, s.phase + signal_phase, s.birefringence_phase),
        idler_tb=TimeBinAnalyzer(config.delay, i.phase + idler_phase, i.birefringence_phase),
        signal_pol=signal_pol or PolarizationAnalyzer.linear(0.0),
        idler_pol=idler_pol or PolarizationAnalyzer.linear(0.0),
    )


def polarization_counts(run: RunCounts, branch: str) -> tuple:
    """(R11, R22, R12, R21) with satellites included."""
    return tuple(run.peak(branch, *_channel(k, l)).total for k, l in CORRELATOR_OUTCOMES)


def correlated_central(run: RunCounts, branch: str) -> float:
    """Central-peak coincidences of the two detector pairs with equal polarization outcomes."""
    return run.peak(branch, *_channel(1, 1)).central + run.peak(branch, *_channel(2, 2)).central


def _pick_branch(analytic: AnalyticEngine) -> str:
    return TRANSMITTED if analytic.branch_probability(TRANSMITTED) > 0 else STORED


@dataclass
class RunReport:
    """What a scenario produced, traceable to its seed and config digest."""
    scenario: str
    seed: int
    config_digest: str
    outputs: dict
    files: list = field(default_factory=list)
    deltas: dict = field(default_factory=dict)
    success: bool = True

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "scenario": self.scenario,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "outputs": self.outputs,
            "files": list(self.files),
            "deltas": self.deltas,
        }


# -- Simulation --------------------------------------------------------

def simulate(config, seed, duration: Optional[float] = None, keep_timestamps: bool = False) -> RunCounts:
    """One Monte Carlo run at the configured default settings."""
    analytic = AnalyticEngine(config)
    settings = config.settings
    if duration is None:
        duration = config.run.duration
    if duration is None:
        branch = config.run.target_branch
        duration = analytic.plan_duration([settings], lambda r: r.branch_total(branch),
                                          config.run.target_coincidences_per_setting)
    logger.info("[MC] simulating %.3g s at the default settings", duration)
    return MonteCarloEngine(config).run(settings, duration, seed, keep_timestamps=keep_timestamps)


# -- Calibration scans -------------------------------------------------

@dataclass
class ScanResult:
    kind: str
    branch: str
    settings: np.ndarray
    counts: dict
    fits: dict
    duration: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "branch": self.branch,
            "duration_s": self.duration,
            "fits": {label: fit.to_dict() for label, fit in self.fits.items()},
        }

    def rows(self) -> list:
        labels = sorted(self.counts)
        return [[float(x)] + [int(self.counts[label][j]) for label in labels]
                for j, x in enumerate(self.settings)]

    def header(self) -> list:
        unit = "phase_rad" if self.kind == "phase" else "hwp_angle_rad"
        return [unit] + sorted(self.counts)


def _run_scan(config, seed, kind: str, settings_list: list, counters: dict,
              frequency: float, xs: np.ndarray, branch: Optional[str]) -> ScanResult:
    analytic = AnalyticEngine(config)
    engine = MonteCarloEngine(config)
    preferred = branch or _pick_branch(analytic)

    duration = config.run.duration
    if duration is None:
        # every scan point aims at the target summed over all detector pairs
        duration = analytic.plan_duration(settings_list, lambda r: r.branch_total(preferred),
                                          config.run.target_coincidences_per_setting)

    runs = [engine.run(s, duration, child) for s, child in zip(settings_list, spawn_seeds(seed, len(settings_list)))]

    used = preferred
    if branch is None and preferred == TRANSMITTED and sum(r.branch_total(TRANSMITTED) for r in runs) == 0:
        logger.warning("[CAL] no transmitted coincidences, falling back to stored photons")
        used = STORED

    counts = {label: np.array([count(r, used) for r in runs]) for label, count in counters.items()}
    fits = {label: fit_visibility(list(zip(xs, values)), frequency=frequency) for label, values in counts.items()}
    for label, fit in fits.items():
        logger.info("[CAL] %s scan %s: V=%.3f x0=%.3f rad", kind, label, fit.V, fit.phase_offset)
    return ScanResult(kind, used, xs, counts, fits, duration)


def scan_phase(config, seed, branch: Optional[str] = None) -> ScanResult:
    """
    Step the signal interferometer phase over one period with both
    polarizations analyzed in {H, V}; fit the HH and VV central-peak fringes.
    """
    n = config.run.scan_points
    xs = 2.0 * np.pi * np.arange(n) / n
    settings_list = [build_settings(config, signal_phase=x) for x in xs]
    counters = {
        "R11": lambda r, b: r.peak(b, *_channel(1, 1)).central,
        "R22": lambda r, b: r.peak(b, *_channel(2, 2)).central,
    }
    return _run_scan(config, seed, "phase", settings_list, counters, 1.0, xs, branch)


def scan_hwp(config, seed, branch: Optional[str] = None) -> ScanResult:
    """
    Rotate the signal HWP behind a QWP at 45 deg with the idler projected
    onto |+>; the fringe phase carries the Bell phase of the source.
    """
    n = config.run.scan_points
    xs = 0.5 * np.pi * np.arange(n) / n
    idler = PolarizationAnalyzer.linear(np.pi / 8.0, basis_label="pi2")
    settings_list = [
        build_settings(config, signal_pol=PolarizationAnalyzer(qwp_angle=np.pi / 4.0, hwp_angle=h), idler_pol=idler)
        for h in xs
    ]
    counters = {
        "R11": lambda r, b: r.peak(b, *_channel(1, 1)).total,
        "R21": lambda r, b: r.peak(b, *_channel(2, 1)).total,
    }
    return _run_scan(config, seed, "hwp", settings_list, counters, 4.0, xs, branch)


@dataclass
class CalibrationResult:
    offsets: PhaseOffsets
    phase_scan: ScanResult
    hwp_scan: ScanResult
    hv_phase_difference: float

    def to_dict(self) -> dict:
        return {
            "theta": self.offsets.theta,
            "sigma_theta": self.offsets.sigma_theta,
            "phi_offset": self.offsets.phi_offset,
            "sigma_phi": self.offsets.sigma_phi,
            "hv_phase_difference": self.hv_phase_difference,
            "phase_scan": self.phase_scan.to_dict(),
            "hwp_scan": self.hwp_scan.to_dict(),
        }


def offsets_from_scans(phase_scan: ScanResult, hwp_scan: ScanResult) -> tuple:
    """(PhaseOffsets, H/V fringe phase difference) from the two calibration scans."""
    h_fit, v_fit = phase_scan.fits["R11"], phase_scan.fits["R22"]
    phi_offset = wrap_phase(-_circular_mean(h_fit.phase_offset, v_fit.phase_offset))
    sigma_phi = 0.5 * float(np.hypot(h_fit.sigma_phase, v_fit.sigma_phase))
    hv_difference = _signed(h_fit.phase_offset - v_fit.phase_offset)

    plus_fit, minus_fit = hwp_scan.fits["R11"], hwp_scan.fits["R21"]
    x0 = _circular_mean(plus_fit.phase_offset, minus_fit.phase_offset - np.pi)
    theta = wrap_phase(np.pi - x0)
    sigma_theta = 0.5 * float(np.hypot(plus_fit.sigma_phase, minus_fit.sigma_phase))
    offsets = PhaseOffsets(theta=theta, phi_offset=phi_offset, sigma_theta=sigma_theta, sigma_phi=sigma_phi)
    return offsets, hv_difference


def calibrate(config, seed) -> CalibrationResult:
    """Fit the Franson phase offset, then the Bell phase, from transmitted photons."""
    phase_seed, hwp_seed = spawn_seeds(seed, 2)
    phase = scan_phase(config, phase_seed)
    hwp = scan_hwp(config, hwp_seed)
    offsets, hv_difference = offsets_from_scans(phase, hwp)
    logger.info("[CAL] theta=%.4f(%.4f) phi_offset=%.4f(%.4f) rad",
                offsets.theta, offsets.sigma_theta, offsets.phi_offset, offsets.sigma_phi)
    return CalibrationResult(offsets, phase, hwp, hv_difference)


# -- CHSH --------------------------------------------------------------

def chsh_runs(config, dof: str, fixed_basis: str, offsets: PhaseOffsets) -> list:
    """
    (setting index, outcome, MeasurementSettings) for every acquisition a
    CHSH test needs. Polarization tests read all four outcomes from one
    run; time-bin tests step each interferometer between its two outcome
    phases, four runs per setting.
    """
    runs = []
    for index, setting in enumerate(optimal_settings(dof, offsets)):
        if dof == "polarization":
            if fixed_basis not in TIMEBIN_BASES:
                raise DomainError(f"polarization tests fix the time bins in {tuple(TIMEBIN_BASES)}")
            settings = build_settings(
                config,
                signal_phase=TIMEBIN_BASES[fixed_basis] - offsets.phi_offset,
                signal_pol=PolarizationAnalyzer.linear(setting.signal, setting.bell_phase),
                idler_pol=PolarizationAnalyzer.linear(setting.idler),
            )
            runs.append((index, None, settings))
        else:
            if fixed_basis not in POLARIZATION_BASES:
                raise DomainError(f"time-bin tests fix the polarization in {tuple(POLARIZATION_BASES)}")
            angle = POLARIZATION_BASES[fixed_basis]
            signal_pol = PolarizationAnalyzer.linear(angle, offsets.theta, basis_label=fixed_basis)
            idler_pol = PolarizationAnalyzer.linear(angle, basis_label=fixed_basis)
            for k, l in CORRELATOR_OUTCOMES:
                settings = build_settings(
                    config,
                    signal_phase=setting.signal + outcome_phase_flip(k),
                    idler_phase=setting.idler + outcome_phase_flip(l),
                    signal_pol=signal_pol,
                    idler_pol=idler_pol,
                )
                runs.append((index, (k, l), settings))
    return runs


@dataclass
class ChshRun:
    dof: str
    fixed_basis: str
    duration: float
    results: dict
    predicted: dict
    under_sampled: dict

    def cell(self, branch: str) -> dict:
        result = self.results[branch]
        predicted = self.predicted[branch]
        cell = {
            "test": self.dof,
            "fixed_basis": self.fixed_basis,
            "branch": branch,
            "duration_s": self.duration,
            "under_sampled": self.under_sampled[branch],
            "analytic_S": predicted.S if predicted is not None else None,
        }
        if result is None:
            cell.update({"S": None, "sigma_S": None, "n_sigma": None, "correlators": []})
        else:
            cell.update(result.to_dict())
        return cell


def _correlators(count_sets: list) -> Optional[ChshResult]:
    try:
        return chsh_S([correlator(counts) for counts in count_sets])
    except DomainError:
        return None


def run_chsh(config, dof: str, fixed_basis: str, offsets: PhaseOffsets, seed) -> ChshRun:
    """One CHSH test, Monte Carlo and closed form, for both memory branches."""
    analytic = AnalyticEngine(config)
    engine = MonteCarloEngine(config)
    runs = chsh_runs(config, dof, fixed_basis, offsets)
    target_branch = config.run.target_branch

    if dof == "polarization":
        tally = polarization_counts
        target = config.run.target_coincidences_per_setting
    else:
        tally = correlated_central
        target = config.run.target_coincidences_per_setting / 4.0

    def counted(run: RunCounts) -> float:
        value = tally(run, target_branch)
        return sum(value) if dof == "polarization" else value

    duration = config.run.duration
    if duration is None:
        duration = analytic.plan_duration([s for _, _, s in runs], counted, target)
    logger.info("[MC] CHSH %s/%s: %d runs of %.3g s", dof, fixed_basis, len(runs), duration)

    seeds = spawn_seeds(seed, len(runs))
    measured = {branch: [dict() for _ in range(4)] for branch in BRANCHES}
    expected = {branch: [dict() for _ in range(4)] for branch in BRANCHES}
    for (index, outcome, settings), child in zip(runs, seeds):
        mc = engine.run(settings, duration, child)
        prediction = analytic.predict(settings, duration)
        for branch in BRANCHES:
            measured[branch][index][outcome] = tally(mc, branch)
            expected[branch][index][outcome] = tally(prediction, branch)

    def count_sets(per_setting: list) -> list:
        if dof == "polarization":
            return [entry[None] for entry in per_setting]
        return [tuple(entry[o] for o in CORRELATOR_OUTCOMES) for entry in per_setting]

    results, predicted, under = {}, {}, {}
    minimum = config.run.min_coincidences_per_setting
    for branch in BRANCHES:
        mc_sets = count_sets(measured[branch])
        results[branch] = _correlators(mc_sets)
        predicted[branch] = _correlators(count_sets(expected[branch]))
        under[branch] = results[branch] is None or any(sum(c) < minimum for c in mc_sets)
        if under[branch]:
            logger.warning("[MC] CHSH %s/%s %s: fewer than %d coincidences in a setting",
                           dof, fixed_basis, branch, minimum)
    return ChshRun(dof, fixed_basis, duration, results, predicted, under)


def run_table1(config, seed, offsets: Optional[PhaseOffsets] = None) -> RunReport:
    """Calibrate, then run every test of the summary table for both memory branches."""
    seeds = spawn_seeds(seed, 1 + len(TABLE1_TESTS))
    calibration = None
    if offsets is None:
        calibration = calibrate(config, seeds[0])
        offsets = calibration.offsets

    cells, deltas = [], {}
    for (dof, basis), child in zip(TABLE1_TESTS, seeds[1:]):
        chsh_run = run_chsh(config, dof, basis, offsets, child)
        for branch in BRANCHES:
            cell = chsh_run.cell(branch)
            cells.append(cell)
            if cell["S"] is not None and cell["analytic_S"] is not None:
                deltas[f"{dof}/{basis}/{branch}"] = cell["S"] - cell["analytic_S"]
            logger.info("[TABLE1] %s %s %s: S=%s", dof, basis, branch,
                        "n/a" if cell["S"] is None else f"{cell['S']:.3f}({cell['sigma_S']:.3f})")

    outputs = {
        "offsets": {"theta": offsets.theta, "phi_offset": offsets.phi_offset,
                    "sigma_theta": offsets.sigma_theta, "sigma_phi": offsets.sigma_phi},
        "calibration": calibration.to_dict() if calibration else None,
        "cells": cells,
    }
    return RunReport("table1", _seed_value(seed), config.digest(), outputs, deltas=deltas)


def table1_rows(report: RunReport) -> list:
    return [
        [c["test"], c["fixed_basis"], c["branch"], c["S"], c["sigma_S"], c["n_sigma"], c["analytic_S"],
         c["under_sampled"]]
        for c in report.outputs["cells"]
    ]


TABLE1_HEADER = ["test", "fixed_basis", "branch", "S", "sigma_S", "n_sigma", "analytic_S", "under_sampled"]


# -- Engine crosscheck -------------------------------------------------

def crosscheck(config, seed, limit: float = CROSSCHECK_LIMIT) -> RunReport:
    """
    Compare Monte Carlo correlators with closed-form ones at every CHSH
    setting, with the analyzers set from the true offsets.
    """
    offsets = true_offsets(config)
    rows = []
    for (dof, basis), child in zip((("polarization", "tau1"), ("timebin", "pi1")), spawn_seeds(seed, 2)):
        chsh_run = run_chsh(config, dof, basis, offsets, child)
        for branch in BRANCHES:
            result, predicted = chsh_run.results[branch], chsh_run.predicted[branch]
            if result is None or predicted is None:
                continue
            for mc, pred in zip(result.correlators, predicted.correlators):
                rows.append(_deviation(dof, branch, mc, pred, len(rows)))

    worst = max((r["z"] for r in rows), default=0.0)
    passed = bool(rows) and worst <= limit
    if not passed:
        logger.warning("[MC] crosscheck failed: largest deviation %.2f sigma", worst)
    outputs = {"limit": limit, "max_z": worst, "passed": passed, "settings": rows}
    return RunReport("crosscheck", _seed_value(seed), config.digest(), outputs,
                     deltas={"max_z": worst}, success=passed)


def _deviation(dof: str, branch: str, mc, pred, index: int) -> dict:
    difference = abs(mc.E - pred.E)
    if mc.sigma_E > 0:
        z = difference / mc.sigma_E
    else:
        z = 0.0 if difference < 1e-12 else float("inf")
    return {"dof": dof, "branch": branch, "setting": index % 4, "E_mc": mc.E, "E_analytic": pred.E,
            "sigma_E": mc.sigma_E, "z": z}


# -- Memory and source reports -----------------------------------------

def comb_profile(config, points_per_period: int = 100) -> tuple:
    """(detuning grid, optical depth) over the comb plus two periods each side."""
    comb = config.comb
    half = comb.total_bandwidth / 2.0 + 2.0 * comb.peak_period_delta
    step = comb.peak_period_delta / points_per_period
    grid = np.arange(-half, half + step / 2.0, step)
    return grid, comb_spectrum(comb, grid)


def heralded_profile(config, points: int = 20001):
    """Heralded signal spectrum of the configured cascade; the memory's Lorentzian line without filters."""
    signal, idler = list(config.signal_filters), list(config.idler_filters)
    if not signal and not idler:
        signal = [FilterElement("lorentzian_cavity", config.photon_fwhm)]
    half = cascade_span(signal, idler)
    return heralded_spectrum(signal, idler, np.linspace(-half, half, points))


def efficiency_report(config, angle_points: int = 181) -> dict:
    """Memory efficiency and transmission, sandwich polarization dependence, source linewidth."""
    comb = config.comb
    model = config.memory_model()
    square = replace(comb, peak_shape="square")
    gaussian = replace(comb, peak_shape="gaussian")

    angles = np.linspace(0.0, np.pi, angle_points)
    sandwich = config.sandwich
    first = np.array([effective_optical_depth(sandwich, a) for a in angles])
    scale = config.second_transition_scale
    second_sandwich = replace(sandwich, d1=sandwich.d1 * scale, d2=sandwich.d2 * scale)
    second = np.array([effective_optical_depth(second_sandwich, a) for a in angles])

    spectrum = heralded_profile(config)
    signal_ok = check_cascade(list(config.signal_filters))
    idler_ok = check_cascade(list(config.idler_filters))

    return {
        "memory": {
            "efficiency": model.efficiency,
            "efficiency_gaussian": afc_efficiency(gaussian),
            "efficiency_square": afc_efficiency(square),
            "efficiency_overridden": config.efficiency_override is not None,
            "transmission": model.transmission,
            "storage_time_s": storage_time(comb),
            "temporal_modes": temporal_mode_capacity(comb, config.source.coherence_time),
        },
        "sandwich": {
            "effective_od_mean": float(first.mean()),
            "effective_od_variation": float((first.max() - first.min()) / first.mean()),
            "second_transition_od_mean": float(second.mean()),
            "second_transition_od_variation": float((second.max() - second.min()) / second.mean()),
            "thermal_od_ratio": thermal_od_ratio(config.zeeman_splitting, config.temperature),
        },
        "source": {
            "heralded_fwhm_hz": spectrum.fwhm,
            "heralded_linewidth_hz": spectrum.linewidth,
            "coherence_time_s": coherence_time_from_fwhm(spectrum.linewidth),
            "signal_single_mode": signal_ok,
            "idler_single_mode": idler_ok,
        },
    }


def _seed_value(seed) -> int:
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.entropy)
    return int(seed)
