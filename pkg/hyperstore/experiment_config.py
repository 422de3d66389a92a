# experiment_config.py - Parameter tree: YAML loading, validation, SI conversion, digest

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import yaml

from afc_memory import SPECTRAL_STEP, CombSpec, CrystalSandwich, MemoryModel
from analyzers import MeasurementSettings, PolarizationAnalyzer, TimeBinAnalyzer
from config import DATA_FOLDER, DEFAULT_CONFIG_FILE, DEFAULT_EXPERIMENT
from constants import ALL_DETECTORS, BRANCHES, SCENARIOS
from detection import DetectorModel
from errors import ConfigurationError, DomainError
from quantum_state import HyperState
from source import FilterElement, SourceConfig, cascade_span, heralded_spectrum

# Key suffix -> factor to SI
UNIT_SUFFIXES = {
    "_mhz": 1e6,
    "_ghz": 1e9,
    "_hz": 1.0,
    "_ns": 1e-9,
    "_ps": 1e-12,
    "_s": 1.0,
    "_deg": np.pi / 180.0,
    "_rad": 1.0,
    "_k": 1.0,
}

# Lists of mappings are replaced whole, never merged element-wise
FILTER_KEYS = {"kind", "fwhm_mhz", "fsr_mhz", "center_detuning_mhz"}


def default_config_path() -> str:
    base_dir = os.path.dirname(os.path.abspath(__file__))
    return os.path.join(base_dir, DATA_FOLDER, DEFAULT_CONFIG_FILE)


def merge_tree(base: dict, override: dict, path: str = "") -> dict:
    """Merge `override` into a copy of `base`; unknown keys are an error."""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        where = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ConfigurationError(f"unknown configuration key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(f"'{where}' must be a mapping")
            merged[key] = merge_tree(base[key], value, where)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _si_key(key: str) -> tuple:
    for suffix, factor in UNIT_SUFFIXES.items():
        if key.endswith(suffix):
            return key[: -len(suffix)], factor
    return key, None


def to_si(tree):
    """Strip unit suffixes from keys and scale their values to SI."""
    if isinstance(tree, dict):
        out = {}
        for key, value in tree.items():
            name, factor = _si_key(str(key))
            if factor is not None and value is not None:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigurationError(f"'{key}' must be a number, got {value!r}")
                out[name] = float(value) * factor
            else:
                out[name] = to_si(value)
        return out
    if isinstance(tree, list):
        return [to_si(item) for item in tree]
    if isinstance(tree, bool) or tree is None or isinstance(tree, str):
        return tree
    if isinstance(tree, (int, float)):
        return float(tree)
    return tree


@dataclass(frozen=True)
class AnalyzerSide:
    """Physical offsets and default plate angles of one side, SI units."""
    phase: float = 0.0
    birefringence_phase: float = 0.0
    qwp_angle: float = 0.0
    hwp_angle: float = 0.0


@dataclass(frozen=True)
class CountingSpec:
    bin_width: float
    coincidence_window: float
    histogram_span: float


@dataclass(frozen=True)
class RunSpec:
    scenario: str
    seed: int
    target_coincidences_per_setting: int
    target_branch: str
    min_coincidences_per_setting: int
    duration: Optional[float]
    scan_points: int
    batch_pairs: int


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceConfig
    signal_filters: tuple
    idler_filters: tuple
    signal_transmission: float
    idler_transmission: float
    comb: CombSpec
    photon_fwhm: float
    efficiency_override: Optional[float]
    transmission_override: Optional[float]
    sandwich: CrystalSandwich
    zeeman_splitting: float
    temperature: float
    second_transition_scale: float
    delay: float
    signal_side: AnalyzerSide
    idler_side: AnalyzerSide
    detectors: dict
    counting: CountingSpec
    run: RunSpec
    tree: dict = field(repr=False, compare=False)

    @property
    def state(self) -> HyperState:
        return self.source.state()

    @cached_property
    def photon_spectrum(self) -> Optional[tuple]:
        """(detuning, density) of the heralded signal photon on the memory grid; None without filters."""
        if not self.signal_filters and not self.idler_filters:
            return None
        half = cascade_span(self.signal_filters, self.idler_filters)
        points = max(2001, int(round(2.0 * half / SPECTRAL_STEP)) + 1)
        spectrum = heralded_spectrum(list(self.signal_filters), list(self.idler_filters),
                                     np.linspace(-half, half, points))
        return spectrum.frequencies, spectrum.density

    def memory_model(self) -> MemoryModel:
        return MemoryModel(self.comb, self.photon_fwhm, self.efficiency_override, self.transmission_override,
                           self.photon_spectrum)

    @property
    def settings(self) -> MeasurementSettings:
        """Default settings: configured interferometer phases and raw plate angles."""
        return MeasurementSettings(
            signal_tb=TimeBinAnalyzer(self.delay, self.signal_side.phase, self.signal_side.birefringence_phase),
            idler_tb=TimeBinAnalyzer(self.delay, self.idler_side.phase, self.idler_side.birefringence_phase),
            signal_pol=PolarizationAnalyzer(self.signal_side.qwp_angle, self.signal_side.hwp_angle),
            idler_pol=PolarizationAnalyzer(self.idler_side.qwp_angle, self.idler_side.hwp_angle),
        )

    @property
    def true_phase_offset(self) -> float:
        """Franson phase with no applied phase: sum of the interferometer offsets."""
        return self.signal_side.phase + self.idler_side.phase

    def digest(self) -> str:
        """SHA-256 of the canonical JSON of the SI-converted tree."""
        canonical = json.dumps(to_si(self.tree), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def updated(self, overrides: dict) -> "ExperimentConfig":
        """A new config with `overrides` merged into this one's tree."""
        return build_config(merge_tree(self.tree, overrides))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return self.updated({"run": {"seed": int(seed)}})


def _filters(items, where: str) -> tuple:
    if not isinstance(items, list):
        raise ConfigurationError(f"'{where}' must be a list of filters")
    out = []
    for i, item in enumerate(items):
        if not isinstance(item, dict) or set(item) - FILTER_KEYS or "kind" not in item or "fwhm_mhz" not in item:
            raise ConfigurationError(f"'{where}[{i}]' needs kind and fwhm_mhz (optional fsr_mhz, center_detuning_mhz)")
        si = to_si(item)
        out.append(FilterElement(si["kind"], si["fwhm"], si.get("fsr"), si.get("center_detuning") or 0.0))
    return tuple(out)


def _side(tree: dict) -> AnalyzerSide:
    si = to_si(tree)
    return AnalyzerSide(si["phase"], si["birefringence_phase"], si["qwp_angle"], si["hwp_angle"])


def _int(value, where: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigurationError(f"'{where}' must be an integer >= {minimum}, got {value!r}")
    return value


def build_config(tree: dict) -> ExperimentConfig:
    """Validate a complete parameter tree and build the typed config."""
    try:
        return _build(tree)
    except DomainError as e:
        raise ConfigurationError(str(e)) from e
    except (KeyError, TypeError, ZeroDivisionError) as e:
        raise ConfigurationError(f"malformed configuration: {e}") from e


def _build(tree: dict) -> ExperimentConfig:
    src, mem, sw = tree["source"], tree["memory"], tree["sandwich"]
    ana, cnt, run = tree["analyzers"], tree["counting"], tree["run"]

    for key in ("signal_transmission", "idler_transmission"):
        if not 0.0 <= src[key] <= 1.0:
            raise ConfigurationError(f"'source.{key}' must lie in [0, 1]")
    src_si = to_si(src)
    duration = run["duration_s"]
    source = SourceConfig(
        pair_probability_per_window=float(src["pair_probability"]),
        coherence_time=src_si["coherence_time"],
        duration=float(duration) if duration is not None else 0.0,
        bell_phase_theta=src_si["bell_phase"],
        visibility_pi=float(src["visibility_pi"]),
        visibility_tau=float(src["visibility_tau"]),
    )

    mem_si = to_si(mem)
    comb = CombSpec(
        peak_period_delta=mem_si["peak_period"],
        finesse=float(mem["finesse"]),
        peak_shape=mem["peak_shape"],
        d_peak=float(mem["d_peak"]),
        d_background=float(mem["d_background"]),
        total_bandwidth=mem_si["total_bandwidth"],
        sideband_depth_scaling=tuple(mem["sideband_depth_scaling"]),
    )
    sw_si = to_si(sw)
    sandwich = CrystalSandwich(
        d1=float(sw["d1"]),
        d2=float(sw["d2"]),
        hwp_angle_error=sw_si["hwp_angle_error"],
        hwp_retardation_error=sw_si["hwp_retardation_error"],
    )

    detectors = {}
    for label, spec in tree["detectors"].items():
        if label not in ALL_DETECTORS:
            raise ConfigurationError(f"unknown detector '{label}'")
        si = to_si(spec)
        detectors[label] = DetectorModel(label, float(spec["efficiency"]), si["dark_count_rate"], si["jitter"])

    cnt_si = to_si(cnt)
    counting = CountingSpec(cnt_si["bin_width"], cnt_si["coincidence_window"], cnt_si["histogram_span"])
    delay = to_si(ana)["delay"]
    if not 0.0 < counting.bin_width <= delay / 10.0:
        raise ConfigurationError("bin width must be positive and at most a tenth of the interferometer delay")
    if counting.coincidence_window >= delay:
        raise ConfigurationError("coincidence window must be shorter than the interferometer delay")
    if counting.histogram_span < 4.0 * delay:
        raise ConfigurationError("histogram span must cover four interferometer delays")

    if run["scenario"] not in SCENARIOS:
        raise ConfigurationError(f"'run.scenario' must be one of {SCENARIOS}")
    if run["target_branch"] not in BRANCHES:
        raise ConfigurationError(f"'run.target_branch' must be one of {BRANCHES}")
    if duration is not None and not duration > 0:
        raise ConfigurationError("'run.duration_s' must be positive")
    run_spec = RunSpec(
        scenario=run["scenario"],
        seed=_int(run["seed"], "run.seed"),
        target_coincidences_per_setting=_int(run["target_coincidences_per_setting"], "run.target_coincidences_per_setting", 1),
        target_branch=run["target_branch"],
        min_coincidences_per_setting=_int(run["min_coincidences_per_setting"], "run.min_coincidences_per_setting"),
        duration=float(duration) if duration is not None else None,
        scan_points=_int(run["scan_points"], "run.scan_points", 6),
        batch_pairs=_int(run["batch_pairs"], "run.batch_pairs", 1000),
    )

    config = ExperimentConfig(
        source=source,
        signal_filters=_filters(src["signal_filters"], "source.signal_filters"),
        idler_filters=_filters(src["idler_filters"], "source.idler_filters"),
        signal_transmission=float(src["signal_transmission"]),
        idler_transmission=float(src["idler_transmission"]),
        comb=comb,
        photon_fwhm=mem_si["photon_fwhm"],
        efficiency_override=mem["efficiency_override"],
        transmission_override=mem["transmission_override"],
        sandwich=sandwich,
        zeeman_splitting=sw_si["zeeman_splitting"],
        temperature=sw_si["temperature"],
        second_transition_scale=float(sw["second_transition_od"]) / (float(sw["d1"]) + float(sw["d2"])),
        delay=delay,
        signal_side=_side(ana["signal"]),
        idler_side=_side(ana["idler"]),
        detectors=detectors,
        counting=counting,
        run=run_spec,
        tree=copy.deepcopy(tree),
    )
    config.memory_model()       # eta + T <= 1 and linewidth checks
    config.settings             # delay checks
    return config


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """
    Load a YAML parameter file over the built-in defaults.

    With no path the built-in defaults are used as they are.
    """
    tree = copy.deepcopy(DEFAULT_EXPERIMENT)
    if path is not None:
        try:
            with open(path, "r", encoding="utf8") as stream:
                user = yaml.safe_load(stream) or {}
        except OSError as e:
            raise ConfigurationError(f"cannot read configuration file {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigurationError(f"invalid YAML in {path}: {e}") from e
        if not isinstance(user, dict):
            raise ConfigurationError(f"{path} must hold a mapping at the top level")
        tree = merge_tree(tree, user)
    if overrides:
        tree = merge_tree(tree, overrides)
    return build_config(tree)
