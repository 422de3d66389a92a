# engines.py - Monte Carlo and closed-form engines behind every scenario
#
# Both engines answer the same question: for one set of analyzer settings
# and an acquisition time, what lands in each coincidence peak of each
# detector pair, for photons transmitted by the memory and for stored ones.

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from analyzers import MeasurementSettings, franson_table, rate_timebin
from constants import ALL_DETECTORS, BRANCHES, IDLER_DETECTORS, SIGNAL_DETECTORS, STORED, TRANSMITTED
from detection import (PeakCounts, accidental_coincidence_rate, build_histogram, classify_peaks, detect,
                       effective_window, empty_histogram)
from errors import ConfigurationError, DomainError
from quantum_state import expectation, outcome_operators
from source import keep_probability, sample_pair_times, thin_channels

logger = logging.getLogger(__name__)

CHANNELS = tuple((s, i) for s in SIGNAL_DETECTORS for i in IDLER_DETECTORS)


def seed_sequence(seed) -> np.random.SeedSequence:
    """
    A fresh SeedSequence for `seed`.

    SeedSequence objects count the children they have spawned, so a copy is
    made to keep spawn() deterministic when the same sequence is reused.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key, pool_size=seed.pool_size)
    return np.random.SeedSequence(seed)


def spawn_seeds(seed, count: int) -> list:
    return seed_sequence(seed).spawn(count)


@dataclass
class RunCounts:
    """
    Peak contents per (branch, signal detector, idler detector).

    Monte Carlo runs hold integer counts and the histograms they came from;
    analytic predictions hold expected values.
    """
    duration: float
    peaks: dict
    singles: dict
    pairs: int = 0
    histograms: dict = field(default_factory=dict, repr=False)
    timestamps: Optional[dict] = field(default=None, repr=False)

    def peak(self, branch: str, signal: str, idler: str) -> PeakCounts:
        return self.peaks[(branch, signal, idler)]

    def branch_total(self, branch: str) -> float:
        return sum(self.peak(branch, s, i).total for s, i in CHANNELS)


def _histogram_centers(storage_time: float) -> dict:
    return {TRANSMITTED: 0.0, STORED: storage_time}


class MonteCarloEngine:
    """
    Event-by-event simulation: pair emission, channel loss, memory,
    Franson analyzers, detectors and time-tagged coincidence counting.
    """

    def __init__(self, config):
        self.config = config
        self.memory = config.memory_model()
        self.state = config.state

    @property
    def surviving_pair_rate(self) -> float:
        cfg = self.config
        return cfg.source.pair_rate * keep_probability(cfg.signal_transmission, cfg.idler_transmission)

    def run(self, settings: MeasurementSettings, duration: float, seed,
            keep_timestamps: bool = False) -> RunCounts:
        if not duration > 0:
            raise DomainError(f"acquisition time must be positive, got {duration}")
        cfg = self.config
        counting = cfg.counting
        rate = self.surviving_pair_rate
        n_batches = max(1, int(np.ceil(rate * duration / cfg.run.batch_pairs)))
        batch_seeds = spawn_seeds(seed, n_batches)
        step = duration / n_batches

        table = franson_table(self.state, settings)
        delay = settings.delay
        storage_time = self.memory.storage_time
        centers = _histogram_centers(storage_time)

        histograms = {
            (branch, s, i): empty_histogram(counting.histogram_span, counting.bin_width, delay, centers[branch])
            for branch in BRANCHES for s, i in CHANNELS
        }
        singles = {label: 0 for label in ALL_DETECTORS}
        timestamps = {label: [] for label in ALL_DETECTORS} if keep_timestamps else None
        total_pairs = 0

        for index, batch_seed in enumerate(batch_seeds):
            rng = np.random.default_rng(batch_seed)
            start = index * step
            times = sample_pair_times(rate, start, start + step, rng)
            n = times.size
            total_pairs += n

            signal_ok, idler_ok = thin_channels(n, cfg.signal_transmission, cfg.idler_transmission, rng)
            k = table.sample(n, rng)
            s_path, i_path = table.signal_path[k], table.idler_path[k]
            s_port, i_port = table.signal_port[k], table.idler_port[k]
            disposition = self.memory.sample(n, rng)

            signal_ok &= (disposition != 2) & (s_port > 0)
            idler_ok &= i_port > 0
            t_signal = times + s_path * delay + np.where(disposition == 1, storage_time, 0.0)
            t_idler = times + i_path * delay

            arrivals = {}
            for port, label in enumerate(SIGNAL_DETECTORS, start=1):
                arrivals[label] = t_signal[signal_ok & (s_port == port)]
            for port, label in enumerate(IDLER_DETECTORS, start=1):
                arrivals[label] = t_idler[idler_ok & (i_port == port)]

            streams = detect(arrivals, cfg.detectors, step, rng, start=start)
            for label, stream in streams.items():
                singles[label] += int(stream.size)
                if keep_timestamps:
                    timestamps[label].append(stream)

            for (branch, s, i), hist in histograms.items():
                histograms[(branch, s, i)] = hist + build_histogram(
                    streams[s], streams[i], counting.histogram_span, counting.bin_width, delay, centers[branch]
                )
            logger.debug("[MC] batch %d/%d: %d pairs", index + 1, n_batches, n)

        peaks = {key: classify_peaks(hist, counting.coincidence_window) for key, hist in histograms.items()}
        logger.info("[MC] %d pairs over %.3g s, %d transmitted / %d stored coincidences in peaks",
                    total_pairs, duration,
                    sum(peaks[(TRANSMITTED, s, i)].total for s, i in CHANNELS),
                    sum(peaks[(STORED, s, i)].total for s, i in CHANNELS))
        if keep_timestamps:
            timestamps = {label: np.concatenate(parts) if parts else np.empty(0)
                          for label, parts in timestamps.items()}
        return RunCounts(duration, peaks, singles, total_pairs, histograms, timestamps)


class AnalyticEngine:
    """
    Closed-form expectation values for the same runs.

    Polarization enters through the Werner state and the analyzer
    projectors, the time bins through the Franson fringe of the central
    peak. The long-arm birefringence is not part of this model.
    """

    def __init__(self, config):
        self.config = config
        self.memory = config.memory_model()
        self.state = config.state

    def branch_probability(self, branch: str) -> float:
        return self.memory.transmission if branch == TRANSMITTED else self.memory.efficiency

    def singles_rates(self) -> dict:
        """Clicks per second at each detector, dark counts included."""
        cfg = self.config
        rate = cfg.source.pair_rate
        survive = self.memory.transmission + self.memory.efficiency
        rates = {}
        for label in SIGNAL_DETECTORS:
            det = cfg.detectors[label]
            rates[label] = rate * cfg.signal_transmission * survive * 0.25 * det.efficiency + det.dark_count_rate
        for label in IDLER_DETECTORS:
            det = cfg.detectors[label]
            rates[label] = rate * cfg.idler_transmission * 0.25 * det.efficiency + det.dark_count_rate
        return rates

    def polarization_probabilities(self, settings: MeasurementSettings) -> dict:
        probabilities = {}
        for op in outcome_operators(settings.signal_pol.projectors(), settings.idler_pol.projectors()):
            k, l = op.outcome_label
            probabilities[(SIGNAL_DETECTORS[k - 1], IDLER_DETECTORS[l - 1])] = expectation(self.state.polarization, op)
        return probabilities

    def predict(self, settings: MeasurementSettings, duration: float) -> RunCounts:
        """Expected peak contents, accidental coincidences included."""
        if not duration > 0:
            raise DomainError(f"acquisition time must be positive, got {duration}")
        cfg = self.config
        counting = cfg.counting
        pairs = cfg.source.pair_rate * duration * cfg.signal_transmission * cfg.idler_transmission
        fringe = rate_timebin(cfg.source.visibility_tau, settings.phase_sum)
        pol = self.polarization_probabilities(settings)

        singles = self.singles_rates()
        window = effective_window(counting.coincidence_window, counting.bin_width)
        bins_per_peak = int(round(window / counting.bin_width))

        peaks = {}
        for branch in BRANCHES:
            branch_pairs = pairs * self.branch_probability(branch)
            for s, i in CHANNELS:
                detected = branch_pairs * cfg.detectors[s].efficiency * cfg.detectors[i].efficiency * pol[(s, i)]
                floor = accidental_coincidence_rate(singles[s], singles[i], counting.bin_width) * duration
                accidentals = floor * bins_per_peak
                peaks[(branch, s, i)] = PeakCounts(
                    central=detected * fringe / 4.0 + accidentals,
                    satellite_early=detected / 16.0 + accidentals,
                    satellite_late=detected / 16.0 + accidentals,
                    accidental_floor=floor,
                    bins_per_peak=bins_per_peak,
                )
        expected_singles = {label: r * duration for label, r in singles.items()}
        return RunCounts(duration, peaks, expected_singles, int(round(cfg.source.pair_rate * duration)))

    def plan_duration(self, settings_list: Sequence[MeasurementSettings],
                      counted: Callable[[RunCounts], float], target: float) -> float:
        """
        Acquisition time per run so the counted coincidences reach `target`
        on average over `settings_list`.
        """
        if not target > 0:
            raise DomainError(f"target count must be positive, got {target}")
        rates = [counted(self.predict(s, 1.0)) for s in settings_list]
        mean_rate = float(np.mean(rates))
        if not mean_rate > 0:
            raise ConfigurationError("no coincidences expected in the counted peaks; check transmissions and efficiencies")
        return target / mean_rate
