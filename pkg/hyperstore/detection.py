# detection.py - Detector clicks, coincidence histograms and peak integration

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from constants import ALL_DETECTORS
from errors import DomainError, StructureError


@dataclass(frozen=True)
class DetectorModel:
    """Efficiency, dark-count rate (Hz) and Gaussian timing jitter (s, RMS)."""
    label: str
    efficiency: float
    dark_count_rate: float = 0.0
    jitter: float = 0.0

    def __post_init__(self):
        if self.label not in ALL_DETECTORS:
            raise DomainError(f"unknown detector {self.label!r}")
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError(f"{self.label}: efficiency must lie in [0, 1]")
        if not self.dark_count_rate >= 0:
            raise DomainError(f"{self.label}: dark-count rate must be nonnegative")
        if not self.jitter >= 0:
            raise DomainError(f"{self.label}: jitter must be nonnegative")


@dataclass(frozen=True)
class TimestampRecord:
    detector: str
    time: float


def detect(outcomes: Mapping[str, np.ndarray], detectors: Mapping[str, DetectorModel],
           duration: float, seed, start: float = 0.0) -> dict:
    """
    Turn photon arrival times per detector into sorted click streams.

    Each photon clicks with the detector efficiency; dark counts are a
    Poisson stream over [start, start + duration).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    streams = {}
    for label in ALL_DETECTORS:
        model = detectors[label]
        photons = np.asarray(outcomes.get(label, np.empty(0)), dtype=float)
        clicks = photons[rng.random(photons.size) < model.efficiency]
        n_dark = rng.poisson(model.dark_count_rate * duration)
        darks = start + duration * rng.random(n_dark)
        times = np.concatenate([clicks, darks])
        if model.jitter > 0:
            times = np.clip(times + rng.normal(0.0, model.jitter, times.size), 0.0, None)
        streams[label] = np.sort(times)
    return streams


def to_records(streams: Mapping[str, np.ndarray]) -> list:
    """Flatten click streams into TimestampRecords, detector by detector."""
    return [TimestampRecord(label, float(t)) for label, times in streams.items() for t in times]


def time_differences(signal: np.ndarray, idler: np.ndarray, low: float, high: float) -> np.ndarray:
    """All signal - idler differences in [low, high]; idler must be sorted."""
    signal = np.asarray(signal, dtype=float)
    idler = np.asarray(idler, dtype=float)
    first = np.searchsorted(idler, signal - high, side="left")
    last = np.searchsorted(idler, signal - low, side="right")
    counts = last - first
    total = int(counts.sum())
    if total == 0:
        return np.empty(0)
    which = np.repeat(np.arange(signal.size), counts)
    starts = np.repeat(first - (np.cumsum(counts) - counts), counts)
    partner = starts + np.arange(total)
    return signal[which] - idler[partner]


@dataclass(frozen=True)
class CoincidenceHistogram:
    """
    Counts of signal - idler time differences around `center`.

    Bin centers sit on whole multiples of the bin width relative to
    `center`; the three expected peaks lie at -delay, 0 and +delay.
    """
    bin_width: float
    bins: np.ndarray
    delay: float
    center: float = 0.0

    def __post_init__(self):
        if not self.bin_width > 0:
            raise DomainError("bin width must be positive")
        if self.bin_width > self.delay / 10.0 + 1e-18:
            raise DomainError("bin width must be at most a tenth of the interferometer delay")
        if np.any(np.asarray(self.bins) < 0):
            raise DomainError("histogram counts must be nonnegative")

    @property
    def window_center_offsets(self) -> tuple:
        return (-self.delay, 0.0, self.delay)

    @property
    def bin_centers(self) -> np.ndarray:
        n = len(self.bins)
        return (np.arange(n) - (n - 1) / 2.0) * self.bin_width

    def total(self) -> int:
        return int(np.sum(self.bins))

    def __add__(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        if (len(self.bins) != len(other.bins) or self.bin_width != other.bin_width
                or self.delay != other.delay or self.center != other.center):
            raise StructureError("histograms have different binning")
        return CoincidenceHistogram(self.bin_width, self.bins + other.bins, self.delay, self.center)


def _bin_count(span: float, bin_width: float) -> int:
    n = int(round(span / bin_width))
    return n + 1 if n % 2 == 0 else n


def build_histogram(signal, idler, span: float, bin_width: float, delay: float,
                    center: float = 0.0) -> CoincidenceHistogram:
    """Histogram every signal - idler difference within +/- span/2 of `center`."""
    if not bin_width > 0:
        raise DomainError("bin width must be positive")
    if span < 4.0 * delay:
        raise DomainError("histogram span must cover at least four interferometer delays")
    n = _bin_count(span, bin_width)
    half = n * bin_width / 2.0
    dt = time_differences(signal, idler, center - half, center + half) - center
    edges = (np.arange(n + 1) - n / 2.0) * bin_width
    counts, _ = np.histogram(dt, bins=edges)
    return CoincidenceHistogram(bin_width, counts.astype(np.int64), delay, center)


def empty_histogram(span: float, bin_width: float, delay: float, center: float = 0.0) -> CoincidenceHistogram:
    return CoincidenceHistogram(bin_width, np.zeros(_bin_count(span, bin_width), dtype=np.int64), delay, center)


@dataclass(frozen=True)
class PeakCounts:
    """Integrated peak contents and the mean count per bin outside the peaks."""
    central: float
    satellite_early: float
    satellite_late: float
    accidental_floor: float = 0.0
    bins_per_peak: int = 1

    def __post_init__(self):
        if min(self.central, self.satellite_early, self.satellite_late, self.accidental_floor) < 0:
            raise DomainError("peak counts must be nonnegative")

    @property
    def satellites(self) -> float:
        return self.satellite_early + self.satellite_late

    @property
    def total(self) -> float:
        return self.central + self.satellites


def classify_peaks(hist: CoincidenceHistogram, window: float) -> PeakCounts:
    """Integrate +/- window/2 around each expected peak."""
    if not window > 0:
        raise DomainError("integration window must be positive")
    if window >= hist.delay:
        raise DomainError("integration windows of neighbouring peaks overlap")
    centers = hist.bin_centers
    bins = np.asarray(hist.bins)
    tolerance = 1e-6 * hist.bin_width
    masks = [np.abs(centers - offset) <= window / 2.0 + tolerance for offset in hist.window_center_offsets]
    outside = ~(masks[0] | masks[1] | masks[2])
    floor = float(bins[outside].sum() / outside.sum()) if outside.any() else 0.0
    early, central, late = (int(bins[m].sum()) for m in masks)
    return PeakCounts(
        central=central,
        satellite_early=early,
        satellite_late=late,
        accidental_floor=floor,
        bins_per_peak=int(masks[1].sum()),
    )


def accidental_coincidence_rate(singles_signal: float, singles_idler: float, window: float) -> float:
    """Rate of chance coincidences, S_s * S_i * window."""
    if min(singles_signal, singles_idler, window) < 0:
        raise DomainError("singles rates and window must be nonnegative")
    return singles_signal * singles_idler * window


def effective_window(window: float, bin_width: float) -> float:
    """Width actually integrated by classify_peaks: a whole number of bins."""
    return bin_width * (2 * int(np.floor(window / 2.0 / bin_width + 1e-9)) + 1)
