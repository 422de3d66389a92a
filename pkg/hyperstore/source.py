# source.py - CW-pumped SPDC pair source: filter cascade and pair emission

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from errors import DomainError
from quantum_state import HyperState, hyperentangled_state

logger = logging.getLogger(__name__)

FILTER_KINDS = ("lorentzian_cavity", "gaussian_grating")


@dataclass(frozen=True)
class FilterElement:
    """One spectral filter. Frequencies in Hz."""
    kind: str
    fwhm: float
    fsr: Optional[float] = None
    center_detuning: float = 0.0

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise DomainError(f"unknown filter kind {self.kind!r}")
        if not self.fwhm > 0:
            raise DomainError(f"filter FWHM must be positive, got {self.fwhm}")
        if self.fsr is not None and not self.fsr > self.fwhm:
            raise DomainError(f"filter FSR {self.fsr} must exceed its FWHM {self.fwhm}")

    def transmission(self, detuning) -> np.ndarray:
        """Intensity transmission at the given detuning(s), peak 1."""
        x = (np.asarray(detuning, dtype=float) - self.center_detuning) / self.fwhm
        if self.kind == "lorentzian_cavity":
            return 1.0 / (1.0 + 4.0 * x ** 2)
        return np.exp(-4.0 * np.log(2.0) * x ** 2)


@dataclass(frozen=True)
class SourceConfig:
    pair_probability_per_window: float
    coherence_time: float
    duration: float
    bell_phase_theta: float = 0.0
    visibility_pi: float = 1.0
    visibility_tau: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.pair_probability_per_window <= 0.5:
            raise DomainError(
                f"pair probability per window must lie in [0, 0.5], got {self.pair_probability_per_window}"
            )
        if not self.coherence_time > 0:
            raise DomainError(f"coherence time must be positive, got {self.coherence_time}")
        if not self.duration >= 0:
            raise DomainError(f"duration must be nonnegative, got {self.duration}")
        for name in ("visibility_pi", "visibility_tau"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if not np.isfinite(self.bell_phase_theta):
            raise DomainError("Bell phase must be finite")

    @property
    def pair_rate(self) -> float:
        """Pairs per second: p per coherence-time window."""
        return self.pair_probability_per_window / self.coherence_time

    def state(self) -> HyperState:
        return hyperentangled_state(self.bell_phase_theta, self.visibility_pi, self.visibility_tau)


@dataclass(frozen=True)
class PairEvent:
    creation_time: float
    state: HyperState
    pair_index: int


@dataclass(frozen=True)
class HeraldedSpectrum:
    """
    Heralded signal spectrum on a detuning grid.

    `fwhm` is the half-maximum width. `linewidth` is the width of the
    Lorentzian with the same peak and area; it is the figure that sets the
    coherence time of a product of Lorentzian filters.
    """
    frequencies: np.ndarray
    density: np.ndarray
    fwhm: float
    linewidth: float


def _half_max_width(freqs: np.ndarray, density: np.ndarray) -> float:
    above = np.flatnonzero(density >= 0.5)
    if above.size == 0:
        return 0.0
    lo, hi = above[0], above[-1]
    if lo == 0 or hi == len(freqs) - 1:
        raise DomainError("spectrum does not fall to half maximum inside the grid")
    left = np.interp(0.5, [density[lo - 1], density[lo]], [freqs[lo - 1], freqs[lo]])
    right = np.interp(0.5, [density[hi + 1], density[hi]], [freqs[hi + 1], freqs[hi]])
    return float(right - left)


def _widest_line(filters: list) -> float:
    """Widest cavity of the cascade, or widest filter when it has no cavity."""
    narrow = [f.fwhm for f in filters if f.kind == "lorentzian_cavity"] or [f.fwhm for f in filters]
    return max(narrow)


def cascade_span(signal_filters: list, idler_filters: list) -> float:
    """Half-width of a detuning grid that holds the heralded line: twenty widths of the widest cavity."""
    filters = list(signal_filters) + list(idler_filters)
    if not filters:
        raise DomainError("filter cascade is empty")
    return 20.0 * _widest_line(filters)


def heralded_spectrum(signal_filters: list, idler_filters: list, grid) -> HeraldedSpectrum:
    """
    Spectrum of the signal photon heralded by its filtered idler partner.

    With a CW pump the idler sits at minus the signal detuning, so idler
    filters are evaluated at -nu and multiplied into the signal profile.
    """
    if not signal_filters and not idler_filters:
        raise DomainError("heralded_spectrum needs at least one filter")

    freqs = np.asarray(grid, dtype=float)
    if freqs.ndim != 1 or freqs.size < 2000:
        raise DomainError("frequency grid needs at least 2000 points")
    if np.any(np.diff(freqs) <= 0):
        raise DomainError("frequency grid must be strictly increasing")

    if freqs[-1] - freqs[0] < 10.0 * _widest_line(list(signal_filters) + list(idler_filters)):
        raise DomainError("frequency grid must span at least ten times the widest narrow filter")

    density = np.ones_like(freqs)
    for f in signal_filters:
        density = density * f.transmission(freqs)
    for f in idler_filters:
        density = density * f.transmission(-freqs)
    density = density / density.max()

    area = trapezoid(density, freqs)
    return HeraldedSpectrum(
        frequencies=freqs,
        density=density,
        fwhm=_half_max_width(freqs, density),
        linewidth=float(2.0 * area / np.pi),
    )


def coherence_time_from_fwhm(fwhm: float) -> float:
    """Coherence time of a Lorentzian line, 1/(pi * FWHM)."""
    if not fwhm > 0:
        raise DomainError(f"linewidth must be positive, got {fwhm}")
    return 1.0 / (np.pi * fwhm)


def single_mode_check(cavity: FilterElement, grating: FilterElement) -> bool:
    """True when the grating suppresses the neighbouring cavity modes below one half."""
    if cavity.fsr is None:
        raise DomainError("single-mode check needs a cavity with a free spectral range")
    leak = float(grating.transmission(cavity.center_detuning + cavity.fsr))
    leak = max(leak, float(grating.transmission(cavity.center_detuning - cavity.fsr)))
    if leak > 0.5:
        logger.warning("[SOURCE] grating passes %.2f of the neighbouring cavity mode", leak)
        return False
    return True


def check_cascade(filters: list) -> bool:
    """Run single_mode_check for every cavity against every grating of one arm."""
    cavities = [f for f in filters if f.kind == "lorentzian_cavity" and f.fsr is not None]
    gratings = [f for f in filters if f.kind == "gaussian_grating"]
    ok = True
    for cavity in cavities:
        for grating in gratings:
            ok = single_mode_check(cavity, grating) and ok
    return ok


def sample_pair_times(rate: float, start: float, stop: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival times of a homogeneous Poisson process on [start, stop)."""
    span = stop - start
    if rate <= 0 or span <= 0:
        return np.empty(0)
    expected = rate * span
    chunk = int(expected + 5.0 * np.sqrt(expected) + 16)
    gaps = rng.exponential(1.0 / rate, size=chunk)
    times = start + np.cumsum(gaps)
    while times[-1] < stop:
        more = times[-1] + np.cumsum(rng.exponential(1.0 / rate, size=chunk))
        times = np.concatenate([times, more])
    return times[times < stop]


def sample_pairs(config: SourceConfig, seed) -> list:
    """
    Emit pairs over [0, duration] as PairEvent records.

    Every event refers to the same immutable HyperState built from the
    configured Bell phase and visibilities.
    """
    rng = np.random.default_rng(seed)
    times = sample_pair_times(config.pair_rate, 0.0, config.duration, rng)
    state = config.state()
    logger.debug("[SOURCE] %d pairs over %.3g s", times.size, config.duration)
    return [PairEvent(float(t), state, index) for index, t in enumerate(times)]


def thin_channels(n_pairs: int, signal_transmission: float, idler_transmission: float,
                  rng: np.random.Generator) -> tuple:
    """
    Split surviving pairs into (signal present, idler present) masks.

    Callers draw only pairs with at least one surviving photon; the split
    is conditional on that.
    """
    t_s, t_i = signal_transmission, idler_transmission
    p_keep = keep_probability(t_s, t_i)
    if p_keep == 0.0:
        return np.zeros(n_pairs, dtype=bool), np.zeros(n_pairs, dtype=bool)
    weights = np.array([t_s * (1.0 - t_i), (1.0 - t_s) * t_i, t_s * t_i]) / p_keep
    category = rng.choice(3, size=n_pairs, p=weights)
    return category != 1, category != 0


def keep_probability(signal_transmission: float, idler_transmission: float) -> float:
    """Probability that at least one photon of a pair survives its channel."""
    return 1.0 - (1.0 - signal_transmission) * (1.0 - idler_transmission)
