# afc_memory.py - Atomic frequency comb memory and two-crystal sandwich

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid

from analyzers import waveplate
from constants import BOLTZMANN, LOST, PLANCK, STORED, TRANSMITTED
from errors import ConfigurationError, DomainError

PEAK_SHAPES = ("square", "gaussian")
DISPOSITIONS = (TRANSMITTED, STORED, LOST)      # sample() codes 0, 1, 2
SPECTRAL_STEP = 2e6                             # Hz, resolves 20 MHz teeth
LORENTZIAN_SPAN = 20.0                          # half-widths of the fallback grid, in linewidths
MAX_PLATE_ERROR = 0.2                           # rad


@dataclass(frozen=True)
class CombSpec:
    """
    Comb geometry. Frequencies in Hz, depths are optical depths.

    `sideband_depth_scaling` holds one relative depth per band, carrier band
    in the middle; the bandwidth is split evenly between the bands.
    """
    peak_period_delta: float
    finesse: float
    peak_shape: str
    d_peak: float
    d_background: float
    total_bandwidth: float
    sideband_depth_scaling: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "sideband_depth_scaling", tuple(float(s) for s in self.sideband_depth_scaling))
        if not self.peak_period_delta > 0:
            raise DomainError(f"comb period must be positive, got {self.peak_period_delta}")
        if not self.finesse >= 1:
            raise DomainError(f"comb finesse must be at least 1, got {self.finesse}")
        if self.peak_shape not in PEAK_SHAPES:
            raise DomainError(f"peak shape must be one of {PEAK_SHAPES}")
        if not self.d_peak >= self.d_background >= 0:
            raise DomainError("optical depths must satisfy d_peak >= d_background >= 0")
        if not self.total_bandwidth >= self.peak_period_delta:
            raise DomainError("comb bandwidth must be at least one period")
        scaling = self.sideband_depth_scaling
        if len(scaling) % 2 == 0 or any(not 0.0 <= s <= 1.0 for s in scaling):
            raise DomainError("sideband scaling needs an odd number of factors in [0, 1]")

    @property
    def tooth_width(self) -> float:
        """Tooth FWHM, Delta / F."""
        return self.peak_period_delta / self.finesse

    @property
    def d_tilde(self) -> float:
        return self.d_peak / self.finesse


def afc_efficiency(comb: CombSpec) -> float:
    """
    Echo efficiency d~^2 exp(-d~) exp(-d0) eta_deph with d~ = d/F.

    Square teeth dephase as sinc^2(pi/F), gaussian teeth as exp(-7/F^2).
    """
    d_tilde = comb.d_tilde
    if comb.peak_shape == "square":
        dephasing = np.sinc(1.0 / comb.finesse) ** 2       # numpy sinc is sin(pi x)/(pi x)
    else:
        dephasing = np.exp(-7.0 / comb.finesse ** 2)
    eta = d_tilde ** 2 * np.exp(-d_tilde) * np.exp(-comb.d_background) * dephasing
    return float(eta)


def storage_time(comb: CombSpec) -> float:
    return 1.0 / comb.peak_period_delta


def temporal_mode_capacity(comb: CombSpec, mode_duration: float) -> float:
    """Number of temporal modes of `mode_duration` seconds that fit in the storage time."""
    if not mode_duration > 0:
        raise DomainError(f"mode duration must be positive, got {mode_duration}")
    return storage_time(comb) / mode_duration


def _band_scale(comb: CombSpec, centers: np.ndarray) -> np.ndarray:
    scaling = np.asarray(comb.sideband_depth_scaling)
    middle = len(scaling) // 2
    band = comb.total_bandwidth / len(scaling)
    distance = np.abs(centers)
    order = np.where(
        distance < band / 2.0 - 1e-9 * band,
        0,
        np.floor((distance - band / 2.0) / band + 1e-9).astype(int) + 1,
    )
    order = np.minimum(order, middle)
    return scaling[middle + np.sign(centers).astype(int) * order]


def optical_depth(comb: CombSpec, frequencies) -> np.ndarray:
    """Optical depth at each detuning; d_background outside the comb."""
    freqs = np.asarray(frequencies, dtype=float)
    delta = comb.peak_period_delta
    centers = np.rint(freqs / delta) * delta
    inside = np.abs(centers) <= comb.total_bandwidth / 2.0 + 1e-9 * delta
    x = freqs - centers
    width = comb.tooth_width
    if comb.peak_shape == "gaussian":
        shape = np.exp(-4.0 * np.log(2.0) * (x / width) ** 2)
    else:
        shape = (np.abs(x) <= width / 2.0).astype(float)
    depth = comb.d_background + (comb.d_peak - comb.d_background) * _band_scale(comb, centers) * shape
    return np.where(inside, depth, comb.d_background)


def comb_spectrum(comb: CombSpec, grid) -> np.ndarray:
    """Comb optical-depth profile sampled on a grid that covers the whole comb."""
    freqs = np.asarray(grid, dtype=float)
    half = comb.total_bandwidth / 2.0
    if freqs.size == 0 or freqs.min() > -half or freqs.max() < half:
        raise DomainError("frequency grid does not cover the comb bandwidth")
    return optical_depth(comb, freqs)


def spectral_transmission(comb: CombSpec, photon_fwhm: float, spectrum: Optional[tuple] = None) -> float:
    """
    Memory transmission e^{-d(nu)} averaged over the photon spectrum.

    `spectrum` is a (detuning, density) pair, normally the heralded spectrum
    of the filter cascade. Without one a Lorentzian of `photon_fwhm` is used,
    sampled on the same 2 MHz grid over twenty linewidths each side.
    """
    if spectrum is None:
        if not photon_fwhm > 0:
            raise DomainError(f"photon linewidth must be positive, got {photon_fwhm}")
        half = LORENTZIAN_SPAN * photon_fwhm
        freqs = np.arange(-half, half + SPECTRAL_STEP / 2, SPECTRAL_STEP)
        weights = 1.0 / (1.0 + (2.0 * freqs / photon_fwhm) ** 2)
    else:
        freqs, weights = (np.asarray(a, dtype=float) for a in spectrum)
        if freqs.ndim != 1 or freqs.shape != weights.shape or freqs.size < 2:
            raise DomainError("photon spectrum needs matching one-dimensional detuning and density arrays")
        if np.any(np.diff(freqs) <= 0):
            raise DomainError("photon spectrum detunings must be strictly increasing")
        if np.any(weights < 0) or not np.any(weights > 0):
            raise DomainError("photon spectrum density must be nonnegative and not all zero")
    return float(trapezoid(weights * np.exp(-optical_depth(comb, freqs)), freqs) / trapezoid(weights, freqs))


@dataclass(frozen=True)
class CrystalSandwich:
    """Two crystals with their D1 axes crossed by a HWP between them."""
    d1: float
    d2: float
    hwp_angle_error: float = 0.0
    hwp_retardation_error: float = 0.0

    def __post_init__(self):
        if self.d1 < 0 or self.d2 < 0:
            raise DomainError("crystal optical depths must be nonnegative")
        if abs(self.hwp_angle_error) >= MAX_PLATE_ERROR or abs(self.hwp_retardation_error) >= MAX_PLATE_ERROR:
            raise DomainError(f"waveplate errors must stay below {MAX_PLATE_ERROR} rad")

    def transfer_matrix(self) -> np.ndarray:
        crystal = np.diag([np.exp(-self.d1 / 2.0), np.exp(-self.d2 / 2.0)])
        plate = waveplate(np.pi + self.hwp_retardation_error, np.pi / 4.0 + self.hwp_angle_error)
        return crystal @ plate @ crystal


def effective_optical_depth(sandwich: CrystalSandwich, input_polarization_angle: float) -> float:
    """-ln of the intensity transmission for linear input polarization at the given angle."""
    field = np.array([np.cos(input_polarization_angle), np.sin(input_polarization_angle)])
    out = sandwich.transfer_matrix() @ field
    return float(-np.log(np.real(np.vdot(out, out))))


def thermal_od_ratio(splitting: float, temperature: float) -> float:
    """Boltzmann population ratio exp(-h nu / k T) of two Zeeman levels."""
    if not temperature > 0:
        raise DomainError(f"temperature must be positive, got {temperature}")
    if splitting < 0:
        raise DomainError(f"splitting must be nonnegative, got {splitting}")
    return float(np.exp(-PLANCK * splitting / (BOLTZMANN * temperature)))


@dataclass(frozen=True)
class MemoryOutcome:
    disposition: str
    release_delay: float

    def __post_init__(self):
        if self.disposition not in DISPOSITIONS:
            raise DomainError(f"unknown disposition {self.disposition!r}")
        if (self.disposition == STORED) != (self.release_delay > 0):
            raise DomainError("only stored photons carry a release delay")


@dataclass(frozen=True)
class MemoryModel:
    """
    Disposition probabilities of a photon sent into the comb.

    Transmission is weighted by `photon_spectrum`, a (detuning, density) pair,
    when given, else by a Lorentzian of `photon_fwhm`.
    """
    comb: CombSpec
    photon_fwhm: float
    efficiency_override: Optional[float] = None
    transmission_override: Optional[float] = None
    photon_spectrum: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.photon_fwhm <= self.comb.total_bandwidth / 2.0:
            raise DomainError("photon linewidth must be positive and at most half the comb bandwidth")
        for name in ("efficiency_override", "transmission_override"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")
        if self.efficiency + self.transmission > 1.0 + 1e-12:
            raise ConfigurationError(
                f"storage efficiency {self.efficiency:.4f} plus transmission "
                f"{self.transmission:.4f} exceeds one"
            )

    @cached_property
    def efficiency(self) -> float:
        if self.efficiency_override is not None:
            return float(self.efficiency_override)
        return afc_efficiency(self.comb)

    @cached_property
    def transmission(self) -> float:
        if self.transmission_override is not None:
            return float(self.transmission_override)
        return spectral_transmission(self.comb, self.photon_fwhm, self.photon_spectrum)

    @property
    def storage_time(self) -> float:
        return storage_time(self.comb)

    def probabilities(self) -> np.ndarray:
        """(transmitted, stored, lost)."""
        p = np.array([self.transmission, self.efficiency, 0.0])
        p[2] = max(0.0, 1.0 - p[0] - p[1])
        return p / p.sum()

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Disposition codes indexing DISPOSITIONS."""
        return rng.choice(3, size=size, p=self.probabilities())

    def outcome(self, code: int) -> MemoryOutcome:
        disposition = DISPOSITIONS[code]
        return MemoryOutcome(disposition, self.storage_time if disposition == STORED else 0.0)


def apply_memory(event, comb: CombSpec, photon_fwhm: float, efficiency_override: Optional[float],
                 seed, transmission_override: Optional[float] = None,
                 photon_spectrum: Optional[tuple] = None) -> MemoryOutcome:
    """Send the signal photon of one pair into the memory."""
    model = MemoryModel(comb, photon_fwhm, efficiency_override, transmission_override, photon_spectrum)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return model.outcome(int(model.sample(1, rng)[0]))
