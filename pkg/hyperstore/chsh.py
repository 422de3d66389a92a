# chsh.py - Correlators, CHSH parameter, optimal settings and fringe fits

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from analyzers import wrap_phase
from constants import CHSH_LABELS, CHSH_SIGNS, LOCAL_BOUND
from errors import DomainError, FitError

logger = logging.getLogger(__name__)

DOFS = ("polarization", "timebin")


@dataclass(frozen=True)
class CorrelatorEstimate:
    """Counts are ordered (R11, R22, R12, R21)."""
    counts: tuple
    E: float
    sigma_E: float

    @property
    def total(self):
        return sum(self.counts)

    def to_dict(self) -> dict:
        r11, r22, r12, r21 = self.counts
        return {"R11": r11, "R22": r22, "R12": r12, "R21": r21, "E": self.E, "sigma_E": self.sigma_E}


def correlator(counts: Sequence) -> CorrelatorEstimate:
    """
    E = (R11 + R22 - R12 - R21) / R_T with Poisson (delta-method) error.

    Integer counts give E as a correctly rounded ratio. Expected (float)
    counts are accepted for analytic predictions.
    """
    counts = tuple(counts)
    if len(counts) != 4:
        raise DomainError(f"a correlator needs four counts, got {len(counts)}")
    if any(c < 0 for c in counts):
        raise DomainError("coincidence counts must be nonnegative")
    r11, r22, r12, r21 = counts
    same = r11 + r22
    opposite = r12 + r21
    total = same + opposite
    if total == 0:
        raise DomainError("all four counts are zero")
    e = (same - opposite) / total
    sigma = float(np.sqrt(4.0 * same * opposite / total ** 3))
    return CorrelatorEstimate(counts=counts, E=float(e), sigma_E=sigma)


@dataclass(frozen=True)
class ChshResult:
    correlators: tuple
    S: float
    sigma_S: float
    n_sigma_violation: float
    labels: tuple = CHSH_LABELS

    def to_dict(self) -> dict:
        return {
            "S": self.S,
            "sigma_S": self.sigma_S,
            "n_sigma": self.n_sigma_violation,
            "correlators": [
                dict(c.to_dict(), setting="".join(label)) for label, c in zip(self.labels, self.correlators)
            ],
        }


def chsh_S(correlators: Sequence[CorrelatorEstimate]) -> ChshResult:
    """S = |E(X,Y) + E(X',Y) + E(X,Y') - E(X',Y')|."""
    correlators = tuple(correlators)
    if len(correlators) != 4:
        raise DomainError(f"CHSH needs four correlators, got {len(correlators)}")
    s = abs(sum(sign * c.E for sign, c in zip(CHSH_SIGNS, correlators)))
    sigma = float(np.sqrt(sum(c.sigma_E ** 2 for c in correlators)))
    if sigma > 0:
        n_sigma = (s - LOCAL_BOUND) / sigma
    else:
        n_sigma = float(np.copysign(np.inf, s - LOCAL_BOUND)) if s != LOCAL_BOUND else 0.0
    return ChshResult(correlators=correlators, S=float(s), sigma_S=sigma, n_sigma_violation=float(n_sigma))


@dataclass(frozen=True)
class PhaseOffsets:
    """Bell phase theta of the source and the Franson phase offset, in rad."""
    theta: float = 0.0
    phi_offset: float = 0.0
    sigma_theta: float = 0.0
    sigma_phi: float = 0.0


@dataclass(frozen=True)
class SettingPair:
    """
    One CHSH setting. For polarization `signal`/`idler` are HWP angles and
    `bell_phase` is the compensation applied on the signal side; for time
    bins they are the phases applied to each interferometer.
    """
    label: tuple
    dof: str
    signal: float
    idler: float
    bell_phase: float = 0.0


def optimal_settings(dof: str, phase_offsets: PhaseOffsets) -> tuple:
    """Four settings reaching |E| = V/sqrt(2) with the CHSH sign pattern."""
    if dof not in DOFS:
        raise DomainError(f"unknown degree of freedom {dof!r}")
    if not (np.isfinite(phase_offsets.theta) and np.isfinite(phase_offsets.phi_offset)):
        raise DomainError("phase offsets must be finite")

    if dof == "polarization":
        x_values = (0.0, np.pi / 8.0)
        y_values = (np.pi / 16.0, -np.pi / 16.0)
        shift = 0.0
    else:
        x_values = (0.0, np.pi / 2.0)
        y_values = (-np.pi / 4.0, np.pi / 4.0)
        shift = phase_offsets.phi_offset

    settings = []
    for (x_label, y_label), (xi, yi) in zip(CHSH_LABELS, ((0, 0), (1, 0), (0, 1), (1, 1))):
        settings.append(SettingPair(
            label=(x_label, y_label),
            dof=dof,
            signal=x_values[xi] - shift,
            idler=y_values[yi],
            bell_phase=phase_offsets.theta if dof == "polarization" else 0.0,
        ))
    return tuple(settings)


def analytic_correlator(setting: SettingPair, visibility: float, true_offsets: PhaseOffsets) -> float:
    """Closed-form E of a Werner state for one setting, given the actual source offsets."""
    if setting.dof == "polarization":
        a, b = 2.0 * setting.signal, 2.0 * setting.idler
        mismatch = true_offsets.theta - setting.bell_phase
        return visibility * (np.cos(2 * a) * np.cos(2 * b) + np.cos(mismatch) * np.sin(2 * a) * np.sin(2 * b))
    return visibility * np.cos(setting.signal + setting.idler + true_offsets.phi_offset)


def analytic_chsh(dof: str, visibility: float, offsets: PhaseOffsets = PhaseOffsets(),
                  true_offsets: PhaseOffsets = None) -> float:
    """S predicted at the optimal settings built from `offsets`."""
    true_offsets = offsets if true_offsets is None else true_offsets
    settings = optimal_settings(dof, offsets)
    values = [analytic_correlator(s, visibility, true_offsets) for s in settings]
    return float(abs(sum(sign * e for sign, e in zip(CHSH_SIGNS, values))))


@dataclass(frozen=True)
class VisibilityFit:
    V: float
    phase_offset: float
    sigma_V: float
    chi2_per_dof: float
    amplitude: float = 0.0
    sigma_phase: float = 0.0
    frequency: float = 1.0
    residuals: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "V": self.V,
            "sigma_V": self.sigma_V,
            "phase_offset": self.phase_offset,
            "sigma_phase": self.sigma_phase,
            "amplitude": self.amplitude,
            "chi2_per_dof": self.chi2_per_dof,
        }


def _fringe(x, amplitude, visibility, x0, frequency=1.0):
    return amplitude * (1.0 + visibility * np.cos(frequency * x - x0))


def fit_visibility(scan: Sequence, frequency: float = 1.0, max_evaluations: int = 2000) -> VisibilityFit:
    """
    Weighted fit of A (1 + V cos(f x - x0)) to (setting, counts) points.

    The fringe frequency is fixed by the scan geometry (4 for HWP scans,
    1 for phase scans). Weights are Poisson, sigma = sqrt(counts).
    """
    points = np.asarray([(float(x), float(y)) for x, y in scan])
    if points.shape[0] < 6:
        raise DomainError(f"a fringe fit needs at least 6 points, got {points.shape[0]}")
    x, y = points[:, 0], points[:, 1]
    n = len(x)
    if frequency * (x.max() - x.min()) < 2.0 * np.pi * (n - 1) / n - 1e-9:
        raise DomainError("scan must span at least one fringe period")
    if np.any(y < 0):
        raise DomainError("counts must be nonnegative")

    # Linear least squares for the starting point
    design = np.column_stack([np.ones(n), np.cos(frequency * x), np.sin(frequency * x)])
    (a, b, c), *_ = np.linalg.lstsq(design, y, rcond=None)
    if a <= 0:
        raise FitError("fringe has no positive mean", {"points": n, "mean": float(a)})
    v0 = float(np.clip(np.hypot(b, c) / a, 1e-6, 1.0 - 1e-6))
    p0 = [float(a), v0, float(np.arctan2(c, b))]
    sigma = np.sqrt(np.maximum(y, 1.0))

    def model(xx, amplitude, visibility, x0):
        return _fringe(xx, amplitude, visibility, x0, frequency)

    try:
        popt, pcov = curve_fit(
            model, x, y, p0=p0, sigma=sigma, absolute_sigma=True,
            bounds=([0.0, 0.0, -np.inf], [np.inf, 1.0, np.inf]),
            max_nfev=max_evaluations,
        )
    except (RuntimeError, ValueError) as e:
        raise FitError(f"fringe fit did not converge: {e}",
                       {"points": n, "initial_guess": p0, "frequency": frequency}) from e

    residuals = (y - model(x, *popt)) / sigma
    dof = max(n - 3, 1)
    errors = np.sqrt(np.clip(np.diag(pcov), 0.0, None)) if np.all(np.isfinite(pcov)) else np.full(3, np.nan)
    logger.debug("[FIT] V=%.4f x0=%.4f chi2/dof=%.2f", popt[1], popt[2], float(np.sum(residuals ** 2)) / dof)
    return VisibilityFit(
        V=float(popt[1]),
        phase_offset=wrap_phase(popt[2]),
        sigma_V=float(errors[1]),
        chi2_per_dof=float(np.sum(residuals ** 2) / dof),
        amplitude=float(popt[0]),
        sigma_phase=float(errors[2]),
        frequency=frequency,
        residuals=residuals,
    )
