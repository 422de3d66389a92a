# analyzers.py - Franson time-bin and polarization analyzers

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from constants import IDLER_DETECTORS, LONG, OUTCOMES, SHORT, SIGNAL_DETECTORS
from errors import DomainError
from quantum_state import HyperState

TWO_PI = 2.0 * np.pi
DELAY_MATCH_TOL = 1e-12     # 1 ps


def wrap_phase(phase: float) -> float:
    """Map a phase onto [0, 2 pi)."""
    wrapped = float(np.mod(phase, TWO_PI))
    return 0.0 if wrapped == TWO_PI else wrapped


def rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s], [-s, c]], dtype=complex)


def waveplate(retardance: float, angle: float) -> np.ndarray:
    """Jones matrix of a retarder with its fast axis at `angle` from H."""
    return rotation(-angle) @ np.diag([1.0, np.exp(1j * retardance)]) @ rotation(angle)


def half_wave_plate(angle: float) -> np.ndarray:
    return waveplate(np.pi, angle)


def quarter_wave_plate(angle: float) -> np.ndarray:
    return waveplate(np.pi / 2.0, angle)


_QWP_ZERO_INVERSE = np.linalg.inv(quarter_wave_plate(0.0))


@dataclass(frozen=True)
class PolarizationAnalyzer:
    """
    QWP + HWP + PBS. Outcome 1 is the PBS transmit port (H after the plates).

    Plate angles are in radians, measured in the calibrated frame where a
    QWP at zero leaves H and V untouched. `nominal_angle` is the HWP angle
    theta of the linear-regime rate formulas when the analyzer realizes one.
    """
    qwp_angle: float = 0.0
    hwp_angle: float = 0.0
    basis_label: str = "custom"
    nominal_angle: Optional[float] = None

    def __post_init__(self):
        if not (np.isfinite(self.qwp_angle) and np.isfinite(self.hwp_angle)):
            raise DomainError("waveplate angles must be finite")
        if self.basis_label not in ("pi1", "pi2", "custom"):
            raise DomainError(f"unknown polarization basis label {self.basis_label!r}")

    @classmethod
    def for_projection(cls, angle: float, phase: float = 0.0, basis_label: str = "custom"):
        """Plate angles whose outcome 1 projects onto cos(a)|H> + e^{i phase} sin(a)|V>."""
        target = np.array([np.cos(angle), np.exp(1j * phase) * np.sin(angle)])
        w = _QWP_ZERO_INVERSE @ target
        # QWP along the ellipse axis makes the light linear
        qwp = 0.5 * np.arctan2(2.0 * np.real(np.conj(w[0]) * w[1]), abs(w[0]) ** 2 - abs(w[1]) ** 2)
        v = quarter_wave_plate(qwp) @ w
        v = v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))
        gamma = np.arctan2(v[1].real, v[0].real)
        return cls(qwp_angle=float(qwp), hwp_angle=float(gamma / 2.0), basis_label=basis_label)

    @classmethod
    def linear(cls, theta: float, bell_phase: float = 0.0, basis_label: str = "custom"):
        """
        Linear-regime analyzer at HWP angle theta.

        A nonzero `bell_phase` adds that phase to the V amplitude of the
        projection so the |HH> + e^{i theta}|VV> state correlates like theta = 0.
        """
        analyzer = cls.for_projection(2.0 * theta, bell_phase, basis_label)
        return replace(analyzer, nominal_angle=float(theta))

    @property
    def linear_angle(self) -> float:
        if self.nominal_angle is not None:
            return self.nominal_angle
        if abs(np.sin(self.qwp_angle)) < 1e-12:
            return self.hwp_angle
        raise DomainError("closed-form polarization rates need the QWP at 0")

    def unitary(self) -> np.ndarray:
        return half_wave_plate(self.hwp_angle) @ quarter_wave_plate(self.qwp_angle) @ _QWP_ZERO_INVERSE

    def projection_vector(self) -> np.ndarray:
        """Polarization projected onto by outcome 1."""
        return self.unitary().conj().T @ np.array([1.0, 0.0])

    def projectors(self) -> tuple:
        u = self.projection_vector()
        p1 = np.outer(u, u.conj())
        return p1, np.eye(2) - p1


@dataclass(frozen=True)
class TimeBinAnalyzer:
    """Unbalanced interferometer read out at a single port. Times in s, phases in rad."""
    delay: float
    phase: float = 0.0
    birefringence_phase: float = 0.0
    port_used: str = "single-port"

    def __post_init__(self):
        if not self.delay > 0:
            raise DomainError(f"interferometer delay must be positive, got {self.delay}")
        if not (np.isfinite(self.phase) and np.isfinite(self.birefringence_phase)):
            raise DomainError("interferometer phases must be finite")
        if self.port_used != "single-port":
            raise DomainError("only single-port interferometers are modeled")
        object.__setattr__(self, "phase", wrap_phase(self.phase))

    def projectors(self) -> tuple:
        """Central-peak projectors on {S, L} for outcome phase 0 and pi."""
        u = np.array([1.0, np.exp(-1j * self.phase)]) / np.sqrt(2.0)
        p1 = np.outer(u, u.conj())
        return p1, np.eye(2) - p1

    def _arm_map(self, sign: float) -> np.ndarray:
        # (bin x polarization) -> polarization at one output port; the long
        # arm adds the interferometer phase and the H/V birefringent phase
        long_arm = np.diag([1.0, np.exp(1j * self.birefringence_phase)])
        short = np.kron(np.array([[1.0, 0.0]]), np.eye(2))
        longer = np.kron(np.array([[0.0, 1.0]]), long_arm)
        return (short + sign * np.exp(1j * self.phase) * longer) / np.sqrt(2.0)

    def central_operators(self, polarization_projectors: tuple) -> list:
        """Single-photon operators for (lost, detector 1, detector 2); they sum to identity."""
        used = self._arm_map(+1.0)
        unused = self._arm_map(-1.0)
        p1, p2 = polarization_projectors
        return [
            unused.conj().T @ unused,
            used.conj().T @ p1 @ used,
            used.conj().T @ p2 @ used,
        ]

    def long_arm_rotation(self) -> np.ndarray:
        return np.diag([1.0, np.exp(1j * self.birefringence_phase)])


@dataclass(frozen=True)
class MeasurementSettings:
    signal_tb: TimeBinAnalyzer
    idler_tb: TimeBinAnalyzer
    signal_pol: PolarizationAnalyzer
    idler_pol: PolarizationAnalyzer

    def __post_init__(self):
        if abs(self.signal_tb.delay - self.idler_tb.delay) > DELAY_MATCH_TOL:
            raise DomainError("signal and idler interferometer delays differ by more than 1 ps")

    @property
    def delay(self) -> float:
        return self.signal_tb.delay

    @property
    def phase_sum(self) -> float:
        return wrap_phase(self.signal_tb.phase + self.idler_tb.phase)


def _check_visibility(v: float) -> None:
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"visibility must lie in [0, 1], got {v}")


def rate_polarization(v_pi: float, theta_s: float, theta_i: float, outcome: tuple) -> float:
    """Relative rate of outcome (k, l) with linear analyzers; the four sum to 1."""
    _check_visibility(v_pi)
    if tuple(outcome) not in OUTCOMES:
        raise DomainError(f"outcome must be one of {OUTCOMES}")
    k, l = outcome
    correlation = v_pi * np.cos(4.0 * (theta_s - theta_i))
    sign = 1.0 if k == l else -1.0
    return float((1.0 + sign * correlation) / 4.0)


def rate_timebin(v_tau: float, phase_sum: float) -> float:
    """Central-peak interference factor (1 + V cos(phi_s + phi_i))/2."""
    _check_visibility(v_tau)
    return float((1.0 + v_tau * np.cos(phase_sum)) / 2.0)


def rate_joint(v_pi: float, v_tau: float, settings: MeasurementSettings, outcome: tuple) -> float:
    """Product of the polarization and time-bin rates."""
    pol = rate_polarization(
        v_pi, settings.signal_pol.linear_angle, settings.idler_pol.linear_angle, outcome
    )
    return pol * rate_timebin(v_tau, settings.phase_sum)


def outcome_phase_flip(outcome: int) -> float:
    """Extra interferometer phase that turns the single port into outcome 1 or 2."""
    if outcome not in (1, 2):
        raise DomainError(f"time-bin outcome must be 1 or 2, got {outcome}")
    return 0.0 if outcome == 1 else np.pi


@dataclass(frozen=True)
class FransonTable:
    """
    Every (path pair, port pair) a pair can end in, with its probability.

    Paths are 0 for S and 1 for L; ports are 1, 2 or 0 for a photon that
    leaves the unused interferometer port or is otherwise lost.
    """
    probabilities: np.ndarray
    signal_path: np.ndarray
    idler_path: np.ndarray
    signal_port: np.ndarray
    idler_port: np.ndarray
    delay: float

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.probabilities.size, size=size, p=self.probabilities)

    def central_probability(self) -> float:
        central = (self.signal_path == self.idler_path) & (self.signal_port > 0) & (self.idler_port > 0)
        return float(self.probabilities[central].sum())


def _pol_table(state: HyperState, ops_s: list, ops_i: list) -> np.ndarray:
    rho = state.polarization.matrix
    table = np.empty((3, 3))
    for a, e_s in enumerate(ops_s):
        for b, e_i in enumerate(ops_i):
            table[a, b] = np.real(np.trace(rho @ np.kron(e_s, e_i)))
    return table


def _satellite_ops(pol_projectors: tuple, analyzer: TimeBinAnalyzer, took_long: bool) -> list:
    # index 0 = lost, then ports 1 and 2; half the light leaves the unused port
    p1, p2 = pol_projectors
    if took_long:
        d = analyzer.long_arm_rotation()
        p1, p2 = d.conj().T @ p1 @ d, d.conj().T @ p2 @ d
    return [0.5 * np.eye(2), 0.5 * p1, 0.5 * p2]


def franson_table(state: HyperState, settings: MeasurementSettings) -> FransonTable:
    """
    Outcome distribution of one pair through both analyzers.

    Each photon takes the long arm with its reduced-state L population.
    When both take the same arm the SS and LL amplitudes are
    indistinguishable and the port statistics follow the coherent
    single-port operators; otherwise each photon leaves the used port with
    probability one half and is analyzed in polarization alone.
    """
    pol_s = settings.signal_pol.projectors()
    pol_i = settings.idler_pol.projectors()
    m_s = state.timebin.second_level_population("signal")
    m_i = state.timebin.second_level_population("idler")

    ops_s = settings.signal_tb.central_operators(pol_s)
    ops_i = settings.idler_tb.central_operators(pol_i)
    central = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            central[a, b] = state.photon_probability(ops_s[a], ops_i[b])

    blocks = {
        (0, 0): (1.0 - m_s) * (1.0 - m_i) * central,
        (1, 1): m_s * m_i * central,
        (0, 1): (1.0 - m_s) * m_i * _pol_table(
            state, _satellite_ops(pol_s, settings.signal_tb, False),
            _satellite_ops(pol_i, settings.idler_tb, True)),
        (1, 0): m_s * (1.0 - m_i) * _pol_table(
            state, _satellite_ops(pol_s, settings.signal_tb, True),
            _satellite_ops(pol_i, settings.idler_tb, False)),
    }

    probs, s_path, i_path, s_port, i_port = [], [], [], [], []
    for (ps, pi), block in blocks.items():
        for a in range(3):
            for b in range(3):
                probs.append(block[a, b])
                s_path.append(ps)
                i_path.append(pi)
                s_port.append(a)
                i_port.append(b)

    probabilities = np.clip(np.array(probs), 0.0, None)
    probabilities = probabilities / probabilities.sum()
    return FransonTable(
        probabilities=probabilities,
        signal_path=np.array(s_path),
        idler_path=np.array(i_path),
        signal_port=np.array(s_port),
        idler_port=np.array(i_port),
        delay=settings.delay,
    )


@dataclass(frozen=True)
class FransonOutcome:
    signal_path: str
    idler_path: str
    signal_detector: Optional[str]
    idler_detector: Optional[str]
    signal_offset: float
    idler_offset: float


def franson_path_outcome(event, settings: MeasurementSettings, seed) -> FransonOutcome:
    """Sample the arms, ports and arrival-time offsets of one pair."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    table = franson_table(event.state, settings)
    k = int(table.sample(1, rng)[0])
    paths = (SHORT, LONG)
    s_port, i_port = int(table.signal_port[k]), int(table.idler_port[k])
    return FransonOutcome(
        signal_path=paths[table.signal_path[k]],
        idler_path=paths[table.idler_path[k]],
        signal_detector=SIGNAL_DETECTORS[s_port - 1] if s_port else None,
        idler_detector=IDLER_DETECTORS[i_port - 1] if i_port else None,
        signal_offset=float(table.signal_path[k] * table.delay),
        idler_offset=float(table.idler_path[k] * table.delay),
    )


