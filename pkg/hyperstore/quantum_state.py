# quantum_state.py - Two-qubit density matrices per degree of freedom

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from constants import (
    HERMITIAN_TOL, OUTCOMES, POLARIZATION_BASIS, POVM_TOL, PSD_TOL,
    TIMEBIN_BASIS, TRACE_TOL,
)
from errors import DomainError, StructureError


def _frozen_matrix(matrix, shape: tuple) -> np.ndarray:
    arr = np.array(matrix, dtype=complex)
    if arr.shape != shape:
        raise StructureError(f"expected a {shape} matrix, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TwoQubitState:
    """
    Density matrix of one degree of freedom of a photon pair.

    The basis is ordered signal-first: HH, HV, VH, VV for polarization and
    SS, SL, LS, LL for time bins. Construction validates Hermiticity, unit
    trace and positivity and never renormalizes.
    """
    matrix: np.ndarray
    basis_labels: tuple = POLARIZATION_BASIS

    def __post_init__(self):
        rho = _frozen_matrix(self.matrix, (4, 4))
        object.__setattr__(self, "matrix", rho)
        object.__setattr__(self, "basis_labels", tuple(self.basis_labels))

        if self.basis_labels not in (POLARIZATION_BASIS, TIMEBIN_BASIS):
            raise DomainError(f"unknown basis {self.basis_labels}")
        if not np.allclose(rho, rho.conj().T, rtol=0.0, atol=HERMITIAN_TOL):
            raise DomainError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > TRACE_TOL:
            raise DomainError(f"density matrix trace is {np.trace(rho).real:.15g}, not 1")
        smallest = float(np.linalg.eigvalsh(rho).min())
        if smallest < -PSD_TOL:
            raise DomainError(f"density matrix has negative eigenvalue {smallest:.3g}")

    def purity(self) -> float:
        """tr(rho^2)."""
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def overlap(self, other: "TwoQubitState") -> float:
        """tr(rho sigma); the fidelity when either state is pure."""
        if other.basis_labels != self.basis_labels:
            raise StructureError("states live in different bases")
        return float(np.real(np.trace(self.matrix @ other.matrix)))

    def element(self, bra: str, ket: str) -> complex:
        """Matrix element <bra|rho|ket> by basis label, e.g. element('VV', 'HH')."""
        try:
            return complex(self.matrix[self.basis_labels.index(bra), self.basis_labels.index(ket)])
        except ValueError:
            raise DomainError(f"labels {bra!r}/{ket!r} not in basis {self.basis_labels}") from None

    def reduced(self, side: str) -> np.ndarray:
        """Single-photon reduced density matrix, side 'signal' or 'idler'."""
        rho = self.matrix.reshape(2, 2, 2, 2)
        if side == "signal":
            return np.einsum("ajbj->ab", rho)
        if side == "idler":
            return np.einsum("jajb->ab", rho)
        raise DomainError(f"unknown side {side!r}")

    def second_level_population(self, side: str) -> float:
        """Population of V (or L) for one photon."""
        return float(np.real(self.reduced(side)[1, 1]))


@dataclass(frozen=True)
class HyperState:
    """Factorized polarization x time-bin state of a single pair."""
    polarization: TwoQubitState
    timebin: TwoQubitState

    def __post_init__(self):
        if self.polarization.basis_labels != POLARIZATION_BASIS:
            raise StructureError("polarization component must use the HH/HV/VH/VV basis")
        if self.timebin.basis_labels != TIMEBIN_BASIS:
            raise StructureError("time-bin component must use the SS/SL/LS/LL basis")

    def joint_matrix(self) -> np.ndarray:
        """Explicit 16x16 matrix ordered (pol_s, pol_i, bin_s, bin_i)."""
        return np.kron(self.polarization.matrix, self.timebin.matrix)

    def photon_probability(self, signal_op: np.ndarray, idler_op: np.ndarray) -> float:
        """
        tr(rho E_s (x) E_i) for single-photon operators on (time bin (x) polarization).

        Each operator is 4x4 with index 2*t + p. This is how the Franson
        analyzers couple polarization and path (birefringent long arms).
        """
        e_s = np.asarray(signal_op, dtype=complex)
        e_i = np.asarray(idler_op, dtype=complex)
        if e_s.shape != (4, 4) or e_i.shape != (4, 4):
            raise StructureError("single-photon operators must be 4x4")
        value = np.einsum(
            "abcd,efgh,cgae,dhbf->",
            self.timebin.matrix.reshape(2, 2, 2, 2),
            self.polarization.matrix.reshape(2, 2, 2, 2),
            e_s.reshape(2, 2, 2, 2),
            e_i.reshape(2, 2, 2, 2),
        )
        return float(np.real(value))


@dataclass(frozen=True)
class MeasurementOperator:
    """One element of a two-photon POVM with its detector-pair label (k, l)."""
    matrix: np.ndarray
    outcome_label: tuple = (1, 1)

    def __post_init__(self):
        m = _frozen_matrix(self.matrix, (4, 4))
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "outcome_label", tuple(self.outcome_label))

        if self.outcome_label not in OUTCOMES:
            raise DomainError(f"outcome label must be one of {OUTCOMES}")
        if not np.allclose(m, m.conj().T, rtol=0.0, atol=HERMITIAN_TOL):
            raise DomainError("measurement operator is not Hermitian")
        eig = np.linalg.eigvalsh(m)
        if eig.min() < -POVM_TOL or eig.max() > 1.0 + POVM_TOL:
            raise DomainError("measurement operator eigenvalues leave [0, 1]")


def check_complete(operators: Sequence[MeasurementOperator]) -> None:
    """Raise unless the four outcome operators sum to the identity."""
    if len(operators) != 4:
        raise StructureError(f"a complete set has four outcomes, got {len(operators)}")
    total = sum(op.matrix for op in operators)
    if not np.allclose(total, np.eye(4), rtol=0.0, atol=POVM_TOL):
        raise DomainError("outcome operators do not sum to identity")


def _pure(ket: np.ndarray, basis: tuple) -> TwoQubitState:
    ket = np.asarray(ket, dtype=complex)
    return TwoQubitState(np.outer(ket, ket.conj()), basis)


def bell_polarization(theta: float) -> TwoQubitState:
    """(|HH> + e^{i theta}|VV>)/sqrt(2)."""
    if not np.isfinite(theta):
        raise DomainError(f"Bell phase must be finite, got {theta}")
    ket = np.array([1.0, 0.0, 0.0, np.exp(1j * theta)]) / np.sqrt(2.0)
    return _pure(ket, POLARIZATION_BASIS)


def bell_timebin() -> TwoQubitState:
    """(|SS> + |LL>)/sqrt(2)."""
    ket = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0)
    return _pure(ket, TIMEBIN_BASIS)


def werner(bell: TwoQubitState, visibility: float) -> TwoQubitState:
    """Mix a pure Bell state with white noise: V*bell + (1-V)*I/4."""
    if not 0.0 <= visibility <= 1.0:
        raise DomainError(f"visibility must lie in [0, 1], got {visibility}")
    if bell.purity() < 1.0 - 1e-9:
        raise DomainError("werner() expects a pure input state")
    mixed = visibility * bell.matrix + (1.0 - visibility) * np.eye(4) / 4.0
    return TwoQubitState(mixed, bell.basis_labels)


def hyperentangled_state(theta: float, visibility_pi: float, visibility_tau: float) -> HyperState:
    """Werner-noised polarization and time-bin Bell states as one pair state."""
    return HyperState(
        polarization=werner(bell_polarization(theta), visibility_pi),
        timebin=werner(bell_timebin(), visibility_tau),
    )


def expectation(rho: TwoQubitState, operator: MeasurementOperator) -> float:
    """tr(rho M) clamped to [0, 1]."""
    if not isinstance(rho, TwoQubitState) or not isinstance(operator, MeasurementOperator):
        raise StructureError("expectation() needs a TwoQubitState and a MeasurementOperator")
    value = np.trace(rho.matrix @ operator.matrix)
    if abs(value.imag) > POVM_TOL:
        raise DomainError(f"expectation has imaginary part {value.imag:.3g}")
    return float(min(1.0, max(0.0, value.real)))


def outcome_operators(signal_projectors, idler_projectors) -> list:
    """Four-outcome POVM from each side's (P1, P2) single-photon projectors."""
    ops = []
    for k, l in OUTCOMES:
        matrix = np.kron(signal_projectors[k - 1], idler_projectors[l - 1])
        ops.append(MeasurementOperator(matrix, (k, l)))
    return ops


def correlation_E(rho: TwoQubitState, settings) -> float:
    """
    Correlator of the +/-1 joint observable, P11 + P22 - P12 - P21.

    `settings` is a (signal, idler) pair of analyzers; each exposes
    `projectors()` returning its two outcome projectors on one qubit.
    """
    signal, idler = settings
    ops = outcome_operators(signal.projectors(), idler.projectors())
    probabilities = {op.outcome_label: expectation(rho, op) for op in ops}
    return (probabilities[(1, 1)] + probabilities[(2, 2)]
            - probabilities[(1, 2)] - probabilities[(2, 1)])
