# test_quantum_state.py - Density matrices, measurement operators, correlators

import numpy as np
import pytest

from analyzers import PolarizationAnalyzer, TimeBinAnalyzer
from constants import TIMEBIN_BASIS
from errors import DomainError, StructureError
from quantum_state import (HyperState, MeasurementOperator, TwoQubitState, bell_polarization, bell_timebin,
                           check_complete, correlation_E, expectation, hyperentangled_state,
                           outcome_operators, werner)


class TestTwoQubitState:
    def test_bell_state_is_pure(self):
        """|HH> + |VV> has unit purity and coherence 1/2."""
        rho = bell_polarization(0.0)
        assert rho.purity() == pytest.approx(1.0)
        assert rho.element("HH", "VV") == pytest.approx(0.5)

    def test_bell_phase_enters_coherence(self):
        """The Bell phase sits on the VV/HH coherence."""
        rho = bell_polarization(0.4)
        assert rho.element("VV", "HH") == pytest.approx(0.5 * np.exp(0.4j))

    def test_non_finite_phase_rejected(self):
        with pytest.raises(DomainError):
            bell_polarization(float("nan"))

    def test_non_hermitian_rejected(self):
        m = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
        m[0, 1] = 0.1
        with pytest.raises(DomainError):
            TwoQubitState(m)

    def test_trace_must_be_one(self):
        with pytest.raises(DomainError):
            TwoQubitState(np.eye(4) / 2.0)

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(DomainError):
            TwoQubitState(np.diag([1.5, -0.5, 0.0, 0.0]))

    def test_wrong_shape_rejected(self):
        with pytest.raises(StructureError):
            TwoQubitState(np.eye(3) / 3.0)

    def test_matrix_is_read_only(self):
        rho = bell_timebin()
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 1.0

    def test_unknown_label(self):
        with pytest.raises(DomainError):
            bell_polarization(0.0).element("HX", "HH")

    def test_overlap_with_other_basis(self):
        with pytest.raises(StructureError):
            bell_polarization(0.0).overlap(bell_timebin())

    def test_reduced_state_is_maximally_mixed(self):
        rho = werner(bell_timebin(), 0.7)
        np.testing.assert_allclose(rho.reduced("signal"), np.eye(2) / 2.0, atol=1e-12)
        np.testing.assert_allclose(rho.reduced("idler"), np.eye(2) / 2.0, atol=1e-12)
        assert rho.second_level_population("signal") == pytest.approx(0.5)


class TestWerner:
    def test_zero_visibility_is_white_noise(self):
        rho = werner(bell_polarization(0.0), 0.0)
        np.testing.assert_allclose(rho.matrix, np.eye(4) / 4.0, atol=1e-15)
        assert rho.purity() == pytest.approx(0.25)

    def test_fidelity_with_bell_state(self):
        """Overlap with the pure Bell state is (1 + 3V)/4."""
        bell = bell_polarization(0.0)
        assert werner(bell, 0.92).overlap(bell) == pytest.approx((1 + 3 * 0.92) / 4)

    def test_visibility_out_of_range(self):
        with pytest.raises(DomainError):
            werner(bell_polarization(0.0), 1.2)

    def test_mixed_input_rejected(self):
        with pytest.raises(DomainError):
            werner(werner(bell_polarization(0.0), 0.5), 0.5)


class TestHyperState:
    def test_components_keep_their_bases(self):
        state = hyperentangled_state(0.0, 0.96, 0.92)
        assert state.timebin.basis_labels == TIMEBIN_BASIS
        assert state.joint_matrix().shape == (16, 16)
        assert np.trace(state.joint_matrix()).real == pytest.approx(1.0)

    def test_swapped_components_rejected(self):
        with pytest.raises(StructureError):
            HyperState(bell_timebin(), bell_polarization(0.0))

    def test_identity_operators_give_one(self):
        state = hyperentangled_state(0.3, 0.9, 0.8)
        assert state.photon_probability(np.eye(4), np.eye(4)) == pytest.approx(1.0)

    def test_factorized_operator(self):
        """A product of a time-bin and a polarization projector factorizes."""
        state = hyperentangled_state(0.0, 1.0, 1.0)
        short = np.diag([1.0, 0.0])
        h = np.diag([1.0, 0.0])
        op = np.kron(short, h)           # index 2*t + p
        assert state.photon_probability(op, op) == pytest.approx(0.25)

    def test_operator_shape_checked(self):
        state = hyperentangled_state(0.0, 1.0, 1.0)
        with pytest.raises(StructureError):
            state.photon_probability(np.eye(2), np.eye(4))


class TestMeasurement:
    def test_outcome_operators_are_complete(self):
        analyzer = PolarizationAnalyzer.linear(np.pi / 16)
        check_complete(outcome_operators(analyzer.projectors(), PolarizationAnalyzer.linear(0.0).projectors()))

    def test_incomplete_set_rejected(self):
        ops = outcome_operators(PolarizationAnalyzer().projectors(), PolarizationAnalyzer().projectors())
        with pytest.raises(StructureError):
            check_complete(ops[:3])
        doubled = [ops[0], ops[0], ops[2], ops[3]]
        with pytest.raises(DomainError):
            check_complete(doubled)

    def test_bad_operator_rejected(self):
        with pytest.raises(DomainError):
            MeasurementOperator(2.0 * np.eye(4))
        with pytest.raises(DomainError):
            MeasurementOperator(np.eye(4), (3, 1))

    def test_expectation_needs_typed_arguments(self):
        with pytest.raises(StructureError):
            expectation(np.eye(4) / 4.0, MeasurementOperator(np.eye(4)))

    def test_expectation_of_white_noise(self):
        rho = werner(bell_polarization(0.0), 0.0)
        for op in outcome_operators(PolarizationAnalyzer().projectors(), PolarizationAnalyzer().projectors()):
            assert expectation(rho, op) == pytest.approx(0.25)


class TestCorrelation:
    @pytest.mark.parametrize("v", [0.0, 0.5, 0.96, 1.0])
    def test_hv_basis(self, v):
        """Analyzers in {H, V} give E = V."""
        rho = werner(bell_polarization(0.0), v)
        pair = (PolarizationAnalyzer.linear(0.0), PolarizationAnalyzer.linear(0.0))
        assert correlation_E(rho, pair) == pytest.approx(v, abs=1e-12)

    def test_rotated_analyzer(self):
        """E = V cos 4(theta_s - theta_i) for linear analyzers."""
        rho = werner(bell_polarization(0.0), 0.92)
        pair = (PolarizationAnalyzer.linear(np.pi / 16), PolarizationAnalyzer.linear(0.0))
        assert correlation_E(rho, pair) == pytest.approx(0.92 * np.cos(np.pi / 4), abs=1e-12)

    def test_bell_phase_needs_compensation(self):
        """In {+, -} a Bell phase of pi/2 erases the correlation unless compensated."""
        rho = bell_polarization(np.pi / 2)
        idler = PolarizationAnalyzer.linear(np.pi / 8)
        plain = (PolarizationAnalyzer.linear(np.pi / 8), idler)
        compensated = (PolarizationAnalyzer.linear(np.pi / 8, np.pi / 2), idler)
        assert correlation_E(rho, plain) == pytest.approx(0.0, abs=1e-12)
        assert correlation_E(rho, compensated) == pytest.approx(1.0, abs=1e-12)


def _random_operator(rng) -> np.ndarray:
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    op = a @ a.conj().T
    return op / np.linalg.eigvalsh(op).max()


def _joint_operator(signal_op, idler_op) -> np.ndarray:
    """signal (x) idler operator reordered to the joint (pol_s, pol_i, bin_s, bin_i) basis."""
    return np.einsum("abcd,efgh->bfaedhcg", signal_op.reshape(2, 2, 2, 2),
                     idler_op.reshape(2, 2, 2, 2)).reshape(16, 16)


class TestClosedForms:
    def test_polarization_correlator(self):
        """E = V[cos4ts cos4ti + cos(theta - beta) sin4ts sin4ti] for random settings."""
        rng = np.random.default_rng(11)
        for _ in range(1000):
            v = rng.uniform(0.0, 1.0)
            theta, beta = rng.uniform(0.0, 2 * np.pi, size=2)
            ts, ti = rng.uniform(0.0, np.pi, size=2)
            rho = werner(bell_polarization(theta), v)
            pair = (PolarizationAnalyzer.linear(ts, beta), PolarizationAnalyzer.linear(ti))
            expected = v * (np.cos(4 * ts) * np.cos(4 * ti)
                            + np.cos(theta - beta) * np.sin(4 * ts) * np.sin(4 * ti))
            assert correlation_E(rho, pair) == pytest.approx(expected, abs=1e-9)

    def test_timebin_correlator(self):
        """E = V cos(phi_s + phi_i) for the central-peak projectors."""
        rng = np.random.default_rng(12)
        for _ in range(1000):
            v = rng.uniform(0.0, 1.0)
            phi_s, phi_i = rng.uniform(-np.pi, np.pi, size=2)
            rho = werner(bell_timebin(), v)
            pair = (TimeBinAnalyzer(5.5e-9, phi_s), TimeBinAnalyzer(5.5e-9, phi_i))
            assert correlation_E(rho, pair) == pytest.approx(v * np.cos(phi_s + phi_i), abs=1e-9)

    def test_timebin_example(self):
        rho = werner(bell_timebin(), 0.92)
        pair = (TimeBinAnalyzer(5.5e-9, np.pi / 4), TimeBinAnalyzer(5.5e-9, 0.0))
        assert correlation_E(rho, pair) == pytest.approx(0.65054, abs=1e-5)

    def test_quarter_turn_uncorrelated(self):
        """Analyzers pi/8 apart see no correlation."""
        rho = werner(bell_polarization(0.0), 0.96)
        pair = (PolarizationAnalyzer.linear(np.pi / 8 + 0.1), PolarizationAnalyzer.linear(0.1))
        assert correlation_E(rho, pair) == pytest.approx(0.0, abs=1e-9)

    def test_purity_of_werner(self):
        rho = werner(bell_polarization(0.0), 0.96)
        assert rho.purity() == pytest.approx(0.9412, abs=1e-12)
        assert np.real(np.trace(rho.matrix @ rho.matrix)) == pytest.approx(0.96 ** 2 + (1 - 0.96 ** 2) / 4)

    def test_opposite_bell_phases_orthogonal(self):
        assert bell_polarization(np.pi).overlap(bell_polarization(0.0)) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("v1, v2", [(0.0, 1.0), (0.3, 0.9), (0.5, 0.7)])
    def test_werner_affine_in_visibility(self, v1, v2):
        bell = bell_polarization(0.7)
        mean = 0.5 * (werner(bell, v1).matrix + werner(bell, v2).matrix)
        np.testing.assert_allclose(werner(bell, 0.5 * (v1 + v2)).matrix, mean, atol=1e-12)


class TestJointState:
    def test_matches_explicit_tensor_product(self):
        """photon_probability equals tr(rho O) with the full 16x16 matrices."""
        rng = np.random.default_rng(13)
        for _ in range(100):
            theta = rng.uniform(0.0, 2 * np.pi)
            v_pi, v_tau = rng.uniform(0.0, 1.0, size=2)
            state = hyperentangled_state(theta, v_pi, v_tau)

            pol_ket = np.array([1.0, 0.0, 0.0, np.exp(1j * theta)]) / np.sqrt(2.0)
            tb_ket = np.array([1.0, 0.0, 0.0, 1.0]) / np.sqrt(2.0)
            pol = v_pi * np.outer(pol_ket, pol_ket.conj()) + (1 - v_pi) * np.eye(4) / 4
            tb = v_tau * np.outer(tb_ket, tb_ket) + (1 - v_tau) * np.eye(4) / 4
            joint = np.kron(pol, tb)
            np.testing.assert_allclose(state.joint_matrix(), joint, atol=1e-12)

            signal_op, idler_op = _random_operator(rng), _random_operator(rng)
            expected = np.real(np.trace(joint @ _joint_operator(signal_op, idler_op)))
            assert state.photon_probability(signal_op, idler_op) == pytest.approx(expected, abs=1e-10)

    def test_product_measurement_factorizes(self):
        rng = np.random.default_rng(14)
        state = hyperentangled_state(0.4, 0.9, 0.8)
        for _ in range(20):
            ts, ti = rng.uniform(0.0, np.pi, size=2)
            phi_s, phi_i = rng.uniform(-np.pi, np.pi, size=2)
            ps = PolarizationAnalyzer.linear(ts).projectors()[0]
            pi = PolarizationAnalyzer.linear(ti).projectors()[1]
            bs = TimeBinAnalyzer(5.5e-9, phi_s).projectors()[0]
            bi = TimeBinAnalyzer(5.5e-9, phi_i).projectors()[0]
            pol = expectation(state.polarization, MeasurementOperator(np.kron(ps, pi)))
            tb = expectation(state.timebin, MeasurementOperator(np.kron(bs, bi)))
            joint = state.photon_probability(np.kron(bs, ps), np.kron(bi, pi))
            assert joint == pytest.approx(pol * tb, abs=1e-10)
