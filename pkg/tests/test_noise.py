import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsbd import qsim
from wsbd.circuit import Circuit, GateInstance, GateKind, build_hardware_efficient_ansatz, parity_encoding, run_circuit
from wsbd.errors import InvariantError
from wsbd.noise import (DEFAULT_NOISE, ChannelOp, NoiseModel, amplitude_damping_channel, apply_readout_confusion,
                        damping_gamma, dephasing_lambda, depolarizing_channel, gate_noise_1q, gate_noise_2q,
                        idle_noise, noisy_schedule, phase_damping_channel, symmetric_readout)
from wsbd.observables import Hamiltonian, PauliString, tfim_hamiltonian

from conftest import random_state

PLUS = qsim.StateVector(1, np.array([1, 1], dtype=complex) / np.sqrt(2)).to_density()


def completeness_error(ch):
    d = ch.operators[0].shape[0]
    return np.max(np.abs(sum(k.conj().T @ k for k in ch.operators) - np.eye(d)))


class TestAmplitudeDamping:
    def test_zero_is_identity(self, rng):
        rho = random_state(1, rng).to_density()
        out = qsim.apply_channel(rho, amplitude_damping_channel(0.0), [0])
        np.testing.assert_allclose(out.matrix, rho.matrix, atol=1e-15)

    def test_full_decay(self):
        one = qsim.StateVector(1, np.array([0, 1], dtype=complex)).to_density()
        out = qsim.apply_channel(one, amplitude_damping_channel(1.0), [0])
        np.testing.assert_allclose(out.matrix, np.diag([1, 0]), atol=1e-15)

    def test_coherence_scaling(self):
        out = qsim.apply_channel(PLUS, amplitude_damping_channel(0.1), [0])
        assert out.matrix[0, 1] == pytest.approx(0.5 * math.sqrt(0.9), abs=1e-14)
        assert out.matrix[1, 1].real == pytest.approx(0.45, abs=1e-14)

    @pytest.mark.parametrize("gamma", [-0.1, 1.5])
    def test_range(self, gamma):
        with pytest.raises(ValueError):
            amplitude_damping_channel(gamma)

    def test_gamma_from_gate_time(self):
        assert damping_gamma(50e-9, 200e-6) == pytest.approx(1 - math.exp(-50e-9 / 200e-6), rel=1e-12)


class TestPhaseDamping:
    def test_zero_is_identity(self):
        out = qsim.apply_channel(PLUS, phase_damping_channel(0.0), [0])
        np.testing.assert_allclose(out.matrix, PLUS.matrix, atol=1e-15)

    def test_full_dephasing(self, rng):
        rho = random_state(1, rng).to_density()
        out = qsim.apply_channel(rho, phase_damping_channel(1.0), [0])
        assert abs(out.matrix[0, 1]) < 1e-15

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0, 1), st.integers(0, 2**32 - 1))
    def test_populations_preserved(self, lam, seed):
        rho = random_state(1, np.random.default_rng(seed)).to_density()
        out = qsim.apply_channel(rho, phase_damping_channel(lam), [0])
        np.testing.assert_allclose(np.diagonal(out.matrix), np.diagonal(rho.matrix), atol=1e-14)

    def test_t2_above_2t1(self):
        with pytest.raises(InvariantError):
            dephasing_lambda(1e-7, 100e-6, 250e-6)
        with pytest.raises(InvariantError):
            NoiseModel(t1=100e-6, t2=250e-6)

    def test_coherence_decays_at_t2(self):
        # amplitude damping then dephasing: coherence shrinks by exp(-t/T2)
        t, t1, t2 = 3e-6, 200e-6, 150e-6
        ch = amplitude_damping_channel(damping_gamma(t, t1)).compose(phase_damping_channel(dephasing_lambda(t, t1, t2)))
        out = qsim.apply_channel(PLUS, ch, [0])
        assert abs(out.matrix[0, 1]) == pytest.approx(0.5 * math.exp(-t / t2), rel=1e-12)


class TestDepolarizing:
    def test_zero_is_identity(self, rng):
        rho = random_state(2, rng).to_density()
        out = qsim.apply_channel(rho, depolarizing_channel(0.0, 2), [0, 1])
        np.testing.assert_allclose(out.matrix, rho.matrix, atol=1e-14)

    def test_full_is_maximally_mixed(self, rng):
        out = qsim.apply_channel(random_state(1, rng).to_density(), depolarizing_channel(1.0), [0])
        np.testing.assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-14)

    def test_two_qubit_formula(self, rng):
        rho = random_state(2, rng).to_density()
        p = 0.2
        out = qsim.apply_channel(rho, depolarizing_channel(p, 2), [0, 1])
        np.testing.assert_allclose(out.matrix, (1 - p) * rho.matrix + p * np.eye(4) / 4, atol=1e-13)

    def test_purity_strictly_drops(self, rng):
        for _ in range(10):
            rho = random_state(1, rng).to_density()
            out = qsim.apply_channel(rho, depolarizing_channel(0.01), [0])
            assert out.purity() < rho.purity() - 1e-12

    def test_bad_arity(self):
        with pytest.raises(ValueError):
            depolarizing_channel(0.1, 3)


class TestReadout:
    def test_identity_confusion(self, rng):
        probs = random_state(2, rng).probabilities()
        np.testing.assert_allclose(apply_readout_confusion(probs, NoiseModel.noiseless()), probs, atol=1e-15)

    def test_asymmetric_flip(self):
        model = NoiseModel.noiseless()
        model = NoiseModel(**{**model.__dict__, "readout_confusion": ((0.98, 0.02), (0.0, 1.0))})
        np.testing.assert_allclose(apply_readout_confusion([1.0, 0.0], model), [0.98, 0.02], atol=1e-15)

    def test_uniform_stays_uniform(self):
        out = apply_readout_confusion(np.full(8, 1 / 8), DEFAULT_NOISE)
        np.testing.assert_allclose(out, np.full(8, 1 / 8), atol=1e-15)

    def test_sums_to_one(self, rng):
        out = apply_readout_confusion(random_state(3, rng).probabilities(), DEFAULT_NOISE)
        assert abs(out.sum() - 1) <= 1e-12

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            apply_readout_confusion([0.5, 0.2], DEFAULT_NOISE)

    def test_rows_must_be_stochastic(self):
        with pytest.raises(ValueError):
            NoiseModel(readout_confusion=((0.9, 0.2), (0.0, 1.0)))

    def test_readout_lowers_z(self):
        c = Circuit(1, (), 0)
        rho = run_circuit(c, [], noise=NoiseModel.noiseless())
        z = qsim.expectation(rho, Hamiltonian(1, [PauliString(1.0, "Z")]),
                             readout=[np.array(symmetric_readout(0.01))])
        assert z == pytest.approx(0.98)


class TestModel:
    def test_default_preset(self):
        m = DEFAULT_NOISE
        assert (m.t1, m.t2, m.gate_time_1q, m.gate_time_2q) == (200e-6, 150e-6, 50e-9, 300e-9)
        assert (m.depol_1q, m.depol_2q, m.idle_error) == (3e-4, 3e-3, 1e-4)
        np.testing.assert_allclose(m.confusion(0), [[0.99, 0.01], [0.01, 0.99]])

    def test_from_mapping(self):
        m = NoiseModel.from_mapping({"depol_1q": 0.001, "readout_flip": 0.05})
        assert m.depol_1q == 0.001
        np.testing.assert_allclose(m.confusion(1), [[0.95, 0.05], [0.05, 0.95]])

    def test_unknown_key(self):
        with pytest.raises(KeyError):
            NoiseModel.from_mapping({"crosstalk": 0.1})

    @pytest.mark.parametrize("field", ["depol_1q", "depol_2q", "idle_error"])
    def test_probability_ranges(self, field):
        with pytest.raises(ValueError):
            NoiseModel(**{field: 1.5})

    def test_generated_channels_complete(self):
        for ch in (gate_noise_1q(DEFAULT_NOISE, 0), gate_noise_2q(DEFAULT_NOISE, 0, 1), idle_noise(DEFAULT_NOISE)):
            assert completeness_error(ch) <= 1e-10


class TestSchedule:
    def test_channel_count_audit(self):
        # encoding group: one X gate, two idle qubits; layer 1: 6 rotations + 3 CNOTs, nobody idle
        c = build_hardware_efficient_ansatz(3, 1)
        prog = noisy_schedule(c, DEFAULT_NOISE, parity_encoding("100"))
        chans = [op for op in prog if isinstance(op, ChannelOp)]
        assert sum(op.kind == "gate" for op in chans) == 10
        assert sum(op.kind == "idle" for op in chans) == 2
        assert len(chans) == 12

    def test_every_gate_followed_by_its_channel(self):
        c = build_hardware_efficient_ansatz(2, 2)
        prog = noisy_schedule(c, DEFAULT_NOISE)
        for i, op in enumerate(prog):
            if isinstance(op, GateInstance):
                nxt = prog[i + 1]
                assert isinstance(nxt, ChannelOp) and nxt.targets == op.qubits and nxt.kind == "gate"

    def test_idle_in_partial_layer(self):
        gates = [GateInstance(GateKind.RX, (0,), 0, layer=1), GateInstance(GateKind.RX, (1,), 1, layer=2)]
        prog = noisy_schedule(Circuit(2, gates, 2), DEFAULT_NOISE)
        idles = [op.targets for op in prog if isinstance(op, ChannelOp) and op.kind == "idle"]
        assert idles == [(1,), (0,)]

    def test_zero_noise_matches_statevector(self, rng):
        c = build_hardware_efficient_ansatz(3, 2)
        p = rng.uniform(0, 2 * np.pi, c.n_params)
        enc = parity_encoding("101")
        rho = run_circuit(c, p, enc, noise=NoiseModel.noiseless())
        psi = run_circuit(c, p, enc)
        np.testing.assert_allclose(rho.matrix, psi.to_density().matrix, atol=1e-10)
        h = tfim_hamiltonian(3)
        assert abs(qsim.expectation(rho, h) - qsim.expectation(psi, h)) <= 1e-9

    def test_single_x_with_depolarizing(self):
        model = NoiseModel(**{**NoiseModel.noiseless().__dict__, "depol_1q": 0.01})
        c = Circuit(1, [GateInstance(GateKind.X, (0,))], 0)
        assert run_circuit(c, [], noise=model).purity() < 1

    @settings(max_examples=15, deadline=None)
    @given(st.integers(1, 3), st.integers(0, 2**32 - 1))
    def test_scheduled_program_preserves_trace_and_hermiticity(self, n, seed):
        c = build_hardware_efficient_ansatz(n, 2)
        p = np.random.default_rng(seed).uniform(0, 2 * np.pi, c.n_params)
        rho = run_circuit(c, p, noise=DEFAULT_NOISE)
        assert abs(rho.trace() - 1) <= 1e-10
        assert rho.hermiticity_error() <= 1e-10
        assert np.linalg.eigvalsh(rho.matrix).min() >= -1e-9
