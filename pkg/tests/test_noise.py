"""Noise parameter validation, exact channels, and analytic fidelities."""
import math

import numpy as np
import pytest

from dqsim.circuit import Circuit, Instruction, gate_matrix
from dqsim.density import DensityState, evolve_unitary_exact, partial_trace
from dqsim.noise import (
    NoiseDomainError,
    NoiseParams,
    analytic_gate_fidelity,
    comm_depolarization,
    comm_time,
    depolarize_rho,
    flip_measurement,
)


class TestParams:
    def test_probability_bounds(self):
        with pytest.raises(ValueError):
            NoiseParams(eps_d=-0.1)
        with pytest.raises(ValueError):
            NoiseParams(eps_g=1.5)
        with pytest.raises(ValueError):
            NoiseParams(eps_m=2.0)

    def test_t_comm_requires_t2(self):
        with pytest.raises(ValueError):
            NoiseParams(t_comm=1e-6)
        NoiseParams(t_comm=1e-6, T2=1e-3)

    def test_reset_error_defaults_to_eps_m(self):
        assert NoiseParams(eps_m=0.04).reset_error == 0.04
        assert NoiseParams(eps_m=0.04, eps_reset=0.01).reset_error == 0.01

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ValueError):
            NoiseParams.from_dict({"eps_d": 0.1, "epsilon_g": 0.2})

    def test_dict_round_trip(self):
        p = NoiseParams(eps_d=0.01, eps_g=0.02, eps_m=0.003, t_comm=1e-5, T2=1e-3)
        q = NoiseParams.from_dict(p.to_dict())
        assert p == q

    def test_is_noiseless(self):
        assert NoiseParams().is_noiseless
        assert not NoiseParams(eps_g=0.01).is_noiseless


class TestDepolarizeRho:
    def test_full_strength_gives_maximally_mixed(self):
        """eps = 1 on every qubit replaces rho by I / 2^k."""
        vec = np.zeros(4, dtype=complex)
        vec[0] = vec[3] = 1.0 / math.sqrt(2.0)
        rho = np.outer(vec, vec.conj())
        out = depolarize_rho(rho, (0, 1), 2, 1.0)
        assert np.abs(out - np.eye(4) / 4.0).max() < 1e-14

    def test_single_qubit_example(self):
        """eps = 0.1 on |0><0| gives diag(0.95, 0.05)."""
        rho = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        out = depolarize_rho(rho, (0,), 1, 0.1)
        assert np.abs(out - np.diag([0.95, 0.05])).max() < 1e-14

    def test_trace_preserving(self):
        rng = np.random.default_rng(4)
        m = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        out = depolarize_rho(rho, (0, 2), 3, 0.3)
        assert abs(np.trace(out) - 1.0) < 1e-12
        assert np.abs(out - out.conj().T).max() < 1e-12

    def test_channel_composition(self):
        """Two depolarizations compose: 1 - e = (1 - e1)(1 - e2)."""
        rng = np.random.default_rng(6)
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        a = depolarize_rho(depolarize_rho(rho, (0, 1), 2, 0.1), (0, 1), 2, 0.2)
        e = 1.0 - 0.9 * 0.8
        b = depolarize_rho(rho, (0, 1), 2, e)
        assert np.abs(a - b).max() < 1e-14

    def test_untouched_qubit_marginal_preserved(self):
        c = Circuit(2)
        c.h(0).ry(0.4, 1)
        state = evolve_unitary_exact(c)
        out = depolarize_rho(state.rho, (0,), 2, 0.7)
        before = partial_trace(state.rho, [1], 2)
        after = partial_trace(out, [1], 2)
        assert np.abs(before - after).max() < 1e-13

    def test_noisy_local_cnot_marginal_fidelity(self):
        """A local CNOT with eps_g from |00> leaves the target qubit with
        marginal fidelity 1 - eps_g / 2."""
        eps_g = 0.01
        c = Circuit(2)
        c.cx(0, 1)
        state = evolve_unitary_exact(c, NoiseParams(eps_g=eps_g))
        marg = partial_trace(state.rho, [1], 2)
        fid = float(np.real(marg[0, 0]))
        assert abs(fid - (1.0 - eps_g / 2.0)) < 1e-12


class TestMeasurementFlip:
    def test_rates(self):
        rng = np.random.default_rng(2)
        flips = sum(flip_measurement(0, 0.25, rng) for _ in range(20000))
        assert abs(flips / 20000 - 0.25) < 0.02

    def test_zero_rate_identity(self):
        rng = np.random.default_rng(0)
        assert flip_measurement(1, 0.0, rng) == 1
        with pytest.raises(ValueError):
            flip_measurement(0, 1.2, rng)


class TestAnalyticFidelity:
    def test_single_gate(self):
        p = NoiseParams(eps_d=0.001, eps_g=0.01, eps_m=0.0025)
        assert abs(analytic_gate_fidelity(1, p) - 0.984) < 1e-12

    def test_two_gates_squares(self):
        p = NoiseParams(eps_d=0.001, eps_g=0.01, eps_m=0.0025)
        assert abs(analytic_gate_fidelity(2, p) - 0.984 ** 2) < 1e-12
        assert abs(analytic_gate_fidelity(0, p) - 1.0) < 1e-15

    def test_domain_error(self):
        p = NoiseParams(eps_d=0.5, eps_g=0.4, eps_m=0.3)
        with pytest.raises(NoiseDomainError):
            analytic_gate_fidelity(1, p)
        with pytest.raises(ValueError):
            analytic_gate_fidelity(-1, p)


class TestCommDecoherence:
    def test_reference_value(self):
        """T2 = 50 us, 10 m link, 2e8 m/s signal speed: about 1e-3."""
        t = comm_time(10.0, 2.0e8)
        assert abs(t - 5e-8) < 1e-20
        eps = comm_depolarization(t, 50e-6)
        assert abs(eps - (1.0 - math.exp(-1e-3))) < 1e-15
        assert abs(eps - 1e-3) < 1e-6

    def test_exponential_form(self):
        assert abs(comm_depolarization(50e-6, 50e-6) - (1.0 - math.exp(-1.0))) < 1e-15
        assert comm_depolarization(0.0, 50e-6) == 0.0

    def test_eps_comm_property(self):
        p = NoiseParams(t_comm=50e-6, T2=50e-6)
        assert abs(p.eps_comm - (1.0 - math.exp(-1.0))) < 1e-15
        assert NoiseParams().eps_comm == 0.0

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            comm_depolarization(1e-6, 0.0)
        with pytest.raises(ValueError):
            comm_time(10.0, 0.0)
