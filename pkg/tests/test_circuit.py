"""Circuit construction, IR round-trips, and the matrix oracle."""
import json
import math

import numpy as np
import pytest

from dqsim.circuit import (
    Circuit,
    CircuitError,
    Instruction,
    circuit_unitary,
    gate_matrix,
)

from helpers import random_unitary


class TestBuilder:
    def test_gate_indices_validated(self):
        c = Circuit(2, 1)
        with pytest.raises(IndexError):
            c.h(2)
        with pytest.raises(IndexError):
            c.measure(0, 1)
        with pytest.raises(IndexError):
            c.x(0, cond=(3, 1))

    def test_unitary_block_must_be_unitary(self):
        c = Circuit(2)
        with pytest.raises(CircuitError):
            c.unitary(np.ones((4, 4)), [0, 1])

    def test_measured_clbits(self):
        c = Circuit(3, 5)
        c.measure(0, 4).measure(1, 2).measure(2, 2)
        assert c.measured_clbits() == [2, 4]

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(11)
        c = Circuit(3)
        c.h(0).rz(0.3, 1).cp(0.7, 0, 2).cry(1.2, 2, 1).cx(1, 0)
        c.unitary(random_unitary(rng, 4), [0, 2])
        comp = Circuit(3)
        comp.extend(c)
        comp.extend(c.inverse())
        assert np.abs(circuit_unitary(comp) - np.eye(8)).max() < 1e-10

    def test_inverse_rejects_measurement(self):
        c = Circuit(1, 1)
        c.measure(0, 0)
        with pytest.raises(CircuitError):
            c.inverse()


class TestGateMatrix:
    def test_cnot_orientation(self):
        """Control is qubits[0] = LSB of the matrix index."""
        m = gate_matrix(Instruction("CNOT", (0, 1)))
        # |ctrl=1, tgt=0> = index 1 maps to index 3
        expect = np.zeros((4, 4))
        expect[0, 0] = expect[2, 2] = 1
        expect[3, 1] = expect[1, 3] = 1
        assert np.abs(m - expect).max() == 0

    def test_cp_symmetry(self):
        a = gate_matrix(Instruction("CP", (0, 1), (0.4,)))
        b = gate_matrix(Instruction("CP", (1, 0), (0.4,)))
        assert np.abs(a - b).max() < 1e-15

    def test_rotation_composition(self):
        rz = gate_matrix(Instruction("RZ", (0,), (0.3,)))
        ry = gate_matrix(Instruction("RY", (0,), (0.5,)))
        angles = gate_matrix(Instruction("RZ", (0,), (0.3 + 0.0,)))
        assert np.abs(rz @ rz.conj().T - np.eye(2)).max() < 1e-12
        assert np.abs(ry @ ry.conj().T - np.eye(2)).max() < 1e-12
        assert np.abs(angles - rz).max() < 1e-15


class TestIr:
    def test_round_trip_preserves_semantics(self):
        rng = np.random.default_rng(5)
        c = Circuit(3, 2)
        c.h(0).cp(0.9, 0, 1).mcx([0, 1], 2)
        c.unitary(random_unitary(rng, 2), [1])
        c.measure(2, 0)
        c.p(-0.4, 1, cond=(0, 1), tag="comm")
        c.reset(2)
        c.measure(1, 1)
        ir = json.loads(json.dumps(c.to_ir()))
        back = Circuit.from_ir(ir)
        assert back.num_qubits == 3 and back.num_clbits == 2
        assert len(back.instructions) == len(c.instructions)
        for a, b in zip(c.instructions, back.instructions):
            assert a.kind == b.kind and a.qubits == b.qubits
            assert a.cond == b.cond and a.tag == b.tag
            if a.matrix is not None:
                assert np.abs(a.matrix - b.matrix).max() < 1e-12

    def test_from_ir_rejects_garbage(self):
        with pytest.raises(CircuitError):
            Circuit.from_ir({"ops": []})


class TestUnitaryOracle:
    def test_matches_manual_kron(self):
        c = Circuit(2)
        c.h(0)
        h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
        assert np.abs(circuit_unitary(c) - np.kron(np.eye(2), h)).max() < 1e-12

    def test_mcx_truth_table(self):
        c = Circuit(3)
        c.mcx([0, 1], 2)
        u = circuit_unitary(c)
        for x in range(8):
            y = x ^ 4 if (x & 3) == 3 else x
            assert abs(u[y, x] - 1.0) < 1e-12
