"""Dynamic (measurement-based) QFT construction and terminal-block rewrite."""
import numpy as np
import pytest

from dqsim import density
from dqsim.algorithms import build_qft
from dqsim.circuit import Circuit
from dqsim.dynamic import (
    RewriteRefusedError,
    build_dynamic_qft,
    rewrite_terminal_qft,
)
from dqsim.sim import total_variation
from dqsim.statevector import exact_branch_distribution

from helpers import basis_prep, prepend, random_unitary


def _static_qft_measured(n, inverse=False):
    c = Circuit(n, n)
    c.extend(build_qft(n, inverse=inverse))
    for q in range(n):
        c.measure(q, q)
    return c


class TestBuildDynamicQft:
    def test_gate_census(self):
        """n wires: n H, n Measure, n(n-1)/2 conditioned phases, no 2q gates."""
        n = 5
        c = build_dynamic_qft(n)
        kinds = [i.kind for i in c.instructions]
        assert kinds.count("H") == n
        assert kinds.count("Measure") == n
        conds = [i for i in c.instructions if i.cond is not None]
        assert len(conds) == n * (n - 1) // 2
        assert all(i.kind == "P" and i.tag == "comm" for i in conds)
        assert all(len(i.qubits) == 1 for i in c.instructions)

    def test_single_qubit(self):
        c = build_dynamic_qft(1)
        assert [i.kind for i in c.instructions] == ["H", "Measure"]

    def test_wiring_order(self):
        """Wire j: conditioned phases from every earlier wire, then H, then
        its own measurement."""
        c = build_dynamic_qft(3)
        per_wire = {j: [] for j in range(3)}
        for i in c.instructions:
            per_wire[i.qubits[0]].append(i)
        for j in range(3):
            ops = per_wire[j]
            assert [op.kind for op in ops] == ["P"] * j + ["H", "Measure"]
            for k, op in enumerate(ops[:j]):
                assert op.cond == (k, 1)
                assert abs(abs(op.params[0]) - np.pi / (1 << (j - k))) < 1e-12

    def test_validation(self):
        with pytest.raises(ValueError):
            build_dynamic_qft(0)
        with pytest.raises(ValueError):
            build_dynamic_qft(2, clbits=[0])
        with pytest.raises(ValueError):
            build_dynamic_qft(2, angle_sign=2)


class TestEquivalence:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_matches_static_on_basis_states(self, n):
        dyn = build_dynamic_qft(n, angle_sign=1)
        for x in range(1 << n):
            a = exact_branch_distribution(prepend(basis_prep(n, x), _static_qft_measured(n)))
            b = exact_branch_distribution(prepend(basis_prep(n, x), dyn))
            assert total_variation(a, b) < 1e-12

    def test_matches_on_random_product_states(self):
        rng = np.random.default_rng(51)
        n = 3
        dyn = build_dynamic_qft(n, angle_sign=1)
        for _ in range(10):
            prep = Circuit(n)
            for q in range(n):
                prep.unitary(random_unitary(rng, 2), [q])
            a = exact_branch_distribution(prepend(prep, _static_qft_measured(n)))
            b = exact_branch_distribution(prepend(prep, dyn))
            assert total_variation(a, b) < 1e-11

    def test_density_backend_agrees(self):
        n = 3
        dyn = build_dynamic_qft(n, angle_sign=1)
        prep = basis_prep(n, 5)
        a = density.exact_distribution(prepend(prep, _static_qft_measured(n)))
        b = density.exact_distribution(prepend(prep, dyn))
        assert total_variation(a, b) < 1e-12


class TestRewrite:
    def test_forward_qft_block(self):
        n = 3
        circ = prepend(basis_prep(n, 3), _static_qft_measured(n))
        got = rewrite_terminal_qft(circ, list(range(n)))
        assert all(len(i.qubits) == 1 for i in got.instructions)
        a = exact_branch_distribution(circ)
        b = exact_branch_distribution(got)
        assert total_variation(a, b) < 1e-12

    def test_inverse_qft_block(self):
        """An inverse QFT matches with the wire roles reversed."""
        n = 4
        circ = prepend(basis_prep(n, 9), _static_qft_measured(n, inverse=True))
        got = rewrite_terminal_qft(circ, list(range(n - 1, -1, -1)))
        assert all(len(i.qubits) == 1 for i in got.instructions)
        a = exact_branch_distribution(circ)
        b = exact_branch_distribution(got)
        assert total_variation(a, b) < 1e-12

    def test_prefix_untouched(self):
        n = 2
        circ = Circuit(n + 1, n)
        circ.h(2).ry(0.4, 0).cx(2, 1)
        circ.extend(_static_qft_measured(n))
        got = rewrite_terminal_qft(circ, [0, 1])
        kinds = [i.kind for i in got.instructions[:3]]
        assert kinds == ["H", "RY", "CNOT"]
        a = exact_branch_distribution(circ)
        b = exact_branch_distribution(got)
        assert total_variation(a, b) < 1e-12

    def test_clbit_assignment_preserved(self):
        n = 2
        circ = Circuit(n, 5)
        circ.extend(build_qft(n))
        circ.measure(0, 4).measure(1, 2)
        got = rewrite_terminal_qft(circ, [0, 1])
        measured = {i.qubits[0]: i.clbit for i in got.instructions if i.kind == "Measure"}
        assert measured == {0: 4, 1: 2}

    def test_refuses_wrong_angles(self):
        circ = Circuit(2, 2)
        circ.h(1).cp(0.3, 0, 1).h(0)
        circ.measure(0, 0).measure(1, 1)
        with pytest.raises(RewriteRefusedError):
            rewrite_terminal_qft(circ, [0, 1])

    def test_refuses_unmeasured_wire(self):
        circ = Circuit(2, 1)
        circ.extend(build_qft(2))
        circ.measure(0, 0)
        with pytest.raises(RewriteRefusedError):
            rewrite_terminal_qft(circ, [0, 1])

    def test_refuses_gate_after_measurement(self):
        circ = _static_qft_measured(2)
        circ.x(0)
        with pytest.raises(RewriteRefusedError):
            rewrite_terminal_qft(circ, [0, 1])

    def test_refuses_classical_traffic_inside_block(self):
        """A conditioned gate on a bystander qubit cannot commute past the
        measurements, so the rewrite must refuse."""
        circ = Circuit(3, 3)
        circ.extend(build_qft(2))
        circ.measure(0, 0)
        circ.x(2, cond=(0, 1))
        circ.measure(1, 1)
        with pytest.raises(RewriteRefusedError):
            rewrite_terminal_qft(circ, [0, 1])

    def test_input_circuit_untouched_on_refusal(self):
        circ = Circuit(2, 2)
        circ.h(0).measure(0, 0).measure(1, 1)
        before = len(circ.instructions)
        with pytest.raises(RewriteRefusedError):
            rewrite_terminal_qft(circ, [0, 1])
        assert len(circ.instructions) == before
