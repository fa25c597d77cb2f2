"""Density-matrix backend with exact channel application.

Measurements follow trajectory semantics (project + renormalize); the
exact-distribution entry point enumerates measurement branches instead,
including measurement-flip branches when eps_m > 0, so small noisy
circuits get closed-form outcome distributions.
"""
from __future__ import annotations

import math
from typing import Iterable, Optional

import numpy as np

from .circuit import Circuit, CircuitError, Instruction, gate_matrix
from .noise import NoiseParams, depolarize_rho
from .statevector import CapacityError, statevector

DENSITY_QUBIT_CAP = 10


class DensityState:
    """2^n x 2^n density matrix."""

    def __init__(self, num_qubits: int, rho: Optional[np.ndarray] = None):
        if num_qubits > DENSITY_QUBIT_CAP:
            raise CapacityError(
                f"{num_qubits} qubits exceeds the density-matrix cap of {DENSITY_QUBIT_CAP}"
            )
        self.n = num_qubits
        self.dim = 1 << num_qubits
        if rho is None:
            rho = np.zeros((self.dim, self.dim), dtype=complex)
            rho[0, 0] = 1.0
        self.rho = np.asarray(rho, dtype=complex)

    @classmethod
    def from_statevector(cls, vec: np.ndarray) -> "DensityState":
        n = int(round(math.log2(len(vec))))
        return cls(n, np.outer(vec, vec.conj()))

    def copy(self) -> "DensityState":
        return DensityState(self.n, self.rho.copy())

    # -- unitaries -------------------------------------------------------
    def apply_kq(self, u: np.ndarray, qubits) -> None:
        """rho -> U rho U^dag with U acting on the given qubits."""
        k = len(qubits)
        n = self.n
        u = np.asarray(u, dtype=complex)
        t = self.rho.reshape((2,) * (2 * n))
        src = [n - 1 - q for q in reversed(qubits)]
        # ket side
        moved = np.moveaxis(t, src, range(k))
        shape = moved.shape
        m = (u @ moved.reshape(1 << k, -1)).reshape(shape)
        t = np.moveaxis(m, range(k), src)
        # bra side
        src_b = [2 * n - 1 - q for q in reversed(qubits)]
        moved = np.moveaxis(t, src_b, range(k))
        shape = moved.shape
        m = (u.conj() @ moved.reshape(1 << k, -1)).reshape(shape)
        t = np.moveaxis(m, range(k), src_b)
        self.rho = np.ascontiguousarray(t).reshape(self.dim, self.dim)

    def apply_instruction_gate(self, instr: Instruction) -> None:
        if instr.kind == "Barrier":
            return
        self.apply_kq(gate_matrix(instr), instr.qubits)

    def depolarize(self, qubits, eps: float) -> None:
        self.rho = depolarize_rho(self.rho, tuple(qubits), self.n, eps)

    # -- measurement -----------------------------------------------------
    def prob_one(self, q: int) -> float:
        d = np.real(np.diag(self.rho)).reshape(-1, 2, 1 << q)
        return float(d[:, 1].sum())

    def project(self, q: int, bit: int) -> float:
        """Project qubit q onto |bit>, renormalize; returns the branch prob."""
        p1 = self.prob_one(q)
        p = p1 if bit else 1.0 - p1
        if p <= 0.0:
            return 0.0
        t = self.rho.reshape(-1, 2, (1 << q), self.dim)
        t[:, 1 - bit] = 0.0
        t = t.reshape(self.dim, self.dim).T.reshape(-1, 2, (1 << q), self.dim)
        t[:, 1 - bit] = 0.0
        self.rho = t.reshape(self.dim, self.dim).T / p
        return p

    def measure(self, q: int, rng: np.random.Generator) -> int:
        bit = int(rng.random() < self.prob_one(q))
        self.project(q, bit)
        return bit

    def reset_channel(self, q: int, reset_error: float = 0.0) -> None:
        """Deterministic reset-to-|0> channel, optional bit-flip error."""
        b0 = self.copy()
        p0 = b0.project(q, 0)
        b1 = self.copy()
        p1 = b1.project(q, 1)
        if p1 > 0.0:
            b1.apply_kq(gate_matrix(Instruction("X", (q,))), (q,))
        self.rho = p0 * b0.rho + p1 * b1.rho
        if reset_error > 0.0:
            flipped = self.copy()
            flipped.apply_kq(gate_matrix(Instruction("X", (q,))), (q,))
            self.rho = (1.0 - reset_error) * self.rho + reset_error * flipped.rho

    # -- diagnostics -----------------------------------------------------
    def probabilities(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).copy()

    def fidelity_with(self, vec: np.ndarray) -> float:
        """<psi| rho |psi> for a pure target."""
        return float(np.real(vec.conj() @ self.rho @ vec))


def partial_trace(rho: np.ndarray, keep: Iterable[int], n: int) -> np.ndarray:
    """Trace out all qubits not in ``keep``; result indexed by keep order
    with keep[0] as the least-significant bit."""
    keep = list(keep)
    k = len(keep)
    rest = [q for q in range(n) if q not in keep]
    t = rho.reshape((2,) * (2 * n))
    ket = [n - 1 - q for q in reversed(keep)] + [n - 1 - q for q in rest]
    perm = ket + [a + n for a in ket]
    t = t.transpose(perm).reshape(1 << k, 1 << (n - k), 1 << k, 1 << (n - k))
    return np.einsum("iaja->ij", t)


def _gate_eps(instr: Instruction, noise: NoiseParams) -> float:
    if instr.tag == "comm":
        return noise.eps_comm if noise.t_comm > 0 else noise.eps_d
    if len(instr.qubits) == 1:
        return noise.eps_d
    return noise.eps_g


def evolve_unitary_exact(
    circuit: Circuit, noise: Optional[NoiseParams] = None
) -> DensityState:
    """Exact channel evolution of a measurement-free circuit."""
    state = DensityState(circuit.num_qubits)
    for instr in circuit.instructions:
        if not instr.is_unitary_gate:
            raise CircuitError("evolve_unitary_exact requires a measurement-free circuit")
        if instr.cond is not None:
            raise CircuitError("conditioned gates need branch enumeration")
        if instr.kind == "Barrier":
            continue
        state.apply_instruction_gate(instr)
        if noise is not None:
            eps = _gate_eps(instr, noise)
            if eps > 0.0:
                state.depolarize(instr.qubits, eps)
    return state


def density_branches(
    circuit: Circuit,
    noise: Optional[NoiseParams] = None,
    prune: float = 1e-14,
) -> list[tuple[float, list[int], DensityState]]:
    """Enumerate measurement branches exactly; returns (prob, clbits, state).

    Gate noise is applied as the exact depolarizing channel.  Measurement
    branches on the physical outcome and, when eps_m > 0, additionally on
    the recorded bit.  Reset is a deterministic channel (no branching).
    """
    nz = noise is not None and not noise.is_noiseless
    branches = [(1.0, [0] * max(circuit.num_clbits, 1), DensityState(circuit.num_qubits))]
    for instr in circuit.instructions:
        if instr.kind == "Barrier":
            continue
        new = []
        for prob, cl, state in branches:
            if instr.cond is not None and cl[instr.cond[0]] != instr.cond[1]:
                new.append((prob, cl, state))
                continue
            if instr.kind == "Measure":
                q = instr.qubits[0]
                eps_m = noise.eps_m if nz else 0.0
                for bit in (0, 1):
                    b = state.copy()
                    p = b.project(q, bit)
                    if prob * p <= prune:
                        continue
                    outcomes = [(bit, 1.0 - eps_m)]
                    if eps_m > 0.0:
                        outcomes.append((bit ^ 1, eps_m))
                    for j, (rec, w) in enumerate(outcomes):
                        cl2 = list(cl)
                        cl2[instr.clbit] = rec
                        new.append((prob * p * w, cl2, b if j == 0 else b.copy()))
            elif instr.kind == "Reset":
                state.reset_channel(instr.qubits[0], noise.reset_error if nz else 0.0)
                new.append((prob, cl, state))
            else:
                state.apply_instruction_gate(instr)
                if nz:
                    eps = _gate_eps(instr, noise)
                    if eps > 0.0:
                        state.depolarize(instr.qubits, eps)
                new.append((prob, cl, state))
        branches = new
    return branches


def exact_distribution(
    circuit: Circuit,
    noise: Optional[NoiseParams] = None,
    report_clbits: Optional[Iterable[int]] = None,
) -> dict[str, float]:
    """Exact outcome distribution over the reported clbits."""
    report = sorted(report_clbits) if report_clbits is not None else circuit.measured_clbits()
    dist: dict[str, float] = {}
    for prob, cl, _state in density_branches(circuit, noise):
        key = "".join(str(cl[c]) for c in report)
        dist[key] = dist.get(key, 0.0) + prob
    return dist


def averaged_state(
    circuit: Circuit, noise: Optional[NoiseParams] = None
) -> DensityState:
    """Measurement-averaged final density matrix (branches summed)."""
    out = np.zeros((1 << circuit.num_qubits,) * 2, dtype=complex)
    for prob, _cl, state in density_branches(circuit, noise):
        out += prob * state.rho
    return DensityState(circuit.num_qubits, out)
