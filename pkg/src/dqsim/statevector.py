"""Dense statevector kernels.

Two entry points live here:

* :class:`BatchedState` - a 2^n statevector replicated over a trailing
  shot axis, so one numpy op advances every trajectory at once.  All
  stochastic noise injection (Pauli sampling, measurement flips) is
  vectorized over shots.
* :func:`exact_branch_distribution` - noiseless measurement-branch
  enumeration with branch merging, used as the exact oracle for circuits
  containing mid-circuit measurement and classical feedforward.

Qubit 0 is the least-significant bit of the basis-state index.
"""
from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

import numpy as np

from .circuit import Circuit, CircuitError, Instruction, gate_matrix
from .noise import NoiseParams

DEFAULT_QUBIT_CAP = 24


class CapacityError(ValueError):
    """Circuit exceeds the configured backend capacity."""


class BatchedState:
    """Statevector array of shape (dim, shots)."""

    def __init__(self, num_qubits: int, shots: int = 1, dtype=np.complex128):
        self.n = num_qubits
        self.dim = 1 << num_qubits
        self.shots = shots
        self.arr = np.zeros((self.dim, shots), dtype=dtype)
        self.arr[0, :] = 1.0

    # -- gate application ----------------------------------------------
    def _view1(self, q: int):
        """Reshape so axis 1 is qubit q: (upper, 2, lower*shots)."""
        lower = (1 << q) * self.shots
        return self.arr.reshape(-1, 2, lower)

    def apply_1q(self, u: np.ndarray, q: int) -> None:
        if abs(u[0, 1]) == 0.0 and abs(u[1, 0]) == 0.0:
            v = self._view1(q)
            v[:, 0] *= u[0, 0]
            v[:, 1] *= u[1, 1]
            return
        v = self._view1(q)
        a = v[:, 0]
        b = v[:, 1]
        t0 = u[0, 0] * a + u[0, 1] * b
        v[:, 1] = u[1, 0] * a + u[1, 1] * b
        v[:, 0] = t0

    def apply_h(self, q: int) -> None:
        v = self._view1(q)
        a = v[:, 0]
        b = v[:, 1]
        s = self.arr.real.dtype.type(1.0 / np.sqrt(2.0))
        t = a - b
        a += b
        a *= s
        t *= s
        v[:, 1] = t

    def apply_x(self, q: int) -> None:
        v = self._view1(q)
        tmp = v[:, 0].copy()
        v[:, 0] = v[:, 1]
        v[:, 1] = tmp

    def apply_z(self, q: int) -> None:
        v = self._view1(q)
        v[:, 1] *= -1.0

    def apply_y(self, q: int) -> None:
        v = self._view1(q)
        tmp = v[:, 0].copy()
        v[:, 0] = -1j * v[:, 1]
        v[:, 1] = 1j * tmp

    def apply_phase(self, phase: complex, q: int) -> None:
        v = self._view1(q)
        v[:, 1] *= phase

    def apply_cnot(self, ctrl: int, tgt: int) -> None:
        t = self.arr.reshape((2,) * self.n + (self.shots,))
        v = np.moveaxis(t, (self.n - 1 - ctrl, self.n - 1 - tgt), (0, 1))
        tmp = v[1, 0].copy()
        v[1, 0] = v[1, 1]
        v[1, 1] = tmp

    def apply_mcx(self, controls: Sequence[int], tgt: int) -> None:
        t = self.arr.reshape((2,) * self.n + (self.shots,))
        axes = [self.n - 1 - c for c in controls] + [self.n - 1 - tgt]
        v = np.moveaxis(t, axes, range(len(axes)))
        sub = v[(1,) * len(controls)]
        tmp = sub[0].copy()
        sub[0] = sub[1]
        sub[1] = tmp

    def apply_kq(self, u: np.ndarray, qubits: Sequence[int]) -> None:
        """General k-qubit unitary; qubits[0] is the LSB of the matrix index."""
        k = len(qubits)
        if k == 1:
            self.apply_1q(u, qubits[0])
            return
        t = self.arr.reshape((2,) * self.n + (self.shots,))
        src = [self.n - 1 - q for q in reversed(qubits)]
        moved = np.moveaxis(t, src, range(k))
        shape = moved.shape
        m = moved.reshape(1 << k, -1)
        res = np.asarray(u, dtype=self.arr.dtype) @ m
        moved[...] = res.reshape(shape)

    def apply_instruction_gate(self, instr: Instruction) -> None:
        kind = instr.kind
        if kind == "Barrier":
            return
        if kind == "X":
            self.apply_x(instr.qubits[0])
        elif kind == "Y":
            self.apply_y(instr.qubits[0])
        elif kind == "Z":
            self.apply_z(instr.qubits[0])
        elif kind == "P":
            self.apply_phase(np.exp(1j * instr.params[0]), instr.qubits[0])
        elif kind == "CNOT":
            self.apply_cnot(instr.qubits[0], instr.qubits[1])
        elif kind == "MCX":
            self.apply_mcx(instr.qubits[:-1], instr.qubits[-1])
        elif kind == "H":
            self.apply_h(instr.qubits[0])
        elif kind in ("RX", "RY", "RZ"):
            self.apply_1q(gate_matrix(instr), instr.qubits[0])
        elif kind in ("CP", "CRY", "CRZ", "UnitaryBlock"):
            self.apply_kq(gate_matrix(instr), instr.qubits)
        else:
            raise CircuitError(f"not a unitary gate: {kind}")

    # -- measurement / reset -------------------------------------------
    def prob_one(self, q: int) -> np.ndarray:
        v = self._view1(q)
        p = np.abs(v[:, 1]) ** 2
        return p.reshape(-1, 1 << q, self.shots).sum(axis=(0, 1))

    def _collapse(self, q: int, bits: np.ndarray, p1: np.ndarray) -> None:
        # zeroing and renormalization fused into two half-state multiplies
        one = bits.astype(np.float64)
        p = np.where(bits.astype(bool), p1, 1.0 - p1)
        np.maximum(p, 1e-300, out=p)
        inv = 1.0 / np.sqrt(p)
        rdt = self.arr.real.dtype
        v = self.arr.reshape(-1, 2, 1 << q, self.shots)
        v[:, 1] *= (one * inv).astype(rdt)
        v[:, 0] *= ((1.0 - one) * inv).astype(rdt)

    def measure(self, q: int, rng: np.random.Generator) -> np.ndarray:
        """Born-rule sample per shot; collapses and renormalizes."""
        p1 = self.prob_one(q).astype(np.float64)
        bits = (rng.random(self.shots) < p1).astype(np.uint8)
        self._collapse(q, bits, p1)
        return bits

    def reset(self, q: int, rng: np.random.Generator) -> None:
        bits = self.measure(q, rng)
        one = np.nonzero(bits)[0]
        if one.size:
            v = self.arr.reshape(-1, 2, 1 << q, self.shots)
            v[:, 0, :, one] = v[:, 1, :, one]
            v[:, 1, :, one] = 0.0

    # -- subsets ---------------------------------------------------------
    def apply_x_subset(self, q: int, cols: np.ndarray) -> None:
        v = self.arr.reshape(-1, 2, 1 << q, self.shots)
        tmp = v[:, 0, :, cols].copy()
        v[:, 0, :, cols] = v[:, 1, :, cols]
        v[:, 1, :, cols] = tmp

    def apply_z_subset(self, q: int, cols: np.ndarray) -> None:
        v = self.arr.reshape(-1, 2, 1 << q, self.shots)
        v[:, 1, :, cols] *= -1.0

    def apply_phase_subset(self, phase: complex, q: int, cols: np.ndarray) -> None:
        v = self.arr.reshape(-1, 2, 1 << q, self.shots)
        v[:, 1, :, cols] *= phase

    def apply_y_subset(self, q: int, cols: np.ndarray) -> None:
        v = self.arr.reshape(-1, 2, 1 << q, self.shots)
        tmp = v[:, 0, :, cols].copy()
        v[:, 0, :, cols] = -1j * v[:, 1, :, cols]
        v[:, 1, :, cols] = 1j * tmp

    def gather(self, cols: np.ndarray) -> "BatchedState":
        sub = BatchedState.__new__(BatchedState)
        sub.n, sub.dim = self.n, self.dim
        sub.shots = len(cols)
        sub.arr = self.arr[:, cols]
        return sub

    def scatter(self, cols: np.ndarray, sub: "BatchedState") -> None:
        self.arr[:, cols] = sub.arr

    def norms(self) -> np.ndarray:
        return np.sqrt((np.abs(self.arr) ** 2).sum(axis=0))


_PAULI_SUBSET = {1: "apply_x_subset", 2: "apply_y_subset", 3: "apply_z_subset"}


class TrajectoryRunner:
    """Per-shot stochastic simulation, vectorized over a shot batch."""

    def __init__(self, qubit_cap: int = DEFAULT_QUBIT_CAP, max_batch_elements: int = 1 << 23):
        self.qubit_cap = qubit_cap
        self.max_batch_elements = max_batch_elements

    def run(
        self,
        circuit: Circuit,
        shots: int,
        noise: Optional[NoiseParams] = None,
        seed: Optional[int] = None,
        dtype=np.complex128,
    ) -> np.ndarray:
        """Returns the classical-bit records, shape (num_clbits, shots)."""
        if shots < 1:
            raise ValueError("shots must be >= 1")
        if circuit.num_qubits > self.qubit_cap:
            raise CapacityError(
                f"{circuit.num_qubits} qubits exceeds the trajectory cap of {self.qubit_cap}"
            )
        rng = np.random.default_rng(seed)
        dim = 1 << circuit.num_qubits
        batch = max(1, min(shots, self.max_batch_elements // dim))
        records = np.zeros((circuit.num_clbits, shots), dtype=np.uint8)
        done = 0
        while done < shots:
            s = min(batch, shots - done)
            records[:, done : done + s] = self._run_batch(circuit, s, noise, rng, dtype)
            done += s
        return records

    def _run_batch(self, circuit, shots, noise, rng, dtype) -> np.ndarray:
        state = BatchedState(circuit.num_qubits, shots, dtype=dtype)
        clbits = np.zeros((max(circuit.num_clbits, 1), shots), dtype=np.uint8)
        nz = noise is not None and not noise.is_noiseless
        for instr in circuit.instructions:
            self._exec(state, clbits, instr, noise if nz else None, rng)
        return clbits[: circuit.num_clbits]

    def _exec(self, state, clbits, instr, noise, rng) -> None:
        if instr.kind == "Barrier":
            return
        cols = None
        if instr.cond is not None:
            mask = clbits[instr.cond[0]] == instr.cond[1]
            if not mask.any():
                return
            if not mask.all():
                cols = np.nonzero(mask)[0]

        if instr.kind == "Measure":
            target = state if cols is None else state.gather(cols)
            bits = target.measure(instr.qubits[0], rng)
            if noise is not None and noise.eps_m > 0:
                bits ^= rng.random(bits.shape[0]) < noise.eps_m
            if cols is None:
                clbits[instr.clbit] = bits
            else:
                state.scatter(cols, target)
                clbits[instr.clbit, cols] = bits
            return

        if instr.kind == "Reset":
            target = state if cols is None else state.gather(cols)
            target.reset(instr.qubits[0], rng)
            if noise is not None and noise.reset_error > 0:
                flip = np.nonzero(rng.random(target.shots) < noise.reset_error)[0]
                if flip.size:
                    target.apply_x_subset(instr.qubits[0], flip)
            if cols is not None:
                state.scatter(cols, target)
            return

        if cols is not None and instr.kind in ("X", "Y", "Z", "P"):
            # conditioned single-qubit gates apply in place on the shot
            # subset; skipping the full-state gather/scatter round trip
            q = instr.qubits[0]
            if instr.kind == "X":
                state.apply_x_subset(q, cols)
            elif instr.kind == "Y":
                state.apply_y_subset(q, cols)
            elif instr.kind == "Z":
                state.apply_z_subset(q, cols)
            else:
                state.apply_phase_subset(np.exp(1j * instr.params[0]), q, cols)
            if noise is not None:
                self._inject_gate_noise_subset(state, instr, noise, rng, cols)
            return

        target = state if cols is None else state.gather(cols)
        target.apply_instruction_gate(instr)
        if noise is not None:
            self._inject_gate_noise(target, instr, noise, rng)
        if cols is not None:
            state.scatter(cols, target)

    @staticmethod
    def _noise_eps(instr, noise) -> float:
        if instr.tag == "comm":
            # classically driven gates decohere while the measurement
            # record travels; with no timing configured, charge the plain
            # single-qubit rate instead of gate noise
            return noise.eps_comm if noise.t_comm > 0 else noise.eps_d
        if len(instr.qubits) == 1:
            return noise.eps_d
        return noise.eps_g

    def _inject_gate_noise_subset(self, state, instr, noise, rng, cols) -> None:
        eps = self._noise_eps(instr, noise)
        if eps <= 0.0:
            return
        sub = cols[rng.random(cols.size) < eps]
        if not sub.size:
            return
        for q in instr.qubits:
            pauli = rng.integers(0, 4, size=sub.size)
            for code, name in _PAULI_SUBSET.items():
                c = sub[pauli == code]
                if c.size:
                    getattr(state, name)(q, c)

    def _inject_gate_noise(self, state, instr, noise, rng) -> None:
        eps = self._noise_eps(instr, noise)
        if eps <= 0.0:
            return
        hit = rng.random(state.shots) < eps
        if not hit.any():
            return
        # uniform Pauli (including identity) per affected qubit; the
        # uniform mixture over all 4^k strings twirls to the exact channel
        for q in instr.qubits:
            pauli = rng.integers(0, 4, size=state.shots)
            for code, name in _PAULI_SUBSET.items():
                cols = np.nonzero(hit & (pauli == code))[0]
                if cols.size:
                    getattr(state, name)(q, cols)


def statevector(circuit: Circuit) -> np.ndarray:
    """Exact final amplitudes of a measurement-free circuit."""
    for instr in circuit.instructions:
        if not instr.is_unitary_gate:
            raise CircuitError(
                "statevector() requires a measurement-free circuit; "
                f"found {instr.kind}"
            )
        if instr.cond is not None:
            raise CircuitError("statevector() does not support conditioned gates")
    state = BatchedState(circuit.num_qubits, 1)
    for instr in circuit.instructions:
        state.apply_instruction_gate(instr)
    return state.arr[:, 0].copy()


# -- exact branch enumeration -------------------------------------------
def _canonical_key(vec: np.ndarray, clbits: tuple) -> bytes:
    i = int(np.argmax(np.abs(vec)))
    phase = vec[i] / abs(vec[i])
    return bytes(clbits) + np.round(vec * np.conj(phase), 10).tobytes()


def exact_branch_distribution(
    circuit: Circuit,
    report_clbits: Optional[Iterable[int]] = None,
    prune: float = 1e-14,
) -> dict[str, float]:
    """Exact noiseless outcome distribution of a circuit with mid-circuit
    measurement and feedforward, by enumerating measurement branches.

    Branches that agree on every still-relevant classical bit and whose
    states match up to a global phase are merged, so teleportation-style
    gadgets do not blow up the branch count.  Returns bitstring -> prob
    over ``report_clbits`` (default: all measured clbits), clbit 0
    printed leftmost.
    """
    n = circuit.num_qubits
    if report_clbits is None:
        report = circuit.measured_clbits()
    else:
        report = sorted(report_clbits)
    # clbits still referenced by conditions at or after instruction i
    future_cond: list[frozenset[int]] = []
    acc: set[int] = set()
    for instr in reversed(circuit.instructions):
        future_cond.append(frozenset(acc))
        if instr.cond is not None:
            acc.add(instr.cond[0])
    future_cond.reverse()
    future_cond.append(frozenset())

    init = np.zeros(1 << n, dtype=complex)
    init[0] = 1.0
    branches: list[tuple[float, np.ndarray, list[int]]] = [
        (1.0, init, [0] * max(circuit.num_clbits, 1))
    ]
    helper = BatchedState(n, 1)

    def apply_gate(vec, instr):
        helper.arr = vec.reshape(-1, 1)
        helper.apply_instruction_gate(instr)
        return helper.arr[:, 0]

    for i, instr in enumerate(circuit.instructions):
        if instr.kind == "Barrier":
            continue
        new: list[tuple[float, np.ndarray, list[int]]] = []
        for prob, vec, cl in branches:
            if instr.cond is not None and cl[instr.cond[0]] != instr.cond[1]:
                new.append((prob, vec, cl))
                continue
            if instr.kind in ("Measure", "Reset"):
                q = instr.qubits[0]
                v = vec.reshape(-1, 2, 1 << q)
                p1 = float(np.sum(np.abs(v[:, 1]) ** 2))
                for bit, p in ((0, 1.0 - p1), (1, p1)):
                    if p <= prune:
                        continue
                    w = v.copy()
                    w[:, 1 - bit] = 0.0
                    w = w.reshape(-1) / math.sqrt(p)
                    if instr.kind == "Reset" and bit == 1:
                        w = w.reshape(-1, 2, 1 << q)
                        w[:, 0] = w[:, 1]
                        w[:, 1] = 0.0
                        w = w.reshape(-1)
                    cl2 = cl
                    if instr.kind == "Measure":
                        cl2 = list(cl)
                        cl2[instr.clbit] = bit
                    new.append((prob * p, w, cl2))
            else:
                new.append((prob, apply_gate(vec, instr), cl))
        if len(new) > 1:
            merged: dict[bytes, tuple[float, np.ndarray, list[int]]] = {}
            relevant = sorted(set(report) | set(future_cond[i + 1]))
            for prob, vec, cl in new:
                key = _canonical_key(vec, tuple(cl[c] for c in relevant))
                if key in merged:
                    merged[key] = (merged[key][0] + prob, merged[key][1], merged[key][2])
                else:
                    merged[key] = (prob, vec, cl)
            branches = list(merged.values())
        else:
            branches = new

    dist: dict[str, float] = {}
    for prob, _vec, cl in branches:
        key = "".join(str(cl[c]) for c in report)
        dist[key] = dist.get(key, 0.0) + prob
    return dist
