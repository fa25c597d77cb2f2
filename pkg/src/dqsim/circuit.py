"""Circuit intermediate representation: instructions, registers, JSON IR."""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

UNITARY_ATOL = 1e-10

#: gate kinds taking no angle parameter
FIXED_GATES = {"H", "X", "Y", "Z", "CNOT", "MCX", "Barrier"}
#: gate kinds taking exactly one angle (radians)
PARAM_GATES = {"P", "RX", "RY", "RZ", "CP", "CRY", "CRZ"}
TWO_QUBIT_KINDS = {"CNOT", "CP", "CRY", "CRZ"}


class CircuitError(ValueError):
    """Malformed circuit or instruction."""


@dataclass(frozen=True)
class Instruction:
    """One circuit operation.

    ``cond`` is an optional ``(clbit, value)`` pair: the instruction only
    executes when that classical bit holds ``value``.  ``tag`` marks
    provenance that the noise model cares about ("comm" = the gate is a
    classically communicated correction and takes communication
    decoherence instead of gate noise).
    """

    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    clbit: Optional[int] = None
    cond: Optional[tuple[int, int]] = None
    matrix: Optional[np.ndarray] = None
    tag: Optional[str] = None

    def __post_init__(self):
        if self.kind in FIXED_GATES and self.params:
            raise CircuitError(f"{self.kind} takes no parameters")
        if self.kind in PARAM_GATES and len(self.params) != 1:
            raise CircuitError(f"{self.kind} takes exactly one angle")
        if self.kind == "UnitaryBlock":
            if self.matrix is None:
                raise CircuitError("UnitaryBlock requires a matrix")
            m = np.asarray(self.matrix, dtype=complex)
            dim = 1 << len(self.qubits)
            if m.shape != (dim, dim):
                raise CircuitError(
                    f"UnitaryBlock matrix shape {m.shape} does not match "
                    f"{len(self.qubits)} qubits"
                )
            err = np.max(np.abs(m.conj().T @ m - np.eye(dim)))
            if err > UNITARY_ATOL:
                raise CircuitError(f"UnitaryBlock matrix is not unitary (err={err:.3g})")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"duplicate qubit in {self.kind}{self.qubits}")

    def conditioned(self, clbit: int, value: int, tag: Optional[str] = None) -> "Instruction":
        return replace(self, cond=(clbit, int(value)), tag=tag or self.tag)

    @property
    def is_unitary_gate(self) -> bool:
        return self.kind not in ("Measure", "Reset", "Barrier")


def _check_index(i: int, n: int, what: str) -> None:
    if not 0 <= i < n:
        raise IndexError(f"{what} index {i} out of range [0, {n})")


@dataclass
class Circuit:
    """Ordered instruction list over qubit and classical-bit registers.

    Qubit 0 is the least-significant bit of a basis-state index.
    Histogram bitstrings are printed clbit-0-leftmost.
    """

    num_qubits: int
    num_clbits: int = 0
    instructions: list[Instruction] = field(default_factory=list)
    registers: dict[str, list[int]] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    # -- builders ------------------------------------------------------
    def append(self, instr: Instruction) -> "Circuit":
        for q in instr.qubits:
            _check_index(q, self.num_qubits, "qubit")
        if instr.clbit is not None:
            _check_index(instr.clbit, self.num_clbits, "clbit")
        if instr.cond is not None:
            _check_index(instr.cond[0], self.num_clbits, "condition clbit")
        self.instructions.append(instr)
        return self

    def _gate(self, kind, qubits, params=(), **kw):
        return self.append(Instruction(kind, tuple(qubits), tuple(params), **kw))

    def h(self, q, **kw):
        return self._gate("H", [q], **kw)

    def x(self, q, **kw):
        return self._gate("X", [q], **kw)

    def y(self, q, **kw):
        return self._gate("Y", [q], **kw)

    def z(self, q, **kw):
        return self._gate("Z", [q], **kw)

    def p(self, theta, q, **kw):
        return self._gate("P", [q], [theta], **kw)

    def rx(self, theta, q, **kw):
        return self._gate("RX", [q], [theta], **kw)

    def ry(self, theta, q, **kw):
        return self._gate("RY", [q], [theta], **kw)

    def rz(self, theta, q, **kw):
        return self._gate("RZ", [q], [theta], **kw)

    def cx(self, ctrl, tgt, **kw):
        return self._gate("CNOT", [ctrl, tgt], **kw)

    def cp(self, theta, a, b, **kw):
        return self._gate("CP", [a, b], [theta], **kw)

    def cry(self, theta, ctrl, tgt, **kw):
        return self._gate("CRY", [ctrl, tgt], [theta], **kw)

    def crz(self, theta, ctrl, tgt, **kw):
        return self._gate("CRZ", [ctrl, tgt], [theta], **kw)

    def mcx(self, controls, tgt, **kw):
        return self._gate("MCX", list(controls) + [tgt], **kw)

    def unitary(self, matrix, qubits, **kw):
        m = np.asarray(matrix, dtype=complex)
        return self.append(Instruction("UnitaryBlock", tuple(qubits), matrix=m, **kw))

    def measure(self, q, clbit, **kw):
        return self.append(Instruction("Measure", (q,), clbit=clbit, **kw))

    def reset(self, q, **kw):
        return self.append(Instruction("Reset", (q,), **kw))

    def barrier(self, *qubits):
        return self._gate("Barrier", list(qubits))

    # -- queries -------------------------------------------------------
    def measured_clbits(self) -> list[int]:
        """Clbits written by at least one Measure, ascending."""
        return sorted({i.clbit for i in self.instructions if i.kind == "Measure"})

    def has_measurement(self) -> bool:
        return any(i.kind in ("Measure", "Reset") for i in self.instructions)

    def inverse(self) -> "Circuit":
        """Exact inverse of a measurement-free circuit."""
        inv = Circuit(self.num_qubits, self.num_clbits)
        for instr in reversed(self.instructions):
            if not instr.is_unitary_gate:
                raise CircuitError("cannot invert a circuit containing measurement/reset")
            if instr.cond is not None:
                raise CircuitError("cannot invert a conditioned instruction")
            if instr.kind in PARAM_GATES:
                inv._gate(instr.kind, instr.qubits, [-instr.params[0]])
            elif instr.kind == "UnitaryBlock":
                inv.unitary(instr.matrix.conj().T, instr.qubits)
            else:
                inv.append(instr)
        return inv

    def extend(self, other: "Circuit", qubit_offset: int = 0, clbit_offset: int = 0) -> "Circuit":
        """Append another circuit's instructions, shifting indices."""
        for instr in other.instructions:
            shifted = replace(
                instr,
                qubits=tuple(q + qubit_offset for q in instr.qubits),
                clbit=None if instr.clbit is None else instr.clbit + clbit_offset,
                cond=None if instr.cond is None else (instr.cond[0] + clbit_offset, instr.cond[1]),
            )
            self.append(shifted)
        return self

    # -- IR ------------------------------------------------------------
    def to_ir(self) -> dict:
        ops = []
        for i in self.instructions:
            op = {
                "kind": i.kind,
                "qubits": list(i.qubits),
                "params": [float(p) for p in i.params],
                "clbit": i.clbit,
                "cond": None if i.cond is None else {"clbit": i.cond[0], "value": i.cond[1]},
            }
            if i.matrix is not None:
                op["matrix"] = [[[float(z.real), float(z.imag)] for z in row] for row in i.matrix]
            if i.tag is not None:
                op["tag"] = i.tag
            ops.append(op)
        ir = {"qubits": self.num_qubits, "clbits": self.num_clbits, "ops": ops}
        if "gadgets" in self.metadata:
            ir["gadgets"] = self.metadata["gadgets"]
        return ir

    @classmethod
    def from_ir(cls, ir: dict) -> "Circuit":
        try:
            circ = cls(int(ir["qubits"]), int(ir.get("clbits", 0)))
        except KeyError as exc:
            raise CircuitError(f"IR missing field {exc}") from exc
        if "gadgets" in ir:
            circ.metadata["gadgets"] = ir["gadgets"]
        for k, op in enumerate(ir.get("ops", [])):
            try:
                kind = op["kind"]
                cond = op.get("cond")
                matrix = None
                if "matrix" in op:
                    matrix = np.array(
                        [[complex(re, im) for re, im in row] for row in op["matrix"]]
                    )
                circ.append(
                    Instruction(
                        kind,
                        tuple(op["qubits"]),
                        tuple(op.get("params") or ()),
                        clbit=op.get("clbit"),
                        cond=None if cond is None else (cond["clbit"], cond["value"]),
                        matrix=matrix,
                        tag=op.get("tag"),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise CircuitError(f"bad op at index {k}: {exc}") from exc
        return circ

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_ir(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_ir(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json(indent=1))

    @classmethod
    def load(cls, path) -> "Circuit":
        with open(path) as f:
            return cls.from_json(f.read())


# -- gate matrices -----------------------------------------------------
_SQ2 = 1.0 / math.sqrt(2.0)
_MATS = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def gate_matrix(instr: Instruction) -> np.ndarray:
    """Unitary matrix of a gate instruction on its own qubits.

    Qubit order: instr.qubits[0] is the least-significant bit of the
    matrix index, consistent with the global convention.
    """
    k = instr.kind
    if k in _MATS:
        return _MATS[k]
    if k == "P":
        return np.diag([1.0, cmath.exp(1j * instr.params[0])])
    if k == "RX":
        t = instr.params[0] / 2.0
        return np.array([[math.cos(t), -1j * math.sin(t)], [-1j * math.sin(t), math.cos(t)]])
    if k == "RY":
        t = instr.params[0] / 2.0
        return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]], dtype=complex)
    if k == "RZ":
        t = instr.params[0] / 2.0
        return np.diag([cmath.exp(-1j * t), cmath.exp(1j * t)])
    if k in ("CNOT", "CP", "CRY", "CRZ", "MCX"):
        nq = len(instr.qubits)
        dim = 1 << nq
        u = np.eye(dim, dtype=complex)
        if k == "CNOT" or k == "MCX":
            # controls are qubits[:-1] (bits 0..nq-2), target is the last qubit
            ctrl_mask = (1 << (nq - 1)) - 1
            tgt_bit = 1 << (nq - 1)
            for i in range(dim):
                if i & ctrl_mask == ctrl_mask:
                    u[i, i] = 0.0
                    u[i, i ^ tgt_bit] = 1.0
            return u
        sub = gate_matrix(Instruction({"CP": "P", "CRY": "RY", "CRZ": "RZ"}[k], (0,), instr.params))
        u[1::2, 1::2] = 0.0
        u[1, 1], u[1, 3] = sub[0, 0], sub[0, 1]
        u[3, 1], u[3, 3] = sub[1, 0], sub[1, 1]
        return u
    if k == "UnitaryBlock":
        return np.asarray(instr.matrix, dtype=complex)
    raise CircuitError(f"no matrix for kind {k!r}")


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Product of per-instruction unitaries, as a 2^n x 2^n matrix.

    Independent of the simulation kernels; used as the brute-force oracle.
    """
    n = circuit.num_qubits
    dim = 1 << n
    u = np.eye(dim, dtype=complex)
    for instr in circuit.instructions:
        if instr.kind == "Barrier":
            continue
        if not instr.is_unitary_gate or instr.cond is not None:
            raise CircuitError("circuit_unitary requires a measurement-free, uncond. circuit")
        g = gate_matrix(instr)
        u = _embed(g, instr.qubits, n) @ u
    return u


def _embed(g: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Embed a k-qubit matrix into the full n-qubit space."""
    k = len(qubits)
    dim = 1 << n
    full = np.zeros((dim, dim), dtype=complex)
    rest = [q for q in range(n) if q not in qubits]
    for i in range(dim):
        li = sum(((i >> q) & 1) << b for b, q in enumerate(qubits))
        ri = sum(((i >> q) & 1) << b for b, q in enumerate(rest))
        for lj in range(1 << k):
            j = sum(((lj >> b) & 1) << q for b, q in enumerate(qubits))
            j |= sum(((ri >> b) & 1) << q for b, q in enumerate(rest))
            full[j, i] = g[lj, li]
    return full
