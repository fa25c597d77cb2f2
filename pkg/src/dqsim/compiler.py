"""Partition circuits over nodes and rewrite inter-node gates as
teleportation gadgets.

Every two-qubit gate that crosses a node boundary is first lowered to
{1-qubit gates, CNOT}; each crossing CNOT then becomes the teleported-CNOT
gadget: Bell pair on two communication qubits, two local CNOTs, two
measurements, classically conditioned X/Z corrections, and comm-qubit
reset so the pair can be reused by later gadgets.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .circuit import Circuit, CircuitError, Instruction
from . import synth


class NodeMapError(ValueError):
    """Node map does not cover the circuit, or is malformed."""


class UnsupportedGateError(CircuitError):
    """An inter-node gate has no decomposition rule."""


class CommCapacityError(ValueError):
    """Caller-provided communication register or clbits are too small."""


class AlreadyCompiledError(CircuitError):
    """Refusing to wrap gadgets around an already-compiled circuit."""


@dataclass(frozen=True)
class NodeMap:
    """Assignment of data qubits to named nodes."""

    nodes: dict[str, tuple[int, ...]]
    comm_per_node: int = 1
    coupling_p: float = 1.0

    def __post_init__(self):
        seen: dict[int, str] = {}
        for name, qubits in self.nodes.items():
            for q in qubits:
                if q in seen:
                    raise NodeMapError(f"qubit {q} assigned to nodes {seen[q]} and {name}")
                seen[q] = name
        if self.comm_per_node < 1:
            raise NodeMapError("comm_per_node must be >= 1")
        if not 0.0 < self.coupling_p <= 1.0:
            raise NodeMapError("coupling p must lie in (0, 1]")

    @classmethod
    def of(cls, nodes: dict, comm_per_node: int = 1, coupling_p: float = 1.0) -> "NodeMap":
        return cls(
            {str(k): tuple(v) for k, v in nodes.items()},
            comm_per_node,
            coupling_p,
        )

    def node_of(self, qubit: int) -> str:
        for name, qubits in self.nodes.items():
            if qubit in qubits:
                return name
        raise NodeMapError(f"qubit {qubit} not assigned to any node")

    def check_covers(self, circuit: Circuit) -> None:
        assigned = {q for qs in self.nodes.values() for q in qs}
        for instr in circuit.instructions:
            for q in instr.qubits:
                if q not in assigned:
                    raise NodeMapError(f"qubit {q} used by the circuit is not in the node map")

    @classmethod
    def load(cls, path) -> "NodeMap":
        with open(path) as f:
            d = json.load(f)
        unknown = set(d) - {"nodes", "comm_per_node", "coupling_p"}
        if unknown:
            raise NodeMapError(f"unknown node-map keys: {sorted(unknown)}")
        return cls.of(d["nodes"], d.get("comm_per_node", 1), d.get("coupling_p", 1.0))

    def to_dict(self) -> dict:
        return {
            "nodes": {k: list(v) for k, v in self.nodes.items()},
            "comm_per_node": self.comm_per_node,
            "coupling_p": self.coupling_p,
        }


@dataclass
class DistributedCircuit:
    """Result of compiling a monolithic circuit onto a node map."""

    circuit: Circuit
    gate_app: int
    nonlocal_count: int
    gadget_log: list[dict] = field(default_factory=list)
    node_map: Optional[NodeMap] = None
    data_clbits: tuple[int, ...] = ()

    @property
    def coupling_p(self) -> float:
        return self.node_map.coupling_p if self.node_map else 1.0


def _is_global_phase(u: np.ndarray) -> Optional[float]:
    z = u[0, 0]
    if abs(abs(z) - 1.0) < 1e-10 and np.allclose(u, z * np.eye(u.shape[0]), atol=1e-10):
        return float(np.angle(z))
    return None


def _lower_crossing(instr: Instruction, index: int, node_of) -> list[Instruction]:
    """Rewrite one inter-node gate into {1q, CNOT} instructions."""
    if instr.cond is not None:
        raise UnsupportedGateError(
            f"instruction {index}: conditioned multi-qubit gates cannot cross nodes"
        )
    frag = Circuit(max(instr.qubits) + 1)
    kind = instr.kind
    if kind == "CP":
        theta = instr.params[0]
        a, b = instr.qubits
        frag.p(theta / 2.0, a).cx(a, b).p(-theta / 2.0, b).cx(a, b).p(theta / 2.0, b)
    elif kind == "CRY":
        theta = instr.params[0]
        c, t = instr.qubits
        frag.ry(theta / 2.0, t).cx(c, t).ry(-theta / 2.0, t).cx(c, t)
    elif kind == "CRZ":
        theta = instr.params[0]
        c, t = instr.qubits
        frag.rz(theta / 2.0, t).cx(c, t).rz(-theta / 2.0, t).cx(c, t)
    elif kind == "MCX":
        template = synth.decompose_mcx(len(instr.qubits) - 1)
        for sub in template.instructions:
            frag.append(
                Instruction(
                    sub.kind,
                    tuple(instr.qubits[q] for q in sub.qubits),
                    sub.params,
                    matrix=sub.matrix,
                )
            )
    elif kind == "UnitaryBlock":
        _lower_unitary_block(frag, instr, index)
    else:
        raise UnsupportedGateError(f"instruction {index}: no decomposition rule for {kind}")
    return frag.instructions


def _lower_unitary_block(frag: Circuit, instr: Instruction, index: int) -> None:
    u = np.asarray(instr.matrix, dtype=complex)
    phase = _is_global_phase(u)
    if phase is not None:
        if abs(phase) > 1e-12:
            synth.emit_global_phase(frag, phase, instr.qubits[0])
        return
    factors = synth.nearest_kron_factors(u)
    if factors is not None:
        # factors[0] acts on the most-significant qubit
        for f, q in zip(factors, reversed(instr.qubits)):
            synth.emit_1q(frag, f, q)
        return
    cb = synth.controlled_block_structure(u, len(instr.qubits))
    if cb is not None:
        c, v = cb
        ctrl = instr.qubits[c]
        targets = [q for i, q in enumerate(instr.qubits) if i != c]
        vphase = _is_global_phase(v)
        if vphase is not None:
            frag.p(vphase, ctrl)
            return
        if v.shape == (2, 2):
            synth.emit_controlled_1q(frag, v, ctrl, targets[0])
            return
        vf = synth.nearest_kron_factors(v)
        if vf is not None:
            # fold the factorization's residual phase into the first factor
            for f, q in zip(vf, reversed(targets)):
                synth.emit_controlled_1q(frag, f, ctrl, q)
            return
    raise UnsupportedGateError(
        f"instruction {index}: UnitaryBlock on qubits {instr.qubits} is neither "
        "separable nor a controlled product of single-qubit factors"
    )


def _lower(circuit: Circuit, node_of) -> list[tuple[int, Instruction]]:
    """Decompose all inter-node multi-qubit gates; returns (orig index, instr)."""
    out: list[tuple[int, Instruction]] = []
    for idx, instr in enumerate(circuit.instructions):
        if (
            not instr.is_unitary_gate
            or len(instr.qubits) < 2
            or len({node_of(q) for q in instr.qubits}) == 1
        ):
            out.append((idx, instr))
            continue
        if instr.kind == "CNOT":
            out.append((idx, instr))
            continue
        pending = [(idx, low) for low in _lower_crossing(instr, idx, node_of)]
        # decomposition outputs may contain multi-qubit gates again (MCX
        # emits none, but keep the guard honest)
        for sub_idx, sub in pending:
            if (
                sub.is_unitary_gate
                and len(sub.qubits) >= 2
                and sub.kind != "CNOT"
                and len({node_of(q) for q in sub.qubits}) > 1
            ):
                raise UnsupportedGateError(
                    f"instruction {sub_idx}: lowering produced unsupported {sub.kind}"
                )
            out.append((sub_idx, sub))
    return out


def count_nonlocal(circuit: Circuit, nodes: NodeMap) -> int:
    """Inter-node CNOT count after decomposition, without building gadgets."""
    nodes.check_covers(circuit)
    lowered = _lower(circuit, nodes.node_of)
    return sum(
        1
        for _i, ins in lowered
        if ins.kind == "CNOT" and nodes.node_of(ins.qubits[0]) != nodes.node_of(ins.qubits[1])
    )


def _emit_gadget(
    compiled: Circuit,
    qc: int,
    qt: int,
    c_ctrl: int,
    c_tgt: int,
    k1: int,
    k2: int,
) -> None:
    """Teleported CNOT from qc to qt via comm qubits (c_ctrl, c_tgt)."""
    compiled.h(c_ctrl)
    compiled.cx(c_ctrl, c_tgt)
    compiled.cx(qc, c_ctrl)
    compiled.cx(c_tgt, qt)
    compiled.h(c_tgt)
    compiled.measure(c_ctrl, k1)
    compiled.measure(c_tgt, k2)
    compiled.x(qt, cond=(k1, 1), tag="comm")
    compiled.z(qc, cond=(k2, 1), tag="comm")
    compiled.reset(c_ctrl)
    compiled.reset(c_tgt)


def _compile(
    circuit: Circuit,
    nodes: NodeMap,
    comm_pool: Optional[list[int]] = None,
    clbit_pool: Optional[list[int]] = None,
) -> DistributedCircuit:
    if circuit.metadata.get("gadgets") is not None:
        raise AlreadyCompiledError("circuit already contains teleportation gadgets")
    nodes.check_covers(circuit)
    lowered = _lower(circuit, nodes.node_of)
    crossing = [
        (i, ins)
        for i, ins in lowered
        if ins.kind == "CNOT" and nodes.node_of(ins.qubits[0]) != nodes.node_of(ins.qubits[1])
    ]
    n_gadgets = len(crossing)

    auto = comm_pool is None
    if auto:
        # gadgets run sequentially, so a single comm wire pair appended
        # after the data qubits serves every node pair (each node's
        # physical comm qubit maps onto the shared wires while its gadget
        # is live); gadget clbit pairs appended after the original clbits
        comm_of = None
        total_qubits = circuit.num_qubits + (2 if n_gadgets else 0)
        clbits = list(range(circuit.num_clbits, circuit.num_clbits + 2 * n_gadgets))
        total_clbits = circuit.num_clbits + 2 * n_gadgets
    else:
        if clbit_pool is None or len(clbit_pool) < 2 * n_gadgets:
            raise CommCapacityError(
                f"need {2 * n_gadgets} gadget clbits, got "
                f"{0 if clbit_pool is None else len(clbit_pool)}"
            )
        comm_of = {}
        pool = list(comm_pool)
        clbits = list(clbit_pool)
        for g, (_i, ins) in enumerate(crossing):
            for q in ins.qubits:
                name = nodes.node_of(q)
                if name not in comm_of:
                    if not pool:
                        raise CommCapacityError(
                            f"communication register exhausted at gadget {g} "
                            f"(inter-node CNOT on qubits {ins.qubits})"
                        )
                    comm_of[name] = pool.pop(0)
        used = list(comm_of.values()) + list(comm_pool)
        total_qubits = max([circuit.num_qubits - 1] + used) + 1
        total_clbits = max([circuit.num_clbits - 1] + clbits) + 1

    compiled = Circuit(total_qubits, total_clbits)
    compiled.registers = dict(circuit.registers)
    gadget_log: list[dict] = []
    gadget_no = 0
    for idx, instr in lowered:
        if instr.kind == "CNOT":
            qc, qt = instr.qubits
            na, nb = nodes.node_of(qc), nodes.node_of(qt)
            if na != nb:
                if comm_of is None:
                    c_ctrl, c_tgt = circuit.num_qubits, circuit.num_qubits + 1
                else:
                    c_ctrl, c_tgt = comm_of[na], comm_of[nb]
                k1, k2 = clbits[2 * gadget_no], clbits[2 * gadget_no + 1]
                _emit_gadget(compiled, qc, qt, c_ctrl, c_tgt, k1, k2)
                gadget_log.append(
                    {
                        "instruction": idx,
                        "nodes": [na, nb],
                        "comm_qubits": [c_ctrl, c_tgt],
                        "clbits": [k1, k2],
                    }
                )
                gadget_no += 1
                continue
        compiled.append(instr)

    compiled.metadata["gadgets"] = gadget_log
    compiled.metadata["data_clbits"] = list(range(circuit.num_clbits))
    return DistributedCircuit(
        circuit=compiled,
        gate_app=1,
        nonlocal_count=n_gadgets,
        gadget_log=gadget_log,
        node_map=nodes,
        data_clbits=tuple(range(circuit.num_clbits)),
    )


def create_distributed_circuit(circuit: Circuit, nodes: NodeMap) -> DistributedCircuit:
    """Compile with automatically allocated comm qubits and gadget clbits."""
    return _compile(circuit, nodes)


def create_with_comm(
    circuit: Circuit,
    comm_qubits: list[int],
    clbits: list[int],
    nodes: NodeMap,
    coupling_p: Optional[float] = None,
) -> DistributedCircuit:
    """Compile using a caller-provided communication register and clbits."""
    if coupling_p is not None:
        nodes = NodeMap(nodes.nodes, nodes.comm_per_node, coupling_p)
    for q in comm_qubits:
        for name, qs in nodes.nodes.items():
            if q in qs:
                raise NodeMapError(f"comm qubit {q} is also a data qubit of node {name}")
    return _compile(circuit, nodes, comm_pool=list(comm_qubits), clbit_pool=list(clbits))


def split_nodes(num_qubits: int, n_nodes: int, comm_per_node: int = 1, coupling_p: float = 1.0) -> NodeMap:
    """Contiguous, near-equal split of qubits 0..num_qubits-1 over n nodes."""
    if not 1 <= n_nodes <= num_qubits:
        raise NodeMapError("need 1 <= n_nodes <= num_qubits")
    base = num_qubits // n_nodes
    extra = num_qubits % n_nodes
    nodes = {}
    start = 0
    for i in range(n_nodes):
        size = base + (1 if i < extra else 0)
        nodes[str(i + 1)] = tuple(range(start, start + size))
        start += size
    return NodeMap(nodes, comm_per_node, coupling_p)
