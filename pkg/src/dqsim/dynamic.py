"""Dynamic-circuit rewrite of terminal QFT blocks.

A QFT immediately followed by measurement of every QFT qubit admits a
measurement-based form: measure the wires one at a time and replace each
controlled phase with a classically conditioned phase on the not yet
measured wire.  The rewritten block contains zero two-qubit gates; the
conditioned phases are tagged as classical-communication driven so the
noise model charges them the feed-forward decoherence.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

from .circuit import Circuit, CircuitError, Instruction


class RewriteRefusedError(CircuitError):
    """The designated qubits do not end in a recognizable QFT + measure block."""


def build_dynamic_qft(
    n: int,
    clbits: Optional[Sequence[int]] = None,
    angle_sign: int = -1,
) -> Circuit:
    """Measurement-based QFT on n qubits.

    Wire j receives, in order, one conditioned phase P(sign*pi/2^(j-i))
    for every earlier wire i (condition: wire i measured 1), then H, then
    Measure.  No two-qubit gates are emitted.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if angle_sign not in (-1, 1):
        raise ValueError("angle_sign must be -1 or +1")
    if clbits is None:
        clbits = list(range(n))
    if len(clbits) != n:
        raise ValueError("need one clbit per qubit")
    qc = Circuit(n, max(clbits) + 1)
    _emit_dynamic_block(qc, list(range(n)), list(clbits), angle_sign)
    return qc


def _emit_dynamic_block(qc: Circuit, qubits, clbits, angle_sign: int) -> None:
    n = len(qubits)
    for j in range(n):
        for i in range(j):
            qc.p(
                angle_sign * math.pi / (1 << (j - i)),
                qubits[j],
                cond=(clbits[i], 1),
                tag="comm",
            )
        qc.h(qubits[j])
        qc.measure(qubits[j], clbits[j])


def _match_qft_block(
    instructions: list[Instruction],
    start: int,
    qubits: list[int],
) -> tuple[int, dict[int, int]]:
    """Check instructions[start:] restricted to `qubits` form QFT + measure.

    Returns (angle_sign, clbit-per-role map).  Raises RewriteRefusedError
    with a diagnostic otherwise.
    """
    n = len(qubits)
    role = {q: j for j, q in enumerate(qubits)}
    qset = set(qubits)
    per_wire: dict[int, list[Instruction]] = {j: [] for j in range(n)}
    for idx in range(start, len(instructions)):
        instr = instructions[idx]
        touched = [q for q in instr.qubits if q in qset]
        if not touched:
            if instr.cond is not None or instr.kind == "Measure":
                # cannot safely move the QFT block past classical traffic
                raise RewriteRefusedError(
                    f"instruction {idx} ({instr.kind}) uses classical bits "
                    "inside the candidate block"
                )
            continue
        if instr.kind == "H" and len(touched) == 1:
            per_wire[role[touched[0]]].append(instr)
        elif instr.kind == "CP" and len(touched) == 2:
            per_wire[role[touched[0]]].append(instr)
            per_wire[role[touched[1]]].append(instr)
        elif instr.kind == "Measure":
            per_wire[role[touched[0]]].append(instr)
        else:
            raise RewriteRefusedError(
                f"instruction {idx} ({instr.kind}) on the QFT qubits is not "
                "part of a QFT + measure pattern"
            )
        if instr.cond is not None:
            raise RewriteRefusedError(f"instruction {idx} is classically conditioned")

    sign = 0
    clbit_of: dict[int, int] = {}
    for j in range(n):
        ops = per_wire[j]
        if not ops or ops[-1].kind != "Measure":
            raise RewriteRefusedError(f"wire {qubits[j]} is not measured last")
        clbit_of[j] = ops[-1].clbit
        body = ops[:-1]
        h_pos = [k for k, op in enumerate(body) if op.kind == "H"]
        if len(h_pos) != 1:
            raise RewriteRefusedError(f"wire {qubits[j]} needs exactly one H, found {len(h_pos)}")
        h = h_pos[0]
        # controlled phases with earlier wires sit before H, later wires after
        seen = set()
        for k, op in enumerate(body):
            if op.kind != "CP":
                continue
            a, b = (role[q] for q in op.qubits)
            lo, hi = min(a, b), max(a, b)
            other = a + b - j
            if other == j or other in seen:
                raise RewriteRefusedError(f"unexpected CP pairing on wire {qubits[j]}")
            seen.add(other)
            if (k < h) != (other < j):
                raise RewriteRefusedError(
                    f"CP between wires {qubits[lo]} and {qubits[hi]} is on the "
                    "wrong side of H for a QFT"
                )
            want = math.pi / (1 << (hi - lo))
            theta = op.params[0]
            if abs(abs(theta) - want) > 1e-9:
                raise RewriteRefusedError(
                    f"CP angle {theta} does not match the QFT template ({want})"
                )
            s = 1 if theta > 0 else -1
            if sign == 0:
                sign = s
            elif sign != s:
                raise RewriteRefusedError("mixed phase signs in candidate QFT block")
        if len(seen) != n - 1:
            raise RewriteRefusedError(
                f"wire {qubits[j]} has {len(seen)} controlled phases, expected {n - 1}"
            )
    return (sign if sign else -1), clbit_of


def rewrite_terminal_qft(circuit: Circuit, qft_qubits: Sequence[int]) -> Circuit:
    """Replace a terminal QFT-then-measure block on the given qubits by its
    dynamic form.  Other instructions are kept verbatim.  Raises
    RewriteRefusedError (input untouched) if the pattern is absent.
    """
    qubits = list(qft_qubits)
    if len(set(qubits)) != len(qubits) or not qubits:
        raise ValueError("qft_qubits must be a nonempty list of distinct qubits")
    qset = set(qubits)
    instrs = circuit.instructions
    # block start: first instruction of the trailing run that touches the
    # QFT qubits only through the pattern
    starts = []
    for idx in range(len(instrs) - 1, -1, -1):
        instr = instrs[idx]
        if any(q in qset for q in instr.qubits):
            if instr.kind in ("H", "CP", "Measure"):
                starts.append(idx)
            else:
                break
    if not starts:
        raise RewriteRefusedError("no QFT + measure block found on the designated qubits")
    # earliest start first; a leading stray gate just shifts the block later
    sign = clbit_of = None
    last_err: Optional[RewriteRefusedError] = None
    for start in reversed(starts):
        try:
            sign, clbit_of = _match_qft_block(instrs, start, qubits)
            break
        except RewriteRefusedError as err:
            last_err = err
    else:
        raise last_err if last_err is not None else RewriteRefusedError("no match")

    out = Circuit(circuit.num_qubits, circuit.num_clbits)
    out.registers = dict(circuit.registers)
    out.metadata = dict(circuit.metadata)
    for idx, instr in enumerate(instrs):
        if idx >= start and any(q in qset for q in instr.qubits):
            continue
        out.append(instr)
    _emit_dynamic_block(out, qubits, [clbit_of[j] for j in range(len(qubits))], sign)
    return out
