"""Gate decompositions into {1-qubit gates, CNOT}.

Everything the compiler and the algorithm builders need to lower
controlled and multi-qubit structure: ZYZ-based controlled single-qubit
gates, gray-code multiplexed rotations, exact diagonal synthesis, and the
multi-controlled X built from them.
"""
from __future__ import annotations

import cmath
import math
from typing import Optional, Sequence

import numpy as np

from .circuit import Circuit, CircuitError, Instruction


class DecompositionError(CircuitError):
    """No decomposition rule applies to the instruction."""


def zyz_angles(u: np.ndarray) -> tuple[float, float, float, float]:
    """Return (alpha, beta, gamma, delta) with
    U = e^{i alpha} RZ(beta) RY(gamma) RZ(delta)."""
    u = np.asarray(u, dtype=complex)
    det = np.linalg.det(u)
    alpha = cmath.phase(det) / 2.0
    su = u * cmath.exp(-1j * alpha)
    gamma = 2.0 * math.atan2(abs(su[1, 0]), abs(su[0, 0]))
    if abs(su[0, 0]) > 1e-12 and abs(su[1, 0]) > 1e-12:
        bpd = 2.0 * cmath.phase(su[1, 1])
        bmd = 2.0 * cmath.phase(su[1, 0])
        beta = (bpd + bmd) / 2.0
        delta = (bpd - bmd) / 2.0
    elif abs(su[0, 0]) > 1e-12:  # diagonal
        beta = 2.0 * cmath.phase(su[1, 1])
        delta = 0.0
    else:  # anti-diagonal
        beta = 2.0 * cmath.phase(su[1, 0])
        delta = 0.0
    return alpha, beta, gamma, delta


def emit_1q(circ: Circuit, u: np.ndarray, q: int) -> None:
    """Append RZ/RY/global-phase gates realizing U exactly on qubit q."""
    alpha, beta, gamma, delta = zyz_angles(u)
    if abs(delta) > 1e-12:
        circ.rz(delta, q)
    if abs(gamma) > 1e-12:
        circ.ry(gamma, q)
    if abs(beta) > 1e-12:
        circ.rz(beta, q)
    if abs(alpha) > 1e-12:
        emit_global_phase(circ, alpha, q)


def emit_global_phase(circ: Circuit, alpha: float, q: int) -> None:
    """Exact global phase e^{i alpha} via P(alpha) X P(alpha) X on one qubit."""
    circ.p(alpha, q).x(q).p(alpha, q).x(q)


def emit_controlled_1q(circ: Circuit, u: np.ndarray, ctrl: int, tgt: int) -> None:
    """Controlled-U, exact.

    U equal to a Pauli up to phase needs a single CNOT (the phase moves
    onto the control); anything else uses the two-CNOT ZYZ / ABC
    construction.
    """
    u = np.asarray(u, dtype=complex)
    tol = 1e-12
    if abs(u[0, 0]) < tol and abs(u[1, 1]) < tol:
        if abs(u[0, 1] - u[1, 0]) < tol:
            # phase * X
            phi = float(np.angle(u[0, 1]))
            if abs(phi) > tol:
                circ.p(phi, ctrl)
            circ.cx(ctrl, tgt)
            return
        if abs(u[0, 1] + u[1, 0]) < tol:
            # phase * Y = phase * S X S^dagger
            phi = float(np.angle(u[1, 0])) - math.pi / 2.0
            if abs(phi) > tol:
                circ.p(phi, ctrl)
            circ.p(-math.pi / 2.0, tgt)
            circ.cx(ctrl, tgt)
            circ.p(math.pi / 2.0, tgt)
            return
    if (
        abs(u[0, 1]) < tol
        and abs(u[1, 0]) < tol
        and abs(u[0, 0] + u[1, 1]) < tol
    ):
        # phase * Z: CZ sandwiched in Hadamards, phase on the control
        phi = float(np.angle(u[0, 0]))
        if abs(phi) > tol:
            circ.p(phi, ctrl)
        circ.h(tgt)
        circ.cx(ctrl, tgt)
        circ.h(tgt)
        return
    alpha, beta, gamma, delta = zyz_angles(u)
    # C = RZ((delta-beta)/2), B = RY(-gamma/2) RZ(-(delta+beta)/2),
    # A = RZ(beta) RY(gamma/2); A X B X C = U (up to e^{i alpha}), A B C = I
    if abs(delta - beta) > 1e-12:
        circ.rz((delta - beta) / 2.0, tgt)
    circ.cx(ctrl, tgt)
    if abs(delta + beta) > 1e-12:
        circ.rz(-(delta + beta) / 2.0, tgt)
    if abs(gamma) > 1e-12:
        circ.ry(-gamma / 2.0, tgt)
    circ.cx(ctrl, tgt)
    if abs(gamma) > 1e-12:
        circ.ry(gamma / 2.0, tgt)
    if abs(beta) > 1e-12:
        circ.rz(beta, tgt)
    if abs(alpha) > 1e-12:
        circ.p(alpha, ctrl)


def gray_code(k: int) -> list[int]:
    return [g ^ (g >> 1) for g in range(1 << k)]


def _multiplexed_angles(angles: Sequence[float]) -> np.ndarray:
    """Solve for rotation angles of the gray-code multiplexor.

    M theta = a with M[x, j] = (-1)^{popcount(x & gray(j))}; the inverse is
    M^T / 2^k because M is a (permuted) Hadamard matrix.
    """
    a = np.asarray(angles, dtype=float)
    k = int(round(math.log2(len(a))))
    g = gray_code(k)
    m = np.array(
        [[(-1) ** bin(x & g[j]).count("1") for j in range(1 << k)] for x in range(1 << k)],
        dtype=float,
    )
    return m.T @ a / (1 << k)


def emit_multiplexed_rotation(
    circ: Circuit,
    kind: str,
    controls: Sequence[int],
    target: int,
    angles: Sequence[float],
) -> None:
    """Rotation on ``target`` whose angle depends on the control pattern.

    angles[x] is applied when the controls (controls[0] = bit 0 of x)
    hold the computational-basis value x.  Gray-code construction: 2^k
    rotations interleaved with 2^k CNOTs.
    """
    if kind not in ("RY", "RZ"):
        raise ValueError("multiplexor supports RY/RZ")
    k = len(controls)
    if len(angles) != 1 << k:
        raise ValueError(f"need 2^{k} angles, got {len(angles)}")
    if k == 0:
        if abs(angles[0]) > 1e-14:
            circ._gate(kind, [target], [angles[0]])
        return
    theta = _multiplexed_angles(angles)
    if np.max(np.abs(theta)) < 1e-14:
        return
    g = gray_code(k)
    for j in range(1 << k):
        if abs(theta[j]) > 1e-14:
            circ._gate(kind, [target], [theta[j]])
        # control whose bit flips between gray(j) and gray(j+1)
        diff = g[j] ^ g[(j + 1) % (1 << k)]
        circ.cx(controls[diff.bit_length() - 1], target)


def emit_diagonal(circ: Circuit, qubits: Sequence[int], phases: Sequence[float]) -> None:
    """Exact diagonal unitary diag(e^{i phases[x]}) over the given qubits.

    phases[x] uses qubits[0] as bit 0 of x.  Peels one multiplexed RZ per
    qubit; CNOT count is 2^m - 2 for m qubits.
    """
    phases = np.asarray(phases, dtype=float)
    m = len(qubits)
    if len(phases) != 1 << m:
        raise ValueError("phase vector length mismatch")
    if m == 0:
        return
    target = qubits[-1]
    controls = qubits[:-1]
    half = 1 << (m - 1)
    # x = (t, c): phases index = t*half + c with qubits[0] = bit 0
    p0 = phases[:half]
    p1 = phases[half:]
    rz = p1 - p0
    emit_multiplexed_rotation(circ, "RZ", controls, target, rz)
    residual = (p0 + p1) / 2.0
    if m == 1:
        if abs(residual[0]) > 1e-14:
            emit_global_phase(circ, float(residual[0]), target)
    else:
        emit_diagonal(circ, controls, residual)


def emit_mcz(circ: Circuit, qubits: Sequence[int]) -> None:
    """Phase -1 on |1...1> over the given qubits."""
    m = len(qubits)
    if m == 1:
        circ.z(qubits[0])
        return
    phases = np.zeros(1 << m)
    phases[-1] = math.pi
    emit_diagonal(circ, qubits, phases)


def decompose_mcx(k: int) -> Circuit:
    """k-controlled X on qubits [0..k-1] (controls) with target k.

    k = 0 is a plain X, k = 1 a single CNOT, k = 2 the 6-CNOT Toffoli;
    k >= 3 uses exact diagonal synthesis with 2^(k+1) - 2 CNOTs, which
    stays within the 20k - 38 budget through k = 5.
    """
    if k < 0:
        raise ValueError("control count must be >= 0")
    circ = Circuit(k + 1)
    if k == 0:
        circ.x(0)
        return circ
    if k == 1:
        circ.cx(0, 1)
        return circ
    circ.h(k)
    emit_mcz(circ, list(range(k + 1)))
    circ.h(k)
    return circ


def count_cnots(circ: Circuit) -> int:
    return sum(1 for i in circ.instructions if i.kind == "CNOT")


# -- matrix structure analysis -------------------------------------------
def nearest_kron_factors(
    u: np.ndarray, atol: float = 1e-9
) -> Optional[list[np.ndarray]]:
    """Factor a 2^k unitary into a tensor product of 1-qubit unitaries.

    Returns factors [A_{k-1}, ..., A_0] with u = A_{k-1} (x) ... (x) A_0
    (qubit 0 least significant), or None if not separable.
    """
    u = np.asarray(u, dtype=complex)
    dim = u.shape[0]
    k = int(round(math.log2(dim)))
    if k == 1:
        return [u]
    # split top qubit (most significant) from the rest
    half = dim // 2
    r = u.reshape(2, half, 2, half).transpose(0, 2, 1, 3).reshape(4, half * half)
    w, s, vh = np.linalg.svd(r)
    if s[1] > atol * s[0]:
        return None
    a = (w[:, 0] * math.sqrt(s[0])).reshape(2, 2)
    b = (vh[0, :] * math.sqrt(s[0])).reshape(half, half)
    # rescale so a is exactly unitary
    norm = math.sqrt(abs((a @ a.conj().T)[0, 0]))
    a = a / norm
    b = b * norm
    if np.max(np.abs(a @ a.conj().T - np.eye(2))) > 1e-8:
        return None
    rest = nearest_kron_factors(b, atol)
    if rest is None:
        return None
    if np.max(np.abs(np.kron(a, b) - u)) > 1e-8:
        return None
    return [a] + rest


def controlled_block_structure(
    u: np.ndarray, nq: int, atol: float = 1e-10
) -> Optional[tuple[int, np.ndarray]]:
    """Detect U = |0><0|_c (x) I + |1><1|_c (x) V for some qubit position c.

    Returns (control bit position, V) or None.  V is indexed by the
    remaining qubits in ascending original order (lowest = bit 0).
    """
    u = np.asarray(u, dtype=complex)
    dim = 1 << nq
    for c in range(nq):
        bit = 1 << c
        rows0 = [i for i in range(dim) if not i & bit]
        rows1 = [i for i in range(dim) if i & bit]
        if not np.allclose(u[np.ix_(rows0, rows0)], np.eye(dim // 2), atol=atol):
            continue
        if np.max(np.abs(u[np.ix_(rows0, rows1)])) > atol:
            continue
        if np.max(np.abs(u[np.ix_(rows1, rows0)])) > atol:
            continue
        return c, u[np.ix_(rows1, rows1)]
    return None


def state_prep_unitary(vec: np.ndarray) -> np.ndarray:
    """Unitary whose first column is the given normalized state."""
    vec = np.asarray(vec, dtype=complex)
    vec = vec / np.linalg.norm(vec)
    dim = len(vec)
    m = np.eye(dim, dtype=complex)
    m[:, 0] = vec
    q, _ = np.linalg.qr(m)
    # QR may flip the first column's phase; undo it
    phase = np.vdot(q[:, 0], vec)
    q[:, 0] *= phase / abs(phase)
    if abs(np.vdot(q[:, 0], vec) - 1.0) > 1e-9:
        # vec was (nearly) dependent with a later column; rebuild from scratch
        rng = np.random.default_rng(12345)
        basis = [vec]
        while len(basis) < dim:
            cand = rng.normal(size=dim) + 1j * rng.normal(size=dim)
            for b in basis:
                cand = cand - np.vdot(b, cand) * b
            n = np.linalg.norm(cand)
            if n > 1e-6:
                basis.append(cand / n)
        q = np.array(basis).T
    return q


def emit_state_prep(circ: Circuit, amplitudes: Sequence[float], qubits: Sequence[int]) -> None:
    """Prepare sum_x amplitudes[x] |x> from |0...0> (amplitudes real, >= 0).

    Binary-tree construction: one multiplexed RY per level, rotating each
    qubit by the arccos of the left/right probability-mass split
    conditioned on the higher qubits.
    """
    a = np.asarray(amplitudes, dtype=float)
    n = len(qubits)
    if len(a) != 1 << n:
        raise ValueError("amplitude vector length mismatch")
    if np.any(a < -1e-12):
        raise ValueError("amplitudes must be nonnegative")
    probs = a * a
    probs = probs / probs.sum()
    # rotate from the most-significant position down; at each level the
    # angle is conditioned on the already-set higher bits (the prefix p,
    # whose bit j is the value at position tgt_pos + 1 + j)
    for level in range(n):
        tgt_pos = n - 1 - level
        block = 1 << tgt_pos
        angles = []
        for p in range(1 << level):
            lo = p * 2 * block
            m_total = probs[lo : lo + 2 * block].sum()
            m_one = probs[lo + block : lo + 2 * block].sum()
            if m_total <= 1e-30:
                angles.append(0.0)
            else:
                ratio = min(1.0, max(0.0, m_one / m_total))
                angles.append(2.0 * math.asin(math.sqrt(ratio)))
        controls = [qubits[tgt_pos + 1 + j] for j in range(level)]
        emit_multiplexed_rotation(circ, "RY", controls, qubits[tgt_pos], angles)
