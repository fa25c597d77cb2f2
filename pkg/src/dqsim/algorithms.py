"""Algorithm circuit generators and estimators.

QFT and phase estimation, the amplitude-estimation operator family
(A, S0, S_X, Q), maximum-likelihood amplitude estimation with its
Cramér–Rao benchmark, normal-distribution state loading, and Hellinger
fidelity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import synth
from .circuit import Circuit, CircuitError
from .dynamic import rewrite_terminal_qft


def build_qft(n: int, inverse: bool = False) -> Circuit:
    """QFT on n qubits without terminal swaps.

    Wire j gets CP(pi/2^(j-i)) with every earlier wire i, then H; the
    output therefore carries the transform in bit-reversed order, which
    decode_phase accounts for.  inverse=True returns the exact inverse.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    qc = Circuit(n)
    for j in range(n):
        for i in range(j):
            qc.cp(math.pi / (1 << (j - i)), i, j)
        qc.h(j)
    return qc.inverse() if inverse else qc


def decode_phase(bits: str) -> float:
    """Phase fraction from a measured bitstring, most-significant bit first."""
    if not bits or any(b not in "01" for b in bits):
        raise ValueError("bits must be a nonempty 0/1 string")
    return int(bits, 2) / (1 << len(bits))


@dataclass(frozen=True)
class PhaseResult:
    """Most likely phase readout of a QPE run."""

    bitstring: str
    fraction: float
    probability: float


def phase_result(probabilities: dict[str, float]) -> PhaseResult:
    """Top outcome of a QPE histogram, decoded to a phase fraction."""
    if not probabilities:
        raise ValueError("empty distribution")
    top = max(sorted(probabilities), key=probabilities.get)
    return PhaseResult(top, decode_phase(top), probabilities[top])


def eigenstate_for_eigenvalue(u: np.ndarray, eigenvalue: complex, atol: float = 1e-8) -> np.ndarray:
    """Normalized eigenvector of u for the eigenvalue closest to the target."""
    vals, vecs = np.linalg.eig(np.asarray(u, dtype=complex))
    k = int(np.argmin(np.abs(vals - eigenvalue)))
    if abs(vals[k] - eigenvalue) > atol:
        raise ValueError(f"no eigenvalue near {eigenvalue}; spectrum {vals}")
    v = vecs[:, k]
    return v / np.linalg.norm(v)


def _emit_controlled_power(qc: Circuit, u: np.ndarray, power: int, ctrl: int, system: list[int]) -> None:
    m = np.linalg.matrix_power(u, power)
    z = m[0, 0]
    if abs(abs(z) - 1.0) < 1e-12 and np.allclose(m, z * np.eye(m.shape[0]), atol=1e-12):
        phi = float(np.angle(z))
        if abs(phi) > 1e-12:
            qc.p(phi, ctrl)
        return
    if len(system) == 1:
        synth.emit_controlled_1q(qc, m, ctrl, system[0])
        return
    factors = synth.nearest_kron_factors(m)
    if factors is not None:
        # controlled product of the factors equals the controlled product state
        for f, q in zip(factors, reversed(system)):
            synth.emit_controlled_1q(qc, f, ctrl, q)
        return
    dim = 2 * m.shape[0]
    cu = np.eye(dim, dtype=complex)
    half = m.shape[0]
    # control is the least-significant qubit of the block
    idx = np.arange(half) * 2 + 1
    cu[np.ix_(idx, idx)] = m
    qc.unitary(cu, [ctrl] + system)


def build_qpe(
    u: np.ndarray,
    n_counting: int,
    eigenstate_prep: Optional[Circuit] = None,
    dynamic: bool = False,
) -> Circuit:
    """Phase estimation for the unitary u.

    Counting qubits 0..n-1 (qubit j controls u^(2^j)), system qubits after
    them.  Ends in inverse QFT plus measurement; the inverse QFT leaves
    the phase bits reversed across the wires, so reading qubit j into
    clbit j yields the fraction with its most significant bit first.
    dynamic=True rewrites the
    terminal QFT into its measurement-based form.
    """
    u = np.asarray(u, dtype=complex)
    dim = u.shape[0]
    if u.shape != (dim, dim) or dim & (dim - 1):
        raise ValueError("u must be square with power-of-two dimension")
    if not np.allclose(u @ u.conj().T, np.eye(dim), atol=1e-9):
        raise ValueError("u is not unitary")
    n_sys = dim.bit_length() - 1
    n = n_counting
    if n < 1:
        raise ValueError("need at least one counting qubit")
    qc = Circuit(n + n_sys, n)
    system = list(range(n, n + n_sys))
    if eigenstate_prep is not None:
        if eigenstate_prep.num_qubits != n_sys:
            raise ValueError(
                f"eigenstate_prep acts on {eigenstate_prep.num_qubits} qubits, "
                f"u needs {n_sys}"
            )
        qc.extend(eigenstate_prep, qubit_offset=n)
    for j in range(n):
        qc.h(j)
    for j in range(n):
        _emit_controlled_power(qc, u, 1 << j, j, system)
    qc.extend(build_qft(n, inverse=True))
    for j in range(n):
        qc.measure(j, j)
    if dynamic:
        qc = rewrite_terminal_qft(qc, list(range(n - 1, -1, -1)))
    return qc


def build_A_sin2(n: int, c: float) -> Circuit:
    """Amplitude-loading operator for f(x) = sin^2 on a uniform grid.

    n index qubits plus one ancilla (qubit n); the ancilla hits |1> with
    probability (1/2^n) sum_x sin^2(c (x + 1/2) / 2^n).
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if not 0.0 < c <= math.pi:
        raise ValueError("c must lie in (0, pi]")
    qc = Circuit(n + 1)
    for q in range(n):
        qc.h(q)
    qc.ry(c / (1 << n), n)
    for i in range(n):
        qc.cry(c / (1 << (n - 1 - i)), i, n)
    return qc


def build_grover_Q(a_circuit: Circuit, n: int) -> Circuit:
    """Grover operator Q = -A S0 A^-1 S_X on n index qubits plus ancilla.

    S_X flips the phase of ancilla |1>; S0 flips the phase of the all-zero
    state; the leading -1 is realized exactly so Q matches its defining
    matrix, not just its action on probabilities.
    """
    if a_circuit.has_measurement():
        raise CircuitError("A operator must be measurement-free")
    if a_circuit.num_qubits != n + 1:
        raise CircuitError(f"A acts on {a_circuit.num_qubits} qubits, expected {n + 1}")
    qc = Circuit(n + 1)
    qc.z(n)
    qc.extend(a_circuit.inverse())
    for q in range(n + 1):
        qc.x(q)
    synth.emit_mcz(qc, list(range(n + 1)))
    for q in range(n + 1):
        qc.x(q)
    qc.extend(a_circuit)
    synth.emit_global_phase(qc, math.pi, 0)
    return qc


def grover_power_circuit(a_circuit: Circuit, n: int, m: int, measure: bool = True) -> Circuit:
    """Q^m A |0>, optionally measuring the ancilla into clbit 0."""
    if m < 0:
        raise ValueError("m must be >= 0")
    qc = Circuit(n + 1, 1 if measure else 0)
    qc.extend(a_circuit)
    q_op = build_grover_Q(a_circuit, n)
    for _ in range(m):
        qc.extend(q_op)
    if measure:
        qc.measure(n, 0)
    return qc


@dataclass(frozen=True)
class MlaeSchedule:
    """Grover powers and per-power shot counts."""

    powers: tuple[int, ...]
    shots: tuple[int, ...]

    def __post_init__(self):
        if len(self.powers) != len(self.shots) or not self.powers:
            raise ValueError("powers and shots must be nonempty and equal-length")
        if any(s < 1 for s in self.shots):
            raise ValueError("shot counts must be >= 1")
        if any(b <= a for a, b in zip(self.powers, self.powers[1:])):
            raise ValueError("powers must be strictly increasing")
        if self.powers[0] < 0:
            raise ValueError("powers must be >= 0")

    @classmethod
    def exponential(cls, n_levels: int, shots_per_level: int) -> "MlaeSchedule":
        """Powers 0, 1, 2, 4, ..., 2^(n_levels-2)."""
        powers = [0] + [1 << j for j in range(n_levels - 1)]
        return cls(tuple(powers), (shots_per_level,) * n_levels)


@dataclass(frozen=True)
class MlaeResult:
    a_hat: float
    theta_hat: float
    cramer_rao_bound: float
    fisher_information: float
    multimodal: bool
    log_likelihood: float


def _log_likelihood(theta: np.ndarray, hits, schedule: MlaeSchedule) -> np.ndarray:
    ll = np.zeros_like(theta)
    for h, m, nshots in zip(hits, schedule.powers, schedule.shots):
        s2 = np.clip(np.sin((2 * m + 1) * theta) ** 2, 1e-300, 1.0)
        c2 = np.clip(np.cos((2 * m + 1) * theta) ** 2, 1e-300, 1.0)
        ll = ll + h * np.log(s2) + (nshots - h) * np.log(c2)
    return ll


def mlae_estimate(hits: Sequence[int], schedule: MlaeSchedule) -> MlaeResult:
    """Maximum-likelihood amplitude estimate from per-power hit counts.

    Dense grid of 10^4 points over [0, pi/2] followed by local refinement
    to 1e-10; ties resolved toward the smallest theta and flagged as
    multimodal.  The Cramér–Rao bound is the standard-deviation floor on
    a = sin^2(theta) from the Fisher information
    I(theta) = sum_j 4 N_j (2 m_j + 1)^2.
    """
    hits = [int(h) for h in hits]
    if len(hits) != len(schedule.powers):
        raise ValueError("one hit count per schedule entry")
    for h, nshots in zip(hits, schedule.shots):
        if not 0 <= h <= nshots:
            raise ValueError(f"hits {h} outside [0, {nshots}]")

    grid = np.linspace(0.0, math.pi / 2, 10_000)
    ll = _log_likelihood(grid, hits, schedule)
    best = float(ll.max())
    near = np.nonzero(ll >= best - 1e-9 * max(1.0, abs(best)))[0]
    multimodal = bool(np.any(np.diff(near) > 1))
    k = int(near[0])

    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    while hi - lo > 1e-10:
        sub = np.linspace(lo, hi, 33)
        subll = _log_likelihood(sub, hits, schedule)
        j = int(np.argmax(subll))
        lo = sub[max(j - 1, 0)]
        hi = sub[min(j + 1, sub.size - 1)]
    theta_hat = 0.5 * (lo + hi)
    a_hat = math.sin(theta_hat) ** 2

    fisher = sum(4.0 * nshots * (2 * m + 1) ** 2 for m, nshots in zip(schedule.powers, schedule.shots))
    cr = abs(math.sin(2.0 * theta_hat)) / math.sqrt(fisher)
    return MlaeResult(
        a_hat=a_hat,
        theta_hat=theta_hat,
        cramer_rao_bound=cr,
        fisher_information=fisher,
        multimodal=multimodal,
        log_likelihood=float(_log_likelihood(np.array([theta_hat]), hits, schedule)[0]),
    )


def normal_probabilities(n: int, mu: float, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Sampled normal density on 2^n points over [mu - 3 sigma, mu + 3 sigma].

    Returns (grid, probabilities); probabilities normalized to sum to 1.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.linspace(mu - 3.0 * sigma, mu + 3.0 * sigma, 1 << n)
    w = np.exp(-((x - mu) ** 2) / sigma**2)
    return x, w / w.sum()


def load_normal_distribution(n: int, mu: float, sigma: float) -> Circuit:
    """State-preparation circuit with |amplitude_x|^2 the sampled normal."""
    _, p = normal_probabilities(n, mu, sigma)
    qc = Circuit(n)
    synth.emit_state_prep(qc, np.sqrt(p), list(range(n)))
    return qc


def hellinger_fidelity(p: Sequence[float], q: Sequence[float]) -> float:
    """(sum_i sqrt(p_i q_i))^2 for two distributions of equal length."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("distributions must be 1-d and equal-length")
    if (p < 0).any() or (q < 0).any():
        raise ValueError("probabilities must be nonnegative")
    for name, v in (("p", p), ("q", q)):
        if abs(v.sum() - 1.0) > 1e-6:
            raise ValueError(f"{name} sums to {v.sum():.8f}, not 1")
    p = p / p.sum()
    q = q / q.sum()
    return float(np.sqrt(p * q).sum() ** 2)


def expectation_from_uniform(f_values: Sequence[float]) -> float:
    """Classical reference E[f] = (1/2^n) sum f(x_i) for bounded f."""
    f = np.asarray(f_values, dtype=float)
    if f.ndim != 1 or f.size == 0 or f.size & (f.size - 1):
        raise ValueError("need 2^n function samples")
    if (f < 0).any() or (f > 1).any():
        raise ValueError("f must take values in [0, 1]")
    return float(f.mean())
