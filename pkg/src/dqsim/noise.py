"""Depolarizing noise model, measurement errors, analytic fidelity formulas."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class NoiseDomainError(ValueError):
    """Noise parameters outside the regime a formula is valid for."""


def _check_prob(name: str, value: float) -> float:
    v = float(value)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return v


@dataclass(frozen=True)
class NoiseParams:
    """Error rates for the depolarizing gate/measurement noise model.

    eps_d   single-qubit gate depolarization probability
    eps_g   two-qubit gate depolarization probability
    eps_m   measurement bit-flip probability
    eps_reset  post-reset bit-flip probability (defaults to eps_m)
    t_comm  classical communication time [s], drives decoherence of
            classically conditioned corrections
    T2      qubit coherence time [s]
    """

    eps_d: float = 0.0
    eps_g: float = 0.0
    eps_m: float = 0.0
    eps_reset: Optional[float] = None
    t_comm: float = 0.0
    T2: float = 0.0

    def __post_init__(self):
        _check_prob("eps_d", self.eps_d)
        _check_prob("eps_g", self.eps_g)
        _check_prob("eps_m", self.eps_m)
        if self.eps_reset is not None:
            _check_prob("eps_reset", self.eps_reset)
        if self.t_comm > 0 and self.T2 <= 0:
            raise ValueError("T2 must be positive when t_comm > 0")

    @property
    def reset_error(self) -> float:
        return self.eps_m if self.eps_reset is None else self.eps_reset

    @property
    def eps_comm(self) -> float:
        """Depolarization accumulated while waiting on a classical message."""
        if self.t_comm <= 0:
            return 0.0
        return comm_depolarization(self.t_comm, self.T2)

    def to_dict(self) -> dict:
        return {
            "eps_d": self.eps_d,
            "eps_g": self.eps_g,
            "eps_m": self.eps_m,
            "eps_reset": self.eps_reset,
            "t_comm_s": self.t_comm,
            "T2_s": self.T2,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseParams":
        allowed = {"eps_d", "eps_g", "eps_m", "eps_reset", "t_comm_s", "T2_s"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown noise keys: {sorted(unknown)}")
        return cls(
            eps_d=d.get("eps_d", 0.0),
            eps_g=d.get("eps_g", 0.0),
            eps_m=d.get("eps_m", 0.0),
            eps_reset=d.get("eps_reset"),
            t_comm=d.get("t_comm_s", 0.0),
            T2=d.get("T2_s", 0.0),
        )

    @property
    def is_noiseless(self) -> bool:
        return (
            self.eps_d == 0.0
            and self.eps_g == 0.0
            and self.eps_m == 0.0
            and self.reset_error == 0.0
            and self.eps_comm == 0.0
        )


def depolarize_rho(rho: np.ndarray, qubits: tuple[int, ...], n: int, eps: float) -> np.ndarray:
    """Exact k-qubit depolarizing channel on a density matrix.

    rho -> (1-eps) rho + eps Tr_qubits(rho) (x) I/2^k
    """
    if eps == 0.0:
        return rho
    k = len(qubits)
    dim = 1 << n
    dim_k, dim_r = 1 << k, 1 << (n - k)
    rest = [q for q in range(n) if q not in qubits]
    # move the target qubits to the leading ket/bra axes
    ket = [n - 1 - q for q in qubits] + [n - 1 - q for q in rest]
    perm = ket + [a + n for a in ket]
    t = rho.reshape((2,) * (2 * n)).transpose(perm).reshape(dim_k, dim_r, dim_k, dim_r)
    traced = np.einsum("iaib->ab", t)
    mixed = np.zeros_like(t)
    idx = np.arange(dim_k)
    mixed[idx, :, idx, :] = traced / dim_k
    inv = np.argsort(perm)
    mixed = mixed.reshape((2,) * (2 * n)).transpose(inv).reshape(dim, dim)
    return (1.0 - eps) * rho + eps * mixed


def flip_measurement(bit: int, eps_m: float, rng: np.random.Generator) -> int:
    """Flip a measured bit with probability eps_m."""
    _check_prob("eps_m", eps_m)
    if eps_m > 0 and rng.random() < eps_m:
        return bit ^ 1
    return int(bit)


def analytic_gate_fidelity(n_nonlocal: int, params: NoiseParams) -> float:
    """First-order fidelity after N distributed gates:
    (1 - (eps_d + eps_g + 2 eps_m))^N.
    """
    if n_nonlocal < 0:
        raise ValueError("gate count must be >= 0")
    base = 1.0 - (params.eps_d + params.eps_g + 2.0 * params.eps_m)
    if base < 0.0:
        raise NoiseDomainError(
            f"eps_d + eps_g + 2*eps_m = {1.0 - base:.4g} > 1: outside the "
            "first-order regime of the fidelity approximation"
        )
    return base ** n_nonlocal


def comm_depolarization(t_comm: float, T2: float) -> float:
    """Depolarization probability accrued over a classical message round trip:
    1 - exp(-t/T2).
    """
    if t_comm == 0.0:
        return 0.0
    if T2 <= 0.0:
        raise ValueError("T2 must be positive")
    return 1.0 - math.exp(-t_comm / T2)


def comm_time(distance_m: float, signal_speed_m_per_s: float = 2.0e8) -> float:
    """One-way classical communication time for a given link distance."""
    if signal_speed_m_per_s <= 0:
        raise ValueError("signal speed must be positive")
    return distance_m / signal_speed_m_per_s


def qpe_fidelity_theory(
    n_counting: int, n_ctrl_gates: int, eps_g: float, distributed: bool
) -> float:
    """Approximate phase-estimation fidelity.

    Local (static QFT): (1-eps_g)^(N + n(n-1)/2).
    Distributed with dynamic QFT: (1-eps_g)^(2N).
    """
    if n_counting < 1:
        raise ValueError("need at least one counting qubit")
    if n_ctrl_gates < 0:
        raise ValueError("gate count must be >= 0")
    _check_prob("eps_g", eps_g)
    if distributed:
        exponent = 2 * n_ctrl_gates
    else:
        exponent = n_ctrl_gates + n_counting * (n_counting - 1) // 2
    return (1.0 - eps_g) ** exponent
