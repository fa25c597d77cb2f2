"""Top-level simulation entry points: run circuits, collect histograms."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import density as _density
from .circuit import Circuit
from .noise import NoiseParams
from .statevector import (
    CapacityError,
    TrajectoryRunner,
    exact_branch_distribution,
    statevector,
)

__all__ = [
    "Histogram",
    "run",
    "statevector",
    "exact_branch_distribution",
    "CapacityError",
]

#: density-branch count above which density-backend sampling is refused
_MAX_DENSITY_BRANCHES = 1 << 14


@dataclass
class Histogram:
    """Outcome counts keyed by bitstring (clbit 0 leftmost)."""

    counts: dict[str, int] = field(default_factory=dict)
    shots: int = 0
    clbits: tuple[int, ...] = ()

    @classmethod
    def from_records(cls, records: np.ndarray, clbits: Iterable[int]) -> "Histogram":
        clbits = tuple(sorted(clbits))
        shots = records.shape[1]
        if not clbits:
            return cls({"": shots} if shots else {}, shots, ())
        sel = records[list(clbits), :]
        weights = (1 << np.arange(len(clbits)))[:, None]
        codes = (sel.astype(np.int64) * weights).sum(axis=0)
        counts: dict[str, int] = {}
        uniq, cnt = np.unique(codes, return_counts=True)
        for code, c in zip(uniq, cnt):
            key = "".join(str((int(code) >> i) & 1) for i in range(len(clbits)))
            counts[key] = int(c)
        return cls(counts, shots, clbits)

    def probabilities(self) -> dict[str, float]:
        return {k: v / self.shots for k, v in self.counts.items()}

    def marginal(self, clbits: Iterable[int]) -> "Histogram":
        """Marginalize onto a subset of the recorded clbits."""
        keep = sorted(clbits)
        pos = {c: i for i, c in enumerate(self.clbits)}
        missing = [c for c in keep if c not in pos]
        if missing:
            raise KeyError(f"clbits {missing} not present in histogram")
        counts: dict[str, int] = {}
        for key, c in self.counts.items():
            sub = "".join(key[pos[b]] for b in keep)
            counts[sub] = counts.get(sub, 0) + c
        return Histogram(counts, self.shots, tuple(keep))

    def to_dict(self) -> dict:
        return {"shots": self.shots, "clbits": list(self.clbits), "counts": self.counts}


def total_variation(p: dict[str, float], q: dict[str, float]) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def run(
    circuit: Circuit,
    shots: int,
    noise: Optional[NoiseParams] = None,
    seed: Optional[int] = None,
    backend: str = "statevector",
    dtype=np.complex128,
) -> Histogram:
    """Execute a circuit for the given number of shots.

    backend="statevector": per-shot stochastic trajectories with Pauli-twirl
    noise injection.  backend="density": exact channel evolution with
    measurement-branch enumeration, then sampling; limited to small
    circuits.  Identical (circuit, noise, seed) give identical histograms.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    measured = circuit.measured_clbits()
    if backend == "statevector":
        runner = TrajectoryRunner()
        records = runner.run(circuit, shots, noise, seed, dtype=dtype)
        return Histogram.from_records(records, measured)
    if backend == "density":
        dist = _density.exact_distribution(circuit, noise)
        if len(dist) > _MAX_DENSITY_BRANCHES:
            raise CapacityError("too many measurement branches for density sampling")
        rng = np.random.default_rng(seed)
        keys = sorted(dist)
        probs = np.array([dist[k] for k in keys])
        probs = probs / probs.sum()
        draws = rng.multinomial(shots, probs)
        return Histogram(
            {k: int(c) for k, c in zip(keys, draws) if c},
            shots,
            tuple(measured),
        )
    raise ValueError(f"unknown backend {backend!r}")
