"""Entanglement-link resource accounting.

Each teleportation gadget consumes one Bell pair.  A single generation
trial succeeds with probability p, so the number of trials until the
first success is geometric with mean 1/p.  With m communication qubit
pairs attempted in parallel the per-round success probability becomes
P_s = 1 - (1 - p)^m.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .compiler import DistributedCircuit


class LinkError(ValueError):
    """Invalid link parameters."""


@dataclass(frozen=True)
class LinkParams:
    """Physical parameters of the entanglement link."""

    p: float
    m: int = 1

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise LinkError("channel efficiency p must lie in (0, 1]")
        if self.m < 1:
            raise LinkError("parallel pair count m must be >= 1")


def success_prob_single(p: float, k: int) -> float:
    """Probability that at least one of k single-pair trials succeeds."""
    if not 0.0 <= p <= 1.0:
        raise LinkError("p must lie in [0, 1]")
    if k < 0:
        raise LinkError("k must be >= 0")
    return 1.0 - (1.0 - p) ** k


def success_prob_multi(p: float, k: int, m: int) -> float:
    """Success probability of k trials on each of m parallel pairs."""
    if m < 1:
        raise LinkError("m must be >= 1")
    return success_prob_single(p, k * m)


def sample_trials(
    p: float,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> Union[int, np.ndarray]:
    """Trials until the first successful entanglement generation.

    Geometric: P(k) = (1-p)^(k-1) p, mean 1/p.  Returns an int, or an
    array of draws when size is given.
    """
    if not 0.0 <= p <= 1.0:
        raise LinkError("p must lie in [0, 1]")
    if p == 0.0:
        raise LinkError("p = 0 never succeeds; refusing to sample")
    if size is None:
        return 1 if p >= 1.0 else int(rng.geometric(p))
    if size < 0:
        raise LinkError("size must be >= 0")
    if p >= 1.0:
        return np.ones(size, dtype=np.int64)
    return rng.geometric(p, size=size).astype(np.int64)


@dataclass
class LinkStats:
    """Entanglement generation totals for one run."""

    total_trials: int = 0
    gadget_count: int = 0
    trials_per_gadget: list[int] = field(default_factory=list)
    expected_trials: float = 0.0

    def to_dict(self) -> dict:
        return {
            "total_trials": self.total_trials,
            "gadget_count": self.gadget_count,
            "trials_per_gadget": list(self.trials_per_gadget),
            "expected_trials": self.expected_trials,
        }


def account_run(
    dist: DistributedCircuit,
    link: Optional[LinkParams] = None,
    rng: Optional[np.random.Generator] = None,
) -> LinkStats:
    """Draw trial counts for every gadget of a compiled circuit, in program
    order, and return the cumulative totals (one Bell pair per gadget)."""
    if dist.gate_app != 1:
        raise LinkError("cannot account a circuit that failed to compile (gate_app = 0)")
    if link is None:
        link = LinkParams(p=dist.coupling_p)
    if rng is None:
        rng = np.random.default_rng()
    n = dist.nonlocal_count
    p_round = success_prob_single(link.p, link.m)
    draws = (
        np.zeros(0, dtype=np.int64) if n == 0 else np.asarray(sample_trials(p_round, rng, size=n))
    )
    return LinkStats(
        total_trials=int(draws.sum()),
        gadget_count=n,
        trials_per_gadget=[int(x) for x in draws],
        expected_trials=n / p_round,
    )
