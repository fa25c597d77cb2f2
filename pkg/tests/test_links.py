"""Entanglement-link trial sampling and resource accounting."""
import numpy as np
import pytest

from dqsim.circuit import Circuit
from dqsim.compiler import NodeMap, create_distributed_circuit
from dqsim.links import (
    LinkError,
    LinkParams,
    LinkStats,
    account_run,
    sample_trials,
    success_prob_multi,
    success_prob_single,
)


class TestSuccessProb:
    def test_reference_values(self):
        assert abs(success_prob_single(0.5, 3) - 0.875) < 1e-15
        assert abs(success_prob_multi(0.5, 1, 2) - 0.75) < 1e-15
        assert success_prob_single(1.0, 1) == 1.0
        assert success_prob_single(0.3, 0) == 0.0

    def test_multi_equals_single_with_km_trials(self):
        """1 - (1-p)^(km) under both call forms."""
        for p in (0.1, 0.37, 0.9):
            for k in (1, 2, 5):
                for m in (1, 2, 4):
                    a = success_prob_multi(p, k, m)
                    b = success_prob_single(p, k * m)
                    assert abs(a - b) < 1e-12

    def test_monotone_in_k_and_m(self):
        probs = [success_prob_single(0.2, k) for k in range(6)]
        assert all(b > a for a, b in zip(probs, probs[1:]))
        probs = [success_prob_multi(0.2, 2, m) for m in range(1, 5)]
        assert all(b > a for a, b in zip(probs, probs[1:]))

    def test_validation(self):
        with pytest.raises(LinkError):
            success_prob_single(-0.1, 1)
        with pytest.raises(LinkError):
            success_prob_single(0.5, -1)
        with pytest.raises(LinkError):
            success_prob_multi(0.5, 1, 0)


class TestLinkParams:
    def test_bounds(self):
        LinkParams(p=1.0)
        with pytest.raises(LinkError):
            LinkParams(p=0.0)
        with pytest.raises(LinkError):
            LinkParams(p=1.2)
        with pytest.raises(LinkError):
            LinkParams(p=0.5, m=0)


class TestSampleTrials:
    def test_geometric_mean(self):
        rng = np.random.default_rng(41)
        for p in (0.2, 0.5, 0.8):
            draws = sample_trials(p, rng, size=100000)
            mean = draws.mean()
            # 5 sigma band around 1/p, geometric std = sqrt(1-p)/p
            sigma = np.sqrt(1.0 - p) / p / np.sqrt(draws.size)
            assert abs(mean - 1.0 / p) < 5 * sigma
            assert draws.min() >= 1

    def test_p_one_deterministic(self):
        rng = np.random.default_rng(0)
        assert sample_trials(1.0, rng) == 1
        assert np.all(sample_trials(1.0, rng, size=100) == 1)

    def test_p_zero_refused(self):
        rng = np.random.default_rng(0)
        with pytest.raises(LinkError):
            sample_trials(0.0, rng)


class TestAccountRun:
    def _dist(self, p=1.0):
        c = Circuit(2)
        c.cx(0, 1).cx(1, 0)
        nodes = NodeMap.of({"1": [0], "2": [1]}, coupling_p=p)
        return create_distributed_circuit(c, nodes)

    def test_perfect_link_exact(self):
        stats = account_run(self._dist(p=1.0), rng=np.random.default_rng(1))
        assert stats.gadget_count == 2
        assert stats.total_trials == 2
        assert stats.trials_per_gadget == [1, 1]
        assert stats.expected_trials == 2.0

    def test_zero_gadget_circuit(self):
        c = Circuit(2)
        c.h(0).cx(0, 1)
        nodes = NodeMap.of({"1": [0, 1]})
        dist = create_distributed_circuit(c, nodes)
        stats = account_run(dist, rng=np.random.default_rng(2))
        assert stats == LinkStats(0, 0, [], 0.0)

    def test_statistical_totals(self):
        dist = self._dist(p=0.5)
        rng = np.random.default_rng(3)
        totals = [account_run(dist, rng=rng).total_trials for _ in range(5000)]
        mean = np.mean(totals)
        # 2 gadgets at p = 0.5: expect 4 trials; 5 sigma band
        sigma = np.sqrt(2 * (1 - 0.5) / 0.5 ** 2 / 5000)
        assert abs(mean - 4.0) < 5 * sigma

    def test_uses_link_params_over_coupling(self):
        stats = account_run(
            self._dist(p=0.25),
            link=LinkParams(p=0.5, m=2),
            rng=np.random.default_rng(4),
        )
        # per-round success 1 - 0.5^2 = 0.75
        assert abs(stats.expected_trials - 2 / 0.75) < 1e-12

    def test_failed_compile_rejected(self):
        dist = self._dist()
        dist.gate_app = 0
        with pytest.raises(LinkError):
            account_run(dist)
