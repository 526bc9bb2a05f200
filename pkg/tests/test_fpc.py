import numpy as np
import pytest

from conftest import chisquare_gof_pvalue, counts_of
from greedyvote.errors import DegenerateSampleError, InvalidParameterError
from greedyvote.exact import exact_v_distribution
from greedyvote.fpc import FpcConfig, majority_initial_opinions, mean_opinion, run_fpc
from greedyvote.sampler import GreedySample
from greedyvote.weights import (
    CONSTANT_ONE,
    IDENTITY,
    WeightDistribution,
    ZipfParams,
    sampling_distribution,
    zipf_weights,
)


def _sample(counts: dict) -> GreedySample:
    total = sum(counts.values())
    last = next(u for u, c in counts.items() if c == 1)
    return GreedySample(counts=counts, total_draws=total, distinct=len(counts),
                        last_node=last)


class TestMeanOpinion:
    def test_unanimous_sample(self):
        w = WeightDistribution.from_raw([0.5, 0.3, 0.2])
        sample = _sample({0: 2, 2: 1})
        eta = mean_opinion(sample, [1, 1, 1], CONSTANT_ONE, w)
        assert eta == 1.0

    def test_multiplicity_weighted_average(self):
        w = WeightDistribution.from_raw([0.5, 0.5])
        sample = _sample({0: 2, 1: 1})
        eta = mean_opinion(sample, [1, 0], CONSTANT_ONE, w)
        assert eta == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_identity_weighting_cancels_on_agreement(self):
        sample = _sample({0: 3, 1: 1})
        for raw in ([0.9, 0.1], [0.2, 0.8], [0.5, 0.5]):
            w = WeightDistribution.from_raw(raw)
            eta = mean_opinion(sample, [1, 1], IDENTITY, w)
            assert eta == pytest.approx(1.0, abs=1e-15)

    def test_zero_denominator_raises(self):
        # identity averaging over a sample that consists of zero-weight nodes
        # (reachable only under a non-identity sampling function)
        w = WeightDistribution(np.array([1.0, 0.0]))
        sample = _sample({1: 1})
        with pytest.raises(DegenerateSampleError):
            mean_opinion(sample, [1, 1], IDENTITY, w)


class TestFpcConfig:
    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            FpcConfig(k=0)
        with pytest.raises(InvalidParameterError):
            FpcConfig(k=2, beta=0.6)
        with pytest.raises(InvalidParameterError):
            FpcConfig(k=2, theta=1.5)
        with pytest.raises(InvalidParameterError):
            FpcConfig(k=2, finality_l=0)


class TestRunFpc:
    def test_unanimous_start_finalizes_immediately(self):
        w = zipf_weights(ZipfParams(0.0, 30))
        config = FpcConfig(k=5, finality_l=2)
        trace = run_fpc(config, w, np.ones(30, dtype=int), seed=1)
        assert trace.consensus_round == config.finality_l
        assert trace.final_agreement == 1.0
        assert (trace.opinions_by_round == 1).all()

    def test_unanimous_zero_start(self):
        w = zipf_weights(ZipfParams(0.0, 30))
        config = FpcConfig(k=5, theta=0.5, finality_l=3)
        trace = run_fpc(config, w, np.zeros(30, dtype=int), seed=1)
        assert trace.consensus_round == 3
        assert (trace.opinions_by_round == 0).all()

    def test_degenerate_beta_pins_thresholds(self):
        w = zipf_weights(ZipfParams(0.0, 40))
        config = FpcConfig(k=5, beta=0.5, max_rounds=10, finality_l=100)
        trace = run_fpc(config, w, majority_initial_opinions(40, 0.5), seed=2)
        assert trace.thresholds.size > 0
        assert (trace.thresholds == 0.5).all()

    def test_thresholds_stay_in_band(self):
        w = zipf_weights(ZipfParams(1.0, 25))
        config = FpcConfig(k=5, beta=0.3, max_rounds=12, finality_l=100)
        trace = run_fpc(config, w, majority_initial_opinions(25, 0.5), seed=3)
        assert ((trace.thresholds >= 0.3) & (trace.thresholds <= 0.7)).all()

    def test_opinions_stay_binary(self):
        w = zipf_weights(ZipfParams(1.1, 25))
        config = FpcConfig(k=5, beta=0.4, max_rounds=8, finality_l=100)
        trace = run_fpc(config, w, majority_initial_opinions(25, 0.6), seed=4)
        assert set(np.unique(trace.opinions_by_round)) <= {0, 1}

    def test_majority_consensus_smoke(self):
        # desk-scale version of the acceptance regression pin
        w = zipf_weights(ZipfParams(0.0, 100))
        config = FpcConfig(k=20, theta=0.5, beta=0.3)
        wins = 0
        for seed in range(20):
            trace = run_fpc(config, w, majority_initial_opinions(100, 0.9), seed=seed)
            if trace.consensus_round is not None and trace.opinions_by_round[-1].all():
                wins += 1
        assert wins >= 18

    def test_determinism(self):
        w = zipf_weights(ZipfParams(1.0, 30))
        config = FpcConfig(k=5, beta=0.3)
        initial = majority_initial_opinions(30, 0.7)
        a = run_fpc(config, w, initial, seed=99)
        b = run_fpc(config, w, initial, seed=99)
        assert np.array_equal(a.opinions_by_round, b.opinions_by_round)
        assert np.array_equal(a.thresholds, b.thresholds)
        assert a.consensus_round == b.consensus_round

    def test_sampling_statistics_match_exact_law(self):
        # per-node per-round quorums come from the shared sampler, so their
        # draw counts must follow the exact law
        w = zipf_weights(ZipfParams(0.0, 12))
        config = FpcConfig(k=3, beta=0.4, max_rounds=40, finality_l=999)
        trace = run_fpc(config, w, majority_initial_opinions(12, 0.5), seed=5,
                        record_draws=True)
        draws = trace.draw_counts.ravel().tolist()
        assert len(draws) == 40 * 12
        p = sampling_distribution(w, IDENTITY)
        law = exact_v_distribution(p, 3, 30)
        pval = chisquare_gof_pvalue(counts_of(draws), law.probs, len(draws),
                                    residual=law.residual)
        assert pval > 0.01

    def test_input_validation(self):
        w = zipf_weights(ZipfParams(0.0, 10))
        config = FpcConfig(k=20)
        with pytest.raises(InvalidParameterError):
            run_fpc(config, w, np.ones(10, dtype=int), seed=0)  # k > support
        config2 = FpcConfig(k=2)
        with pytest.raises(InvalidParameterError):
            run_fpc(config2, w, np.full(10, 2), seed=0)  # opinions not binary
        with pytest.raises(InvalidParameterError):
            run_fpc(config2, w, np.ones(9, dtype=int), seed=0)  # wrong length

    def test_max_rounds_cutoff_without_consensus(self):
        w = zipf_weights(ZipfParams(0.0, 20))
        config = FpcConfig(k=3, beta=0.5, max_rounds=2, finality_l=50)
        trace = run_fpc(config, w, majority_initial_opinions(20, 0.5), seed=6)
        assert trace.consensus_round is None
        assert trace.n_rounds == 2
        assert 0.5 <= trace.final_agreement <= 1.0
