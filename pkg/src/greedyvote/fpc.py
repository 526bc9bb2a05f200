"""Single-process simulator of basic fast probabilistic consensus (FPC).

Every round, each node greedy-samples k distinct peers and averages their
binary opinions, weighted by the averaging weight function applied to peer
weights (counting multiplicity).  Round one compares the average against a
fixed threshold; later rounds compare against a uniform random threshold on
[beta, 1 - beta] that is shared by all nodes in that round, which is what
blunts adversarial threshold-gaming.  Rounds are synchronous: all updates in
a round read the previous round's opinions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSampleError, InvalidParameterError
from .weights import CONSTANT_ONE, IDENTITY, WeightDistribution, WeightFunction, sampling_distribution
from .sampler import GreedySample, RngStream, greedy_sample

_THRESHOLD_TAG = 0x7EED  # substream tag for the shared per-round threshold


@dataclass(frozen=True)
class FpcConfig:
    k: int
    theta: float = 0.5
    beta: float = 0.3
    max_rounds: int = 100
    finality_l: int = 2
    scheme_f: WeightFunction = IDENTITY
    scheme_g: WeightFunction = CONSTANT_ONE

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParameterError("quorum size k must be >= 1")
        if not (0.0 <= self.beta <= 0.5):
            raise InvalidParameterError("beta must lie in [0, 0.5]")
        if not (0.0 <= self.theta <= 1.0):
            raise InvalidParameterError("theta must lie in [0, 1]")
        if self.finality_l < 1:
            raise InvalidParameterError("finality_l must be >= 1")
        if self.max_rounds < 1:
            raise InvalidParameterError("max_rounds must be >= 1")


@dataclass(eq=False)
class FpcTrace:
    """Round-by-round record of one protocol run.

    opinions_by_round row 0 holds the initial opinions; row t the state after
    round t.  thresholds holds the realized shared thresholds of rounds
    2, 3, ... (round one uses the fixed first-round threshold instead).
    """

    opinions_by_round: np.ndarray
    thresholds: np.ndarray
    consensus_round: int | None
    final_agreement: float
    draw_counts: np.ndarray | None = None

    @property
    def n_rounds(self) -> int:
        return self.opinions_by_round.shape[0] - 1


def mean_opinion(sample: GreedySample, opinions, g: WeightFunction,
                 weights: WeightDistribution) -> float:
    """Multiplicity-weighted mean opinion of a sampled quorum."""
    nodes = list(sample.counts.keys())
    mult = np.array([sample.counts[u] for u in nodes], dtype=float)
    gm = g.apply(weights.weights[nodes])
    den = float(np.dot(gm, mult))
    if den <= 0.0:
        raise DegenerateSampleError(
            "averaging weight function vanishes on every sampled node"
        )
    s = np.asarray(opinions, dtype=float)[nodes]
    num = float(np.dot(gm * mult, s))
    return num / den


def run_fpc(config: FpcConfig, weights: WeightDistribution, initial_opinions,
            seed, record_draws: bool = False) -> FpcTrace:
    """Run FPC until opinions are unanimous and unchanged for finality_l
    consecutive rounds, or max_rounds is exhausted."""
    opinions = np.asarray(initial_opinions, dtype=np.int8)
    n = weights.size
    if opinions.shape != (n,):
        raise InvalidParameterError(
            f"need one initial opinion per node ({n}), got shape {opinions.shape}"
        )
    if not np.isin(opinions, (0, 1)).all():
        raise InvalidParameterError("opinions must be 0 or 1")
    p = sampling_distribution(weights, config.scheme_f)
    if config.k > p.support_size:
        raise InvalidParameterError(
            f"k={config.k} exceeds the sampleable support ({p.support_size} nodes)"
        )
    rng = _as_stream(seed)

    rows = [opinions.copy()]
    thresholds = []
    draw_counts = [] if record_draws else None
    consensus_round = None
    streak = 0
    streak_value = -1

    for t in range(1, config.max_rounds + 1):
        if t == 1:
            u_t = None
        else:
            u = rng.child(_THRESHOLD_TAG, t).generator.random()
            u_t = config.beta + (1.0 - 2.0 * config.beta) * u
            thresholds.append(u_t)
        new_opinions = np.empty(n, dtype=np.int8)
        round_draws = np.empty(n, dtype=np.int64) if record_draws else None
        for i in range(n):
            sample = greedy_sample(p, config.k, rng.child(t, i))
            if record_draws:
                round_draws[i] = sample.total_draws
            eta = mean_opinion(sample, opinions, config.scheme_g, weights)
            if t == 1:
                new_opinions[i] = 1 if eta >= config.theta else 0
            elif eta > u_t:
                new_opinions[i] = 1
            elif eta < u_t:
                new_opinions[i] = 0
            else:
                new_opinions[i] = opinions[i]
        opinions = new_opinions
        rows.append(opinions.copy())
        if record_draws:
            draw_counts.append(round_draws)

        first = int(opinions[0])
        unanimous = bool((opinions == first).all())
        if unanimous and first == streak_value:
            streak += 1
        elif unanimous:
            streak = 1
            streak_value = first
        else:
            streak = 0
            streak_value = -1
        if streak >= config.finality_l:
            consensus_round = t
            break

    last = rows[-1]
    ones = float(last.mean())
    final_agreement = max(ones, 1.0 - ones)
    return FpcTrace(
        opinions_by_round=np.vstack(rows),
        thresholds=np.asarray(thresholds, dtype=float),
        consensus_round=consensus_round,
        final_agreement=final_agreement,
        draw_counts=np.vstack(draw_counts) if record_draws and draw_counts else None,
    )


def _as_stream(seed) -> RngStream:
    if isinstance(seed, RngStream):
        return seed
    return RngStream(int(seed), 0)


def majority_initial_opinions(n: int, ones_fraction: float) -> np.ndarray:
    """Deterministic initial opinion vector with the given fraction of ones."""
    if not (0.0 <= ones_fraction <= 1.0):
        raise InvalidParameterError("ones_fraction must lie in [0, 1]")
    n_ones = int(round(n * ones_fraction))
    opinions = np.zeros(n, dtype=np.int8)
    opinions[:n_ones] = 1
    return opinions
