"""Greedy sampling (with replacement until k distinct nodes) and its coupled
pre/post-split variant.

Draws come from an alias table (O(1) per draw after an O(N) build, cached per
distribution) fed by counter-based Philox streams, so identical
(seed, stream_id) inputs replay bit-identical sequences regardless of thread
scheduling.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidParameterError, UnsupportedConfigurationError
from .weights import SamplingDistribution, SplitSpec

_MASK64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    # splitmix64 finalizer; used only to derive well-separated stream ids
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


@dataclass(eq=False)
class RngStream:
    """A named, reproducible random stream.

    The (seed, stream_id) pair keys a Philox counter-based generator, so the
    stream replays exactly across processes and is independent of how many
    worker threads consume sibling streams.  The stream is stateful: repeated
    draws continue the same sequence.
    """

    seed: int
    stream_id: int = 0

    @cached_property
    def generator(self) -> np.random.Generator:
        key = [self.seed & _MASK64, self.stream_id & _MASK64]
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, *indices: int) -> "RngStream":
        """Derive an independent substream; deterministic in the indices."""
        sid = self.stream_id & _MASK64
        for i in indices:
            sid = _mix64(sid ^ _mix64(int(i) & _MASK64))
        return RngStream(self.seed, sid)


class AliasTable:
    """Vose alias table over a fixed probability vector."""

    def __init__(self, probs: np.ndarray):
        n = int(probs.size)
        scaled = (np.asarray(probs, dtype=float) * n).tolist()
        prob = [0.0] * n
        alias = [0] * n
        small = [i for i, sp in enumerate(scaled) if sp < 1.0]
        large = [i for i, sp in enumerate(scaled) if sp >= 1.0]
        while small and large:
            l = small.pop()
            g = large.pop()
            prob[l] = scaled[l]
            alias[l] = g
            scaled[g] = (scaled[g] + scaled[l]) - 1.0
            (small if scaled[g] < 1.0 else large).append(g)
        for leftover in (small, large):
            while leftover:
                g = leftover.pop()
                prob[g] = 1.0
                alias[g] = g
        self.size = n
        self.prob = np.asarray(prob)
        self.alias = np.asarray(alias, dtype=np.int64)

    def draw_batch(self, gen: np.random.Generator, n: int) -> list:
        idx = gen.integers(0, self.size, n)
        accept = gen.random(n) < self.prob[idx]
        return np.where(accept, idx, self.alias[idx]).tolist()


def _alias_table(p: SamplingDistribution) -> AliasTable:
    table = p.__dict__.get("_alias_table")
    if table is None:
        table = AliasTable(p.probs)
        p.__dict__["_alias_table"] = table
    return table


# ---------------------------------------------------------------------------
# sample records
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class GreedySample:
    """Outcome of one greedy sampling run.

    counts maps node index -> number of occurrences among the total_draws
    draws; exactly ``distinct`` nodes appear and the run stops the moment the
    last of them is first drawn, so that node's count is always 1.
    """

    counts: dict
    total_draws: int
    distinct: int
    last_node: int

    def validate(self):
        if sum(self.counts.values()) != self.total_draws:
            raise AssertionError("counts do not add up to total_draws")
        if len(self.counts) != self.distinct:
            raise AssertionError("distinct node count mismatch")
        if not (self.total_draws >= self.distinct >= 1):
            raise AssertionError("need total_draws >= distinct >= 1")
        if self.counts.get(self.last_node) != 1:
            raise AssertionError("final node must be drawn exactly once")


@dataclass(eq=False)
class CoupledSample:
    """Paired greedy samples sharing one draw stream, before and after a split.

    extra_draws counts the draws the pre-split run needed after the post-split
    run had already finished; extra_split_hits counts how many of those extra
    draws hit the split node.  Both are tallied during the run, independently
    of the identities they must satisfy.
    """

    pre: GreedySample
    post: GreedySample
    extra_draws: int
    extra_split_hits: int
    split_node: int
    part_indices: tuple

    @property
    def K(self) -> int:
        return self.extra_draws

    @property
    def L(self) -> int:
        return self.extra_split_hits

    def _post_index(self, pre_index: int) -> int:
        r = len(self.part_indices)
        return pre_index if pre_index < self.split_node else pre_index + r - 1

    def validate(self):
        self.pre.validate()
        self.post.validate()
        if not (0 <= self.extra_split_hits <= self.extra_draws):
            raise AssertionError("need 0 <= L <= K")
        if self.pre.total_draws != self.post.total_draws + self.extra_draws:
            raise AssertionError("v_pre must equal v_post + K")
        y_pre = self.pre.counts.get(self.split_node, 0)
        y_post = sum(self.post.counts.get(j, 0) for j in self.part_indices)
        if y_pre != y_post + self.extra_split_hits:
            raise AssertionError("split-node occurrences must satisfy Y_pre = Y_post + L")
        for u, c in self.pre.counts.items():
            if u == self.split_node:
                continue
            if c < self.post.counts.get(self._post_index(u), 0):
                raise AssertionError(f"non-split node {u} gained occurrences post-split")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def draw_one(p: SamplingDistribution, rng: RngStream) -> int:
    """Draw a single node index with probability p_i."""
    table = _alias_table(p)
    gen = rng.generator
    i = int(gen.integers(0, table.size))
    if gen.random() < table.prob[i]:
        return i
    return int(table.alias[i])


def greedy_sample(p: SamplingDistribution, k: int, rng: RngStream) -> GreedySample:
    """Sample with replacement until k distinct nodes have been seen."""
    k = int(k)
    if k < 1:
        raise InvalidParameterError("k must be >= 1")
    if k > p.support_size:
        raise InvalidParameterError(
            f"k={k} exceeds support size {p.support_size}; sampling would never terminate"
        )
    table = _alias_table(p)
    gen = rng.generator
    counts: dict = {}
    seen = 0
    draws = 0
    batch = k + 16
    buf: list = []
    pos = 0
    while True:
        if pos == len(buf):
            buf = table.draw_batch(gen, batch)
            pos = 0
            batch = min(2 * batch, 4096)
        a = buf[pos]
        pos += 1
        draws += 1
        c = counts.get(a)
        if c is None:
            counts[a] = 1
            seen += 1
            if seen == k:
                return GreedySample(counts=counts, total_draws=draws,
                                    distinct=k, last_node=a)
        else:
            counts[a] = c + 1


def split_probs(p: SamplingDistribution, split: SplitSpec) -> SamplingDistribution:
    """Post-split sampling distribution under the identity weight function.

    Only for f = identity do the pre- and post-split normalizers coincide, so
    the split node's probability simply spreads over the parts as p_i * x_j.
    """
    if p.source_f != "identity":
        raise UnsupportedConfigurationError(
            "splitting sampling probabilities in place requires the identity "
            f"weight function, got {p.source_f}"
        )
    if not (0 <= split.node < p.size):
        raise InvalidParameterError(
            f"split node {split.node} out of range for {p.size} nodes"
        )
    p_i = float(p.probs[split.node])
    if p_i <= 0.0:
        raise InvalidParameterError("cannot split a zero-probability node")
    parts = p_i * split.fractions
    post = np.concatenate([p.probs[:split.node], parts, p.probs[split.node + 1:]])
    return SamplingDistribution(post, source_f="identity")


def coupled_greedy_sample(p: SamplingDistribution, split: SplitSpec, k: int,
                          rng: RngStream) -> CoupledSample:
    """Run the pre- and post-split greedy samples off one shared draw stream.

    Every draw from the original distribution feeds both runs; a draw of the
    split node is forwarded to the post-split run as one of its parts, chosen
    with the split fractions.  The post-split run never needs more draws, so
    it stops first and the remaining draws are tallied as extra_draws /
    extra_split_hits.
    """
    if p.source_f != "identity":
        raise UnsupportedConfigurationError(
            "coupled sampling requires the identity weight function "
            f"(got {p.source_f}); use independent estimation instead"
        )
    k = int(k)
    if k < 1:
        raise InvalidParameterError("k must be >= 1")
    if k > p.support_size:
        raise InvalidParameterError(
            f"k={k} exceeds the pre-split support size {p.support_size}; "
            "the pre-split run would never terminate"
        )
    if not (0 <= split.node < p.size):
        raise InvalidParameterError(
            f"split node {split.node} out of range for {p.size} nodes"
        )
    node = split.node
    if float(p.probs[node]) <= 0.0:
        raise InvalidParameterError("cannot split a zero-probability node")

    r = split.r
    cum = np.cumsum(split.fractions).tolist()
    cum[-1] = 1.0  # guard against rounding shortfall on the last part
    table = _alias_table(p)
    gen = rng.generator

    pre_counts: dict = {}
    post_counts: dict = {}
    pre_seen = post_seen = 0
    v_pre = v_post = 0
    post_done = False
    post_last = -1
    extra_draws = 0
    extra_hits = 0
    batch = k + 16
    buf: list = []
    pos = 0
    while True:
        if pos == len(buf):
            buf = table.draw_batch(gen, batch)
            pos = 0
            batch = min(2 * batch, 4096)
        a = buf[pos]
        pos += 1

        v_pre += 1
        c = pre_counts.get(a)
        if c is None:
            pre_counts[a] = 1
            pre_seen += 1
        else:
            pre_counts[a] = c + 1

        if not post_done:
            if a == node:
                b = node + bisect_right(cum, gen.random())
            elif a > node:
                b = a + r - 1
            else:
                b = a
            v_post += 1
            c = post_counts.get(b)
            if c is None:
                post_counts[b] = 1
                post_seen += 1
                if post_seen == k:
                    post_done = True
                    post_last = b
            else:
                post_counts[b] = c + 1
        else:
            extra_draws += 1
            if a == node:
                extra_hits += 1

        if pre_seen == k:
            break

    # the post-split prefix always holds at least as many distinct nodes,
    # so it must have finished by the time the pre-split run does
    assert post_done
    pre = GreedySample(counts=pre_counts, total_draws=v_pre, distinct=k, last_node=a)
    post = GreedySample(counts=post_counts, total_draws=v_post, distinct=k,
                        last_node=post_last)
    return CoupledSample(
        pre=pre, post=post,
        extra_draws=extra_draws, extra_split_hits=extra_hits,
        split_node=node, part_indices=tuple(range(node, node + r)),
    )
