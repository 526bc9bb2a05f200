"""Node weight distributions and the sampling distributions they induce.

A network of N nodes is described by a normalized stake vector (the node
weights).  A sampling weight function f maps weights to sampling propensities,
which after normalization give the probability that a query hits each node.
Splitting a node replaces it by r positive parts that sum to its weight.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidParameterError

NORM_TOL = 1e-12


def _fsum(values) -> float:
    """Compensated sum (exactly rounded); keeps Zipf tails from losing mass."""
    if isinstance(values, np.ndarray):
        values = values.tolist()
    return math.fsum(values)


# ---------------------------------------------------------------------------
# sampling weight functions
# ---------------------------------------------------------------------------

_KINDS = ("identity", "constant-one", "power")


@dataclass(frozen=True)
class WeightFunction:
    """One member of the closed family of sampling/averaging weight functions.

    Supported kinds: ``identity`` (propensity equals the weight),
    ``constant-one`` (every node equally likely regardless of weight) and
    ``power`` (propensity ``m ** alpha``).  Arbitrary callables are
    deliberately not accepted.
    """

    kind: str
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidParameterError(f"unknown weight function kind: {self.kind!r}")
        if self.kind == "power" and not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidParameterError("power weight function needs alpha > 0")

    @property
    def name(self) -> str:
        if self.kind == "power":
            return f"power({self.alpha:g})"
        return self.kind

    def apply(self, m: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.asarray(m, dtype=float)
        if self.kind == "constant-one":
            return np.ones_like(m, dtype=float)
        return np.asarray(m, dtype=float) ** self.alpha

    @classmethod
    def parse(cls, text: str) -> "WeightFunction":
        t = text.strip().lower()
        if t in ("id", "identity"):
            return IDENTITY
        if t in ("1", "one", "const", "constant-one", "constant_one"):
            return CONSTANT_ONE
        if t.startswith("power"):
            inner = t[len("power"):].strip("():= ")
            try:
                return cls("power", float(inner))
            except ValueError:
                pass
        raise InvalidParameterError(
            f"cannot parse weight function {text!r}; "
            "expected 'identity', 'constant-one' or 'power:ALPHA'"
        )


IDENTITY = WeightFunction("identity")
CONSTANT_ONE = WeightFunction("constant-one")


def power(alpha: float) -> WeightFunction:
    return WeightFunction("power", alpha)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightDistribution:
    """Normalized node weights, dense, 0-based indexing.

    Finite vectors stand in for infinite-support weight sequences: every node
    beyond the vector is implicitly weight zero.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or w.size < 1:
            raise InvalidParameterError("weights must be a non-empty 1-d vector")
        if not np.isfinite(w).all() or bool((w < 0).any()):
            raise InvalidParameterError("weights must be finite and non-negative")
        total = _fsum(w)
        if abs(total - 1.0) > NORM_TOL:
            raise InvalidParameterError(
                f"weights sum to {total!r}, not 1; use WeightDistribution.from_raw"
            )

    @classmethod
    def from_raw(cls, values) -> "WeightDistribution":
        """Normalize raw non-negative stakes into a weight distribution."""
        w = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                       dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise InvalidParameterError("weights must be a non-empty 1-d vector")
        if not np.isfinite(w).all() or bool((w < 0).any()):
            raise InvalidParameterError("weights must be finite and non-negative")
        total = _fsum(w)
        if total <= 0:
            raise InvalidParameterError("weights must have positive total mass")
        return cls(w / total)

    @property
    def size(self) -> int:
        return int(self.weights.size)


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    """Per-node sampling probabilities plus the identifier of the f that made them."""

    probs: np.ndarray
    source_f: str = "identity"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or p.size < 1:
            raise InvalidParameterError("probs must be a non-empty 1-d vector")
        if not np.isfinite(p).all() or bool((p < 0).any()) or bool((p > 1).any()):
            raise InvalidParameterError("probs must lie in [0, 1]")
        total = _fsum(p)
        if abs(total - 1.0) > NORM_TOL:
            raise InvalidParameterError(f"probs sum to {total!r}, not 1")

    @classmethod
    def from_probs(cls, values, source_f: str = "identity") -> "SamplingDistribution":
        """Build directly from probabilities (normalizing tiny rounding slack)."""
        p = np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                       dtype=float)
        total = _fsum(p)
        if total <= 0:
            raise InvalidParameterError("probabilities must have positive total mass")
        return cls(p / total, source_f=source_f)

    @property
    def size(self) -> int:
        return int(self.probs.size)

    @cached_property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.probs))


@dataclass(frozen=True, eq=False)
class SplitSpec:
    """An r-way split of one node into positive fractions of its weight."""

    node: int
    fractions: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.fractions, dtype=float)
        object.__setattr__(self, "fractions", x)
        object.__setattr__(self, "node", int(self.node))
        if x.ndim != 1 or x.size < 1:
            raise InvalidParameterError("fractions must be a non-empty 1-d vector")
        if not np.isfinite(x).all() or bool((x <= 0).any()):
            raise InvalidParameterError("all split fractions must be > 0")
        total = _fsum(x)
        if abs(total - 1.0) > NORM_TOL:
            raise InvalidParameterError(f"split fractions sum to {total!r}, not 1")
        if self.node < 0:
            raise InvalidParameterError("split node index must be >= 0")

    @classmethod
    def equal(cls, node: int, r: int) -> "SplitSpec":
        """Split ``node`` into r equal parts (the gain-maximizing split)."""
        if r < 1:
            raise InvalidParameterError("split arity r must be >= 1")
        return cls(node, np.full(r, 1.0 / r))

    @property
    def r(self) -> int:
        return int(self.fractions.size)


@dataclass(frozen=True)
class ZipfParams:
    """Zipf rank-frequency law parameters: exponent s >= 0 over n nodes."""

    s: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterError("Zipf law needs n >= 1 nodes")
        if not (math.isfinite(self.s) and self.s >= 0):
            raise InvalidParameterError("Zipf exponent s must be finite and >= 0")


@dataclass(frozen=True)
class IndexMap:
    """Where each node of a distribution lands after one node is split."""

    split_node: int
    part_indices: tuple = field(default_factory=tuple)

    @property
    def r(self) -> int:
        return len(self.part_indices)

    def map_node(self, old_index: int) -> int:
        """New index of a non-split node (the split node maps to its parts)."""
        if old_index == self.split_node:
            raise InvalidParameterError(
                "the split node maps to part_indices, not a single index"
            )
        if old_index < self.split_node:
            return old_index
        return old_index + self.r - 1


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def zipf_weights(params: ZipfParams) -> WeightDistribution:
    """Weight of the rank-j node proportional to 1/j**s, ranks 1..n.

    s = 0 gives uniform weights; s > 1 concentrates mass on the top ranks.
    Output is non-increasing in rank by construction.
    """
    ranks = np.arange(1, params.n + 1, dtype=float)
    return WeightDistribution.from_raw(ranks ** (-params.s))


def sampling_distribution(w: WeightDistribution, f: WeightFunction = IDENTITY
                          ) -> SamplingDistribution:
    """Normalize f(weights) into per-node sampling probabilities."""
    image = f.apply(w.weights)
    total = _fsum(image)
    if total <= 0:
        raise InvalidParameterError(
            f"weight function {f.name} maps every weight to zero"
        )
    return SamplingDistribution(image / total, source_f=f.name)


def apply_split(w: WeightDistribution, split: SplitSpec):
    """Replace one node by its split parts; total mass is preserved.

    Returns the enlarged distribution (size N + r - 1, parts occupying the
    split node's slot in order) and an IndexMap locating every node afterwards.
    """
    if not (0 <= split.node < w.size):
        raise InvalidParameterError(
            f"split node {split.node} out of range for {w.size} nodes"
        )
    m_i = float(w.weights[split.node])
    if m_i <= 0.0:
        raise InvalidParameterError("cannot split a zero-weight node")
    parts = m_i * split.fractions
    new_weights = np.concatenate(
        [w.weights[:split.node], parts, w.weights[split.node + 1:]]
    )
    index_map = IndexMap(
        split_node=split.node,
        part_indices=tuple(range(split.node, split.node + split.r)),
    )
    return WeightDistribution(new_weights), index_map


def distribution_distance(p: SamplingDistribution, q: SamplingDistribution):
    """(sup-norm, l1-norm) distance between two sampling distributions.

    The shorter vector is zero-padded, matching the convention that absent
    nodes have probability zero.  sup <= l1 always holds.
    """
    a, b = p.probs, q.probs
    n = max(a.size, b.size)
    if a.size < n:
        a = np.concatenate([a, np.zeros(n - a.size)])
    if b.size < n:
        b = np.concatenate([b, np.zeros(n - b.size)])
    diff = np.abs(a - b)
    return float(diff.max()), _fsum(diff)


def load_weights_csv(path) -> WeightDistribution:
    """Read raw stakes from a CSV with a ``weight`` column; normalized on load."""
    values = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "weight" not in reader.fieldnames:
            raise InvalidParameterError(f"{path}: expected a 'weight' column")
        for row in reader:
            cell = row["weight"]
            if cell is None or cell.strip() == "":
                continue
            try:
                values.append(float(cell))
            except ValueError as exc:
                raise InvalidParameterError(f"{path}: bad weight value {cell!r}") from exc
    if not values:
        raise InvalidParameterError(f"{path}: no weight rows found")
    return WeightDistribution.from_raw(values)
