"""Monte Carlo estimation of voting power and split gain, sweeps, and
distributional diagnostics (KDE, QQ).

Runs are partitioned into fixed-size chunks, each driven by its own derived
random stream; chunk results are merged in chunk order, so estimates are
bit-identical no matter how many worker threads execute them.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from .errors import InvalidParameterError, UnsupportedConfigurationError
from .weights import (
    IDENTITY,
    SamplingDistribution,
    SplitSpec,
    WeightDistribution,
    WeightFunction,
    ZipfParams,
    apply_split,
    sampling_distribution,
    zipf_weights,
)
from .sampler import RngStream, coupled_greedy_sample, greedy_sample

CHUNK_RUNS = 10_000
RETAINED_CAP = 1_000_000
_CI_Z = 1.96  # normal approximation, level 0.95

SWEEP_AXES = ("network_size", "sample_k", "split_r", "zipf_s")


@dataclass(eq=False)
class GainEstimate:
    """Mean/spread summary of per-run gains (or voting-power shares)."""

    mean: float
    std_error: float
    ci_low: float
    ci_high: float
    n_runs: int
    retained_samples: np.ndarray | None = None


@dataclass(eq=False)
class SweepResult:
    axis: str
    points: list  # [(axis_value, GainEstimate), ...]


def _as_stream(seed) -> RngStream:
    if isinstance(seed, RngStream):
        return seed
    return RngStream(int(seed), 0)


def _run_chunks(n_runs: int, rng: RngStream, worker, threads=None) -> np.ndarray:
    """Run `worker(chunk_rng, count) -> ndarray` over fixed chunks, in order."""
    if n_runs < 1:
        raise InvalidParameterError("n_runs must be >= 1")
    sizes = []
    left = n_runs
    while left > 0:
        take = min(CHUNK_RUNS, left)
        sizes.append(take)
        left -= take
    jobs = [(rng.child(ci), count) for ci, count in enumerate(sizes)]
    threads = 1 if threads is None else max(1, int(threads))
    if threads == 1 or len(jobs) == 1:
        parts = [worker(r, c) for r, c in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: worker(*job), jobs))
    return np.concatenate(parts) if len(parts) > 1 else parts[0]


def _summarize(values: np.ndarray, rng: RngStream) -> GainEstimate:
    n = int(values.size)
    mean = float(values.sum() / n)
    if n > 1:
        var = float(np.sum((values - mean) ** 2) / (n - 1))
        se = (var / n) ** 0.5
    else:
        se = 0.0
    retained = values
    if n > RETAINED_CAP:
        keep = rng.child(0x5E1EC7).generator.choice(n, RETAINED_CAP, replace=False)
        retained = values[np.sort(keep)]
    return GainEstimate(
        mean=mean,
        std_error=se,
        ci_low=mean - _CI_Z * se,
        ci_high=mean + _CI_Z * se,
        n_runs=n,
        retained_samples=retained,
    )


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def estimate_voting_power(p: SamplingDistribution, k: int, i: int, n_runs: int,
                          seed, threads=None) -> GainEstimate:
    """Average occupancy share of node i over independent greedy samples."""
    i = int(i)
    if not (0 <= i < p.size):
        raise InvalidParameterError(f"node {i} out of range for {p.size} nodes")
    rng = _as_stream(seed)

    def worker(chunk_rng: RngStream, count: int) -> np.ndarray:
        out = np.empty(count)
        for r in range(count):
            s = greedy_sample(p, k, chunk_rng)
            out[r] = s.counts.get(i, 0) / s.total_draws
        return out

    values = _run_chunks(n_runs, rng, worker, threads)
    return _summarize(values, rng)


def estimate_split_gain(w: WeightDistribution, f: WeightFunction, k: int,
                        split: SplitSpec, n_runs: int, seed, coupled: bool = True,
                        threads=None) -> GainEstimate:
    """Estimate the voting power gained by splitting one node.

    Coupled mode drives the pre- and post-split runs from a shared draw
    stream (variance reduction; identity weight function only).  Independent
    mode samples the two networks separately and works for any weight
    function, at the price of a noisier estimate.
    """
    p = sampling_distribution(w, f)
    node = split.node
    if coupled:
        if f.name != "identity":
            raise UnsupportedConfigurationError(
                "coupled gain estimation requires the identity weight function; "
                "rerun with coupled=False"
            )
        parts = tuple(range(node, node + split.r))

        def worker(chunk_rng: RngStream, count: int) -> np.ndarray:
            out = np.empty(count)
            for r in range(count):
                cs = coupled_greedy_sample(p, split, k, chunk_rng)
                y_pre = cs.pre.counts.get(node, 0)
                y_post = 0
                for j in parts:
                    y_post += cs.post.counts.get(j, 0)
                out[r] = y_post / cs.post.total_draws - y_pre / cs.pre.total_draws
            return out
    else:
        w_hat, index_map = apply_split(w, split)
        p_hat = sampling_distribution(w_hat, f)
        parts = index_map.part_indices

        def worker(chunk_rng: RngStream, count: int) -> np.ndarray:
            out = np.empty(count)
            for r in range(count):
                pre = greedy_sample(p, k, chunk_rng)
                post = greedy_sample(p_hat, k, chunk_rng)
                y_post = 0
                for j in parts:
                    y_post += post.counts.get(j, 0)
                out[r] = (y_post / post.total_draws
                          - pre.counts.get(node, 0) / pre.total_draws)
            return out

    rng = _as_stream(seed)
    values = _run_chunks(n_runs, rng, worker, threads)
    return _summarize(values, rng)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GainExperiment:
    """Base configuration for gain sweeps: a Zipf network whose heaviest node
    (by default) splits into equal parts."""

    zipf_s: float = 1.0
    n_nodes: int = 1000
    k: int = 20
    node: int = 0
    split_r: int = 2
    fractions: tuple | None = None  # None means equal parts
    n_runs: int = 100_000
    coupled: bool = True
    f: WeightFunction = IDENTITY

    def split_spec(self) -> SplitSpec:
        if self.fractions is not None:
            return SplitSpec(self.node, np.asarray(self.fractions, dtype=float))
        return SplitSpec.equal(self.node, self.split_r)

    def weight_distribution(self) -> WeightDistribution:
        return zipf_weights(ZipfParams(s=self.zipf_s, n=self.n_nodes))


def _apply_axis(base: GainExperiment, axis: str, value) -> GainExperiment:
    if axis == "network_size":
        return replace(base, n_nodes=int(value))
    if axis == "sample_k":
        return replace(base, k=int(value))
    if axis == "split_r":
        return replace(base, split_r=int(value), fractions=None)
    if axis == "zipf_s":
        return replace(base, zipf_s=float(value))
    raise InvalidParameterError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def sweep_gain(base: GainExperiment, axis: str, values, seed,
               n_runs=None, threads=None) -> SweepResult:
    """One gain estimate per axis value, all derived from a single master seed.

    Point j runs on stream id offset j, so a one-point sweep reproduces a
    plain estimate_split_gain call bit for bit.
    """
    vals = list(values)
    if not vals:
        raise InvalidParameterError("sweep needs at least one axis value")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise InvalidParameterError("axis values must be strictly increasing")
    master = _as_stream(seed)
    points = []
    for j, value in enumerate(vals):
        cfg = _apply_axis(base, axis, value)
        runs = cfg.n_runs if n_runs is None else int(n_runs)
        point_rng = RngStream(master.seed, master.stream_id + j)
        est = estimate_split_gain(
            cfg.weight_distribution(), cfg.f, cfg.k, cfg.split_spec(),
            runs, point_rng, coupled=cfg.coupled, threads=threads,
        )
        points.append((value, est))
    return SweepResult(axis=axis, points=points)


# ---------------------------------------------------------------------------
# distributional diagnostics
# ---------------------------------------------------------------------------

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


def silverman_bandwidth(samples: np.ndarray) -> float:
    """Rule-of-thumb bandwidth 1.06 * sd * n**(-1/5) for a Gaussian kernel."""
    n = samples.size
    sd = float(samples.std(ddof=1)) if n > 1 else 0.0
    return 1.06 * sd * n ** (-0.2)


def kde_density(samples, bandwidth=None, grid=None) -> np.ndarray:
    """Gaussian kernel density estimate, returned as (x, density) rows.

    Without an explicit grid, evaluates on 512 points spanning the sample
    range widened by five bandwidths on each side, which keeps the trapezoid
    integral within about 1e-3 of 1.
    """
    x = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples,
                   dtype=float)
    if x.size == 0:
        raise InvalidParameterError("cannot estimate a density from no samples")
    if bandwidth is not None:
        h = float(bandwidth)
        if not h > 0:
            raise InvalidParameterError("bandwidth must be > 0")
    else:
        h = silverman_bandwidth(x)
        if not h > 0:
            raise InvalidParameterError(
                "samples have zero variance; pass an explicit bandwidth"
            )
    if grid is None:
        lo = float(x.min()) - 5.0 * h
        hi = float(x.max()) + 5.0 * h
        grid = np.linspace(lo, hi, 512)
    else:
        grid = np.asarray(list(grid) if not isinstance(grid, np.ndarray) else grid,
                          dtype=float)
    density = np.empty(grid.size)
    norm = 1.0 / (x.size * h * _SQRT_2PI)
    step = max(1, int(4_000_000 // max(1, x.size)))  # bound the outer-product size
    for start in range(0, grid.size, step):
        block = grid[start:start + step, None]
        z = (block - x[None, :]) / h
        density[start:start + step] = np.exp(-0.5 * z * z).sum(axis=1) * norm
    return np.column_stack([grid, density])


def qq_points(samples) -> np.ndarray:
    """Standard-normal QQ pairs (theoretical_quantile, sample_quantile).

    Samples are standardized first, so any affine rescaling of the input
    leaves the points unchanged.
    """
    x = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples,
                   dtype=float)
    if x.size < 2:
        raise InvalidParameterError("QQ plot needs at least two samples")
    sd = float(x.std(ddof=1))
    if sd == 0.0:
        raise InvalidParameterError("samples have zero variance")
    standardized = np.sort((x - x.mean()) / sd)
    n = x.size
    theo = ndtri((np.arange(1, n + 1) - 0.5) / n)
    return np.column_stack([theo, standardized])
