"""Experiment runner: `greedyvote SUBCOMMAND [flags]`.

Subcommands: exact | sample | power | gain | sweep | kde | qq | fpc | tau.
Every option can also come from a JSON config file (--config); explicit flags
override file values.  Runs that write an output file also write a sidecar
`<output>.config.json` with the fully resolved configuration, so any result
can be reproduced byte for byte from its sidecar.

Exit codes: 0 success, 1 runtime sampling error, 2 validation failure,
3 exact-computation resource limit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import exact, fairness, fpc, sampler, weights
from .errors import (
    GreedyVoteError,
    InvalidParameterError,
    ResourceLimitError,
    UnsupportedConfigurationError,
)

SUBCOMMANDS = ("exact", "sample", "power", "gain", "sweep", "kde", "qq", "fpc", "tau")

THREADS_ENV = "GREEDYVOTE_THREADS"


class ConfigError(InvalidParameterError):
    """A config key failed validation; message names the key."""


def _parse_floats(text: str):
    try:
        return tuple(float(tok) for tok in str(text).split(",") if tok.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list from {text!r}") from exc


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    t = str(value).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean from {value!r}")


# one row per key: caster, default
_SOURCE_KEYS = {
    "generator": (str, "zipf"),
    "s": (float, 1.0),
    "n": (int, 1000),
    "weights": (str, None),
    "weights_csv": (str, None),
    "f": (str, "identity"),
}

_SCHEMAS = {
    "tau": {
        "output": (str, None),
    },
    "exact": {
        **_SOURCE_KEYS,
        "dist": (str, "v"),
        "k": (int, 2),
        "v_max": (int, 16),
        "node": (int, 1),
        "output": (str, None),
    },
    "sample": {
        **_SOURCE_KEYS,
        "k": (int, 20),
        "node": (int, 1),
        "n_runs": (int, 1000),
        "seed": (int, 0),
        "output": (str, None),
    },
    "power": {
        **_SOURCE_KEYS,
        "k": (int, 20),
        "node": (int, 1),
        "n_runs": (int, 10_000),
        "seed": (int, 0),
        "epsilon": (float, None),
        "threads": (int, None),
        "output": (str, None),
    },
    "gain": {
        **_SOURCE_KEYS,
        "k": (int, 20),
        "node": (int, 1),
        "fractions": (str, "0.5,0.5"),
        "n_runs": (int, 10_000),
        "seed": (int, 0),
        "coupled": (_parse_bool, True),
        "threads": (int, None),
        "output": (str, None),
    },
    "sweep": {
        "s": (float, 1.0),
        "n": (int, 1000),
        "f": (str, "identity"),
        "k": (int, 20),
        "node": (int, 1),
        "split_r": (int, 2),
        "axis": (str, "network_size"),
        "axis_values": (str, None),
        "n_runs": (int, 10_000),
        "seed": (int, 0),
        "coupled": (_parse_bool, True),
        "threads": (int, None),
        "output": (str, None),
    },
    "kde": {
        **_SOURCE_KEYS,
        "k": (int, 20),
        "node": (int, 1),
        "fractions": (str, "0.5,0.5"),
        "n_runs": (int, 10_000),
        "seed": (int, 0),
        "coupled": (_parse_bool, True),
        "threads": (int, None),
        "bandwidth": (float, None),
        "grid_points": (int, 512),
        "output": (str, None),
    },
    "qq": {
        **_SOURCE_KEYS,
        "k": (int, 20),
        "node": (int, 1),
        "fractions": (str, "0.5,0.5"),
        "n_runs": (int, 10_000),
        "seed": (int, 0),
        "coupled": (_parse_bool, True),
        "threads": (int, None),
        "output": (str, None),
    },
    "fpc": {
        **_SOURCE_KEYS,
        "g": (str, "constant-one"),
        "k": (int, 20),
        "theta": (float, 0.5),
        "beta": (float, 0.3),
        "max_rounds": (int, 100),
        "finality_l": (int, 2),
        "ones_fraction": (float, 0.9),
        "seed": (int, 0),
        "output": (str, None),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated, fully resolved flat configuration for one subcommand."""

    subcommand: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def resolve(cls, subcommand: str, flag_values: dict, config_path=None
                ) -> "ExperimentConfig":
        """Merge defaults, config-file values and explicit flags (in that
        order of increasing precedence), rejecting unknown keys."""
        if subcommand not in _SCHEMAS:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
        schema = _SCHEMAS[subcommand]
        resolved = {key: default for key, (_, default) in schema.items()}
        if config_path is not None:
            try:
                with open(config_path) as fh:
                    file_values = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config file {config_path}: {exc}") from exc
            if not isinstance(file_values, dict):
                raise ConfigError("config file must hold a JSON object")
            for key, value in file_values.items():
                if key == "subcommand":
                    if value != subcommand:
                        raise ConfigError(
                            f"config file is for subcommand {value!r}, not {subcommand!r}"
                        )
                    continue
                if key not in schema:
                    raise ConfigError(f"unknown config key {key!r} for {subcommand}")
                resolved[key] = value
        for key, value in flag_values.items():
            if key not in schema:
                raise ConfigError(f"unknown config key {key!r} for {subcommand}")
            if value is not None:
                resolved[key] = value
        # cast everything through the schema so file- and flag-supplied values
        # end up with identical types
        for key, (caster, _) in schema.items():
            if resolved[key] is not None:
                try:
                    resolved[key] = caster(resolved[key])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad value for {key!r}: {resolved[key]!r}") from exc
        return cls(subcommand=subcommand, values=resolved)

    def provenance(self) -> dict:
        doc = dict(sorted(self.values.items()))
        doc["subcommand"] = self.subcommand
        return doc


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _emit_csv(output, header, rows, config: ExperimentConfig):
    text = ",".join(header) + "\n"
    for row in rows:
        text += ",".join(_fmt(v) for v in row) + "\n"
    if output is None:
        sys.stdout.write(text)
        return
    with open(output, "w", newline="") as fh:
        fh.write(text)
    _write_sidecar(output, config)


def _write_sidecar(output, config: ExperimentConfig):
    path = f"{output}.config.json"
    with open(path, "w", newline="") as fh:
        json.dump(config.provenance(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _resolve_threads(cfg_threads):
    if cfg_threads is not None:
        return max(1, int(cfg_threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# weight sources
# ---------------------------------------------------------------------------


def _weights_from_config(cfg: ExperimentConfig) -> weights.WeightDistribution:
    vals = cfg.values
    if vals.get("weights"):
        return weights.WeightDistribution.from_raw(_parse_floats(vals["weights"]))
    generator = vals.get("generator", "zipf")
    if generator == "csv" or vals.get("weights_csv"):
        path = vals.get("weights_csv")
        if not path:
            raise ConfigError("generator 'csv' needs weights_csv")
        return weights.load_weights_csv(path)
    if generator == "zipf":
        return weights.zipf_weights(weights.ZipfParams(s=vals["s"], n=vals["n"]))
    raise ConfigError(f"unknown generator {generator!r}; expected 'zipf' or 'csv'")


def _node_index(cfg: ExperimentConfig, size: int) -> int:
    node = int(cfg["node"])  # CLI is 1-based (rank order); library is 0-based
    if not (1 <= node <= size):
        raise ConfigError(f"node {node} out of range 1..{size}")
    return node - 1


def _split_from_config(cfg: ExperimentConfig, node0: int) -> weights.SplitSpec:
    fractions = _parse_floats(cfg["fractions"])
    return weights.SplitSpec(node0, np.asarray(fractions))


def _gain_estimate(cfg: ExperimentConfig):
    w = _weights_from_config(cfg)
    f = weights.WeightFunction.parse(cfg["f"])
    node0 = _node_index(cfg, w.size)
    split = _split_from_config(cfg, node0)
    return fairness.estimate_split_gain(
        w, f, cfg["k"], split, cfg["n_runs"], cfg["seed"],
        coupled=cfg["coupled"], threads=_resolve_threads(cfg["threads"]),
    ), w


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

_GAIN_HEADER = ("axis_value", "mean", "std_error", "ci_low", "ci_high", "n_runs")


def _row_for(estimate: fairness.GainEstimate, axis_value):
    return (axis_value, estimate.mean, estimate.std_error,
            estimate.ci_low, estimate.ci_high, estimate.n_runs)


def _cmd_tau(cfg: ExperimentConfig) -> int:
    m_star, tau_star = exact.tau_argmax()
    if cfg["output"] is None:
        print(f"m_star={m_star:.6f} tau_star={tau_star:.6f}")
    else:
        _emit_csv(cfg["output"], ("m_star", "tau_star"), [(m_star, tau_star)], cfg)
    return 0


def _cmd_exact(cfg: ExperimentConfig) -> int:
    w = _weights_from_config(cfg)
    p = weights.sampling_distribution(w, weights.WeightFunction.parse(cfg["f"]))
    dist = cfg["dist"]
    if dist == "v":
        d = exact.exact_v_distribution(p, cfg["k"], cfg["v_max"])
        rows = [(v, d.probs[v]) for v in sorted(d.probs)]
        _emit_csv(cfg["output"], ("v", "prob"), rows, cfg)
        if cfg["output"] is not None:
            print(f"residual={d.residual:.17g}")
    elif dist == "joint":
        node0 = _node_index(cfg, w.size)
        d = exact.exact_joint_distribution(p, cfg["k"], node0, cfg["v_max"])
        rows = [(ell, v, d.probs[(ell, v)])
                for (ell, v) in sorted(d.probs, key=lambda key: (key[1], key[0]))]
        _emit_csv(cfg["output"], ("ell", "v", "prob"), rows, cfg)
        if cfg["output"] is not None:
            print(f"residual={d.residual:.17g}")
    elif dist == "u":
        d = exact.exact_u_distribution(p, cfg["k"])
        rows = [(u + 1, d.probs[u]) for u in range(d.probs.size)]
        _emit_csv(cfg["output"], ("u", "prob"), rows, cfg)
    else:
        raise ConfigError(f"unknown dist {dist!r}; expected v, joint or u")
    return 0


def _cmd_sample(cfg: ExperimentConfig) -> int:
    w = _weights_from_config(cfg)
    p = weights.sampling_distribution(w, weights.WeightFunction.parse(cfg["f"]))
    node0 = _node_index(cfg, w.size)
    rng = sampler.RngStream(cfg["seed"], 0)
    rows = []
    for run in range(cfg["n_runs"]):
        s = sampler.greedy_sample(p, cfg["k"], rng)
        rows.append((run, s.total_draws, s.counts.get(node0, 0)))
    _emit_csv(cfg["output"], ("run", "v", "count"), rows, cfg)
    return 0


def _cmd_power(cfg: ExperimentConfig) -> int:
    w = _weights_from_config(cfg)
    p = weights.sampling_distribution(w, weights.WeightFunction.parse(cfg["f"]))
    node0 = _node_index(cfg, w.size)
    if cfg["epsilon"] is not None:
        # exact truncated computation instead of Monte Carlo
        value, error_bound = exact.voting_power_truncated(
            p, cfg["k"], node0, cfg["epsilon"]
        )
        _emit_csv(cfg["output"], ("node", "value", "error_bound"),
                  [(cfg["node"], value, error_bound)], cfg)
        return 0
    est = fairness.estimate_voting_power(
        p, cfg["k"], node0, cfg["n_runs"], cfg["seed"],
        threads=_resolve_threads(cfg["threads"]),
    )
    _emit_csv(cfg["output"], _GAIN_HEADER, [_row_for(est, w.size)], cfg)
    return 0


def _cmd_gain(cfg: ExperimentConfig) -> int:
    est, w = _gain_estimate(cfg)
    _emit_csv(cfg["output"], _GAIN_HEADER, [_row_for(est, w.size)], cfg)
    return 0


def _cmd_sweep(cfg: ExperimentConfig) -> int:
    if not cfg["axis_values"]:
        raise ConfigError("sweep needs axis_values (comma-separated)")
    axis = cfg["axis"]
    raw_values = _parse_floats(cfg["axis_values"])
    values = [float(v) if axis == "zipf_s" else int(v) for v in raw_values]
    base = fairness.GainExperiment(
        zipf_s=cfg["s"], n_nodes=cfg["n"], k=cfg["k"],
        node=cfg["node"] - 1, split_r=cfg["split_r"],
        n_runs=cfg["n_runs"], coupled=cfg["coupled"],
        f=weights.WeightFunction.parse(cfg["f"]),
    )
    result = fairness.sweep_gain(base, axis, values, cfg["seed"],
                                 threads=_resolve_threads(cfg["threads"]))
    rows = [_row_for(est, value) for value, est in result.points]
    _emit_csv(cfg["output"], _GAIN_HEADER, rows, cfg)
    return 0


def _cmd_kde(cfg: ExperimentConfig) -> int:
    est, _ = _gain_estimate(cfg)
    samples = est.retained_samples
    h = cfg["bandwidth"]
    if h is None:
        h = fairness.silverman_bandwidth(samples)
    grid = None
    if h > 0:
        grid = np.linspace(float(samples.min()) - 5 * h,
                           float(samples.max()) + 5 * h, cfg["grid_points"])
    points = fairness.kde_density(samples, bandwidth=cfg["bandwidth"], grid=grid)
    _emit_csv(cfg["output"], ("x", "density"), [tuple(row) for row in points], cfg)
    return 0


def _cmd_qq(cfg: ExperimentConfig) -> int:
    est, _ = _gain_estimate(cfg)
    points = fairness.qq_points(est.retained_samples)
    _emit_csv(cfg["output"], ("theoretical", "sample"),
              [tuple(row) for row in points], cfg)
    return 0


def _cmd_fpc(cfg: ExperimentConfig) -> int:
    w = _weights_from_config(cfg)
    config = fpc.FpcConfig(
        k=cfg["k"], theta=cfg["theta"], beta=cfg["beta"],
        max_rounds=cfg["max_rounds"], finality_l=cfg["finality_l"],
        scheme_f=weights.WeightFunction.parse(cfg["f"]),
        scheme_g=weights.WeightFunction.parse(cfg["g"]),
    )
    initial = fpc.majority_initial_opinions(w.size, cfg["ones_fraction"])
    trace = fpc.run_fpc(config, w, initial, cfg["seed"])
    rows = []
    for t in range(1, trace.n_rounds + 1):
        u_t = cfg["theta"] if t == 1 else float(trace.thresholds[t - 2])
        ones = float(trace.opinions_by_round[t].mean())
        rows.append((t, u_t, ones))
    _emit_csv(cfg["output"], ("round", "u_t", "ones_fraction"), rows, cfg)
    summary = {
        "consensus_round": trace.consensus_round,
        "final_agreement": trace.final_agreement,
        "n_rounds": trace.n_rounds,
    }
    if cfg["output"] is None:
        print(json.dumps(summary, sort_keys=True))
    else:
        with open(f"{cfg['output']}.summary.json", "w", newline="") as fh:
            json.dump(summary, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0


_RUNNERS = {
    "tau": _cmd_tau,
    "exact": _cmd_exact,
    "sample": _cmd_sample,
    "power": _cmd_power,
    "gain": _cmd_gain,
    "sweep": _cmd_sweep,
    "kde": _cmd_kde,
    "qq": _cmd_qq,
    "fpc": _cmd_fpc,
}


def run_experiment(config: ExperimentConfig) -> int:
    """Dispatch a resolved configuration to its subcommand implementation."""
    return _RUNNERS[config.subcommand](config)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greedyvote",
        description="Voting power and split/merge fairness under greedy weighted sampling.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    help_text = {
        "tau": "maximum of the limiting equal-split gain curve",
        "exact": "exact draw-count / occupancy / distinct-count distributions",
        "sample": "raw greedy sampling runs",
        "power": "Monte Carlo voting-power estimate for one node",
        "gain": "Monte Carlo split-gain estimate (coupled by default)",
        "sweep": "split-gain sweep over network size, k, split arity or Zipf s",
        "kde": "Gaussian kernel density of per-run split gains",
        "qq": "normal QQ points of per-run split gains",
        "fpc": "fast probabilistic consensus simulation",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=help_text[name])
        sp.add_argument("--config", default=None, metavar="PATH",
                        help="JSON config file; explicit flags override it")
        for key in _SCHEMAS[name]:
            flag = "--" + key.replace("_", "-")
            if key == "output":
                sp.add_argument("-o", flag, default=None, dest=key)
            else:
                sp.add_argument(flag, default=None, dest=key)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    flag_values = {key: getattr(args, key) for key in _SCHEMAS[args.subcommand]}
    try:
        config = ExperimentConfig.resolve(args.subcommand, flag_values, args.config)
        return run_experiment(config)
    except ResourceLimitError as exc:
        print(f"error (resource limit): {exc}", file=sys.stderr)
        return 3
    except (ConfigError, InvalidParameterError, UnsupportedConfigurationError) as exc:
        print(f"error (invalid configuration): {exc}", file=sys.stderr)
        return 2
    except GreedyVoteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
