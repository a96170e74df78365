"""Experiment driver: config parsing, policy-by-seed grids, and result files.

Outputs are plain text with a versioned schema: a records CSV with one row
per (seed, policy, group), a JSON summary with per-policy means, and a JSON
manifest echoing the full resolved configuration plus the RNG scheme. A
manifest is itself a valid ``--config`` input, so any run can be reproduced
byte-for-byte from its manifest alone.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import yaml

from . import __version__
from .domains import (
    DiabetesSpec,
    MaternalSpec,
    SyntheticSpec,
    build_diabetes,
    build_maternal,
    build_synthetic,
    load_group_table,
)
from .policies import CLINICAL_KINDS, POLICY_KINDS, PolicySpec
from .simulate import STREAM_INSTANCE, aggregate, purpose_rng, run_episode
from .whittle import IndexCache

SCHEMA_VERSION = 1
OUT_DIR_ENV = "EQUIBANDITS_OUT"
DOMAINS = ("synthetic", "maternal", "diabetes")
RNG_SCHEME = (
    "SeedSequence(seed, spawn_key=(k,)) with k=0 per-arm transition streams "
    "(spawned per arm), k=1 policy randomness, k=2 allocator upsampling, "
    "k=3 domain instance noise"
)

RECORD_COLUMNS = ("seed", "policy", "group", "group_size", "group_total_reward")
PARETO_COLUMNS = (
    "alpha",
    "policy",
    "engagement_per_arm",
    "engagement_stderr",
    "clinical_per_arm",
    "clinical_stderr",
)
CAPACITY_COLUMNS = ("policy", "budget", "achieved")


class ConfigError(ValueError):
    def __init__(self, path, detail):
        self.path = path
        super().__init__(f"{path}: {detail}")


@dataclass
class ExperimentConfig:
    domain: str
    n_arms: int
    budget: object
    horizon: int
    policies: list
    seeds: int = 25
    base_seed: int = 0
    precision: float = 1e-4
    realloc_every_round: bool = True
    out_dir: str | None = None
    alpha: object = 0.5
    large_group: int = 2
    noise_scale: float = 0.2
    group_table: str | None = None
    capacity_target: float | None = None

    def budgets(self):
        return list(self.budget) if isinstance(self.budget, (list, tuple)) else [self.budget]

    def alphas(self):
        return list(self.alpha) if isinstance(self.alpha, (list, tuple)) else [self.alpha]

    def as_dict(self):
        return {
            "domain": self.domain,
            "n_arms": self.n_arms,
            "budget": self.budget,
            "horizon": self.horizon,
            "policies": list(self.policies),
            "seeds": self.seeds,
            "base_seed": self.base_seed,
            "precision": self.precision,
            "realloc_every_round": self.realloc_every_round,
            "out_dir": self.out_dir,
            "alpha": self.alpha,
            "large_group": self.large_group,
            "noise_scale": self.noise_scale,
            "group_table": self.group_table,
            "capacity_target": self.capacity_target,
        }


def _validate(config: ExperimentConfig) -> ExperimentConfig:
    if config.domain not in DOMAINS:
        raise ConfigError("domain", f"unknown domain {config.domain!r}, expected one of {DOMAINS}")
    if config.n_arms < 1:
        raise ConfigError("n_arms", f"must be >= 1, got {config.n_arms}")
    if config.horizon < 1:
        raise ConfigError("horizon", f"must be >= 1, got {config.horizon}")
    if config.seeds < 1:
        raise ConfigError("seeds", f"must be >= 1, got {config.seeds}")
    budgets = config.budgets()
    if not budgets:
        raise ConfigError("budget", "at least one budget required")
    for i, b in enumerate(budgets):
        if not isinstance(b, int) or not 0 <= b <= config.n_arms:
            raise ConfigError(
                f"budget[{i}]" if isinstance(config.budget, (list, tuple)) else "budget",
                f"must be an integer in [0, {config.n_arms}], got {b!r}",
            )
    if not config.policies:
        raise ConfigError("policies", "at least one policy required")
    for i, kind in enumerate(config.policies):
        if kind not in POLICY_KINDS:
            raise ConfigError(f"policies[{i}]", f"unknown policy {kind!r}")
        if kind in CLINICAL_KINDS and config.domain != "diabetes":
            raise ConfigError(
                f"policies[{i}]", f"{kind} needs the diabetes domain, got {config.domain!r}"
            )
    for i, a in enumerate(config.alphas()):
        if not isinstance(a, (int, float)) or not 0.0 <= float(a) <= 1.0:
            raise ConfigError(
                f"alpha[{i}]" if isinstance(config.alpha, (list, tuple)) else "alpha",
                f"must be in [0, 1], got {a!r}",
            )
    if config.large_group not in (0, 1, 2):
        raise ConfigError("large_group", f"must be 0, 1, or 2, got {config.large_group!r}")
    if config.noise_scale < 0:
        raise ConfigError("noise_scale", f"must be >= 0, got {config.noise_scale}")
    if config.precision <= 0:
        raise ConfigError("precision", f"must be > 0, got {config.precision}")
    return config


def load_config(path) -> ExperimentConfig:
    """Read a YAML config file; a manifest file works too (its echo is used)."""
    with open(path) as handle:
        raw = yaml.safe_load(handle)
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    if "config" in raw and "schema_version" in raw:
        if raw["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(
                "schema_version",
                f"manifest schema {raw['schema_version']} unsupported, need {SCHEMA_VERSION}",
            )
        raw = raw["config"]
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - known - {"realloc"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown config field")
    if "realloc" in raw:
        mode = raw.pop("realloc")
        if mode not in ("every-round", "once"):
            raise ConfigError("realloc", f"must be 'every-round' or 'once', got {mode!r}")
        raw["realloc_every_round"] = mode == "every-round"
    missing = {"domain", "n_arms", "budget", "horizon", "policies"} - set(raw)
    if missing:
        raise ConfigError(sorted(missing)[0], "required field missing")
    return _validate(ExperimentConfig(**raw))


def build_instance(config: ExperimentConfig, seed: int, budget: int, alpha: float):
    """Construct the domain instance one episode runs on.

    The maternal domain redraws its per-arm probability noise from the
    seed's instance-noise stream, so each seed sees a fresh cohort; the other
    domains are deterministic in the config.
    """
    if config.domain == "synthetic":
        return build_synthetic(
            SyntheticSpec(n_arms=config.n_arms),
            horizon=config.horizon,
            total_budget=budget,
        )
    if config.domain == "maternal":
        spec = MaternalSpec(
            n_arms=config.n_arms,
            large_group=config.large_group,
            noise_scale=config.noise_scale,
        )
        return build_maternal(
            spec, purpose_rng(seed, STREAM_INSTANCE),
            horizon=config.horizon, total_budget=budget,
        )
    table = load_group_table(config.group_table) if config.group_table else load_group_table()
    spec = DiabetesSpec(alpha=float(alpha), n_arms=config.n_arms, group_table=table)
    return build_diabetes(spec, horizon=config.horizon, total_budget=budget)


def _policy_spec(config: ExperimentConfig, kind: str) -> PolicySpec:
    return PolicySpec(
        kind=kind,
        realloc_every_round=config.realloc_every_round,
        precision=config.precision,
    )


def _grid_cell(payload):
    config_dict, kind, seed, budget, alpha = payload
    config = ExperimentConfig(**config_dict)
    instance = build_instance(config, seed, budget, alpha)
    return run_episode(instance, _policy_spec(config, kind), seed)


def run_grid(config: ExperimentConfig, budget: int, alpha: float, jobs: int = 1):
    """All (policy, seed) episodes for one (budget, alpha) cell of the grid.

    Returns records keyed by policy kind, seeds in ascending order. With
    jobs=1 everything shares one in-process index cache; with more jobs the
    cells run in worker processes.
    """
    seeds = [config.base_seed + k for k in range(config.seeds)]
    by_policy = {kind: [] for kind in config.policies}
    if jobs <= 1:
        cache = IndexCache()
        instances = {}
        for seed in seeds:
            key = seed if config.domain == "maternal" else "shared"
            if key not in instances:
                instances[key] = build_instance(config, seed, budget, alpha)
            instance = instances[key]
            for kind in config.policies:
                by_policy[kind].append(
                    run_episode(instance, _policy_spec(config, kind), seed, cache)
                )
        return by_policy
    payloads = [
        (config.as_dict(), kind, seed, budget, alpha)
        for kind in config.policies
        for seed in seeds
    ]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for payload, record in zip(payloads, pool.map(_grid_cell, payloads)):
            by_policy[payload[1]].append(record)
    return by_policy


# --------------------------------------------------------------------------
# File formats


def _format_value(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_value(v) for v in row])


def _read_csv(path, columns, casters):
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = tuple(next(reader))
        if header != tuple(columns):
            raise ValueError(f"{path}: unexpected header {header}")
        return [
            {name: cast(cell) for (name, cast), cell in zip(casters.items(), row)}
            for row in reader
        ]


def write_records(path, records_by_policy, policy_order):
    rows = []
    for kind in policy_order:
        for record in records_by_policy[kind]:
            for g in range(len(record.per_group_size)):
                rows.append(
                    (
                        record.seed,
                        kind,
                        g,
                        int(record.per_group_size[g]),
                        float(record.per_group_total_reward[g]),
                    )
                )
    _write_csv(path, RECORD_COLUMNS, rows)


def read_records(path):
    casters = {
        "seed": int, "policy": str, "group": int,
        "group_size": int, "group_total_reward": float,
    }
    return _read_csv(path, RECORD_COLUMNS, casters)


def write_summary(path, payload):
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_summary(path):
    with open(path) as handle:
        return json.load(handle)


def write_manifest(path, config: ExperimentConfig, mode: str, outputs):
    payload = {
        "schema_version": SCHEMA_VERSION,
        "tool": "equibandits",
        "tool_version": __version__,
        "mode": mode,
        "config": config.as_dict(),
        "rng_scheme": RNG_SCHEME,
        "outputs": sorted(outputs),
    }
    write_summary(path, payload)


read_manifest = read_summary


def read_pareto(path):
    casters = {
        "alpha": float, "policy": str,
        "engagement_per_arm": float, "engagement_stderr": float,
        "clinical_per_arm": float, "clinical_stderr": float,
    }
    return _read_csv(path, PARETO_COLUMNS, casters)


def read_capacity(path):
    casters = {"policy": str, "budget": int, "achieved": float}
    return _read_csv(path, CAPACITY_COLUMNS, casters)


# --------------------------------------------------------------------------
# Commands


def _summarize(records_by_policy, policy_order):
    policies = {}
    for kind in policy_order:
        summary = aggregate(records_by_policy[kind])
        policies[kind] = {
            "mean_reward_per_arm": summary.mean_reward_per_arm,
            "stderr_reward_per_arm": summary.stderr_reward_per_arm,
            "mean_gini": summary.mean_gini,
            "per_group_mean_reward": [float(v) for v in summary.per_group_mean_reward],
        }
    return policies


def cmd_run(config: ExperimentConfig, out_dir: str, jobs: int = 1):
    """One experiment at a fixed budget: records, summary, manifest."""
    budgets = config.budgets()
    if len(budgets) != 1:
        raise ConfigError("budget", "run mode needs a single budget; use capacity for sweeps")
    alphas = config.alphas()
    if len(alphas) != 1:
        raise ConfigError("alpha", "run mode needs a single alpha; use pareto for sweeps")
    os.makedirs(out_dir, exist_ok=True)
    records = run_grid(config, budgets[0], alphas[0], jobs)
    write_records(os.path.join(out_dir, "records.csv"), records, config.policies)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "mode": "run",
        "n_seeds": config.seeds,
        "n_arms": config.n_arms,
        "policies": _summarize(records, config.policies),
    }
    write_summary(os.path.join(out_dir, "summary.json"), summary)
    write_manifest(
        os.path.join(out_dir, "manifest.json"), config, "run",
        ["records.csv", "summary.json"],
    )
    return out_dir


def cmd_pareto(config: ExperimentConfig, out_dir: str, jobs: int = 1):
    """Sweep alpha on the diabetes domain, splitting the two reward components."""
    if config.domain != "diabetes":
        raise ConfigError("domain", "pareto mode needs the diabetes domain")
    budgets = config.budgets()
    if len(budgets) != 1:
        raise ConfigError("budget", "pareto mode needs a single budget")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for alpha in config.alphas():
        records = run_grid(config, budgets[0], alpha, jobs)
        for kind in config.policies:
            per_component = {name: [] for name in ("engagement", "clinical")}
            for record in records[kind]:
                for name in per_component:
                    per_component[name].append(
                        float(sum(record.component_totals[name])) / config.n_arms
                    )
            stats = {}
            for name, values in per_component.items():
                arr = np.asarray(values)
                stderr = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
                stats[name] = (float(arr.mean()), stderr)
            rows.append(
                (
                    float(alpha),
                    kind,
                    stats["engagement"][0],
                    stats["engagement"][1],
                    stats["clinical"][0],
                    stats["clinical"][1],
                )
            )
    _write_csv(os.path.join(out_dir, "pareto.csv"), PARETO_COLUMNS, rows)
    write_manifest(os.path.join(out_dir, "manifest.json"), config, "pareto", ["pareto.csv"])
    return out_dir


def cmd_capacity(config: ExperimentConfig, out_dir: str, jobs: int = 1):
    """Sweep the budget and report, per policy, the final-round reward level
    and the smallest budget reaching the target."""
    budgets = config.budgets()
    if budgets != sorted(budgets):
        raise ConfigError("budget", "capacity mode needs an ascending budget list")
    if config.capacity_target is None:
        raise ConfigError("capacity_target", "required for capacity mode")
    alphas = config.alphas()
    if len(alphas) != 1:
        raise ConfigError("alpha", "capacity mode needs a single alpha")
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    achieved = {kind: [] for kind in config.policies}
    for budget in budgets:
        records = run_grid(config, budget, alphas[0], jobs)
        for kind in config.policies:
            level = float(
                np.mean([r.final_round_reward / config.n_arms for r in records[kind]])
            )
            achieved[kind].append(level)
            rows.append((kind, budget, level))
    crossings = {}
    for kind in config.policies:
        crossing = next(
            (b for b, level in zip(budgets, achieved[kind])
             if level >= config.capacity_target),
            None,
        )
        crossings[kind] = crossing
    _write_csv(os.path.join(out_dir, "capacity.csv"), CAPACITY_COLUMNS, rows)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "mode": "capacity",
        "target": config.capacity_target,
        "budgets": budgets,
        "crossings": crossings,
    }
    write_summary(os.path.join(out_dir, "summary.json"), summary)
    write_manifest(
        os.path.join(out_dir, "manifest.json"), config, "capacity",
        ["capacity.csv", "summary.json"],
    )
    return out_dir


DOMAIN_NOTES = {
    "synthetic": "five two-state groups with graded intervention response (A-E)",
    "maternal": "three-state engagement chains, one group holding 60% of arms",
    "diabetes": "54-state engagement x clinical x memory model, six demographic groups",
}


# --------------------------------------------------------------------------
# Entry point


def _resolve_out(args, config):
    if args.out:
        return args.out
    if config.out_dir:
        return config.out_dir
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return env
    raise ConfigError("out_dir", f"no output directory (flag --out, config, or ${OUT_DIR_ENV})")


def _apply_overrides(config, args):
    if args.seeds is not None:
        config.seeds = args.seeds
    if args.realloc is not None:
        config.realloc_every_round = args.realloc == "every-round"
    return _validate(config)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="equibandits",
        description="Equitable restless-bandit budget allocation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run a policy-by-seed grid and write result tables"),
        ("pareto", "sweep alpha on the diabetes domain"),
        ("capacity", "sweep the budget and find target crossings"),
        ("validate-config", "check a config file and exit"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML config or manifest path")
        if name != "validate-config":
            p.add_argument("--out", default=None, help="output directory")
            p.add_argument("--seeds", type=int, default=None, help="override seed count")
            p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
            p.add_argument(
                "--realloc", choices=("every-round", "once"), default=None,
                help="when allocating policies re-run the group allocator",
            )
    sub.add_parser("list-domains", help="list the available domains")

    args = parser.parse_args(argv)
    if args.command == "list-domains":
        for name in DOMAINS:
            print(f"{name}: {DOMAIN_NOTES[name]}")
        return 0
    try:
        config = load_config(args.config)
        if args.command == "validate-config":
            print("ok")
            return 0
        config = _apply_overrides(config, args)
        out_dir = _resolve_out(args, config)
        command = {"run": cmd_run, "pareto": cmd_pareto, "capacity": cmd_capacity}[args.command]
        command(config, out_dir, jobs=args.jobs)
    except (ConfigError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote results to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
