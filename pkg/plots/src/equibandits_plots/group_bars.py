"""Grouped bars of per-group average outcomes by policy, plus an all-arms panel."""

from __future__ import annotations

import sys

import numpy as np

from .bundle import ResultsBundle, make_cli
from .style import new_figure, policy_color, save


def _mean_stderr(values):
    arr = np.asarray(values, dtype=float)
    stderr = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return float(arr.mean()), stderr


def _collect(records, policy_order):
    policies = [p for p in policy_order if any(r["policy"] == p for r in records)]
    for r in records:
        if r["policy"] not in policies:
            policies.append(r["policy"])
    groups = sorted({r["group"] for r in records})
    seeds = sorted({r["seed"] for r in records})
    per_group = {}
    overall = {}
    for policy in policies:
        rows = [r for r in records if r["policy"] == policy]
        for g in groups:
            values = [
                r["group_total_reward"] / r["group_size"]
                for r in rows
                if r["group"] == g
            ]
            per_group[(policy, g)] = _mean_stderr(values)
        totals = []
        for seed in seeds:
            seed_rows = [r for r in rows if r["seed"] == seed]
            totals.append(
                sum(r["group_total_reward"] for r in seed_rows)
                / sum(r["group_size"] for r in seed_rows)
            )
        overall[policy] = _mean_stderr(totals)
    return policies, groups, per_group, overall


def plot_group_bars(bundle_dir, out_dir):
    bundle = ResultsBundle(bundle_dir)
    policies, groups, per_group, overall = _collect(
        bundle.records(), bundle.policy_order()
    )
    fig, (ax_groups, ax_all) = new_figure(n_panels=2, width=5.4)
    width = 0.8 / len(policies)
    base = np.arange(len(groups), dtype=float)
    for k, policy in enumerate(policies):
        means = [per_group[(policy, g)][0] for g in groups]
        errs = [per_group[(policy, g)][1] for g in groups]
        ax_groups.bar(
            base + (k - (len(policies) - 1) / 2) * width,
            means,
            width=width,
            yerr=errs,
            capsize=2,
            color=policy_color(k),
            label=policy,
        )
    ax_groups.set_xticks(base)
    ax_groups.set_xticklabels([f"group {g}" for g in groups])
    ax_groups.set_ylabel("average reward per arm")
    ax_groups.set_title("group outcomes")
    ax_groups.legend(fontsize=8)

    for k, policy in enumerate(policies):
        mean, err = overall[policy]
        ax_all.bar(k, mean, yerr=err, capsize=3, color=policy_color(k))
    ax_all.set_xticks(range(len(policies)))
    ax_all.set_xticklabels(policies, rotation=30, ha="right")
    ax_all.set_ylabel("average reward per arm")
    ax_all.set_title("all arms")
    return save(fig, out_dir, "group_bars.png")


main = make_cli("Per-group outcome bars from a run bundle", plot_group_bars)

if __name__ == "__main__":
    sys.exit(main())
