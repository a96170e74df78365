"""Two panels from a run summary: mean Gini (lower is better) and mean
per-arm reward (higher is better) for each policy."""

from __future__ import annotations

import sys

from .bundle import EmptyResults, ResultsBundle, make_cli
from .style import new_figure, policy_color, save


def plot_gini_reward(bundle_dir, out_dir):
    bundle = ResultsBundle(bundle_dir)
    summary = bundle.summary()
    stats = summary.get("policies", {})
    if not stats:
        raise EmptyResults(f"summary in {bundle_dir} reports no policies")
    order = [p for p in bundle.policy_order() if p in stats]
    order += [p for p in stats if p not in order]

    fig, (ax_gini, ax_reward) = new_figure(n_panels=2)
    for k, policy in enumerate(order):
        ax_gini.bar(k, stats[policy]["mean_gini"], color=policy_color(k))
        ax_reward.bar(
            k,
            stats[policy]["mean_reward_per_arm"],
            yerr=stats[policy]["stderr_reward_per_arm"],
            capsize=3,
            color=policy_color(k),
        )
    for ax, title in ((ax_gini, "Gini (lower is better)"),
                      (ax_reward, "reward per arm (higher is better)")):
        ax.set_xticks(range(len(order)))
        ax.set_xticklabels(order, rotation=30, ha="right")
        ax.set_title(title)
    ax_gini.set_ylabel("mean Gini of group averages")
    ax_reward.set_ylabel("mean total reward / N")
    return save(fig, out_dir, "gini_reward.png")


main = make_cli("Gini and reward panels from a run bundle", plot_gini_reward)

if __name__ == "__main__":
    sys.exit(main())
