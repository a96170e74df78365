"""Engagement-versus-clinical trade-off curves over the reward weight."""

from __future__ import annotations

import sys

from .bundle import ResultsBundle, make_cli
from .style import new_figure, policy_color, save


def plot_pareto(bundle_dir, out_dir):
    bundle = ResultsBundle(bundle_dir)
    rows = bundle.pareto()
    policies = [p for p in bundle.policy_order() if any(r["policy"] == p for r in rows)]
    policies += sorted({r["policy"] for r in rows} - set(policies))

    fig, (ax,) = new_figure(n_panels=1, width=5.4)
    for k, policy in enumerate(policies):
        points = sorted(
            (r for r in rows if r["policy"] == policy), key=lambda r: r["alpha"]
        )
        xs = [r["clinical_per_arm"] for r in points]
        ys = [r["engagement_per_arm"] for r in points]
        ax.errorbar(
            xs,
            ys,
            xerr=[r["clinical_stderr"] for r in points],
            yerr=[r["engagement_stderr"] for r in points],
            marker="o",
            capsize=2,
            color=policy_color(k),
            label=policy,
        )
        for r in points:
            ax.annotate(
                f"a={r['alpha']:g}",
                (r["clinical_per_arm"], r["engagement_per_arm"]),
                textcoords="offset points",
                xytext=(4, 4),
                fontsize=7,
            )
    ax.set_xlabel("clinical reward per arm")
    ax.set_ylabel("engagement reward per arm")
    ax.set_title("engagement vs. clinical trade-off")
    ax.legend(fontsize=8)
    return save(fig, out_dir, "pareto.png")


main = make_cli("Trade-off curve from a pareto bundle", plot_pareto)

if __name__ == "__main__":
    sys.exit(main())
