"""Budget-versus-final-level curves with the planning target drawn as a
dashed horizontal line; where a policy's curve crosses it is the budget the
planner would need."""

from __future__ import annotations

import sys

from .bundle import ResultsBundle, make_cli
from .style import new_figure, policy_color, save


def plot_capacity(bundle_dir, out_dir):
    bundle = ResultsBundle(bundle_dir)
    rows = bundle.capacity()
    summary = bundle.summary()
    target = summary.get("target")
    crossings = summary.get("crossings", {})
    policies = [p for p in bundle.policy_order() if any(r["policy"] == p for r in rows)]
    policies += sorted({r["policy"] for r in rows} - set(policies))

    fig, (ax,) = new_figure(n_panels=1, width=5.4)
    for k, policy in enumerate(policies):
        points = sorted(
            (r for r in rows if r["policy"] == policy), key=lambda r: r["budget"]
        )
        crossing = crossings.get(policy)
        suffix = f" (needs B={crossing})" if crossing is not None else " (not reached)"
        ax.plot(
            [r["budget"] for r in points],
            [r["achieved"] for r in points],
            marker="o",
            color=policy_color(k),
            label=policy + suffix,
        )
    if target is not None:
        ax.axhline(target, linestyle="--", color="black", linewidth=1, label="target")
    ax.set_xlabel("per-round budget")
    ax.set_ylabel("mean final-round reward per arm")
    ax.set_title("capacity planning")
    ax.legend(fontsize=8)
    return save(fig, out_dir, "capacity.png")


main = make_cli("Capacity planning curves from a capacity bundle", plot_capacity)

if __name__ == "__main__":
    sys.exit(main())
