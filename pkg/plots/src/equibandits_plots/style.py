"""Shared figure style; Agg only, so rendering is headless and repeatable."""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

PALETTE = (
    "#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb",
    "#222222",
)
DPI = 150


def policy_color(i):
    return PALETTE[i % len(PALETTE)]


def new_figure(n_panels=1, width=4.8):
    fig, axes = plt.subplots(
        1, n_panels, figsize=(width * n_panels, 3.6), dpi=DPI, squeeze=False
    )
    return fig, axes[0]


def save(fig, out_dir, name):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
