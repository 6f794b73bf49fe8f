"""Render run artifacts as PNG figures.

Every CSV a command writes has a matching picture so results can be
eyeballed without spinning up a notebook. All functions take explicit
data and a target path, force the Agg backend, and close their figure
before returning, so they are safe to call from worker processes and
from tests.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .benchmarks import METHODS, BenchmarkReport

_DPI = 150

_METHOD_LABELS = {
    "optimized_lrc": "optimized linear",
    "random_lrc": "random linear",
    "nlrc_tanh": "tanh reservoir",
    "nlrc_relu": "relu reservoir",
}


def save_fit_overlay(path, times, target, fit, title="readout fit"):
    """Target and reconstruction on one axis, residual underneath."""
    times = np.asarray(times, dtype=float)
    target = np.asarray(target, dtype=float)
    fit = np.asarray(fit, dtype=float)
    fig, (ax_top, ax_res) = plt.subplots(
        2, 1, figsize=(8.0, 5.0), sharex=True, height_ratios=[3, 1]
    )
    ax_top.plot(times, target, color="black", lw=1.0, label="target")
    ax_top.plot(times, fit, color="tab:red", lw=1.0, ls="--", label="fit")
    ax_top.set_ylabel("output")
    ax_top.set_title(title)
    ax_top.legend(loc="upper right", fontsize=8)
    ax_res.plot(times, fit - target, color="tab:blue", lw=0.8)
    ax_res.axhline(0.0, color="gray", lw=0.5)
    ax_res.set_xlabel("time")
    ax_res.set_ylabel("residual")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_state_traces(path, times, states, max_traces=12, title="reservoir states"):
    """First few state trajectories, one line per node."""
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    n_show = min(states.shape[1], max_traces)
    fig, ax = plt.subplots(figsize=(8.0, 4.0))
    for i in range(n_show):
        ax.plot(times, states[:, i], lw=0.8)
    if states.shape[1] > n_show:
        title = f"{title} (first {n_show} of {states.shape[1]} nodes)"
    ax.set_xlabel("time")
    ax.set_ylabel("state")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_sweep_curves(path, report: BenchmarkReport, which="test"):
    """Mean NRMSE with a one-sigma band per method across the sweep."""
    if which not in ("train", "test"):
        raise ValueError("which must be 'train' or 'test'")
    spec = report.spec
    values = np.asarray(spec.sweep_values, dtype=float)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for method in METHODS:
        means = []
        stds = []
        for sv in spec.sweep_values:
            stats = report.cell(method, sv)
            if which == "train":
                means.append(stats.mean_train)
                stds.append(stats.std_train)
            else:
                means.append(stats.mean_test)
                stds.append(stats.std_test)
        means = np.asarray(means)
        stds = np.asarray(stds)
        line, = ax.plot(values, means, marker="o", ms=4, label=_METHOD_LABELS[method])
        ax.fill_between(
            values, means - stds, means + stds, alpha=0.15, color=line.get_color()
        )
    ax.set_xlabel(spec.sweep_var.replace("_", " "))
    ax.set_ylabel(f"{which} NRMSE")
    ax.set_yscale("log")
    ax.set_title(
        f"{spec.mode.replace('_', ' ')} (fixed value {spec.fixed_value}, "
        f"{spec.trials} trials)"
    )
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_sensitivity_curve(path, rows, title="spectrum perturbation sensitivity"):
    """Mean NRMSE against perturbation scale, log-log with a zero inset."""
    rows = list(rows)
    eps = np.array([row.epsilon for row in rows], dtype=float)
    means = np.array([row.mean_nrmse for row in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    positive = eps > 0.0
    ax.plot(eps[positive], means[positive], marker="o", color="tab:blue")
    if np.any(~positive):
        # The unperturbed baseline has no place on a log axis; show it
        # as a horizontal reference line instead.
        base = float(means[~positive][0])
        ax.axhline(base, color="gray", ls=":", lw=1.0, label=f"baseline {base:.3g}")
        ax.legend(fontsize=8)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("perturbation scale")
    ax.set_ylabel("mean NRMSE")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_beta_grid(path, cells, which="mean_train_nrmse", title=None):
    """Heatmap of the regularization study over the two penalty weights."""
    cells = list(cells)
    beta1_values = sorted({cell.beta1 for cell in cells}, reverse=True)
    beta2_values = sorted({cell.beta2 for cell in cells})
    grid = np.full((len(beta1_values), len(beta2_values)), np.nan)
    lookup = {(cell.beta1, cell.beta2): cell for cell in cells}
    for i, b1 in enumerate(beta1_values):
        for j, b2 in enumerate(beta2_values):
            cell = lookup[(b1, b2)]
            grid[i, j] = getattr(cell, which)
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    with np.errstate(divide="ignore"):
        image = ax.imshow(np.log10(grid), cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(beta2_values)))
    ax.set_xticklabels([f"{b:g}" for b in beta2_values])
    ax.set_yticks(range(len(beta1_values)))
    ax.set_yticklabels([f"{b:g}" for b in beta1_values])
    ax.set_xlabel("spread weight")
    ax.set_ylabel("fit penalty weight")
    ax.set_title(title or which.replace("_", " "))
    for i in range(len(beta1_values)):
        for j in range(len(beta2_values)):
            ax.text(
                j, i, f"{grid[i, j]:.2e}", ha="center", va="center",
                color="white", fontsize=8,
            )
    fig.colorbar(image, ax=ax, label=f"log10 {which.replace('_', ' ')}")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
