"""Figures written next to the CSV/JSON outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

LABELS = {
    "l2_u": r"$\|u\|_{L^2}$",
    "hsigma_u": r"$\|(-\Delta)^{\sigma/2}u\|_{L^2}$",
    "l2_ut": r"$\|\partial_t u\|_{L^2}$",
}


def _style(ax):
    ax.grid(True, which="both", alpha=0.3)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)


def plot_trajectory(traj, gamma, report, path):
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
    t = traj.times
    keep = t > 0
    for name, values in traj.diagnostics().items():
        pos = keep & (values > 0)
        if pos.any():
            ax.loglog(1 + t[pos], values[pos], label=LABELS[name])
    lo, hi = report.window
    if hi > lo and traj.l2_u[-1] > 0:
        ref_t = np.linspace(lo, hi, 50)
        scale = traj.l2_u[-1] * (1 + t[-1]) ** gamma
        ax.loglog(1 + ref_t, scale * (1 + ref_t) ** -gamma, "k--", lw=1,
                  label=rf"$(1+t)^{{-{gamma:g}}}$")
        ax.axvspan(1 + lo, 1 + hi, color="0.9", zorder=0)
    ax.set_xlabel("1 + t")
    ax.set_title("diagnostics")
    ax.legend(frameon=False, fontsize=9)
    _style(ax)

    ws = traj.weighted_sum(gamma)
    ax2.semilogx(1 + t[keep], ws[keep])
    ax2.set_xlabel("1 + t")
    ax2.set_title(r"$(1+t)^\gamma$ (sum of diagnostics)")
    _style(ax2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(rows, axis, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [r[axis] for r in rows]
    for name in LABELS:
        key = f"slope_{name}"
        ys = [r.get(key, float("nan")) for r in rows]
        ax.plot(xs, ys, "o-", label=LABELS[name])
    gammas = {r.get("gamma") for r in rows}
    if len(gammas) == 1:
        g = gammas.pop()
        ax.axhline(-g, color="k", ls="--", lw=1, label=r"$-\gamma$")
    ax.set_xlabel(axis)
    ax.set_ylabel("fitted slope")
    ax.legend(frameon=False, fontsize=9)
    _style(ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_lemma_ratios(checks, title, path):
    """``checks`` maps a label to a LemmaCheck."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, chk in checks.items():
        ax.semilogx(chk.times, chk.ratios, lw=1, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("ratio")
    ax.set_title(title)
    if len(checks) <= 10:
        ax.legend(frameon=False, fontsize=7)
    _style(ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
