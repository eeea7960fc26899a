"""Figure rendering for the simulation report path.

Figures are written next to the trace CSV and report JSON; this is a batch
tool, so everything goes through the Agg backend and straight to files.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .sim import SimulationTrace, SlackReport


def _decimate(k: int, limit: int = 4000) -> int:
    return max(1, k // limit)


def render_figures(trace: SimulationTrace, slack: SlackReport, outdir,
                   prefix: str = "") -> list:
    """Render residual, estimation and dissipation figures; returns paths."""
    os.makedirs(outdir, exist_ok=True)
    N = trace.etahat.shape[0]
    n = trace.x.shape[1]
    step = _decimate(trace.t.shape[0])
    t = trace.t[::step]
    paths = []

    fig, axes = plt.subplots(N, 1, sharex=True, figsize=(7, 2.2 * N),
                             squeeze=False)
    for i in range(N):
        ax = axes[i, 0]
        for k in range(n):
            ax.plot(t, trace.etahat[i][::step, k], label=f"residual[{k}]")
            ax.plot(t, trace.f[i][::step, k], "--", lw=1.0,
                    label=f"attack[{k}]")
        ax.set_ylabel(f"node {i + 1}")
        ax.grid(alpha=0.3)
        if i == 0:
            ax.legend(loc="upper right", fontsize=8, ncol=2)
    axes[-1, 0].set_xlabel("time (s)")
    fig.suptitle("attack residuals vs injected attacks")
    fig.tight_layout()
    p = os.path.join(outdir, f"{prefix}residuals.png")
    fig.savefig(p, dpi=110)
    plt.close(fig)
    paths.append(p)

    fig, axes = plt.subplots(n, 1, sharex=True, figsize=(7, 2.2 * n),
                             squeeze=False)
    for k in range(n):
        ax = axes[k, 0]
        ax.plot(t, trace.x[::step, k], "k", lw=1.6, label="plant")
        for i in range(N):
            ax.plot(t, trace.xhat[i][::step, k], lw=0.9,
                    label=f"node {i + 1}")
        ax.set_ylabel(f"x[{k}]")
        ax.grid(alpha=0.3)
        if k == 0:
            ax.legend(loc="upper right", fontsize=8, ncol=2)
    axes[-1, 0].set_xlabel("time (s)")
    fig.suptitle("plant state and node estimates")
    fig.tight_layout()
    p = os.path.join(outdir, f"{prefix}estimates.png")
    fig.savefig(p, dpi=110)
    plt.close(fig)
    paths.append(p)

    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    for i in range(N):
        ax1.plot(t, trace.V[i][::step], label=f"node {i + 1}")
    ax1.set_ylabel("storage V_i")
    ax1.grid(alpha=0.3)
    ax1.legend(fontsize=8)
    tc = trace.t[1:-1][::step]
    ax2.plot(tc, slack.slack_curve[::step], lw=0.9)
    ax2.axhline(0.0, color="r", lw=0.8)
    ax2.set_ylabel("worst normalized slack")
    ax2.set_xlabel("time (s)")
    ax2.grid(alpha=0.3)
    fig.suptitle("dissipation along the trajectory")
    fig.tight_layout()
    p = os.path.join(outdir, f"{prefix}dissipation.png")
    fig.savefig(p, dpi=110)
    plt.close(fig)
    paths.append(p)
    return paths
