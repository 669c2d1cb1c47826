"""Figure rendering for region sweeps, trade-off curves, and traces.

Everything draws through the Agg backend straight to files, so the module
is safe on headless machines and never opens a window.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_COLORS = plt.get_cmap("tab10").colors


def _draw_boundary(ax, result, color, label) -> None:
    """One class's membership boundary; a proxy line keeps the legend
    entry even when the region covers everything or nothing."""
    z = result.feasible.astype(float)
    if z.min() != z.max():
        X, Y = np.meshgrid(result.axis1, result.axis2, indexing="ij")
        ax.contour(X, Y, z, levels=[0.5], colors=[color], linewidths=1.6)
    suffix = ""
    if z.min() == z.max():
        suffix = " (all)" if z.min() > 0 else " (empty)"
    ax.plot([], [], color=color, lw=1.6, label=label + suffix)


def plot_region(results, path, title: str = "", log_axes: bool = False,
                xlabel: str = "axis 1", ylabel: str = "axis 2") -> None:
    """Feasibility boundaries for each policy class on one axis plane."""
    fig, ax = plt.subplots(figsize=(6.4, 5.2), dpi=130)
    for idx, (cls, rr) in enumerate(results.items()):
        color = _COLORS[idx % len(_COLORS)]
        if idx == 0 and rr.feasible.any():
            X, Y = np.meshgrid(rr.axis1, rr.axis2, indexing="ij")
            ax.contourf(X, Y, rr.feasible.astype(float), levels=[0.5, 1.5],
                        colors=[color], alpha=0.12)
        _draw_boundary(ax, rr, color, cls)
    if log_axes:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_tradeoff(curves, path, title: str = "") -> None:
    """Average queue against average distortion, one line per labelled
    curve; curves is a list of (label, points, style dict)."""
    fig, ax = plt.subplots(figsize=(6.4, 5.0), dpi=130)
    for idx, (label, points, style) in enumerate(curves):
        kw = {"color": _COLORS[idx % len(_COLORS)], "marker": "o",
              "markersize": 3, "lw": 1.4}
        kw.update(style or {})
        ax.plot([p.avg_distortion for p in points],
                [p.avg_queue for p in points], label=label, **kw)
    ax.set_xlabel("average distortion")
    ax.set_ylabel("average queue length")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_trace(trace, path, title: str = "", d_bar=None) -> None:
    """Queue trajectory and the running distortion mean for one run."""
    n = len(trace.queue_bits)
    stride = max(1, n // 20_000)
    slots = np.arange(n)[::stride]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.2, 5.6), dpi=130,
                                   sharex=True)
    ax1.plot(slots, trace.queue_bits[::stride], lw=0.7)
    ax1.set_ylabel("queue (bits)")
    ax1.grid(alpha=0.3)
    running = np.cumsum(trace.distortion) / np.arange(1, n + 1)
    ax2.plot(slots, running[::stride], lw=1.0, label="running mean distortion")
    if d_bar is not None:
        ax2.axhline(d_bar, color="k", ls="--", lw=0.9, label="target")
    ax2.set_xlabel("slot")
    ax2.set_ylabel("distortion")
    ax2.grid(alpha=0.3)
    ax2.legend(loc="best", fontsize=9)
    if title:
        ax1.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_schedule(sweeps, path, title: str = "",
                  xlabel: str = "axis 1", ylabel: str = "axis 2") -> None:
    """Side-by-side region panels, one per pinned-sensor configuration;
    sweeps is a list of (panel label, {name: RegionResult})."""
    n = max(1, len(sweeps))
    fig, axes = plt.subplots(1, n, figsize=(5.4 * n, 4.8), dpi=130,
                             squeeze=False)
    for ax, (label, results) in zip(axes[0], sweeps):
        for idx, (name, rr) in enumerate(results.items()):
            _draw_boundary(ax, rr, _COLORS[idx % len(_COLORS)], name)
        ax.set_title(label, fontsize=10)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        ax.legend(loc="best", fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
