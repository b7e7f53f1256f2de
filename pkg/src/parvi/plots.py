"""Figure rendering for run reports.

Every CLI report directory gets PNG figures next to the delimited output:
the particle cloud over the target density (2-D targets), the energy and
MMD^2 traces, and overlay comparisons across methods.  Rendering is
headless (Agg) and file-only.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update(
    {
        "figure.dpi": 120,
        "savefig.bbox": "tight",
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 9,
        "legend.framealpha": 0.8,
    }
)


def _density_contours(ax, target, xlim, ylim):
    xs = np.linspace(*xlim, 160)
    ys = np.linspace(*ylim, 160)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    try:
        v = target.potential(pts).reshape(gx.shape)
    except (ValueError, FloatingPointError):
        return
    dens = np.exp(-(v - v.min()))
    ax.contourf(gx, gy, dens, levels=12, cmap="Blues", alpha=0.55)


def save_particles_figure(positions, path, target=None, title=None):
    """Scatter of a 2-D particle cloud, shaded by the target density."""
    positions = np.asarray(positions)
    if positions.shape[1] != 2:
        return None
    fig, ax = plt.subplots(figsize=(4.2, 4.0))
    pad = 1.0
    xlim = (positions[:, 0].min() - pad, positions[:, 0].max() + pad)
    ylim = (positions[:, 1].min() - pad, positions[:, 1].max() + pad)
    if target is not None and getattr(target, "dim", None) == 2:
        _density_contours(ax, target, xlim, ylim)
    ax.plot(positions[:, 0], positions[:, 1], ".", ms=3, color="crimson", alpha=0.7)
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    if title:
        ax.set_title(title)
    fig.savefig(path)
    plt.close(fig)
    return path


def save_trace_figure(trace, path, title=None):
    """Free energy (and MMD^2 when present) against iteration and wall time."""
    it = trace.column("iteration")
    f = trace.column("free_energy")
    wall_s = trace.column("wall_ms") / 1e3
    mmd = trace.column("mmd2")
    has_mmd = np.any(np.isfinite(mmd))
    ncols = 2 if has_mmd else 1
    fig, axes = plt.subplots(1, ncols, figsize=(4.2 * ncols, 3.2), squeeze=False)
    ax = axes[0, 0]
    ax.plot(it, f, lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("free energy")
    if has_mmd:
        ax2 = axes[0, 1]
        mask = np.isfinite(mmd)
        ax2.semilogy(wall_s[mask], np.maximum(mmd[mask], 1e-12), "o-", ms=3, lw=1.0)
        ax2.set_xlabel("wall time [s]")
        ax2.set_ylabel("MMD$^2$")
    if title:
        fig.suptitle(title)
    fig.savefig(path)
    plt.close(fig)
    return path


def save_compare_figures(runs, out_dir, stem="compare"):
    """Overlay free-energy and MMD^2 trajectories for several methods.

    runs: list of (label, RunTrace).
    """
    paths = []
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    for label, trace in runs:
        ax.plot(trace.column("wall_ms") / 1e3, trace.column("free_energy"),
                lw=1.2, label=label)
    ax.set_xlabel("wall time [s]")
    ax.set_ylabel("free energy")
    ax.legend()
    p = out_dir / f"fig_{stem}_energy.png"
    fig.savefig(p)
    plt.close(fig)
    paths.append(p)

    if any(np.any(np.isfinite(t.column("mmd2"))) for _, t in runs):
        fig, ax = plt.subplots(figsize=(4.6, 3.4))
        for label, trace in runs:
            mmd = trace.column("mmd2")
            mask = np.isfinite(mmd)
            if not np.any(mask):
                continue
            ax.semilogy(trace.column("wall_ms")[mask] / 1e3,
                        np.maximum(mmd[mask], 1e-12), "o-", ms=3, lw=1.0, label=label)
        ax.set_xlabel("wall time [s]")
        ax.set_ylabel("MMD$^2$")
        ax.legend()
        p = out_dir / f"fig_{stem}_mmd2.png"
        fig.savefig(p)
        plt.close(fig)
        paths.append(p)
    return paths


def save_blr_figure(per_repeat, path):
    """Per-repeat final test accuracy and train log-likelihood with means."""
    acc = np.array([r["test_accuracy"] for r in per_repeat])
    ll = np.array([r["train_log_likelihood"] for r in per_repeat])
    reps = np.arange(1, len(per_repeat) + 1)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.0))
    ax1.plot(reps, acc, "o", ms=4)
    ax1.axhline(acc.mean(), color="crimson", lw=1.0,
                label=f"mean {acc.mean():.3f}")
    ax1.set_xlabel("repeat")
    ax1.set_ylabel("test accuracy")
    ax1.legend()
    ax2.plot(reps, ll, "o", ms=4, color="darkgreen")
    ax2.axhline(ll.mean(), color="crimson", lw=1.0,
                label=f"mean {ll.mean():.4f}")
    ax2.set_xlabel("repeat")
    ax2.set_ylabel("train log-likelihood")
    ax2.legend()
    fig.savefig(path)
    plt.close(fig)
    return path
