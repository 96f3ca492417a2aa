"""Matplotlib figures for sweep results, written next to the sweep CSV."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.2),
    "figure.dpi": 120,
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_effective_accuracy(rows, profile_set, path):
    rates = [r.rate for r in rows]
    fig, ax = plt.subplots()
    ax.plot(rates, [r.measured_p_eff for r in rows], color="k", label="scheduler")
    if rows and rows[0].baselines:
        for i, sm in enumerate(profile_set.sub_models):
            ax.plot(rates, [r.baselines[i] for r in rows], ls="--", label=f"static r={sm.slice_rate:g}")
    ax.set_xlabel("ingest rate (instances/s)")
    ax.set_ylabel("effective accuracy")
    ax.legend()
    return _save(fig, path)


def plot_throughput(rows, profile_set, path):
    fig, ax = plt.subplots()
    ax.plot([r.rate for r in rows], [r.throughput for r in rows], color="C0")
    ax.set_xlabel("ingest rate (instances/s)")
    ax.set_ylabel("throughput (instances/s)")
    return _save(fig, path)


def plot_latency(rows, profile_set, path):
    rates = [r.rate for r in rows]
    fig, ax = plt.subplots()
    for attr, label in (("p50_ms", "p50"), ("p95_ms", "p95"), ("p99_ms", "p99")):
        ax.plot(rates, [getattr(r, attr) for r in rows], label=label)
    ax.set_xlabel("ingest rate (instances/s)")
    ax.set_ylabel("latency (ms)")
    ax.legend()
    return _save(fig, path)


def plot_submodel_mix(rows, profile_set, path):
    rates = np.array([r.rate for r in rows])
    counts = np.array([r.counts for r in rows], dtype=float).reshape(len(rows), profile_set.K)
    totals = counts.sum(axis=1, keepdims=True)
    share = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    fig, ax = plt.subplots()
    ax.stackplot(rates, share.T, labels=[f"r={r:g}" for r in profile_set.slice_rates], alpha=0.85)
    ax.set_xlabel("ingest rate (instances/s)")
    ax.set_ylabel("share of mini-batches")
    ax.set_ylim(0, 1)
    ax.legend(loc="lower left")
    return _save(fig, path)


FIGURES = {
    "effective_accuracy": plot_effective_accuracy,
    "throughput": plot_throughput,
    "latency": plot_latency,
    "submodel_mix": plot_submodel_mix,
}


def render_sweep_figures(rows, profile_set, out_dir, stem="sweep", fmt="png"):
    """Write one figure per entry of :data:`FIGURES`; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    with plt.rc_context(STYLE):
        for name, fn in FIGURES.items():
            paths.append(fn(rows, profile_set, out_dir / f"{stem}_{name}.{fmt}"))
    return paths
