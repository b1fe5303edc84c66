"""Matplotlib renderers for the CLI report path.

Every function draws onto a fresh ``matplotlib.figure.Figure`` (no pyplot
state, so rendering is thread-safe and backend-independent) and writes a PNG.
PNG output carries no timestamps, keeping repeated runs bit-identical; the
producing manifest id is embedded as image metadata.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from matplotlib.figure import Figure
from matplotlib.patches import FancyArrowPatch

from .evaluation import EmpiricalCdf, PrCurve
from .model import BranchingEstimate, EventSequence

_DPI = 150


def _save(fig: Figure, path: str | Path, manifest_id: str | None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Description": f"manifest_id={manifest_id}"} if manifest_id else None
    fig.savefig(path, dpi=_DPI, metadata=metadata)
    return path


def save_event_raster(
    seq: EventSequence,
    path: str | Path,
    vocabulary: Sequence[str] | None = None,
    manifest_id: str | None = None,
) -> Path:
    """One lane per type with a tick at each event time."""
    labels = list(vocabulary) if vocabulary else [str(u) for u in range(seq.num_types)]
    fig = Figure(figsize=(9, 0.6 * seq.num_types + 1.2), constrained_layout=True)
    ax = fig.subplots()
    for u in range(seq.num_types):
        times = seq.times[seq.types == u]
        ax.plot(times, np.full(times.size, u), "|", markersize=9, color=f"C{u % 10}")
    ax.set_yticks(range(seq.num_types), labels)
    ax.set_xlim(0, seq.horizon)
    ax.set_ylim(-0.7, seq.num_types - 0.3)
    ax.set_xlabel("time (days)")
    ax.set_title(f"{len(seq)} events over {seq.horizon:g} days")
    return _save(fig, path, manifest_id)


def save_day_profile(
    delta: np.ndarray, path: str | Path, manifest_id: str | None = None
) -> Path:
    delta = np.asarray(delta, dtype=float)
    fig = Figure(figsize=(5, 3), constrained_layout=True)
    ax = fig.subplots()
    ax.bar(np.arange(delta.size), delta, color="C0")
    ax.axhline(1.0, color="0.5", linewidth=0.8, linestyle="--")
    ax.set_xlabel("day of week")
    ax.set_ylabel("background multiplier")
    ax.set_xticks(range(delta.size))
    return _save(fig, path, manifest_id)


def _heatmap(ax, matrix: np.ndarray, labels: Sequence[str], title: str) -> None:
    image = ax.imshow(matrix, cmap="viridis", aspect="equal")
    ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right", fontsize=7)
    ax.set_yticks(range(len(labels)), labels, fontsize=7)
    ax.set_xlabel("child type")
    ax.set_ylabel("parent type")
    ax.set_title(title, fontsize=9)
    ax.figure.colorbar(image, ax=ax, fraction=0.046)


def save_excitation_heatmap(
    matrix: np.ndarray,
    path: str | Path,
    labels: Sequence[str] | None = None,
    manifest_id: str | None = None,
) -> Path:
    matrix = np.asarray(matrix, dtype=float)
    labels = list(labels) if labels else [str(u) for u in range(matrix.shape[0])]
    fig = Figure(figsize=(5.5, 4.5), constrained_layout=True)
    _heatmap(fig.subplots(), matrix, labels, "excitation (parent row, child column)")
    return _save(fig, path, manifest_id)


def save_matrix_comparison(
    left: np.ndarray,
    right: np.ndarray,
    path: str | Path,
    labels: Sequence[str] | None = None,
    titles: tuple[str, str] = ("same-day co-occurrence", "fitted excitation"),
    manifest_id: str | None = None,
) -> Path:
    """Side-by-side heatmaps, each scaled to its own maximum."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    labels = list(labels) if labels else [str(u) for u in range(left.shape[0])]
    fig = Figure(figsize=(10, 4.5), constrained_layout=True)
    axes = fig.subplots(1, 2)
    _heatmap(axes[0], left, labels, titles[0])
    _heatmap(axes[1], right, labels, titles[1])
    return _save(fig, path, manifest_id)


def save_branching_diagram(
    seq: EventSequence,
    branching: BranchingEstimate,
    path: str | Path,
    vocabulary: Sequence[str] | None = None,
    max_events: int = 150,
    manifest_id: str | None = None,
) -> Path:
    """Event timeline with an arc from each event to its likeliest parent.

    An arc is drawn only when some parent is more probable than the
    background explanation; background-attributed events appear as filled
    markers.  Long sequences are truncated to the first ``max_events``.
    """
    labels = list(vocabulary) if vocabulary else [str(u) for u in range(seq.num_types)]
    n = min(len(seq), max_events)
    fig = Figure(figsize=(10, 0.6 * seq.num_types + 1.6), constrained_layout=True)
    ax = fig.subplots()
    times, types = seq.times[:n], seq.types[:n]
    best_parent = np.full(n, -1, dtype=np.int64)
    best_prob = branching.background[:n].copy()
    for child, parent, prob in zip(
        branching.child, branching.parent, branching.probability
    ):
        if child < n and prob > best_prob[child]:
            best_prob[child] = prob
            best_parent[child] = parent
    for i in range(n):
        color = f"C{types[i] % 10}"
        filled = best_parent[i] < 0
        ax.plot(
            times[i],
            types[i],
            "o",
            markersize=5,
            markerfacecolor=color if filled else "white",
            markeredgecolor=color,
        )
        if best_parent[i] >= 0:
            j = best_parent[i]
            arc = FancyArrowPatch(
                (times[j], types[j]),
                (times[i], types[i]),
                connectionstyle="arc3,rad=-0.25",
                arrowstyle="-|>",
                mutation_scale=8,
                linewidth=0.7,
                color="0.45",
                alpha=min(1.0, 0.3 + 0.7 * best_prob[i]),
            )
            ax.add_patch(arc)
    ax.set_yticks(range(seq.num_types), labels)
    ax.set_ylim(-0.8, seq.num_types - 0.2)
    ax.set_xlabel("time (days)")
    ax.set_title("most likely parent per event (filled = background)")
    return _save(fig, path, manifest_id)


def save_cdf_overlay(
    data_cdf: EmpiricalCdf,
    simulated_cdfs: Sequence[EmpiricalCdf],
    path: str | Path,
    manifest_id: str | None = None,
) -> Path:
    """Data inter-event CDF over a bundle of simulated ones."""
    fig = Figure(figsize=(6, 4), constrained_layout=True)
    ax = fig.subplots()
    grids = [cdf.breakpoints() for cdf in simulated_cdfs] + [data_cdf.breakpoints()]
    upper = max(float(g[-1]) for g in grids if g.size)
    grid = np.linspace(0.0, upper, 512)
    for k, cdf in enumerate(simulated_cdfs):
        ax.step(
            grid,
            cdf(grid),
            where="post",
            color="C0",
            alpha=0.25,
            linewidth=0.8,
            label="model" if k == 0 else None,
        )
    ax.step(grid, data_cdf(grid), where="post", color="C3", linewidth=1.8, label="data")
    ax.set_xlabel("inter-event gap (days)")
    ax.set_ylabel("cumulative probability")
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right")
    return _save(fig, path, manifest_id)


def save_pr_curves(
    curves: Mapping[str, Mapping[str, PrCurve]],
    path: str | Path,
    manifest_id: str | None = None,
) -> Path:
    """Grid of precision-recall panels: one per type label, one line per model."""
    type_labels = list(curves)
    cols = min(5, max(1, len(type_labels)))
    nrows = (len(type_labels) + cols - 1) // cols
    fig = Figure(figsize=(3.2 * cols, 2.8 * nrows), constrained_layout=True)
    axes = np.atleast_1d(fig.subplots(nrows, cols)).reshape(-1)
    for ax in axes[len(type_labels):]:
        ax.set_axis_off()
    for ax, label in zip(axes, type_labels):
        for k, (model, curve) in enumerate(curves[label].items()):
            ax.plot(
                curve.recall,
                curve.precision,
                color=f"C{k}",
                label=f"{model} (AP={curve.average_precision:.3f})",
            )
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.05)
        ax.set_title(str(label), fontsize=9)
        ax.set_xlabel("recall", fontsize=8)
        ax.set_ylabel("precision", fontsize=8)
        ax.legend(fontsize=6, loc="lower left")
    return _save(fig, path, manifest_id)
