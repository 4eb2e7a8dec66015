"""Static SVG figures. Output is byte-stable for identical inputs."""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .graphs import Graph  # noqa: E402

_STYLE = {
    "svg.hashsalt": "graphtrace",
    "svg.fonttype": "none",
    "path.simplify": False,
    "figure.figsize": (5.0, 4.0),
    "font.size": 9,
}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def embedding_figure(g: Graph, coords: np.ndarray, path, nodes=None, labels=None, title: str = "") -> None:
    """Scatter of planar node coordinates with the graph's edges drawn underneath.

    ``nodes`` maps rows of ``coords`` to node indices (default: all nodes).
    """
    coords = np.asarray(coords, dtype=np.float64)
    nodes = np.arange(g.n) if nodes is None else np.asarray(nodes)
    where = {int(v): i for i, v in enumerate(nodes)}
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for a, b in g.edges:
            if a in where and b in where:
                p, q = coords[where[a]], coords[where[b]]
                ax.plot([p[0], q[0]], [p[1], q[1]], color="0.7", lw=0.8, zorder=1)
        ax.scatter(coords[:, 0], coords[:, 1], c=np.arange(len(nodes)), cmap="viridis", s=30, zorder=2)
        if labels is not None:
            for (x, y), lab in zip(coords, labels):
                ax.annotate(str(lab), (x, y), fontsize=6, xytext=(3, 3), textcoords="offset points")
        ax.set_xlabel("component 1")
        ax.set_ylabel("component 2")
        if title:
            ax.set_title(title)
        _save(fig, path)


def curves_figure(
    lengths: Sequence[float],
    series: Mapping[str, Sequence[float]],
    path,
    ylabel: str = "",
    logx: bool = True,
    logy: bool = False,
    title: str = "",
) -> None:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for name, ys in series.items():
            ax.plot(lengths, ys, marker="o", ms=3, label=name)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel("context length")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(fontsize=7)
        _save(fig, path)


def energy_accuracy_figure(lengths, energy, accuracy, path, title: str = "") -> None:
    """Energy (left axis) and accuracy (right axis) against context length."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(lengths, energy, color="tab:blue", marker="o", ms=3)
        ax.set_xscale("log")
        ax.set_xlabel("context length")
        ax.set_ylabel("standardized energy", color="tab:blue")
        ax2 = ax.twinx()
        ax2.plot(lengths, accuracy, color="tab:red", marker="s", ms=3)
        ax2.set_ylabel("rule-following accuracy", color="tab:red")
        ax2.set_ylim(0, 1.05)
        if title:
            ax.set_title(title)
        _save(fig, path)


def breakpoint_figure(x, y, fit, path, title: str = "") -> None:
    """Observed curve and fitted two-piece line in log-log axes."""
    x = np.asarray(x, dtype=np.float64)
    y = np.maximum(np.asarray(y, dtype=np.float64), 1e-6)
    grid = np.geomspace(x.min(), x.max(), 200)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.loglog(x, y, "o", ms=3, label="observed")
        ax.loglog(grid, fit.predict(grid), "-", label="two-piece fit")
        ax.axvline(fit.knot, color="0.5", ls="--", lw=0.8, label=f"knot {fit.knot:.4g}")
        ax.set_xlabel("context length")
        ax.set_ylabel("accuracy")
        if title:
            ax.set_title(title)
        ax.legend(fontsize=7)
        _save(fig, path)


def power_law_figure(fit, path, references: Mapping[str, float] | None = None, title: str = "") -> None:
    """Log-log scatter of transition points with the fitted line and reference slopes."""
    pts = np.asarray(fit.points, dtype=np.float64)
    grid = np.geomspace(pts[:, 0].min(), pts[:, 0].max(), 100)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.loglog(pts[:, 0], pts[:, 1], "o", label="transition points")
        ax.loglog(grid, fit.predict(grid), "-", label=f"fit, exponent {fit.exponent:.3f}")
        # reference slopes are anchored at the first point for comparison only
        for name, slope in sorted((references or {}).items()):
            anchor = pts[0, 1] * (grid / pts[0, 0]) ** slope
            ax.loglog(grid, anchor, ":", lw=0.8, label=f"reference {name} {slope:g}")
        ax.set_xlabel("graph size (nodes)")
        ax.set_ylabel("transition point")
        if title:
            ax.set_title(title)
        ax.legend(fontsize=7)
        _save(fig, path)
