"""SVG figures: partition panels, error-vs-calls tradeoff and hull overlays.

Figures are built on ``matplotlib.figure.Figure`` directly (no pyplot state)
and written atomically. SVG ids are salted and the date stamp is dropped so
the output is reproducible.
"""

from __future__ import annotations

import matplotlib as mpl
import numpy as np
from matplotlib.figure import Figure
from matplotlib.patches import Polygon as PolygonPatch
from matplotlib.patches import Rectangle

from .geometry import BoxBound, Hull2D, LowerBounds
from .network import Box, SampleSet
from .report import atomic_path

CANVAS_PT = (800, 400)
MAX_SCATTER = 2000
PROPAGATOR_COLORS = {"ibp": "tab:blue", "fastlin": "tab:green", "crown": "tab:orange"}
PARTITIONER_MARKERS = {"none": "s", "uniform": "D", "sg": "o", "gsg": "^", "agsg": "v"}


def _save(fig: Figure, path) -> None:
    with mpl.rc_context({"svg.hashsalt": "nnreach", "svg.fonttype": "none"}):
        with atomic_path(path, suffix=".svg") as tmp:
            fig.savefig(tmp, format="svg", metadata={"Date": None})


def _new_figure(ncols=1) -> Figure:
    w, h = CANVAS_PT
    fig = Figure(figsize=(w / 72.0, h / 72.0), dpi=72)
    axes = fig.subplots(1, ncols)
    return fig, axes


def _thin(points: np.ndarray) -> np.ndarray:
    step = max(1, int(np.ceil(points.shape[0] / MAX_SCATTER)))
    return points[::step]


def _rect(box: Box, **kwargs) -> Rectangle:
    return Rectangle((box.lo[0], box.lo[1]), box.widths[0], box.widths[1], **kwargs)


def _draw_estimate(ax, estimate, color="black"):
    if isinstance(estimate, BoxBound):
        patch = _rect(estimate.box, fill=False, edgecolor=color, linewidth=1.5)
        patch.set_gid("estimate")
        ax.add_patch(patch)
    elif isinstance(estimate, Hull2D):
        v = estimate.polygon.vertices
        patch = PolygonPatch(v, closed=True, fill=False, edgecolor=color, linewidth=1.5)
        patch.set_gid("estimate")
        ax.add_patch(patch)
    elif isinstance(estimate, LowerBounds):
        ax.axvline(estimate.lower[0], color=color, linewidth=1.5, gid="estimate-x")
        ax.axhline(estimate.lower[1], color=color, linewidth=1.5, gid="estimate-y")


def render_svg(result, truth: SampleSet, path, title: str = "") -> None:
    """Input partition (left) and output cells, estimate and truth samples (right)."""
    cells = result.cells
    if not cells or cells[0].region.dim != 2 or cells[0].output.dim != 2 or truth.points.shape[1] != 2:
        raise ValueError("render_svg needs 2-D inputs and outputs")
    fig, (ax_in, ax_out) = _new_figure(2)

    for i, cell in enumerate(cells):
        patch = _rect(cell.region, fill=False, edgecolor="tab:blue", linewidth=0.5)
        patch.set_gid(f"input-cell-{i}")
        ax_in.add_patch(patch)
        out = _rect(cell.output, fill=False, edgecolor="tab:blue", linewidth=0.4, alpha=0.6)
        out.set_gid(f"output-cell-{i}")
        ax_out.add_patch(out)
    regions = np.array([[c.region.lo, c.region.hi] for c in cells])
    ax_in.set_xlim(regions[:, 0, 0].min(), regions[:, 1, 0].max())
    ax_in.set_ylim(regions[:, 0, 1].min(), regions[:, 1, 1].max())
    ax_in.set_title("Input partition")
    ax_in.set_xlabel("$x_1$")
    ax_in.set_ylabel("$x_2$")

    pts = truth.points
    shown = _thin(pts)
    ax_out.scatter(shown[:, 0], shown[:, 1], s=0.5, color="tab:red", alpha=0.3, rasterized=False, gid="truth")
    _draw_estimate(ax_out, result.estimate)
    ax_out.autoscale_view()
    outs = np.array([[c.output.lo, c.output.hi] for c in cells])
    lo = np.minimum(outs[:, 0].min(axis=0), pts.min(axis=0))
    hi = np.maximum(outs[:, 1].max(axis=0), pts.max(axis=0))
    pad = 0.05 * np.maximum(hi - lo, 1e-9)
    ax_out.set_xlim(lo[0] - pad[0], hi[0] + pad[0])
    ax_out.set_ylim(lo[1] - pad[1], hi[1] + pad[1])
    ax_out.set_title("Output set")
    ax_out.set_xlabel("$y_1$")
    ax_out.set_ylabel("$y_2$")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)


def render_tradeoff(rows, path) -> None:
    """Log-log error vs propagator calls, mean over seeds per (pair, budget)."""
    fig, ax = _new_figure(1)
    by_pair = {}
    for row in rows:
        if row["error"] is None or row["error"] <= 0:
            continue
        by_pair.setdefault((row["propagator"], row["partitioner"]), {}).setdefault(row["budget"], []).append(row)
    for (prop, part), budgets in sorted(by_pair.items()):
        xs, ys = [], []
        for budget in sorted(budgets):
            group = budgets[budget]
            xs.append(np.mean([r["calls"] for r in group]))
            ys.append(np.mean([r["error"] for r in group]))
        ax.plot(xs, ys, color=PROPAGATOR_COLORS.get(prop, "gray"), marker=PARTITIONER_MARKERS.get(part, "x"),
                label=f"{part.upper()}-{prop}", gid=f"series-{prop}-{part}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("Propagator calls")
    ax.set_ylabel("Error (percent extra area)")
    if by_pair:
        ax.legend(fontsize="small")
    fig.tight_layout()
    _save(fig, path)


def render_hull_overlay(result, truth: SampleSet, path, title: str = "") -> None:
    """Truth samples with the estimate outline (single panel)."""
    fig, ax = _new_figure(1)
    pts = _thin(truth.points)
    ax.scatter(pts[:, 0], pts[:, 1], s=0.5, color="tab:red", alpha=0.3, gid="truth")
    _draw_estimate(ax, result.estimate)
    ax.autoscale_view()
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
