"""Analyzer and partitioners: none, uniform grid, SG, GSG and AGSG.

Every partitioner covers the input box with cells, propagates each cell once
and merges the cell outputs into a BoundaryEstimate of the requested shape.
The simulation-guided family (SG, GSG, AGSG) draws Monte Carlo samples of the
exact output first and refines only cells whose output box leaves the
sampled reference set.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import UnsupportedDimensionError
from .geometry import (
    BoundaryEstimate,
    BoxBound,
    Hull2D,
    LowerBounds,
    Shape,
    convex_hull_2d,
    merge,
    polygon_distance,
)
from .network import Box, Network, SampleSet, sample_outputs
from .propagators import Propagator, propagate

log = logging.getLogger(__name__)

MAX_UNIFORM_CELLS = 1_000_000
DEFAULT_SAMPLES = 1000
EPS_FRACTION = 0.04
EXPANSION_FRACTION = 0.1


class Partitioner(str, Enum):
    NONE = "none"
    UNIFORM = "uniform"
    SG = "sg"
    GSG = "gsg"
    AGSG = "agsg"


@dataclass(frozen=True)
class AnalyzerConfig:
    propagator: Propagator = Propagator.CROWN
    partitioner: Partitioner = Partitioner.GSG
    shape: Shape = Shape.LINF_BALL
    num_samples: int = DEFAULT_SAMPLES
    sample_seed: int = 0
    eps: Optional[float] = None
    budget_calls: Optional[int] = None
    budget_time_ms: Optional[int] = None
    uniform_k: int = 1
    expand_step: Optional[float] = None
    expand_min_step: float = 1e-3
    expand_min_margin: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "propagator", Propagator(self.propagator))
        object.__setattr__(self, "partitioner", Partitioner(self.partitioner))
        object.__setattr__(self, "shape", Shape.parse(self.shape))
        if self.num_samples <= 0:
            raise ValueError("num_samples must be positive")
        if self.uniform_k < 1:
            raise ValueError("uniform_k must be >= 1")
        for name in ("eps", "budget_calls", "budget_time_ms", "expand_step"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive")
        if self.expand_min_step <= 0 or self.expand_min_margin <= 0:
            raise ValueError("expansion minima must be positive")

    def resolved(self, box: Box) -> "AnalyzerConfig":
        """Fill box-relative defaults (threshold and expansion step)."""
        width = float(np.max(box.widths))
        return replace(
            self,
            eps=self.eps if self.eps is not None else EPS_FRACTION * width,
            expand_step=self.expand_step if self.expand_step is not None else EXPANSION_FRACTION * width,
        )

    def to_dict(self) -> dict:
        return {
            "propagator": self.propagator.value,
            "partitioner": self.partitioner.value,
            "shape": self.shape.value,
            "num_samples": self.num_samples,
            "sample_seed": self.sample_seed,
            "eps": self.eps,
            "budget_calls": self.budget_calls,
            "budget_time_ms": self.budget_time_ms,
            "uniform_k": self.uniform_k,
            "expand_step": self.expand_step,
            "expand_min_step": self.expand_min_step,
            "expand_min_margin": self.expand_min_margin,
        }


@dataclass(frozen=True)
class Cell:
    region: Box
    output: Box
    depth: int = 0


@dataclass
class AnalysisResult:
    estimate: BoundaryEstimate
    cells: list[Cell]
    propagator_calls: int
    wall_time_ms: float
    samples: SampleSet
    expanded_cell: Optional[Cell] = None

    @property
    def partitions(self) -> int:
        return len(self.cells)


class _Budget:
    """Counts propagator calls and enforces call/time limits."""

    def __init__(self, net: Network, cfg: AnalyzerConfig):
        self.net = net
        self.propagator = cfg.propagator
        self.max_calls = cfg.budget_calls
        self.max_seconds = None if cfg.budget_time_ms is None else cfg.budget_time_ms / 1000.0
        self.start = time.perf_counter()
        self.calls = 0

    def can_spend(self, n: int) -> bool:
        if self.max_calls is not None and self.calls + n > self.max_calls:
            return False
        if self.max_seconds is not None and time.perf_counter() - self.start >= self.max_seconds:
            return False
        return True

    def cell(self, region: Box, depth: int) -> Cell:
        self.calls += 1
        return Cell(region, propagate(self.net, region, self.propagator), depth)


SplitHook = Callable[[Cell, tuple, list], None]


def reference_boundary(samples: SampleSet, shape) -> BoundaryEstimate:
    """The sampled under-approximation [u_sim] expressed in ``shape``."""
    shape = Shape.parse(shape)
    if shape is Shape.LOWER_BOUNDS:
        return LowerBounds(samples.minima)
    if shape is Shape.LINF_BALL:
        return BoxBound(samples.enclosing_box)
    return Hull2D(convex_hull_2d(samples.points))


def outside_distance(cell_output: Box, reference: BoundaryEstimate) -> float:
    """How far ``cell_output`` reaches outside ``reference`` (0 when inside)."""
    if isinstance(reference, LowerBounds):
        if reference.lower.shape[0] != cell_output.dim:
            raise ValueError("dimension mismatch")
        return float(max(0.0, np.max(reference.lower - cell_output.lo)))
    if isinstance(reference, BoxBound):
        ref = reference.box
        if ref.dim != cell_output.dim:
            raise ValueError("dimension mismatch")
        excess = np.maximum(ref.lo - cell_output.lo, cell_output.hi - ref.hi)
        return float(max(0.0, np.max(excess)))
    if cell_output.dim != 2:
        raise ValueError("convex-hull reference needs 2-D outputs")
    return float(np.max(polygon_distance(cell_output.corners(), reference.polygon)))


def _bisect(cell: Cell, budget: _Budget) -> tuple[Cell, Cell]:
    # longest side; argmax breaks ties toward the lowest index
    axis = int(np.argmax(cell.region.widths))
    left, right = cell.region.bisect(axis)
    return budget.cell(left, cell.depth + 1), budget.cell(right, cell.depth + 1)


def _small(cell: Cell, eps: float) -> bool:
    return bool(np.all(cell.region.widths <= eps))


def _finish(cells, budget, samples, shape, t0, include_samples=True, expanded=None) -> AnalysisResult:
    outputs = [c.output for c in cells]
    extra = samples.points if include_samples else ()
    estimate = merge(outputs, extra, shape)
    return AnalysisResult(
        estimate=estimate,
        cells=list(cells),
        propagator_calls=budget.calls,
        wall_time_ms=(time.perf_counter() - t0) * 1000.0,
        samples=samples,
        expanded_cell=expanded,
    )


def _setup(net: Network, box: Box, cfg: AnalyzerConfig):
    if box.dim != net.n_in:
        raise ValueError(f"box dimension {box.dim} != network input width {net.n_in}")
    if cfg.shape is Shape.CONVEX_HULL and net.n_out != 2:
        raise ValueError("convex-hull shape requires a network with 2 outputs")
    cfg = cfg.resolved(box)
    samples = sample_outputs(net, box, cfg.num_samples, cfg.sample_seed)
    return cfg, samples, _Budget(net, cfg)


def run_none(net: Network, box: Box, cfg: AnalyzerConfig) -> AnalysisResult:
    t0 = time.perf_counter()
    cfg, samples, budget = _setup(net, box, cfg)
    return _finish([budget.cell(box, 0)], budget, samples, cfg.shape, t0, include_samples=False)


def uniform_cells(box: Box, k: int) -> list[Box]:
    edges = [np.linspace(lo, hi, k + 1) for lo, hi in zip(box.lo, box.hi)]
    cells = []
    for idx in itertools.product(range(k), repeat=box.dim):
        lo = [edges[d][i] for d, i in enumerate(idx)]
        hi = [edges[d][i + 1] for d, i in enumerate(idx)]
        cells.append(Box(lo, hi))
    return cells


def run_uniform(net: Network, box: Box, cfg: AnalyzerConfig) -> AnalysisResult:
    t0 = time.perf_counter()
    cfg, samples, budget = _setup(net, box, cfg)
    n_cells = cfg.uniform_k ** box.dim
    if n_cells > MAX_UNIFORM_CELLS:
        raise ValueError(f"uniform grid of {n_cells} cells exceeds the cap of {MAX_UNIFORM_CELLS}")
    if cfg.budget_calls is not None and n_cells > cfg.budget_calls:
        raise ValueError(f"uniform grid of {n_cells} cells exceeds budget_calls={cfg.budget_calls}")
    cells = [budget.cell(region, 0) for region in uniform_cells(box, cfg.uniform_k)]
    return _finish(cells, budget, samples, cfg.shape, t0, include_samples=False)


def run_sg(net: Network, box: Box, cfg: AnalyzerConfig, on_split: Optional[SplitHook] = None) -> AnalysisResult:
    """Simulation-guided refinement with a LIFO stack."""
    t0 = time.perf_counter()
    cfg, samples, budget = _setup(net, box, cfg)
    u_sim = samples.enclosing_box
    stack = [budget.cell(box, 0)]
    retired = []
    while stack:
        cell = stack.pop()
        if u_sim.contains_box(cell.output) or _small(cell, cfg.eps):
            retired.append(cell)
            continue
        if not budget.can_spend(2):
            stack.append(cell)
            break
        children = _bisect(cell, budget)
        if on_split is not None:
            on_split(cell, children, list(stack))
        stack.extend(children)
    return _finish(retired + stack, budget, samples, cfg.shape, t0)


def _greedy_refine(initial: list[Cell], reference, budget: _Budget, eps: float,
                   on_split: Optional[SplitHook] = None) -> list[Cell]:
    """GSG loop: always refine the frontier cell farthest outside ``reference``.

    Returns the final frontier (retired cells first, then remaining ones in
    insertion order).
    """
    counter = itertools.count()
    heap = []

    def push(cell):
        heapq.heappush(heap, (-outside_distance(cell.output, reference), next(counter), cell))

    for cell in initial:
        push(cell)
    retired = []
    while heap:
        if heap[0][0] >= 0.0:
            break  # everything left is inside the reference
        if not _small(heap[0][2], eps) and not budget.can_spend(2):
            break
        cell = heapq.heappop(heap)[2]
        if _small(cell, eps):
            retired.append(cell)
            continue
        children = _bisect(cell, budget)
        if on_split is not None:
            on_split(cell, children, [entry[2] for entry in heap])
        for child in children:
            push(child)
    remaining = [entry[2] for entry in sorted(heap, key=lambda e: e[1])]
    return retired + remaining


def run_gsg(net: Network, box: Box, cfg: AnalyzerConfig, on_split: Optional[SplitHook] = None) -> AnalysisResult:
    t0 = time.perf_counter()
    cfg, samples, budget = _setup(net, box, cfg)
    reference = reference_boundary(samples, cfg.shape)
    cells = _greedy_refine([budget.cell(box, 0)], reference, budget, cfg.eps, on_split)
    return _finish(cells, budget, samples, cfg.shape, t0)


def _require_2d(box: Box):
    if box.dim != 2:
        raise UnsupportedDimensionError(f"AGSG supports 2 input dimensions only, got {box.dim}")


def _expand(net: Network, box: Box, cfg: AnalyzerConfig, samples: SampleSet, budget: _Budget,
            reserve: int = 0) -> Cell:
    """Grow a cell around the most central sample while its output stays in [u_sim].

    "Inside" means within the sample box and, for hull and lower-bound shapes,
    also within that shape's sampled reference.
    """
    _require_2d(box)
    if samples.points.shape[0] == 0:
        raise ValueError("expansion needs at least one sample")
    cfg = cfg.resolved(box)
    u_sim = samples.enclosing_box
    reference = reference_boundary(samples, cfg.shape)

    def inside(out: Box) -> bool:
        return u_sim.contains_box(out) and outside_distance(out, reference) == 0.0

    centroid = samples.points.mean(axis=0)
    seed = samples.inputs[int(np.argmin(np.linalg.norm(samples.points - centroid, axis=1)))]

    def grown(h):
        return Box(np.maximum(seed - h, box.lo), np.minimum(seed + h, box.hi))

    half, step = 0.0, cfg.expand_step
    cell = budget.cell(grown(0.0), 0)
    while cell.region != box and budget.can_spend(1 + reserve):
        candidate = budget.cell(grown(half + step), 0)
        if inside(candidate.output):
            half += step
            cell = candidate
            continue
        margin = float(np.max(np.concatenate([cell.region.lo - box.lo, box.hi - cell.region.hi])))
        if step / 2.0 < cfg.expand_min_step or margin < cfg.expand_min_margin:
            break
        step /= 2.0
    return cell


def expand_seed_cell(net: Network, box: Box, cfg: AnalyzerConfig, samples: SampleSet) -> Box:
    """Region of the expanded seed cell used to initialize AGSG."""
    return _expand(net, box, cfg, samples, _Budget(net, replace(cfg, budget_calls=None, budget_time_ms=None))).region


def decompose_remainder(box: Box, inner: Box) -> list[Box]:
    """Split ``box`` minus ``inner`` into at most four disjoint rectangles.

    Left and right slabs span the full height; bottom and top slabs span the
    x-extent of ``inner``. Zero-area slabs are dropped.
    """
    if box.dim != 2 or inner.dim != 2:
        raise UnsupportedDimensionError("remainder decomposition is 2-D only")
    if not box.contains_box(inner):
        raise ValueError("inner box is not contained in the outer box")
    (x0, y0), (x1, y1) = box.lo, box.hi
    (a0, b0), (a1, b1) = inner.lo, inner.hi
    slabs = [
        Box([x0, y0], [a0, y1]),
        Box([a1, y0], [x1, y1]),
        Box([a0, y0], [a1, b0]),
        Box([a0, b1], [a1, y1]),
    ]
    return [s for s in slabs if s.volume() > 0.0]


def run_agsg(net: Network, box: Box, cfg: AnalyzerConfig, on_split: Optional[SplitHook] = None) -> AnalysisResult:
    t0 = time.perf_counter()
    _require_2d(box)
    if cfg.budget_calls is not None and cfg.budget_calls < 5:
        raise ValueError("agsg needs budget_calls >= 5 (seed cell plus up to four remainder cells)")
    cfg, samples, budget = _setup(net, box, cfg)
    reference = reference_boundary(samples, cfg.shape)
    expanded = _expand(net, box, cfg, samples, budget, reserve=4)
    log.debug("agsg expanded cell %s after %d calls", expanded.region, budget.calls)
    remainder = [budget.cell(region, 1) for region in decompose_remainder(box, expanded.region)]
    cells = _greedy_refine(remainder, reference, budget, cfg.eps, on_split)
    return _finish([expanded] + cells, budget, samples, cfg.shape, t0, expanded=expanded)


_RUNNERS = {
    Partitioner.NONE: run_none,
    Partitioner.UNIFORM: run_uniform,
    Partitioner.SG: run_sg,
    Partitioner.GSG: run_gsg,
    Partitioner.AGSG: run_agsg,
}


def analyze(net: Network, box: Box, cfg: AnalyzerConfig) -> AnalysisResult:
    """Run the configured partitioner/propagator pair over ``box``."""
    result = _RUNNERS[cfg.partitioner](net, box, cfg)
    log.info(
        "%s+%s: %d calls, %d partitions, %.1f ms",
        cfg.partitioner.value, cfg.propagator.value, result.propagator_calls, result.partitions, result.wall_time_ms,
    )
    return result
