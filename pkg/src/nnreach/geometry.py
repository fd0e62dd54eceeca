"""Output-set shapes, merging, areas and the percent-extra-area error."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .errors import UndefinedErrorMetric
from .network import Box, SampleSet


class Shape(str, Enum):
    LOWER_BOUNDS = "lower-bounds"
    LINF_BALL = "linf-ball"
    CONVEX_HULL = "convex-hull"

    @classmethod
    def parse(cls, value) -> "Shape":
        if isinstance(value, cls):
            return value
        return cls(str(value).replace("_", "-"))


@dataclass(frozen=True)
class Polygon:
    """Convex polygon with counter-clockwise vertices (rows)."""

    vertices: np.ndarray

    def __len__(self):
        return self.vertices.shape[0]


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_2d(points) -> Polygon:
    """Andrew's monotone chain. Collinear input gives the two extreme points."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("convex hull of an empty point set")
    pts = np.unique(pts, axis=0)  # lexicographic sort, duplicates dropped
    if pts.shape[0] <= 2:
        return Polygon(pts)
    P = [tuple(p) for p in pts]

    lower = []
    for p in P:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(P):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) == 2 and hull[0] == hull[1]:
        hull = hull[:1]
    return Polygon(np.array(hull, dtype=np.float64))


def polygon_area(poly: Polygon) -> float:
    v = poly.vertices
    if v.shape[0] < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0)


def _segment_distance(points, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(points - (a + t[:, None] * ab), axis=1)


def polygon_distance(points, poly: Polygon) -> np.ndarray:
    """Euclidean distance from each point to the convex polygon (0 inside)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    v = poly.vertices
    n = v.shape[0]
    if n == 1:
        return np.linalg.norm(pts - v[0], axis=1)
    if n == 2:
        return _segment_distance(pts, v[0], v[1])
    nxt = np.roll(v, -1, axis=0)
    edges = nxt - v
    # cross of edge with (p - start); >= 0 means on the inner side for CCW
    side = edges[None, :, 0] * (pts[:, None, 1] - v[None, :, 1]) - edges[None, :, 1] * (pts[:, None, 0] - v[None, :, 0])
    scale = np.linalg.norm(edges, axis=1)[None, :]
    outside = np.any(side / scale < -1e-12, axis=1)
    dist = np.zeros(pts.shape[0])
    if np.any(outside):
        sub = pts[outside]
        d = np.min(np.stack([_segment_distance(sub, v[i], nxt[i]) for i in range(n)]), axis=0)
        dist[outside] = d
    return dist


@dataclass(frozen=True)
class LowerBounds:
    lower: np.ndarray
    shape = Shape.LOWER_BOUNDS

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        return np.all(np.atleast_2d(points) >= self.lower - tol, axis=1)

    def to_dict(self) -> dict:
        return {"shape": self.shape.value, "lower": [float(v) for v in self.lower]}


@dataclass(frozen=True)
class BoxBound:
    box: Box
    shape = Shape.LINF_BALL

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        return self.box.contains_points(points, tol)

    def to_dict(self) -> dict:
        return {"shape": self.shape.value, "box": self.box.to_list()}


@dataclass(frozen=True)
class Hull2D:
    polygon: Polygon
    shape = Shape.CONVEX_HULL

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        return polygon_distance(points, self.polygon) <= tol

    def to_dict(self) -> dict:
        return {"shape": self.shape.value, "vertices": self.polygon.vertices.tolist()}


BoundaryEstimate = Union[LowerBounds, BoxBound, Hull2D]


def estimate_from_dict(data: dict) -> BoundaryEstimate:
    shape = Shape.parse(data["shape"])
    if shape is Shape.LOWER_BOUNDS:
        return LowerBounds(np.asarray(data["lower"], dtype=np.float64))
    if shape is Shape.LINF_BALL:
        return BoxBound(Box.from_intervals(data["box"]))
    return Hull2D(Polygon(np.asarray(data["vertices"], dtype=np.float64).reshape(-1, 2)))


def merge(outputs: Sequence[Box], extra_points=(), shape=Shape.LINF_BALL) -> BoundaryEstimate:
    """Combine cell output boxes (and optional exact points) into one estimate."""
    shape = Shape.parse(shape)
    outputs = list(outputs)
    extra = np.asarray(extra_points, dtype=np.float64)
    if not outputs and extra.size == 0:
        raise ValueError("nothing to merge")
    dims = {b.dim for b in outputs}
    if extra.size:
        extra = extra.reshape(-1, extra.shape[-1])
        dims.add(extra.shape[1])
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch among merged sets: {sorted(dims)}")
    dim = dims.pop()

    los = [b.lo for b in outputs]
    his = [b.hi for b in outputs]
    if extra.size:
        los.append(extra.min(axis=0))
        his.append(extra.max(axis=0))
    lo = np.min(los, axis=0)
    if shape is Shape.LOWER_BOUNDS:
        return LowerBounds(lo)
    if shape is Shape.LINF_BALL:
        return BoxBound(Box(lo, np.max(his, axis=0)))
    if dim != 2:
        raise ValueError("convex-hull shape requires 2-D outputs")
    corners = [np.array([[b.lo[0], b.lo[1]], [b.hi[0], b.lo[1]], [b.hi[0], b.hi[1]], [b.lo[0], b.hi[1]]])
               for b in outputs]
    if extra.size:
        corners.append(extra)
    return Hull2D(convex_hull_2d(np.vstack(corners)))


def union_area_boxes_2d(boxes: Sequence[Box]) -> float:
    """Exact area of a union of 2-D boxes by coordinate compression."""
    boxes = list(boxes)
    if any(b.dim != 2 for b in boxes):
        raise ValueError("union_area_boxes_2d needs 2-D boxes")
    if not boxes:
        return 0.0
    xs = np.unique(np.concatenate([[b.lo[0], b.hi[0]] for b in boxes]))
    ys = np.unique(np.concatenate([[b.lo[1], b.hi[1]] for b in boxes]))
    covered = np.zeros((len(xs) - 1, len(ys) - 1), dtype=bool)
    for b in boxes:
        i0, i1 = np.searchsorted(xs, [b.lo[0], b.hi[0]])
        j0, j1 = np.searchsorted(ys, [b.lo[1], b.hi[1]])
        covered[i0:i1, j0:j1] = True
    return float(np.diff(xs) @ covered @ np.diff(ys))


def estimate_area(estimate: BoundaryEstimate) -> float:
    if isinstance(estimate, BoxBound):
        return estimate.box.volume()
    if isinstance(estimate, Hull2D):
        return polygon_area(estimate.polygon)
    raise TypeError("lower bounds have no area")


def estimate_error(estimate: BoundaryEstimate, truth: SampleSet, shape=None) -> float:
    """Conservatism of ``estimate`` relative to a dense exact sample.

    Box and hull shapes report percent extra area ``(A_est - A_true) / A_true``.
    Lower bounds report the summed gap ``sum(true_min - estimated_lower)``.
    """
    shape = Shape.parse(shape) if shape is not None else estimate.shape
    if shape is not estimate.shape:
        raise ValueError(f"estimate has shape {estimate.shape.value}, asked for {shape.value}")
    if truth.points.shape[0] == 0:
        raise ValueError("empty truth sample")
    if shape is Shape.LOWER_BOUNDS:
        if estimate.lower.shape[0] != truth.points.shape[1]:
            raise ValueError("dimension mismatch between estimate and truth")
        return float(np.sum(truth.minima - estimate.lower))
    if shape is Shape.LINF_BALL:
        if estimate.box.dim != truth.points.shape[1]:
            raise ValueError("dimension mismatch between estimate and truth")
        true_area = truth.enclosing_box.volume()
    else:
        true_area = polygon_area(convex_hull_2d(truth.points))
    if true_area <= 0.0:
        raise UndefinedErrorMetric("true set has zero area")
    return float((estimate_area(estimate) - true_area) / true_area)
