"""Volume reduction of axis-aligned bounding boxes when a parallelotope is split.

A single linear layer maps the input parallelotope with generators ``U`` to
the pre-activation parallelotope with generators ``V = W @ U`` (columns are
generators, rows are output coordinates). Splitting one generator by ratio
``r`` replaces the bounding box of ``P(V)`` by the union of two smaller boxes.
``vred_closed_form`` evaluates the reduction analytically; ``vred_brute``
recomputes it by enumerating parallelotope vertices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

MAX_ENUM_DIM = 20


@dataclass(frozen=True)
class Parallelotope:
    corner: np.ndarray
    generators: np.ndarray  # one generator per column

    def vertices(self) -> np.ndarray:
        n = self.generators.shape[1]
        if n > MAX_ENUM_DIM:
            raise ValueError(f"vertex enumeration capped at {MAX_ENUM_DIM} generators")
        bits = ((np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.float64)
        return self.corner + bits @ self.generators.T

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.vertices()
        return v.min(axis=0), v.max(axis=0)

    def image(self, weights) -> "Parallelotope":
        W = np.asarray(weights, dtype=np.float64)
        return Parallelotope(W @ self.corner, W @ self.generators)


@dataclass(frozen=True)
class SplitSpec:
    dim_index: int = 0
    ratio: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"split ratio must lie in [0, 1], got {self.ratio}")
        if self.dim_index < 0:
            raise ValueError("dim_index must be non-negative")


def _as_matrix(V) -> np.ndarray:
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2:
        raise ValueError("V must be a 2-D matrix")
    return V


def bounding_box_volume(V) -> float:
    """Volume of the smallest axis-aligned box around ``P(V)``."""
    V = _as_matrix(V)
    return float(np.prod(np.abs(V).sum(axis=1)))


def _box_volume(lo, hi) -> float:
    return float(np.prod(np.clip(hi - lo, 0.0, None)))


def vred_brute(V, spec: SplitSpec) -> float:
    """Volume reduction from splitting, by explicit vertex enumeration."""
    V = _as_matrix(V)
    n_out, n_in = V.shape
    if n_in > MAX_ENUM_DIM:
        raise ValueError(f"vertex enumeration capped at n_in <= {MAX_ENUM_DIM}")
    k, r = spec.dim_index, spec.ratio
    if k >= n_in:
        raise ValueError(f"dim_index {k} out of range for {n_in} generators")
    origin = np.zeros(n_out)
    left_gen, right_gen = V.copy(), V.copy()
    left_gen[:, k] *= r
    right_gen[:, k] *= 1.0 - r
    full_lo, full_hi = Parallelotope(origin, V).bounding_box()
    l_lo, l_hi = Parallelotope(origin, left_gen).bounding_box()
    r_lo, r_hi = Parallelotope(origin + r * V[:, k], right_gen).bounding_box()
    vol_l = _box_volume(l_lo, l_hi)
    vol_r = _box_volume(r_lo, r_hi)
    vol_i = _box_volume(np.maximum(l_lo, r_lo), np.minimum(l_hi, r_hi))
    return _box_volume(full_lo, full_hi) - (vol_l + vol_r - vol_i)


def vred_closed_form(V, spec: SplitSpec) -> float:
    """Volume reduction from splitting generator ``spec.dim_index`` by ``spec.ratio``.

    Sums, over every subset S of at least two output coordinates,
    ``(1 - r^|S| - (1-r)^|S|) * prod_{i in S} |v_split,i| * prod_{i not in S} z_i``
    where ``z_i`` is the summed magnitude of the unsplit generators.
    """
    V = _as_matrix(V)
    n_out, n_in = V.shape
    if n_out > MAX_ENUM_DIM:
        raise ValueError(f"subset enumeration capped at n_out <= {MAX_ENUM_DIM}")
    k, r = spec.dim_index, spec.ratio
    if k >= n_in:
        raise ValueError(f"dim_index {k} out of range for {n_in} generators")
    a = np.abs(V[:, k])
    z = np.abs(V).sum(axis=1) - a
    coords = range(n_out)
    total = 0.0
    for size in range(2, n_out + 1):
        weight = 1.0 - r**size - (1.0 - r) ** size
        inner = 0.0
        for subset in itertools.combinations(coords, size):
            rest = [t for t in coords if t not in subset]
            inner += math.prod(a[list(subset)]) * math.prod(z[rest])
        total += weight * inner
    return float(total)


def optimal_ratio_scan(V, grid: int = 1000, dim_index: int = 0) -> float:
    """Grid argmax over r of the closed-form reduction, ties resolved toward 1/2."""
    V = _as_matrix(V)
    if V.shape[0] not in (2, 3):
        raise ValueError("optimal_ratio_scan supports n_out in {2, 3}")
    if grid <= 0:
        raise ValueError("grid must be positive")
    ratios = np.arange(grid + 1) / grid
    values = np.array([vred_closed_form(V, SplitSpec(dim_index, float(r))) for r in ratios])
    best = values.max()
    tied = values >= best - max(1e-12, 1e-12 * abs(best))
    candidates = ratios[tied]
    return float(candidates[np.argmin(np.abs(candidates - 0.5))])


def repeated_split_reduction(V, rounds: int) -> tuple[list[float], float]:
    """Per-round and cumulative reduction from repeatedly halving generator 0.

    Round j bisects each of the 2**(j-1) cells produced so far; each cell's
    split generator is (1/2)**(j-1) times the original, so it contributes
    ((1/2)**(j-1))**2 times the first split's reduction.
    """
    V = _as_matrix(V)
    if V.shape[0] != 2:
        raise ValueError("repeated_split_reduction requires n_out = 2")
    if rounds <= 0:
        raise ValueError("rounds must be positive")
    first = 0.5 * abs(float(V[0, 0])) * abs(float(V[1, 0]))
    per_round = [2 ** (j - 1) * (0.5 ** (j - 1)) ** 2 * first for j in range(1, rounds + 1)]
    return per_round, float(sum(per_round))
