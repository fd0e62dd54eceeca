"""Dense feedforward networks, boxes, seeded generation and output sampling.

Random streams use numpy's Philox counter-based bit generator keyed by the
caller's seed, so every function here is a pure function of its arguments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, NetworkFormatError, NonFiniteError


class Activation(str, Enum):
    LINEAR = "linear"
    RELU = "relu"
    TANH = "tanh"

    def apply(self, z):
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        if self is Activation.TANH:
            return np.tanh(z)
        return z


def rng_from_seed(seed: int) -> np.random.Generator:
    """Return an independent generator for ``seed`` (Philox, 64-bit key)."""
    if seed < 0:
        raise ValueError("seed must be an unsigned integer")
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned hyperrectangle ``[lo, hi]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(self.lo))
        hi = _frozen(np.atleast_1d(self.hi))
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError(f"box bounds must be equal-length vectors, got {lo.shape} and {hi.shape}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError(f"box has lo > hi: lo={lo.tolist()} hi={hi.tolist()}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_intervals(cls, intervals) -> "Box":
        arr = np.asarray(intervals, dtype=np.float64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains_box(self, other: "Box", tol: float = 0.0) -> bool:
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def contains_points(self, points, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=1)

    def corners(self) -> np.ndarray:
        """All 2**dim vertices, one per row."""
        n = self.dim
        bits = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
        return np.where(bits == 1, self.hi, self.lo)

    def bisect(self, axis: int) -> tuple["Box", "Box"]:
        mid = (self.lo[axis] + self.hi[axis]) / 2.0
        left_hi = self.hi.copy()
        left_hi[axis] = mid
        right_lo = self.lo.copy()
        right_lo[axis] = mid
        return Box(self.lo, left_hi), Box(right_lo, self.hi)

    def to_list(self) -> list[list[float]]:
        return [[float(a), float(b)] for a, b in zip(self.lo, self.hi)]

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self):
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.LINEAR

    def __post_init__(self):
        w = _frozen(self.weights)
        b = _frozen(np.atleast_1d(self.bias))
        if w.ndim != 2:
            raise ValueError("weights must be a 2-D matrix")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise ValueError(f"bias length {b.shape[0]} != weight rows {w.shape[0]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer contains non-finite values")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Network:
    layers: tuple[Layer, ...] = field(default_factory=tuple)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].n_in != layers[k - 1].n_out:
                raise DimensionMismatchError(
                    k, f"input width {layers[k].n_in} != previous output width {layers[k - 1].n_out}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    @property
    def sizes(self) -> list[int]:
        return [self.n_in] + [layer.n_out for layer in self.layers]

    def to_dict(self) -> dict:
        return {
            "layers": [
                {
                    "weights": layer.weights.tolist(),
                    "bias": layer.bias.tolist(),
                    "activation": layer.activation.value,
                }
                for layer in self.layers
            ]
        }

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            a.activation == b.activation
            and np.array_equal(a.weights, b.weights)
            and np.array_equal(a.bias, b.bias)
            for a, b in zip(self.layers, other.layers)
        )

    __hash__ = None


def network_from_dict(data) -> Network:
    if not isinstance(data, dict) or not isinstance(data.get("layers"), list):
        raise NetworkFormatError('expected an object with a "layers" list')
    layers = []
    for k, spec in enumerate(data["layers"]):
        try:
            w = np.array(spec["weights"], dtype=np.float64)
            b = np.array(spec["bias"], dtype=np.float64)
            act = Activation(spec.get("activation", "linear"))
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkFormatError(f"layer {k}: {exc}") from exc
        if w.ndim != 2:
            raise DimensionMismatchError(k, "weights are not a rectangular matrix")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise DimensionMismatchError(k, f"bias length {b.size} != weight rows {w.shape[0]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NonFiniteError(f"layer {k}: non-finite value in weights or bias")
        if layers and w.shape[1] != layers[-1].n_out:
            raise DimensionMismatchError(
                k, f"input width {w.shape[1]} != previous output width {layers[-1].n_out}"
            )
        layers.append(Layer(w, b, act))
    if not layers:
        raise NetworkFormatError("network has no layers")
    return Network(tuple(layers))


def load_network(path) -> Network:
    """Read a network from the JSON layer format."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"{path}: {exc}") from exc
    return network_from_dict(data)


def save_network(net: Network, path) -> None:
    with open(path, "w") as fh:
        json.dump(net.to_dict(), fh)


def forward(net: Network, x) -> np.ndarray:
    """Evaluate ``net`` at ``x``; also accepts a batch of rows."""
    a = np.asarray(x, dtype=np.float64)
    if a.shape[-1] != net.n_in:
        raise ValueError(f"input length {a.shape[-1]} != network input width {net.n_in}")
    for layer in net.layers:
        a = layer.activation.apply(a @ layer.weights.T + layer.bias)
    return a


def random_network(layer_sizes: Sequence[int], activation="relu", seed: int = 0) -> Network:
    """Random dense network with uniform(+-1/sqrt(fan_in)) weights and zero bias.

    Hidden layers use ``activation``; the output layer is linear.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError("layer_sizes needs at least an input and an output width")
    if any(s <= 0 for s in sizes):
        raise ValueError("layer sizes must be positive")
    activation = Activation(activation)
    rng = rng_from_seed(seed)
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        act = activation if k < len(sizes) - 2 else Activation.LINEAR
        layers.append(Layer(w, np.zeros(fan_out), act))
    return Network(tuple(layers))


@dataclass(frozen=True)
class SampleSet:
    inputs: np.ndarray
    points: np.ndarray
    enclosing_box: Box
    seed: int

    @property
    def minima(self) -> np.ndarray:
        return self.enclosing_box.lo


def _sample_set(net, inputs, seed) -> SampleSet:
    inputs = _frozen(inputs)
    points = _frozen(forward(net, inputs))
    return SampleSet(inputs, points, Box(points.min(axis=0), points.max(axis=0)), seed)


def sample_outputs(net: Network, input_box: Box, n: int, seed: int) -> SampleSet:
    """Exact outputs at ``n`` inputs drawn uniformly from ``input_box``."""
    if n <= 0:
        raise ValueError("number of samples must be positive")
    if input_box.dim != net.n_in:
        raise ValueError(f"box dimension {input_box.dim} != network input width {net.n_in}")
    u = rng_from_seed(seed).random((n, input_box.dim))
    return _sample_set(net, input_box.lo + u * input_box.widths, seed)


def truth_samples(net: Network, input_box: Box, n: int = 10_000, seed: int = 0) -> SampleSet:
    """Dense reference sample: a regular grid (box edges included) plus random fill.

    About half of ``n`` goes to the grid, the rest is uniform random.
    """
    d = input_box.dim
    per_dim = max(2, int((n / 2) ** (1.0 / d)))
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in zip(input_box.lo, input_box.hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    n_rand = max(n - grid.shape[0], 0)
    u = rng_from_seed(seed).random((n_rand, d))
    inputs = np.vstack([grid, input_box.lo + u * input_box.widths])
    return _sample_set(net, inputs, seed)
