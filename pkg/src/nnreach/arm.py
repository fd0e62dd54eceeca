"""Two-link planar arm: analytic forward kinematics and a small tanh surrogate."""

from __future__ import annotations

import math

import numpy as np

from .errors import FitError
from .network import Activation, Box, Layer, Network, forward, rng_from_seed

LINK_LENGTHS = (1.0, 1.0)
JOINT_BOX = Box([math.pi / 3, math.pi / 3], [2 * math.pi / 3, 2 * math.pi / 3])

LEARNING_RATE = 0.05
MOMENTUM = 0.9
TOLERANCE = 0.05
HIDDEN = 5


def kinematics(theta) -> np.ndarray:
    """End-effector (x, y) for joint angles ``theta`` (single row or batch)."""
    th = np.asarray(theta, dtype=np.float64)
    t1, t2 = th[..., 0], th[..., 1]
    l1, l2 = LINK_LENGTHS
    x = l1 * np.cos(t1) + l2 * np.cos(t1 + t2)
    y = l1 * np.sin(t1) + l2 * np.sin(t1 + t2)
    return np.stack([x, y], axis=-1)


def _grid(box: Box, per_dim: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in zip(box.lo, box.hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)


def fit_arm_network(grid_per_dim: int = 25, iterations: int = 20_000, seed: int = 0,
                    tolerance: float = TOLERANCE) -> Network:
    """Fit a (2, 5, 2) tanh network to the arm kinematics on a joint-angle grid.

    Full-batch gradient descent with heavy-ball momentum on mean squared
    error. Inputs and targets are standardized during training; both affine
    maps are folded back into the weights, so the returned network maps raw
    joint angles to raw end-effector coordinates.

    Raises:
        FitError: if the max-abs residual on the grid exceeds ``tolerance``.
    """
    if grid_per_dim < 4:
        raise ValueError("grid_per_dim must be at least 4")
    if iterations <= 0:
        raise ValueError("iterations must be positive")

    theta = _grid(JOINT_BOX, grid_per_dim)
    target = kinematics(theta)
    in_center, in_scale = JOINT_BOX.center, JOINT_BOX.widths / 2.0
    out_center, out_scale = target.mean(axis=0), target.std(axis=0)
    x = (theta - in_center) / in_scale
    y = (target - out_center) / out_scale

    rng = rng_from_seed(seed)
    params = [
        rng.uniform(-1 / math.sqrt(2), 1 / math.sqrt(2), size=(HIDDEN, 2)),
        np.zeros(HIDDEN),
        rng.uniform(-1 / math.sqrt(HIDDEN), 1 / math.sqrt(HIDDEN), size=(2, HIDDEN)),
        np.zeros(2),
    ]
    velocity = [np.zeros_like(p) for p in params]

    n = x.shape[0]
    for _ in range(iterations):
        w1, b1, w2, b2 = params
        h = np.tanh(x @ w1.T + b1)
        g_out = 2.0 * (h @ w2.T + b2 - y) / n
        g_h = (g_out @ w2) * (1.0 - h**2)
        grads = (g_h.T @ x, g_h.sum(axis=0), g_out.T @ h, g_out.sum(axis=0))
        for p, v, g in zip(params, velocity, grads):
            v *= MOMENTUM
            v -= LEARNING_RATE * g
            p += v

    w1, b1, w2, b2 = params
    w1_raw = w1 / in_scale
    b1_raw = b1 - w1_raw @ in_center
    w2_raw = w2 * out_scale[:, None]
    b2_raw = b2 * out_scale + out_center
    net = Network((Layer(w1_raw, b1_raw, Activation.TANH), Layer(w2_raw, b2_raw, Activation.LINEAR)))

    residual = float(np.max(np.abs(forward(net, theta) - target)))
    if residual > tolerance:
        raise FitError(f"arm fit residual {residual:.4g} exceeds tolerance {tolerance}")
    return net
