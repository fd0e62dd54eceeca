"""Output-box propagators: interval arithmetic and backward linear relaxation.

``propagate_ibp`` pushes a box through each layer in center/radius form.
``propagate_linear`` builds affine lower/upper envelopes of the network output
in terms of the network input by back-substituting per-neuron linear
relaxations. Pre-activation bounds for every intermediate layer come from a
full back-substitution to the input (the first layer's are exact).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .network import Activation, Box, Network


class Propagator(str, Enum):
    IBP = "ibp"
    FASTLIN = "fastlin"
    CROWN = "crown"


class RelaxMode(str, Enum):
    FASTLIN = "fastlin"
    CROWN = "crown"


@dataclass(frozen=True)
class Relaxation:
    lower_slope: float
    lower_intercept: float
    upper_slope: float
    upper_intercept: float

    def lower(self, t):
        return self.lower_slope * np.asarray(t) + self.lower_intercept

    def upper(self, t):
        return self.upper_slope * np.asarray(t) + self.upper_intercept


@dataclass(frozen=True)
class AffineBounds:
    lower_coeffs: np.ndarray
    lower_offset: np.ndarray
    upper_coeffs: np.ndarray
    upper_offset: np.ndarray

    def evaluate(self, x):
        x = np.atleast_2d(x)
        lower = x @ self.lower_coeffs.T + self.lower_offset
        upper = x @ self.upper_coeffs.T + self.upper_offset
        return lower, upper


def _dtanh(t):
    return 1.0 - math.tanh(t) ** 2


def _tangent_through(anchor: float, lo: float, hi: float, tol: float = 1e-9) -> float:
    """Point d in [lo, hi] whose tanh tangent line passes through (anchor, tanh anchor).

    Requires a sign change of the residual on [lo, hi]; bisects to ``tol``.
    """
    ta = math.tanh(anchor)

    def gap(d):
        return math.tanh(d) + _dtanh(d) * (anchor - d) - ta

    g_lo = gap(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g_mid = gap(mid)
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _relax_tanh(l: float, u: float) -> Relaxation:
    tl, tu = math.tanh(l), math.tanh(u)
    if l == u:
        return Relaxation(0.0, tl, 0.0, tl)
    chord = (tu - tl) / (u - l)
    mid = 0.5 * (l + u)
    tan_slope = _dtanh(mid)
    tan_icpt = math.tanh(mid) - tan_slope * mid
    if l >= 0:
        # concave: chord below, tangent above
        return Relaxation(chord, tl - chord * l, tan_slope, tan_icpt)
    if u <= 0:
        return Relaxation(tan_slope, tan_icpt, chord, tl - chord * l)

    # upper: tangent at d >= 0 through (l, tanh l) if d <= u, else the chord
    if tu + _dtanh(u) * (l - u) < tl:
        # tangent point would lie beyond u: the chord is above tanh on [l, u]
        us, ui = chord, tl - chord * l
    else:
        d = _tangent_through(l, 0.0, u)
        us = _dtanh(d)
        ui = max(math.tanh(d) - us * d, tl - us * l)
    if tl + _dtanh(l) * (u - l) > tu:
        ls, li = chord, tl - chord * l
    else:
        d = _tangent_through(u, l, 0.0)
        ls = _dtanh(d)
        li = min(math.tanh(d) - ls * d, tu - ls * u)
    return Relaxation(ls, li, us, ui)


def relax_activation(kind, l: float, u: float, mode="crown") -> Relaxation:
    """Sound linear lower/upper envelopes of an activation over ``[l, u]``."""
    kind = Activation(kind)
    mode = RelaxMode(mode)
    l, u = float(l), float(u)
    if l > u:
        raise ValueError(f"invalid interval: l={l} > u={u}")
    if kind is Activation.LINEAR:
        return Relaxation(1.0, 0.0, 1.0, 0.0)
    if kind is Activation.TANH:
        return _relax_tanh(l, u)
    # relu; l == u falls into a stable branch
    if l >= 0:
        return Relaxation(1.0, 0.0, 1.0, 0.0)
    if u <= 0:
        return Relaxation(0.0, 0.0, 0.0, 0.0)
    slope = u / (u - l)
    upper_icpt = -u * l / (u - l)
    if mode is RelaxMode.FASTLIN:
        lower_slope = slope
    else:
        lower_slope = 1.0 if u > -l else 0.0
    return Relaxation(lower_slope, 0.0, slope, upper_icpt)


def _relu_relax_vec(l, u, mode):
    """Vectorized ReLU relaxation returning (ls, li, us, ui) arrays."""
    active = l >= 0
    crossing = (l < 0) & (u > 0)
    denom = np.where(crossing, u - l, 1.0)
    us = np.where(active, 1.0, np.where(crossing, u / denom, 0.0))
    ui = np.where(crossing, -u * l / denom, 0.0)
    if mode is RelaxMode.FASTLIN:
        ls = np.where(crossing, u / denom, us)
    else:
        ls = np.where(crossing, np.where(u > -l, 1.0, 0.0), us)
    return ls, np.zeros_like(l), us, ui


def _layer_relaxation(act: Activation, l, u, mode):
    if act is Activation.LINEAR:
        ones, zeros = np.ones_like(l), np.zeros_like(l)
        return ones, zeros, ones, zeros
    if act is Activation.RELU:
        return _relu_relax_vec(l, u, mode)
    rel = [relax_activation(act, a, b, mode) for a, b in zip(l, u)]
    return tuple(np.array([getattr(r, f) for r in rel]) for f in
                 ("lower_slope", "lower_intercept", "upper_slope", "upper_intercept"))


def concretize(ab: AffineBounds, box: Box) -> Box:
    """Tightest numeric interval implied by ``ab`` over ``box``."""
    if ab.lower_coeffs.shape[1] != box.dim:
        raise ValueError(f"affine bounds take {ab.lower_coeffs.shape[1]} inputs, box has {box.dim}")
    lc, uc = ab.lower_coeffs, ab.upper_coeffs
    lower = np.maximum(lc, 0.0) @ box.lo + np.minimum(lc, 0.0) @ box.hi + ab.lower_offset
    upper = np.maximum(uc, 0.0) @ box.hi + np.minimum(uc, 0.0) @ box.lo + ab.upper_offset
    # soundness gives lower <= upper; rounding can cross them on exact bounds
    return Box(np.minimum(lower, upper), np.maximum(lower, upper))


def _check_width(net: Network, box: Box):
    if box.dim != net.n_in:
        raise ValueError(f"box dimension {box.dim} != network input width {net.n_in}")


def propagate_ibp(net: Network, box: Box) -> Box:
    _check_width(net, box)
    lo, hi = box.lo, box.hi
    for layer in net.layers:
        c = (lo + hi) / 2.0
        r = (hi - lo) / 2.0
        c = layer.weights @ c + layer.bias
        r = np.abs(layer.weights) @ r
        lo = layer.activation.apply(c - r)
        hi = layer.activation.apply(c + r)
    return Box(lo, hi)


def _backsubstitute(net, upto, relax, lam_lo, lam_hi):
    """Back-substitute output-side coefficients through layers ``upto``..0.

    ``lam_lo``/``lam_hi`` bound a linear function of the *pre-activation* of
    layer ``upto``. ``relax[k]`` holds the relaxation arrays of layer k's
    activation. Returns AffineBounds in terms of the network input.
    """
    off_lo = np.zeros(lam_lo.shape[0])
    off_hi = np.zeros(lam_hi.shape[0])
    for k in range(upto, -1, -1):
        layer = net.layers[k]
        off_lo = off_lo + lam_lo @ layer.bias
        off_hi = off_hi + lam_hi @ layer.bias
        lam_lo = lam_lo @ layer.weights
        lam_hi = lam_hi @ layer.weights
        if k == 0:
            break
        ls, li, us, ui = relax[k - 1]
        pos, neg = np.maximum(lam_lo, 0.0), np.minimum(lam_lo, 0.0)
        off_lo = off_lo + pos @ li + neg @ ui
        lam_lo = pos * ls + neg * us
        pos, neg = np.maximum(lam_hi, 0.0), np.minimum(lam_hi, 0.0)
        off_hi = off_hi + pos @ ui + neg @ li
        lam_hi = pos * us + neg * ls
    return AffineBounds(lam_lo, off_lo, lam_hi, off_hi)


def propagate_linear(net: Network, box: Box, mode="crown") -> tuple[AffineBounds, Box]:
    """CROWN / Fast-Lin bounds on ``net`` over ``box``."""
    mode = RelaxMode(mode)
    _check_width(net, box)
    relax = []
    for k, layer in enumerate(net.layers):
        eye = np.eye(layer.n_out)
        pre = concretize(_backsubstitute(net, k, relax, eye, eye), box)
        relax.append(_layer_relaxation(layer.activation, pre.lo, pre.hi, mode))

    # output = act_L(z_L): pass through the last relaxation, then back-substitute
    n_out = net.n_out
    ls, li, us, ui = relax[-1]
    lam_lo = np.diag(ls)
    lam_hi = np.diag(us)
    ab = _backsubstitute(net, len(net.layers) - 1, relax, lam_lo, lam_hi)
    ab = AffineBounds(ab.lower_coeffs, ab.lower_offset + li[:n_out], ab.upper_coeffs, ab.upper_offset + ui[:n_out])
    return ab, concretize(ab, box)


def propagate(net: Network, box: Box, propagator) -> Box:
    """Dispatch to the named propagator and return its output box."""
    propagator = Propagator(propagator)
    if propagator is Propagator.IBP:
        return propagate_ibp(net, box)
    return propagate_linear(net, box, propagator.value)[1]
