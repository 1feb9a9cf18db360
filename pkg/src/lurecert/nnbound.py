"""Local sector bounds for feedforward networks on nonnegative input boxes.

Given a net N and a box [0, y_upper], the engine produces slope matrices
(gamma1, gamma2) with

    gamma1 y <= N(y) <= gamma2 y   entrywise, for every y in the box,

so the network is certified to lie in the sector [gamma1, gamma2] locally.
The construction is layer by layer. Interval propagation bounds each
pre-activation; every neuron is then relaxed to a pair of linear-in-y
envelopes chosen by where its interval sits:

  * entirely nonnegative or entirely nonpositive intervals use chord
    slopes of the activation at the interval endpoints (the chord through
    the origin is extremal there for the supported activations);
  * intervals straddling zero fall back to the activation's global slope
    pair applied to absolute-value row bounds, which stays valid because
    inputs y are nonnegative.

Envelopes are pushed through the next weight matrix with its signed split,
keeping lower/upper roles straight. Everything is elementary arithmetic,
so the certificate can be re-derived by hand for small nets.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .model import get_activation
from .numcore import signed_split


@dataclass(frozen=True)
class LayerInterval:
    """Entrywise pre-activation bounds for one layer."""

    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class SectorBoundState:
    """Per-layer relaxation record: chosen slopes and envelope matrices."""

    layer: int
    d_low: np.ndarray
    d_up: np.ndarray
    crossing: np.ndarray
    slope_low: np.ndarray
    slope_high: np.ndarray


@dataclass(frozen=True)
class NetworkSector:
    """Certified local sector: gamma1 y <= N(y) <= gamma2 y on [0, y_upper]."""

    gamma1: np.ndarray
    gamma2: np.ndarray
    y_upper: np.ndarray


def _box(y_upper, width):
    yu = np.atleast_1d(np.asarray(y_upper, dtype=float))
    if yu.shape != (width,):
        raise DimensionError(f"y_upper must have length {width}, got shape {yu.shape}")
    if np.any(~np.isfinite(yu)) or yu.min() < 0.0:
        raise ValueError("y_upper must be finite and nonnegative")
    return yu


def _recursion(net, yu, with_trace):
    """Joint interval and slope-envelope recursion over the layers.

    Two interval enclosures are maintained and intersected per layer:

      * value images: endpoint evaluation of the (monotone) activation
        pushed through the signed weight split, the standard interval
        arithmetic bound, which tracks saturation on large boxes;
      * slope envelopes: the certified L y <= nu <= U y matrices evaluated
        over the box, which remember that all coordinates ride the same y.

    The intersection matters because the box corner y = 0 puts zero inside
    every value-image interval past the first layer, which would force the
    crossing-case relaxation everywhere and destroy any sign information;
    the slope envelopes keep one-sided intervals exactly where the network
    is genuinely sign-definite, and they are bounds on the same quantity,
    so intersecting is sound.
    """
    wp, wm = signed_split(net.weights[0])
    lo, hi = wm @ yu, wp @ yu
    lower = np.array(net.weights[0])
    upper = np.array(net.weights[0])
    intervals = [LayerInterval(lower=lo, upper=hi)]
    trace = []
    for i, (w, name) in enumerate(zip(net.weights[1:], net.activations)):
        act = get_activation(name)
        d_low, d_up, crossing = relax_activation(intervals[i], name)
        l = np.where(crossing[:, None], act.crossing[0] * np.abs(lower),
                     d_low[:, None] * lower)
        u = np.where(crossing[:, None], act.crossing[1] * np.abs(upper),
                     d_up[:, None] * upper)
        if with_trace:
            trace.append(SectorBoundState(layer=i + 1, d_low=d_low, d_up=d_up,
                                          crossing=crossing, slope_low=l, slope_high=u))
        wp, wm = signed_split(w)
        new_lower = wp @ l + wm @ u
        new_upper = wm @ l + wp @ u
        plo, phi = act.fn(lo), act.fn(hi)
        value_lo = wp @ plo + wm @ phi
        value_hi = wm @ plo + wp @ phi
        envel_lo = np.minimum(new_lower, 0.0) @ yu
        envel_hi = np.maximum(new_upper, 0.0) @ yu
        lo = np.maximum(value_lo, envel_lo)
        hi = np.minimum(value_hi, envel_hi)
        lower, upper = new_lower, new_upper
        intervals.append(LayerInterval(lower=lo, upper=hi))
    return intervals, NetworkSector(gamma1=lower, gamma2=upper, y_upper=yu), trace


def preactivation_intervals(net, y_upper):
    """Interval bounds on every layer's pre-activation over y in [0, y_upper].

    Returns one LayerInterval per weight layer; the last entry bounds the
    network output itself. These are the same intervals the sector
    propagation consumes (see _recursion for how they are built).
    """
    yu = _box(y_upper, net.input_width)
    return _recursion(net, yu, with_trace=False)[0]


def relax_activation(interval, activation):
    """Slope envelopes for one layer: (d_low, d_up, crossing mask).

    Sign-definite intervals take chord slopes at the endpoints, with the
    chord at the far endpoint as d_low and at the near endpoint as d_up
    (that ordering is what makes both bounds valid on either side of zero).
    Rows whose interval straddles zero are marked in ``crossing`` and get
    the activation's global slope pair; the caller must combine those with
    absolute-value envelope rows.
    """
    act = get_activation(activation)
    lo = np.asarray(interval.lower, dtype=float)
    hi = np.asarray(interval.upper, dtype=float)
    if np.any(lo > hi):
        raise ValueError("interval has lower > upper")
    if act.exact_linear:
        ones = np.ones_like(lo)
        return ones, ones.copy(), np.zeros(lo.shape, dtype=bool)
    positive = lo >= 0.0
    negative = hi <= 0.0
    crossing = ~(positive | negative)
    d_low = np.where(positive, act.chord(hi, side=+1), act.chord(hi, side=-1))
    d_up = np.where(positive, act.chord(lo, side=+1), act.chord(lo, side=-1))
    d_low = np.where(crossing, act.crossing[0], d_low)
    d_up = np.where(crossing, act.crossing[1], d_up)
    return d_low, d_up, crossing


def propagate_sector(net, y_upper, with_trace=False):
    """Certify a local sector for the net on [0, y_upper].

    Maintains matrices (L, U) with L y <= nu(y) <= U y for the current
    layer's pre-activation. Each activation turns them into post-activation
    envelopes via relax_activation (crossing rows switch to +/- slope times
    the absolute-value row, which only needs y >= 0); each weight matrix
    W = W_plus + W_minus advances them by

        L' = W_plus l + W_minus u,   U' = W_minus l + W_plus u.

    After the final linear layer, (L, U) is the certified (gamma1, gamma2).
    """
    yu = _box(y_upper, net.input_width)
    _, sector, trace = _recursion(net, yu, with_trace=with_trace)
    return (sector, trace) if with_trace else sector


def gamma_search(net, target, y_probe_max=20.0, tol=1e-3):
    """Largest box height y_bar <= y_probe_max whose certified sector fits
    inside the target sector, found by bisection; 0.0 if even a tiny box
    fails.

    Scalar-input nets only (the box is one-dimensional, so "largest" is
    well defined). The returned height is always re-verified by a final
    propagation, so the answer is a certificate regardless of whether the
    feasible set happens to be an interval.
    """
    if net.input_width != 1:
        raise DimensionError("gamma_search needs a scalar-input network")
    if tol <= 0.0 or y_probe_max <= 0.0:
        raise ValueError("tol and y_probe_max must be positive")
    s1, s2 = np.asarray(target.sigma1, dtype=float), np.asarray(target.sigma2, dtype=float)

    def fits(ybar):
        s = propagate_sector(net, [ybar])
        return bool(np.all(s.gamma1 >= s1) and np.all(s.gamma2 <= s2))

    lo = min(tol, 1e-4)
    if not fits(lo):
        return 0.0
    if fits(y_probe_max):
        return float(y_probe_max)
    hi = y_probe_max
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fits(mid):
            lo = mid
        else:
            hi = mid
    assert fits(lo)
    return float(lo)
