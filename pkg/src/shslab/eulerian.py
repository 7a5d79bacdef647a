"""Eulerian views of the characteristic field: slices, energy, increments.

A characteristic field is Lagrangian: per-box slopes and breakpoint
positions.  This module turns that into functions of the spatial variable.
Because the initial slope is a step function, the Eulerian slope at time t
is again a step function on the images [X_i(t), X_{i+1}(t)), with value the
box's Lagrangian slope; the velocity is its integral, piecewise linear,
tied down by u(-inf) = 0.

Energy is exactly computable in both pictures.  The Lagrangian form is

    int q(t,x)^2 dx = sum_i  dx_i V_i^2 Z(t)     (alive boxes),

conservative flows keep every box alive forever, dissipative flows drop a
box's full contribution dx_i V_i^2 Z(t*_i) the moment it collapses (a box
counts while t <= t*).  The Eulerian form integrates the slice directly;
the two agree to rounding because Q^2 * width telescopes through the shared
denominator.

The one-sided slope bound states that every Eulerian slope value sits below
Z(t)/A(t); sharper, a box of initial slope V obeys

    Q(t) <= 0                      if V <= 0,
    Q(t) <= Z(t)/(1/V + A(t))      if V > 0,

with the universal envelope the V -> +inf limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .characteristics import (
    CharacteristicField,
    ContinuationMode,
    build_X,
    dxdx,
    q_lagrangian,
    singular_mask,
    u_frak,
)

__all__ = [
    "EulerianSlice",
    "invert_X",
    "eulerian_slice",
    "energy_lagrangian",
    "energy_eulerian",
    "lagrangian_velocity_increment",
    "u_l2_increment",
    "oleinik_report",
]


@dataclass(frozen=True)
class EulerianSlice:
    """The solution at one time as functions of space.

    ``x_nodes`` are the breakpoint images (nondecreasing; equal where a
    dissipative box has collapsed), ``q_boxes`` the slope on each image
    interval, ``u_nodes`` the velocity at the breakpoint images.  Outside
    the support image the slope is 0 and the velocity is constant (0 on the
    left, ``u_nodes[-1]`` on the right).
    """

    t: float
    x_nodes: np.ndarray
    q_boxes: np.ndarray
    u_nodes: np.ndarray = dc_field(repr=False)

    def q_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.x_nodes, x, side="right") - 1
        inside = (idx >= 0) & (x < self.x_nodes[-1])
        safe = np.clip(idx, 0, self.q_boxes.size - 1)
        return np.where(inside, self.q_boxes[safe], 0.0)

    def u_at(self, x) -> np.ndarray:
        # interp clamps to the end values, which are exactly the two
        # constant tails of the velocity
        return np.interp(np.asarray(x, dtype=float), self.x_nodes, self.u_nodes)


def invert_X(field: CharacteristicField, t: float, x: float) -> tuple[float, bool]:
    """Lagrangian preimage of the Eulerian point ``x`` under X(t, .).

    Bisection on the nondecreasing breakpoint images followed by linear
    inversion inside the bracketing box.  Where the map has collapsed a
    box to a point, the preimage is a whole interval; the leftmost label is
    returned and the second element flags the ambiguity.

    Raises if ``x`` lies outside the image of the initial support.
    """
    xs = build_X(field, t)
    if not xs[0] <= x <= xs[-1]:
        raise ValueError(f"x={x} outside the support image [{xs[0]}, {xs[-1]}]")
    bp = field.initial.breakpoints
    i = int(np.searchsorted(xs, x, side="left"))
    if xs[i] == x:
        ambiguous = bool(i + 1 < xs.size and xs[i + 1] == x)
        return float(bp[i]), ambiguous
    # now xs[i-1] < x < xs[i], a positive-width box
    frac = (x - xs[i - 1]) / (xs[i] - xs[i - 1])
    return float(bp[i - 1] + frac * (bp[i] - bp[i - 1])), False


def eulerian_slice(field: CharacteristicField, t: float) -> EulerianSlice:
    """Assemble the slope/velocity slice at time t.

    The velocity at breakpoint images accumulates dx_i * U_i, where U_i is
    the per-box velocity derivative; this form stays finite and exact
    through blow-up even when the slope is singular.
    """
    xs = build_X(field, t)
    q = q_lagrangian(field, t)
    du = field.initial.widths * u_frak(field, t)
    u = np.concatenate([[0.0], np.cumsum(du)])
    return EulerianSlice(t, xs, q, u)


def energy_lagrangian(field: CharacteristicField, t: float) -> float:
    """sum dx_i V_i^2 Z(t) over alive boxes (dissipative: alive while t <= t*)."""
    init = field.initial
    z_t = field.expf.z_at(t)
    contrib = init.widths * init.values**2 * z_t
    if field.mode is ContinuationMode.DISSIPATIVE:
        contrib = np.where(t <= field.t_star, contrib, 0.0)
    return float(np.sum(contrib))


def energy_eulerian(field: CharacteristicField, t: float) -> float:
    """int q(t,x)^2 dx by change of variables through the Jacobian.

    Each box contributes q^2 (dX/dx) dx on its image interval; slope and
    Jacobian come from their own evaluation paths and their shared
    near-singular denominator cancels multiplicatively, so the value stays
    eps-accurate even for boxes within float distance of blow-up.  (Reading
    the image widths off the assembled slice instead would difference large
    cumulative positions and lose exactly that cancellation.)  Equal to
    :func:`energy_lagrangian` to rounding.  Singular boxes carry NaN slope;
    callers wanting the identity at those instants must exclude them (see
    :func:`shslab.characteristics.singular_mask`).
    """
    q = q_lagrangian(field, t)
    jac = dxdx(field, t)
    return float(np.sum(field.initial.widths * jac * q * q))


def lagrangian_velocity_increment(
    field: CharacteristicField, s: float, t: float, x: float
) -> float:
    """Closed-form velocity change of the particle labelled ``x``.

    u(t, X(t,x)) - u(s, X(s,x)) = (int_{-inf}^x q0^2 dy) * (A(t) - A(s)):
    the particle velocity moves monotonically, at a rate set by the initial
    energy to its left.  Exact before any box to the left of ``x`` breaks
    (and for conservative flows, at all times).
    """
    init = field.initial
    overlap = np.clip(x - init.breakpoints[:-1], 0.0, init.widths)
    mass = float(np.sum(overlap * init.values**2))
    return mass * (field.expf.a_at(t) - field.expf.a_at(s))


def u_l2_increment(
    field: CharacteristicField,
    s: float,
    t: float,
    window: tuple[float, float],
    n_quad: int = 256,
) -> float:
    """||u(t,.) - u(s,.)||_{L^2(window)} at fixed Eulerian points.

    Unlike the Lagrangian increment this is rough in time: the support
    image moves with the noise, so the increment picks up the Brownian
    modulus and ensemble medians scale like |t - s|^{1/2}.  Evaluated by
    midpoint quadrature of the two slices.
    """
    xa, xb = window
    if xb <= xa:
        raise ValueError("window must have positive length")
    sl_s = eulerian_slice(field, s)
    sl_t = eulerian_slice(field, t)
    x = xa + (xb - xa) * (np.arange(n_quad) + 0.5) / n_quad
    du = sl_t.u_at(x) - sl_s.u_at(x)
    return math.sqrt(float(np.mean(du * du)) * (xb - xa))


def oleinik_report(field: CharacteristicField, t: float) -> dict:
    """Per-box one-sided slope bounds at time t.

    Returns the slope values, the sharp per-label bounds (0 for V <= 0,
    Z/(1/V + A) for V > 0), the universal envelope Z/A, and whether every
    non-singular box respects both.  At t = 0 the envelope is infinite.
    """
    vals = field.initial.values
    z_t = field.expf.z_at(t)
    a_t = field.expf.a_at(t)
    q = q_lagrangian(field, t)
    sharp = np.where(vals > 0.0, z_t / (1.0 / np.where(vals > 0, vals, 1.0) + a_t), 0.0)
    envelope = z_t / a_t if a_t > 0.0 else math.inf
    mask = ~singular_mask(field, t) & ~np.isnan(q)
    ok_sharp = bool(np.all(q[mask] <= sharp[mask] + 1e-12))
    ok_env = bool(np.all(q[mask] <= envelope + 1e-12))
    return {
        "q": q,
        "sharp": sharp,
        "envelope": envelope,
        "ok": ok_sharp and ok_env,
    }
