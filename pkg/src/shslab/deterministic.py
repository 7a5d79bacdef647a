"""Noiseless dissipative reference solution with exact defect bookkeeping.

With sigma = 0 the characteristic system is autonomous: a box of initial
slope V carries

    q(t) = 2V / (2 + V t),        dX/dx = (2 + V t)^2 / 4,

valid while 2 + V t > 0; a negative box collapses at t* = -2/V.  The
dissipative continuation freezes collapsed boxes at zero width and zero
slope, and books the lost energy as a point atom: box j collapsing
contributes mass dx_j V_j^2 at the glued position X_j(t).  Because the atom
mass is the exact float product that leaves the energy sum, the invariant

    defect total + remaining energy = ||q0||^2

holds bit-for-bit at every time.

This module is the exact reference for the sigma -> 0 limit of the noisy
solver: with slope and intercept both zero the stochastic field must match
it to rounding, with slope zero and intercept b the match holds after
translating space by b W(t), and with tiny slope the deviation is O(slope).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .characteristics import (
    ContinuationMode,
    SigmaSpec,
    StepInitialData,
    build_field,
    build_X,
    q_lagrangian,
)
from .eulerian import EulerianSlice, energy_lagrangian, eulerian_slice
from .paths import TimeGrid, sample_brownian

__all__ = [
    "DefectLedger",
    "det_breaking_times",
    "det_characteristics",
    "det_solution",
    "det_energy",
    "defect_ledger",
    "sigma_zero_consistency",
]


@dataclass(frozen=True)
class DefectLedger:
    """Point atoms of lost energy at one time.

    ``positions``/``masses`` list one atom per collapsed box (possibly
    stacked at equal positions); ``total`` is their exact sum.
    """

    t: float
    positions: np.ndarray
    masses: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.masses))


def _alive(initial: StepInitialData, t: float) -> np.ndarray:
    return 2.0 + initial.values * t > 0.0


def det_breaking_times(initial: StepInitialData) -> np.ndarray:
    """Per-box collapse times -2/V (inf for nonnegative slopes)."""
    v = initial.values
    with np.errstate(divide="ignore"):
        return np.where(v < 0.0, -2.0 / v, math.inf)


def det_characteristics(initial: StepInitialData, t: float) -> np.ndarray:
    """Breakpoint positions: X_i = x_0 + (1/4) sum_j dx_j (2 + V_j t)^2 over
    alive boxes j <= i."""
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    jac = np.where(_alive(initial, t), 0.25 * (2.0 + initial.values * t) ** 2, 0.0)
    widths = initial.widths * jac
    x0 = float(initial.breakpoints[0])
    return np.concatenate([[x0], x0 + np.cumsum(widths)])


def det_solution(initial: StepInitialData, t: float) -> EulerianSlice:
    """The dissipative slice at time t: slope 2V/(2+Vt) on alive boxes."""
    alive = _alive(initial, t)
    v = initial.values
    with np.errstate(divide="ignore"):
        q = np.where(alive, 2.0 * v / (2.0 + v * t), 0.0)
    du = np.where(alive, initial.widths * v * (2.0 + v * t) / 2.0, 0.0)
    u = np.concatenate([[0.0], np.cumsum(du)])
    return EulerianSlice(t, det_characteristics(initial, t), q, u)


def det_energy(initial: StepInitialData, t: float) -> float:
    """int q(t)^2 dx = sum dx_i V_i^2 over alive boxes (strict 2 + V t > 0)."""
    contrib = initial.widths * initial.values**2
    return float(np.sum(np.where(_alive(initial, t), contrib, 0.0)))


def defect_ledger(initial: StepInitialData, t: float) -> DefectLedger:
    """Atoms of collapsed boxes at time t, carried at their glued positions.

    Each atom's mass is the exact summand dx_j V_j^2 removed from the
    energy, so ``ledger.total + det_energy(initial, t)`` reproduces
    ``initial.norm_l2_sq`` with no rounding at all.
    """
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    dead = ~_alive(initial, t)
    xs = det_characteristics(initial, t)
    positions = xs[:-1][dead]
    masses = (initial.widths * initial.values**2)[dead]
    return DefectLedger(t, positions, masses)


def sigma_zero_consistency(
    initial: StepInitialData,
    t: float,
    sigma_prime: float = 0.0,
    intercept: float = 0.0,
    seed: int = 0,
    n_steps: int = 2000,
) -> float:
    """Max deviation between the noisy machinery and this exact reference.

    Builds a dissipative stochastic field with the given noise coefficients
    and compares slopes, breakpoint positions, velocities and energy against
    the deterministic solution, translating space by intercept * W(t) (the
    exact effect of a constant sigma).  Returns the largest absolute
    deviation; for sigma_prime = intercept = 0 this is pure rounding, and it
    grows linearly in a small sigma_prime.
    """
    grid = TimeGrid(max(t, 1e-6) * 1.25, n_steps)
    path = sample_brownian(grid, seed)
    fld = build_field(
        SigmaSpec(sigma_prime, intercept), initial, ContinuationMode.DISSIPATIVE, path
    )
    w_t = float(np.interp(t, grid.times(), path.w))
    shift = intercept * w_t

    ref = det_solution(initial, t)
    q_noisy = q_lagrangian(fld, t)
    x_noisy = build_X(fld, t)
    dev = float(np.max(np.abs(q_noisy - ref.q_boxes)))
    dev = max(dev, float(np.max(np.abs(x_noisy - (ref.x_nodes + shift)))))
    dev = max(dev, abs(energy_lagrangian(fld, t) - det_energy(initial, t)))
    sl = eulerian_slice(fld, t)
    dev = max(dev, float(np.max(np.abs(sl.u_nodes - ref.u_nodes))))
    return dev
