"""Blow-up times of characteristics: pathwise location and their law.

Along a characteristic carrying initial slope ``q0x``, the slope solves a
Riccati equation whose denominator is 1 + q0x * A(t) with
A(t) = (1/2) int_0^t exp(-sigma' W) ds.  The characteristic breaks at the
first time

    t* : A(t*) = -1/q0x,

which is finite only for negative initial slope (A is strictly increasing).
Pathwise, ``breaking_time`` locates t* exactly on the piecewise-linear
trapezoid model of A — within the bracketing grid step the crossing is
solved by linear interpolation, which is exact for that model, so
A(t*) = -1/q0x holds to rounding.

In law, Brownian scaling W(s) = (2/sigma') B(sigma'^2 s / 4) identifies

    A(t) = (2/sigma'^2) * A0(sigma'^2 t / 4),   A0(u) = int_0^u exp(2 B) ds,

so the survival function of the blow-up time is a value of the
exponential-functional distribution:

    P(t* >= t) = P( A0(sigma'^2 t/4) <= sigma'^2 / (2 |q0x|) ).

``breaking_cdf`` evaluates that by quadrature (see :mod:`shslab.yor`);
``mc_breaking_cdf`` estimates the same probability by direct path
simulation, which is the independent cross-check used in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .paths import ExpFunctionals, TimeGrid
from .yor import YorQuadratureParams, yor_cdf, yor_cdf_batch

__all__ = [
    "BreakingTime",
    "breaking_time",
    "breaking_cdf",
    "breaking_cdf_batch",
    "mc_breaking_times",
    "mc_breaking_cdf",
]

_MC_CHUNK = 10_000  # paths per simulation chunk; fixed so seeding is stable


@dataclass(frozen=True)
class BreakingTime:
    """Blow-up time of a single characteristic.

    Attributes
    ----------
    value : float
        The blow-up time; ``math.inf`` when the characteristic does not
        break (nonnegative initial slope, or not within the simulated
        horizon).
    bracket : tuple[float, float] | None
        The grid step (t_k, t_{k+1}) containing ``value``, or None when
        ``value`` is infinite.
    """

    value: float
    bracket: tuple[float, float] | None

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)


def breaking_time(expf: ExpFunctionals, q0x: float) -> BreakingTime:
    """First time A(t) reaches -1/q0x on the path's trapezoid model of A.

    Parameters
    ----------
    expf : ExpFunctionals
        Exponential functionals of one driving path.
    q0x : float
        Initial slope carried by the characteristic.

    Returns
    -------
    BreakingTime
        Infinite for q0x >= 0, and for q0x < 0 whenever A stays below
        -1/q0x on the whole grid horizon.
    """
    if q0x >= 0.0:
        return BreakingTime(math.inf, None)
    target = -1.0 / q0x
    a = expf.a
    if a[-1] < target:
        return BreakingTime(math.inf, None)
    k = int(np.searchsorted(a, target, side="left"))
    times = expf.grid.times()
    if k == 0:
        return BreakingTime(0.0, (float(times[0]), float(times[1])))
    # A is piecewise linear between grid nodes, so this crossing is exact
    t_lo, t_hi = float(times[k - 1]), float(times[k])
    frac = (target - a[k - 1]) / (a[k] - a[k - 1])
    return BreakingTime(t_lo + frac * (t_hi - t_lo), (t_lo, t_hi))


def _law_args(t: float, q0x: float, sigma_prime: float) -> tuple[float, float]:
    tau = sigma_prime * sigma_prime * t / 4.0
    chi0 = sigma_prime * sigma_prime / (2.0 * abs(q0x))
    return tau, chi0


def breaking_cdf(
    t: float,
    q0x: float,
    sigma_prime: float,
    params: YorQuadratureParams | None = None,
) -> float:
    """P(t* >= t) for the blow-up time of a slope-``q0x`` characteristic.

    For sigma_prime = 0 the answer is the deterministic indicator
    1_{t <= -2/q0x}; otherwise the probability is a distribution value of
    the exponential functional at the rescaled time sigma'^2 t / 4, which
    must lie above the quadrature validity floor.
    """
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if q0x >= 0.0:
        return 1.0
    if sigma_prime == 0.0:
        return 1.0 if t <= -2.0 / q0x else 0.0
    if t == 0.0:
        return 1.0
    tau, chi0 = _law_args(t, q0x, sigma_prime)
    return yor_cdf(chi0, tau, params)


def breaking_cdf_batch(
    ts: np.ndarray,
    q0x: float,
    sigma_prime: float,
    params: YorQuadratureParams | None = None,
) -> np.ndarray:
    """Vectorised :func:`breaking_cdf` over times (one slope, one noise)."""
    ts = np.asarray(ts, dtype=float)
    if np.any(ts < 0.0):
        raise ValueError("times must be nonnegative")
    if q0x >= 0.0:
        return np.ones(ts.shape)
    if sigma_prime == 0.0:
        return (ts <= -2.0 / q0x).astype(float)
    out = np.ones(ts.shape)
    pos = ts > 0.0
    if np.any(pos):
        tau = sigma_prime * sigma_prime * ts[pos] / 4.0
        chi0 = sigma_prime * sigma_prime / (2.0 * abs(q0x))
        out[pos] = yor_cdf_batch(chi0, tau, params)
    return out


def mc_breaking_times(
    t_end: float,
    n_steps: int,
    q0x: float,
    sigma_prime: float,
    n_paths: int,
    master_seed: int,
) -> np.ndarray:
    """Simulated blow-up times for ``n_paths`` independent driving paths.

    Each path's A is the same trapezoid model used everywhere else, and the
    crossing of -1/q0x is located by exact linear interpolation inside the
    bracketing step.  Paths that do not break by ``t_end`` report inf.
    Chunked and vectorised; reproducible for a fixed master seed.
    """
    if q0x >= 0.0:
        return np.full(n_paths, math.inf)
    grid = TimeGrid(t_end, n_steps)
    dt = grid.dt
    target = -1.0 / q0x
    sqdt = math.sqrt(dt)
    out = np.empty(n_paths)
    done = 0
    chunk_idx = 0
    while done < n_paths:
        m = min(_MC_CHUNK, n_paths - done)
        rng = np.random.default_rng(np.random.SeedSequence((master_seed, chunk_idx)))
        dw = rng.standard_normal((m, n_steps)) * sqdt
        w = np.cumsum(dw, axis=1)
        z = np.exp(-sigma_prime * w)
        # trapezoid cumulative of (1/2) Z with Z(0) = 1
        a = np.empty((m, n_steps + 1))
        a[:, 0] = 0.0
        zmid = 0.25 * dt * (np.concatenate([np.ones((m, 1)), z[:, :-1]], axis=1) + z)
        np.cumsum(zmid, axis=1, out=a[:, 1:])
        hit = a[:, -1] >= target
        k = np.argmax(a >= target, axis=1)  # first index with a >= target (>= 1)
        kk = np.maximum(k, 1)
        a_lo = np.take_along_axis(a, (kk - 1)[:, None], axis=1)[:, 0]
        a_hi = np.take_along_axis(a, kk[:, None], axis=1)[:, 0]
        frac = (target - a_lo) / (a_hi - a_lo)
        tstar = (kk - 1 + frac) * dt
        tstar[~hit] = math.inf
        out[done : done + m] = tstar
        done += m
        chunk_idx += 1
    return out


def mc_breaking_cdf(
    t: float,
    q0x: float,
    sigma_prime: float,
    n_paths: int,
    master_seed: int,
    t_end: float | None = None,
    dt: float = 5e-3,
) -> tuple[float, float]:
    """Monte Carlo estimate of P(t* >= t) with its standard error.

    Parameters
    ----------
    t : float
        Query time.
    q0x, sigma_prime : float
        Initial slope and noise slope.
    n_paths : int
        Ensemble size.
    master_seed : int
        Seed; estimates are reproducible for a fixed seed.
    t_end : float, optional
        Simulation horizon; defaults to ``t`` (paths only need to be
        simulated up to the query time).
    dt : float, optional
        Target time step; the grid uses ceil(t_end/dt) uniform steps.

    Returns
    -------
    (prob, stderr)
        For q0x >= 0 this is exactly (1.0, 0.0) with no simulation.
    """
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if q0x >= 0.0 or t == 0.0:
        return 1.0, 0.0
    horizon = t if t_end is None else t_end
    if horizon < t:
        raise ValueError(f"t_end={horizon} is before the query time {t}")
    n_steps = max(int(math.ceil(horizon / dt)), 1)
    tstar = mc_breaking_times(horizon, n_steps, q0x, sigma_prime, n_paths, master_seed)
    p = float(np.mean(tstar >= t))
    stderr = math.sqrt(max(p * (1.0 - p), 0.0) / n_paths)
    return p, stderr
