"""Brownian path sampling and the exponential functionals driving the closed forms.

Every explicit formula in this package is a deterministic function of a sampled
Wiener path ``W`` through the two derived processes

    Z(t) = exp(-sigma' * W(t)),        A(t) = (1/2) * integral_0^t Z(s) ds,

where ``sigma'`` is the slope of the linear noise coefficient.  ``A`` is
computed by the trapezoid rule on the node values of ``Z``, which makes it
piecewise linear between nodes; downstream consumers (breaking times, the
characteristic field) rely on that piecewise-linear structure being exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TimeGrid",
    "BrownianPath",
    "ExpFunctionals",
    "path_seed",
    "sample_brownian",
    "refine_bridge",
    "exp_functionals",
    "a_mu_functional",
]

# exp() overflow threshold for IEEE doubles, with headroom for downstream squares
_EXP_GUARD = 690.0


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [0, t_end] with n_steps steps (n_steps + 1 nodes).

    Parameters
    ----------
    t_end : float
        Final time, strictly positive.
    n_steps : int
        Number of uniform steps, at least 1.
    """

    t_end: float
    n_steps: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.t_end) or self.t_end <= 0.0:
            raise ValueError(f"t_end must be finite and positive, got {self.t_end}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    def times(self) -> np.ndarray:
        """Node times t_k = k * t_end / n_steps, shape (n_steps + 1,)."""
        return np.linspace(0.0, self.t_end, self.n_steps + 1)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Index of the grid node equal to ``t`` (within ``tol * dt``).

        Raises
        ------
        ValueError
            If ``t`` is outside [0, t_end] or does not sit on a node.
        """
        if t < -tol * self.dt or t > self.t_end * (1.0 + 1e-12) + tol * self.dt:
            raise ValueError(f"t={t} outside grid [0, {self.t_end}]")
        k = int(round(t / self.dt))
        k = min(max(k, 0), self.n_steps)
        if abs(k * self.dt - t) > tol * self.dt:
            raise ValueError(f"t={t} does not lie on the grid (dt={self.dt})")
        return k


@dataclass(frozen=True)
class BrownianPath:
    """A sampled standard Brownian path on a uniform grid.

    Attributes
    ----------
    grid : TimeGrid
    w : numpy.ndarray
        Path values W(t_k), shape (n_steps + 1,), with w[0] = 0.
    seed : int
        The seed that generated the path (kept for reproducibility and for
        deriving deterministic refinement seeds).
    """

    grid: TimeGrid
    w: np.ndarray = field(repr=False)
    seed: int

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        if w.shape != (self.grid.n_steps + 1,):
            raise ValueError(
                f"w has shape {w.shape}, expected ({self.grid.n_steps + 1},)"
            )
        if w[0] != 0.0:
            raise ValueError("Brownian path must start at W(0) = 0")
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class ExpFunctionals:
    """Node values of Z(t) = exp(-sigma' W(t)) and A(t) = (1/2) int_0^t Z ds.

    ``a`` uses the trapezoid rule, so it is nondecreasing, piecewise linear
    between nodes, and a[0] = 0.
    """

    grid: TimeGrid
    z: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    sigma_prime: float

    def __post_init__(self) -> None:
        if self.z.shape != self.a.shape or self.z.shape != (self.grid.n_steps + 1,):
            raise ValueError("z and a must both have one value per grid node")

    def a_at(self, t: float) -> float:
        """A(t) for any t in [0, t_end], exact for the piecewise-linear model."""
        tt = self.grid.times()
        if t < 0.0 or t > self.grid.t_end * (1.0 + 1e-12):
            raise ValueError(f"t={t} outside grid [0, {self.grid.t_end}]")
        return float(np.interp(t, tt, self.a))

    def z_at(self, t: float) -> float:
        """Z(t) by linear interpolation between nodes (exact at nodes)."""
        tt = self.grid.times()
        if t < 0.0 or t > self.grid.t_end * (1.0 + 1e-12):
            raise ValueError(f"t={t} outside grid [0, {self.grid.t_end}]")
        return float(np.interp(t, tt, self.z))


def path_seed(master_seed: int, path_index: int) -> int:
    """Derive a per-path 64-bit seed from (master_seed, path_index).

    Uses :class:`numpy.random.SeedSequence` hashing so the mapping is
    reproducible, splittable, and independent of the order in which paths
    are generated.
    """
    words = np.random.SeedSequence((int(master_seed), int(path_index))).generate_state(
        2, np.uint32
    )
    return (int(words[0]) << 32) | int(words[1])


def sample_brownian(grid: TimeGrid, seed: int) -> BrownianPath:
    """Sample a standard Brownian path on ``grid``.

    The same ``(grid, seed)`` pair always produces a bit-identical path.

    Parameters
    ----------
    grid : TimeGrid
    seed : int
        Seed for the underlying PCG64 generator.

    Returns
    -------
    BrownianPath
    """
    rng = np.random.default_rng(int(seed))
    dw = rng.standard_normal(grid.n_steps) * np.sqrt(grid.dt)
    w = np.empty(grid.n_steps + 1)
    w[0] = 0.0
    np.cumsum(dw, out=w[1:])
    return BrownianPath(grid=grid, w=w, seed=int(seed))


def refine_bridge(path: BrownianPath) -> BrownianPath:
    """Insert Brownian-bridge midpoints, halving the step of ``path``.

    The refined path agrees with the coarse one on the coarse nodes, and the
    inserted midpoints are drawn from the exact conditional (bridge) law
    Normal((W_k + W_{k+1})/2, dt/4).  The bridge noise seed is derived
    deterministically from ``(path.seed, path.grid.n_steps)`` so repeated
    refinement of the same path is reproducible.

    Returns
    -------
    BrownianPath
        Path on a grid with 2 * n_steps steps; ``seed`` is inherited.
    """
    grid = path.grid
    fine = TimeGrid(grid.t_end, 2 * grid.n_steps)
    rng = np.random.default_rng(
        np.random.SeedSequence((int(path.seed), int(grid.n_steps), 0x9E3779B9))
    )
    mid = 0.5 * (path.w[:-1] + path.w[1:]) + 0.5 * np.sqrt(grid.dt) * rng.standard_normal(
        grid.n_steps
    )
    w = np.empty(2 * grid.n_steps + 1)
    w[0::2] = path.w
    w[1::2] = mid
    return BrownianPath(grid=fine, w=w, seed=path.seed)


def exp_functionals(path: BrownianPath, sigma_prime: float) -> ExpFunctionals:
    """Compute Z and A along ``path`` for noise slope ``sigma_prime``.

    Raises
    ------
    OverflowError
        If ``|sigma_prime * W(t_k)|`` exceeds the double-precision exponent
        range at any node (the path has wandered too far for exp to be
        representable; increase t resolution or reduce sigma_prime).
    """
    arg = -float(sigma_prime) * path.w
    amax = float(np.max(np.abs(arg))) if arg.size else 0.0
    if amax > _EXP_GUARD:
        raise OverflowError(
            f"exp(-sigma'*W) exponent {amax:.1f} exceeds the representable "
            f"range ({_EXP_GUARD}); path seed {path.seed}"
        )
    z = np.exp(arg)
    dt = path.grid.dt
    a = np.empty_like(z)
    a[0] = 0.0
    np.cumsum(0.25 * dt * (z[:-1] + z[1:]), out=a[1:])
    return ExpFunctionals(grid=path.grid, z=z, a=a, sigma_prime=float(sigma_prime))


def a_mu_functional(path: BrownianPath, mu: float, t: float) -> float:
    """Trapezoid value of the exponential functional int_0^t exp(2*mu*s + 2*W(s)) ds.

    ``t`` may fall between nodes; the integrand is then linearly interpolated
    over the partial step, which is consistent with the trapezoid model.

    Raises
    ------
    ValueError
        If ``t`` is negative or beyond the end of the grid.
    """
    if t < 0.0 or t > path.grid.t_end * (1.0 + 1e-12):
        raise ValueError(f"t={t} beyond grid end {path.grid.t_end}")
    if t == 0.0:
        return 0.0
    tt = path.grid.times()
    f = np.exp(2.0 * mu * tt + 2.0 * path.w)
    dt = path.grid.dt
    k = int(np.floor(t / dt * (1.0 + 1e-15)))
    k = min(k, path.grid.n_steps)
    val = float(np.sum(0.5 * dt * (f[:k] + f[1 : k + 1]))) if k >= 1 else 0.0
    rem = t - k * dt
    if rem > 1e-14 * dt and k < path.grid.n_steps:
        f_t = f[k] + (f[k + 1] - f[k]) * (rem / dt)
        val += 0.5 * rem * (f[k] + f_t)
    return val
