"""Verification diagnostics: weak-form residuals, ensembles, law tests.

Everything here checks the closed-form solver against statements it does
not itself use: distributional identities of the driving functionals,
weak formulations of the dynamics integrated against bump test functions,
a priori space-time bounds, the Bessel time-change hidden in the noise
clock, and the quadrature law of blow-up times.

Discretisation conventions, used consistently throughout:

* time integrals are trapezoid sums on the path grid;
* Stratonovich noise integrals use the midpoint rule in its
  endpoint-average form, sum of (G_k + G_{k+1})/2 * dW_k;
* the same integrals evaluated Ito-style (left endpoint) get the explicit
  correction (1/2) int int sigma q d/dx(sigma phi') dx ds added back, and
  the two discretisations must agree to O(dt);
* grid steps touching a flagged singular node are dropped from all time
  sums, and the dropped count / time mass / |dW| mass are reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .breaking import breaking_cdf_batch, mc_breaking_times
from .characteristics import (
    CharacteristicField,
    ContinuationMode,
    SigmaSpec,
    StepInitialData,
    build_field,
)
from .eulerian import u_l2_increment
from .paths import BrownianPath, TimeGrid, path_seed, refine_bridge, sample_brownian
from .yor import YorQuadratureParams

__all__ = [
    "SupportError",
    "TestFunction",
    "EnsembleStats",
    "ensemble_stats",
    "WeakFormResult",
    "weak_form_residual",
    "energy_form_residual",
    "ensemble_energies",
    "expected_energy_check",
    "apriori_space_time_norm",
    "apriori_bounds_check",
    "meeting_time_check",
    "bessel_timechange_check",
    "holder_exponent",
    "breaking_law_ks",
]


class SupportError(ValueError):
    """The test function's support never meets the solution's support."""


@dataclass(frozen=True)
class TestFunction:
    """Smooth bump phi(x) = exp(-1/(1 - s^2)), s = (x - center)/halfwidth.

    Compactly supported on [center - halfwidth, center + halfwidth] with
    all derivatives vanishing at the edges; ``d1`` and ``d2`` are the first
    and second spatial derivatives.
    """

    center: float
    halfwidth: float

    __test__ = False  # a distribution-theory test function, not a pytest one

    def __post_init__(self) -> None:
        if not (self.halfwidth > 0.0 and math.isfinite(self.center)):
            raise ValueError("need a finite center and positive halfwidth")

    def _pieces(self, x):
        s = (np.asarray(x, dtype=float) - self.center) / self.halfwidth
        inside = np.abs(s) < 1.0
        ss = np.where(inside, s, 0.0)
        one = 1.0 - ss * ss
        return inside, ss, one, np.where(inside, np.exp(-1.0 / one), 0.0)

    def __call__(self, x):
        return self._pieces(x)[3]

    def d1(self, x):
        inside, ss, one, val = self._pieces(x)
        g = -2.0 * ss / one**2
        return np.where(inside, val * g / self.halfwidth, 0.0)

    def d2(self, x):
        inside, ss, one, val = self._pieces(x)
        g = -2.0 * ss / one**2
        gp = -2.0 * (1.0 + 3.0 * ss * ss) / one**3
        return np.where(inside, val * (g * g + gp) / self.halfwidth**2, 0.0)

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.halfwidth, self.center + self.halfwidth)


@dataclass(frozen=True)
class EnsembleStats:
    """Mean and standard error of a per-path statistic.

    Built from the values ordered by path index, so the result does not
    depend on which thread or chunk finished first.
    """

    n_paths: int
    mean: float
    stderr: float


def ensemble_stats(values: np.ndarray) -> EnsembleStats:
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("need a 1-d array with at least two values")
    return EnsembleStats(v.size, float(np.mean(v)), float(np.std(v, ddof=1) / math.sqrt(v.size)))


# ---------------------------------------------------------------------------
# weak-form residuals


@dataclass(frozen=True)
class WeakFormResult:
    residual: float
    scheme: str
    skipped_steps: int
    skipped_dt: float
    skipped_dw_abs: float


def _field_node_arrays(field: CharacteristicField, k_end: int):
    """Closed-form per-node solution arrays up to grid index k_end."""
    init = field.initial
    v = init.values[None, :]
    a = field.expf.a[: k_end + 1, None]
    z = field.expf.z[: k_end + 1, None]
    denom = 1.0 + v * a
    with np.errstate(divide="ignore", invalid="ignore"):
        q = v * z / denom
    ufr = v * denom
    jac = denom * denom / z
    if field.mode is ContinuationMode.DISSIPATIVE:
        frozen = field.expf.grid.times()[: k_end + 1, None] >= field.t_star[None, :]
        q = np.where(frozen, 0.0, q)
        ufr = np.where(frozen, 0.0, ufr)
        jac = np.where(frozen, 0.0, jac)
    widths = init.widths[None, :] * jac
    x_nodes = np.concatenate(
        [np.zeros((k_end + 1, 1)), np.cumsum(widths, axis=1)], axis=1
    )
    if field.sigma.slope == 0.0:
        base = init.breakpoints[0] + field.sigma.intercept * field.path.w[: k_end + 1]
    else:
        e = 1.0 / field.expf.z[: k_end + 1]
        base = e * init.breakpoints[0] + (field.sigma.intercept / field.sigma.slope) * (e - 1.0)
    x_nodes += base[:, None]
    u_nodes = np.concatenate(
        [np.zeros((k_end + 1, 1)), np.cumsum(init.widths[None, :] * ufr, axis=1)], axis=1
    )
    # singular nodes: denominator within the window on a not-yet-frozen box
    with np.errstate(divide="ignore"):
        near = np.abs(1.0 / v + a) < field.singular_tol
    near = near & (v < 0.0)
    if field.mode is ContinuationMode.DISSIPATIVE:
        near &= field.expf.grid.times()[: k_end + 1, None] < field.t_star[None, :]
    bad = near.any(axis=1)
    return q, ufr, x_nodes, u_nodes, bad


def _piece_quadrature(x_nodes: np.ndarray, phi: TestFunction, n_panels: int, n_gl: int):
    """GL nodes/weights on every box image at every time node.

    Returns (x, w) of shape (nodes, boxes, n_panels * n_gl); the panel count
    is raised until panels are no wider than half the bump width, so the
    quadrature resolves phi regardless of how far the flow has stretched
    the boxes.
    """
    widths = np.diff(x_nodes, axis=1)
    max_w = float(np.max(widths)) if widths.size else 0.0
    need = int(math.ceil(max_w / (0.5 * phi.halfwidth))) if max_w > 0 else 1
    p = max(n_panels, need)
    gx, gw = np.polynomial.legendre.leggauss(n_gl)
    edges = np.linspace(0.0, 1.0, p + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    unit_x = (mid[:, None] + half * gx[None, :]).ravel()          # (p*n_gl,)
    unit_w = (half * np.broadcast_to(gw, (p, n_gl))).ravel()
    x = x_nodes[:, :-1, None] + widths[:, :, None] * unit_x[None, None, :]
    w = widths[:, :, None] * unit_w[None, None, :]
    return x, w


def _weak_form_terms(
    field: CharacteristicField,
    phi: TestFunction,
    t: float,
    density_weight: str,
    n_panels: int,
    n_gl: int,
):
    """Shared assembly for the momentum and energy weak forms.

    density_weight selects the tested density: "q" for the slope itself or
    "energy" for exp(a W) q^2, the weight that makes the conservative
    energy flux exactly divergence-free.
    """
    grid = field.expf.grid
    k_end = grid.index_of(t)
    if k_end < 1:
        raise ValueError("t must be at least one grid step")
    q, ufr, x_nodes, u_nodes, bad = _field_node_arrays(field, k_end)
    if bad[k_end] or bad[0]:
        raise ValueError("cannot evaluate the endpoint term at a singular node")
    x, w = _piece_quadrature(x_nodes, phi, n_panels, n_gl)

    lo, hi = phi.support
    if float(np.min(x_nodes[:, 0])) > hi or float(np.max(x_nodes[:, -1])) < lo:
        raise SupportError(
            "test function support "
            f"[{lo:g}, {hi:g}] never meets the solution support"
        )

    if density_weight == "q":
        dens = q
    elif density_weight == "energy":
        dens = q * q * (1.0 / field.expf.z[: k_end + 1, None])
    else:
        raise ValueError(f"unknown density weight {density_weight!r}")

    phi_x = phi(x)
    dphi_x = phi.d1(x)
    u_x = u_nodes[:, :-1, None] + q[:, :, None] * (x - x_nodes[:, :-1, None])
    sig_x = field.sigma(x)

    def against(fun_vals):
        return np.einsum("kbn,kbn->k", w, fun_vals)

    endpoint = against(dens[:, :, None] * phi_x)
    flux = against(dens[:, :, None] * u_x * dphi_x)
    noise_g = against(dens[:, :, None] * sig_x * dphi_x)
    if density_weight == "q":
        source = against(0.5 * q[:, :, None] * q[:, :, None] * phi_x)
    else:
        source = np.zeros(k_end + 1)
    corr = against(
        dens[:, :, None]
        * sig_x
        * (field.sigma.slope * dphi_x + sig_x * phi.d2(x))
    )
    # exactly-singular nodes produce NaNs; they only ever enter skipped
    # steps, so zeroing them here keeps the retained sums clean
    for arr in (endpoint, flux, noise_g, source, corr):
        arr[bad] = 0.0
    return endpoint, flux, noise_g, source, corr, bad, k_end


def _time_sums(endpoint, flux, noise_g, source, corr, bad, k_end, dt, dw, scheme):
    keep = ~(bad[:-1] | bad[1:])  # steps with both endpoints healthy

    def trap(f):
        return float(np.sum(0.5 * dt * (f[:-1] + f[1:]) * keep))

    t_flux = trap(flux)
    t_source = trap(source)
    if scheme == "stratonovich":
        t_noise = float(np.sum(0.5 * (noise_g[:-1] + noise_g[1:]) * dw * keep))
    elif scheme == "ito":
        t_noise = float(np.sum(noise_g[:-1] * dw * keep)) + 0.5 * trap(corr)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    residual = (endpoint[k_end] - endpoint[0]) - t_flux - t_noise - t_source
    skipped = int(np.sum(~keep))
    return residual, skipped, dt * skipped, float(np.sum(np.abs(dw)[~keep]))


def weak_form_residual(
    field: CharacteristicField,
    phi: TestFunction,
    t: float,
    scheme: str = "stratonovich",
    n_panels: int = 4,
    n_gl: int = 10,
) -> WeakFormResult:
    """Distributional residual of the dynamics against a bump at time t.

    Assembles int q phi |_0^t minus the time integrals of the transport
    flux, the noise flux, and the (1/2) q^2 source, all spatially integrated
    by per-box Gauss-Legendre panels.  Zero initial data gives exactly zero;
    otherwise the residual is the time-discretisation error of the noise
    integral and shrinks like O(dt^{1/2}) pathwise (O(dt) in the mean).

    ``scheme`` picks the noise discretisation: "stratonovich" for the
    endpoint-average midpoint rule, "ito" for the left-point rule plus the
    explicit drift correction; the two agree to O(dt).
    """
    endpoint, flux, noise_g, source, corr, bad, k_end = _weak_form_terms(
        field, phi, t, "q", n_panels, n_gl
    )
    dt = field.expf.grid.dt
    dw = np.diff(field.path.w[: k_end + 1])
    residual, skipped, sk_dt, sk_dw = _time_sums(
        endpoint, flux, noise_g, source, corr, bad, k_end, dt, dw, scheme
    )
    return WeakFormResult(residual, scheme, skipped, sk_dt, sk_dw)


def energy_form_residual(
    field: CharacteristicField,
    phi: TestFunction,
    t: float,
    scheme: str = "stratonovich",
    n_panels: int = 4,
    n_gl: int = 10,
) -> WeakFormResult:
    """Residual of the energy balance tested against a bump.

    The tested density is exp(a W(t)) q^2: with that exponential weight the
    conservative flow satisfies an exact local conservation law (the bare
    q^2 balance carries a -a q^2 dW source instead), so the conservative
    residual vanishes at the same rate as the momentum form.  For the
    dissipative flow with phi >= 0 the residual is nonpositive up to
    discretisation: each collapse removes dx V^2 phi(X(t*)) at once.
    """
    endpoint, flux, noise_g, source, corr, bad, k_end = _weak_form_terms(
        field, phi, t, "energy", n_panels, n_gl
    )
    dt = field.expf.grid.dt
    dw = np.diff(field.path.w[: k_end + 1])
    residual, skipped, sk_dt, sk_dw = _time_sums(
        endpoint, flux, noise_g, source, corr, bad, k_end, dt, dw, scheme
    )
    return WeakFormResult(residual, scheme, skipped, sk_dt, sk_dw)


# ---------------------------------------------------------------------------
# ensemble energy statistics

_CHUNK = 10_000


def ensemble_energies(
    sigma_prime: float,
    initial: StepInitialData,
    mode: ContinuationMode,
    ts: np.ndarray,
    dt: float,
    n_paths: int,
    master_seed: int,
    map_fn=map,
) -> np.ndarray:
    """Per-path energies at the given times, shape (n_paths, len(ts)).

    Vectorised over chunked path ensembles: the energy needs only Z(t) and,
    in dissipative mode, the alive test A(t) <= -1/V per box.  ``map_fn``
    may be an order-preserving parallel map (e.g. ``Executor.map``); chunk
    boundaries and seeds are fixed by the chunk index alone, so the result
    is identical for any worker count.
    """
    ts = np.asarray(ts, dtype=float)
    t_end = float(np.max(ts))
    n_steps = max(int(round(t_end / dt)), 1)
    grid = TimeGrid(t_end, n_steps)
    idx = np.array([grid.index_of(float(t)) for t in ts])
    v = initial.values
    wv2 = initial.widths * v**2
    diss = ContinuationMode(mode) is ContinuationMode.DISSIPATIVE
    with np.errstate(divide="ignore"):
        thresh = np.where(v < 0.0, -1.0 / v, math.inf)
    sqdt = math.sqrt(grid.dt)

    def one_chunk(job: tuple[int, int]) -> np.ndarray:
        chunk_idx, m = job
        rng = np.random.default_rng(np.random.SeedSequence((master_seed, chunk_idx)))
        w = np.concatenate(
            [np.zeros((m, 1)), np.cumsum(rng.standard_normal((m, n_steps)) * sqdt, axis=1)],
            axis=1,
        )
        z = np.exp(-sigma_prime * w)
        zmid = 0.25 * grid.dt * (z[:, :-1] + z[:, 1:])
        a = np.concatenate([np.zeros((m, 1)), np.cumsum(zmid, axis=1)], axis=1)
        block = np.empty((m, ts.size))
        for j, k in enumerate(idx):
            if diss:
                alive = a[:, k][:, None] <= thresh[None, :]
                block[:, j] = z[:, k] * (alive @ wv2)
            else:
                block[:, j] = z[:, k] * np.sum(wv2)
        return block

    sizes = [_CHUNK] * (n_paths // _CHUNK)
    if n_paths % _CHUNK:
        sizes.append(n_paths % _CHUNK)
    blocks = list(map_fn(one_chunk, list(enumerate(sizes))))
    return np.concatenate(blocks, axis=0)


def expected_energy_check(
    sigma_prime: float,
    initial: StepInitialData,
    ts: np.ndarray,
    n_paths: int,
    master_seed: int,
    dt: float = 5e-3,
) -> dict:
    """Conservative mean-energy law E[energy(t)] = ||q0||^2 exp(a^2 t / 2).

    Also profiles the full law: the conservative energy is exactly
    lognormal, log E(t) ~ N(log ||q0||^2, a^2 t), so the log-energies'
    variance, skewness and excess kurtosis are checked against their
    Gaussian sampling bands.  Returns per-time dicts with the ensemble
    stats, the target, its z-score, and the moment z-scores.
    """
    ts = np.asarray(ts, dtype=float)
    energies = ensemble_energies(
        sigma_prime, initial, ContinuationMode.CONSERVATIVE, ts, dt, n_paths, master_seed
    )
    n0 = initial.norm_l2_sq
    report = []
    for j, t in enumerate(ts):
        stats = ensemble_stats(energies[:, j])
        target = n0 * math.exp(0.5 * sigma_prime**2 * t)
        z = (stats.mean - target) / stats.stderr if stats.stderr > 0 else 0.0
        entry = {"t": float(t), "stats": stats, "target": target, "z": z}
        if sigma_prime != 0.0 and t > 0.0:
            logs = np.log(energies[:, j])
            n = logs.size
            var_target = sigma_prime**2 * t
            entry["log_var_z"] = (np.var(logs, ddof=1) - var_target) / (
                var_target * math.sqrt(2.0 / (n - 1))
            )
            c = logs - np.mean(logs)
            m2 = np.mean(c**2)
            entry["skew_z"] = (np.mean(c**3) / m2**1.5) / math.sqrt(6.0 / n)
            entry["kurt_z"] = (np.mean(c**4) / m2**2 - 3.0) / math.sqrt(24.0 / n)
        report.append(entry)
    return {"n_paths": n_paths, "per_time": report}


# ---------------------------------------------------------------------------
# a priori space-time bounds


def apriori_space_time_norm(
    initial: StepInitialData,
    alpha: float,
    t_end: float,
    n_time: int,
    sigma_prime: float = 0.0,
    seed: int = 0,
    path: BrownianPath | None = None,
) -> float:
    """Discretisation of int_0^T int |q|^{2+alpha} dx dt, dissipative flow.

    Per box the spatial integral is dx |V|^p z^{p-1} |1 + V A|^{2-p} with
    p = 2 + alpha, so each grid cell is integrated exactly in the clock
    variable A (which is piecewise linear on the grid), with z frozen at
    its cell mean; cells containing a blow-up (where the denominator
    changes sign) are excluded.  For alpha < 1 the norm is then
    refinement-stable, while at the boundary alpha = 1 (the cubic norm,
    which admits no bound) it grows by exactly 2 dx V^2 z(t*) log 2 per
    halving and per broken box as the excluded window shrinks.  (For that
    increment to be literally grid-free the blow-up must sit at the same
    cell fraction on every level, e.g. on a shared node.)

    Pass an explicit ``path`` (e.g. a bridge refinement of a coarser one)
    to compare resolutions on a single noise realisation; ``t_end`` and
    ``n_time`` are then taken from its grid.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    p = 2.0 + alpha
    if path is None:
        path = sample_brownian(TimeGrid(t_end, n_time), seed)
    fld = build_field(SigmaSpec(sigma_prime), initial, ContinuationMode.DISSIPATIVE, path)
    v = fld.initial.values[None, :]
    dx = fld.initial.widths[None, :]
    z = fld.expf.z
    zbar = 0.5 * (z[:-1] + z[1:])[:, None]
    m = 1.0 + v * fld.expf.a[:, None]  # denominator at the nodes
    # a root within float noise of a node must land in the excluded set,
    # not feed the antiderivative a log of a rounding residue
    keep = (m[:-1] > 1e-12) & (m[1:] > 1e-12)
    m_lo, m_hi = m[:-1], m[1:]
    ex = 3.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        if abs(ex) < 1e-12:
            anti = np.log(np.where(keep, m_hi / m_lo, 1.0))
        else:
            anti = (np.where(keep, m_hi, 1.0) ** ex - np.where(keep, m_lo, 1.0) ** ex) / ex
    slope = np.abs(v) * zbar / 2.0  # |dm/dt| within the cell
    with np.errstate(divide="ignore", invalid="ignore"):
        cells = dx * np.abs(v) ** p * zbar ** (p - 1.0) * np.abs(anti) / slope
    # a flat box has q identically zero: no contribution, and no clock motion
    cells = np.where((v != 0.0) & keep, cells, 0.0)
    return float(np.sum(cells))


def apriori_bounds_check(
    sigma_prime: float,
    initial: StepInitialData,
    mode: ContinuationMode,
    alpha: float,
    t_end: float,
    n_time: int,
    n_paths: int,
    master_seed: int,
    n_energy_times: int = 16,
) -> dict:
    """Monte Carlo a priori bounds: sup-in-time L^2 and the L^{2+alpha} norm.

    Estimates sup_t E ||q(t)||^2 on a coarse time sample and the expected
    space-time L^{2+alpha} norm, the latter both at the working resolution
    and at its bridge-refined halving on the same noise (their relative gap
    measures refinement stability).  In conservative mode the energy curve
    is also compared with its exponential law exp(a^2 t / 2).
    """
    ks = np.unique(
        np.round(np.linspace(n_time / n_energy_times, n_time, n_energy_times)).astype(int)
    )
    ts = ks * (t_end / n_time)  # snapped onto the working grid
    energies = ensemble_energies(
        sigma_prime, initial, mode, ts, t_end / n_time, n_paths, master_seed
    )
    means = np.mean(energies, axis=0)
    stderrs = np.std(energies, axis=0, ddof=1) / math.sqrt(n_paths)
    out = {
        "l2_sup": float(np.max(means)),
        "t_l2_sup": float(ts[int(np.argmax(means))]),
        "energy_times": ts.tolist(),
        "energy_means": means.tolist(),
        "energy_stderrs": stderrs.tolist(),
    }
    if ContinuationMode(mode) is ContinuationMode.CONSERVATIVE:
        targets = initial.norm_l2_sq * np.exp(0.5 * sigma_prime**2 * ts)
        out["law_max_abs_z"] = float(np.max(np.abs(means - targets) / stderrs))
        out["law_ok"] = out["law_max_abs_z"] <= 3.0
    grid = TimeGrid(t_end, n_time)
    coarse = np.empty(n_paths)
    fine = np.empty(n_paths)
    for i in range(n_paths):
        p = sample_brownian(grid, path_seed(master_seed, i))
        coarse[i] = apriori_space_time_norm(initial, alpha, t_end, n_time, sigma_prime, path=p)
        fine[i] = apriori_space_time_norm(
            initial, alpha, t_end, 2 * n_time, sigma_prime, path=refine_bridge(p)
        )
    out["spacetime_norm"] = ensemble_stats(coarse)
    out["spacetime_norm_refined"] = ensemble_stats(fine)
    out["refinement_rel_gap"] = abs(
        out["spacetime_norm_refined"].mean - out["spacetime_norm"].mean
    ) / out["spacetime_norm"].mean
    return out


# ---------------------------------------------------------------------------
# meeting times


def meeting_time_check(
    sigma_prime: float,
    initial: StepInitialData,
    t_end: float,
    n_steps: int,
    n_paths: int,
    master_seed: int,
    tol: float | None = None,
) -> dict:
    """First grid time adjacent breakpoints meet vs the closed-form t*.

    A negative box's width dx (1 + V A)^2 / Z crosses the local detection
    threshold dx V^2 Z dt^2 / 4 exactly when the denominator is within
    |V| Z dt / 2 of zero, i.e. within one step of t* -- up to the O(sqrt dt)
    wobble of Z across that step.  The detected meeting therefore obeys
    |t_meet - t*| <= dt (1 + O(sqrt dt)); pass a ``tol`` looser than the
    grid step (or run on a finer grid than the tolerance you check) for a
    strict guarantee.  Positive boxes must never trip the detector.
    """
    grid = TimeGrid(t_end, n_steps)
    dt = grid.dt
    if tol is None:
        tol = dt
    times = grid.times()
    v = initial.values
    gaps, n_checked, n_censored = [], 0, 0
    for i in range(n_paths):
        fld = build_field(
            SigmaSpec(sigma_prime),
            initial,
            ContinuationMode.DISSIPATIVE,
            sample_brownian(grid, path_seed(master_seed, i)),
        )
        denom = 1.0 + v[None, :] * fld.expf.a[:, None]
        width_over_dx = denom * denom / fld.expf.z[:, None]
        thresh = v[None, :] ** 2 * fld.expf.z[:, None] * dt * dt / 4.0
        trip = width_over_dx <= thresh
        for b in range(v.size):
            if v[b] >= 0.0:
                if trip[:, b].any():
                    raise AssertionError("positive box tripped the meeting detector")
                continue
            hits = np.nonzero(trip[:, b])[0]
            if hits.size == 0 or not math.isfinite(fld.t_star[b]):
                n_censored += 1
                continue
            t_meet = float(times[hits[0]])
            gaps.append(abs(t_meet - fld.t_star[b]))
            n_checked += 1
    max_gap = max(gaps) if gaps else 0.0
    return {
        "max_gap": max_gap,
        "dt": dt,
        "tol": tol,
        "n_checked": n_checked,
        "n_censored": n_censored,
        "ok": max_gap <= tol,
    }


# ---------------------------------------------------------------------------
# Bessel time-change


def bessel_timechange_check(path: BrownianPath, sigma_prime: float) -> dict:
    """Discrete fingerprints of the Bessel clock hidden in the noise.

    M(t) = -(1/sqrt 2) int exp(-a W/2) dW (left-point sums) must have
    quadratic variation equal to the clock A(t); and Y = (2/a^2) exp(-a W)
    must follow a squared Bessel equation in that clock.  Its dimension is
    two: matching the Ito drift of Y, exp(-a W) dt, against delta dA forces
    delta = 2, which is also the Lamperti dimension 2(1 + nu) of a
    driftless exponential and the only dimension consistent with Y never
    hitting zero.  The per-step defect of dY = 2 dA + 2 sqrt(Y) dM is then
    exp(-a W_k)(dW_k^2 - dt) + O(dW^3), mean-zero with mean absolute size
    O(dt); a dimension-one relation would instead leave a bias whose
    running sum converges to the clock itself.  Returns the relative QV
    mismatch at the horizon, the mean absolute per-step defect, and the
    integrated defect |sum_k r_k| (which vanishes under refinement at the
    correct dimension but would approach A(t) at dimension one).
    """
    if sigma_prime == 0.0:
        raise ValueError("the time change degenerates at zero noise slope")
    a = sigma_prime
    w = path.w
    dt = path.grid.dt
    dw = np.diff(w)
    ew = np.exp(-a * w)
    qv = float(np.sum(0.5 * ew[:-1] * dw * dw))
    clock = float(np.sum(0.25 * dt * (ew[:-1] + ew[1:])))
    y = (2.0 / a**2) * ew
    dm = -(1.0 / math.sqrt(2.0)) * np.exp(-0.5 * a * w[:-1]) * dw
    d_clock = 0.5 * ew[:-1] * dt
    defect = np.diff(y) - 2.0 * d_clock - 2.0 * np.sqrt(y[:-1]) * dm
    return {
        "qv": qv,
        "clock": clock,
        "qv_rel_mismatch": abs(qv - clock) / clock,
        "residual_scale": float(np.mean(np.abs(defect))),
        "integrated_defect": float(abs(np.sum(defect))),
    }


# ---------------------------------------------------------------------------
# velocity increment roughness


def holder_exponent(
    sigma: SigmaSpec,
    initial: StepInitialData,
    window: tuple[float, float],
    t0: float,
    lags: np.ndarray,
    n_paths: int,
    master_seed: int,
    dt: float = 1e-3,
) -> dict:
    """Time-regularity exponent of the Eulerian velocity in L^2(window).

    Fits log median_paths ||u(t0 + lag) - u(t0)||_{L^2(window)} against
    log lag.  The Eulerian amplitude rides the noise, so the increment
    inherits the Brownian modulus and the fitted slope sits near 1/2
    (against the smooth Lagrangian rate 1) -- provided the window lies well
    inside the support image for most paths; the constant velocity tail
    outside the support carries the full amplitude fluctuation with no
    small-scale averaging, and a window touching it fits visibly higher.
    """
    lags = np.asarray(lags, dtype=float)
    t_end = t0 + float(np.max(lags))
    grid = TimeGrid(t_end, int(round(t_end / dt)))
    incr = np.empty((n_paths, lags.size))
    for i in range(n_paths):
        fld = build_field(
            sigma, initial, ContinuationMode.DISSIPATIVE,
            sample_brownian(grid, path_seed(master_seed, i)),
        )
        for j, lag in enumerate(lags):
            incr[i, j] = u_l2_increment(fld, t0, t0 + float(lag), window)
    med = np.median(incr, axis=0)
    slope = float(np.polyfit(np.log(lags), np.log(med), 1)[0])
    return {"lags": lags.tolist(), "medians": med.tolist(), "exponent": slope}


# ---------------------------------------------------------------------------
# breaking-time law goodness of fit


def breaking_law_ks(
    q0x: float,
    sigma_prime: float,
    n_paths: int,
    master_seed: int,
    t_end: float | None = None,
    dt: float = 5e-3,
    n_grid: int = 40,
    params: YorQuadratureParams | None = None,
) -> dict:
    """Censored one-sample KS test of simulated blow-up times vs quadrature.

    Simulates ``n_paths`` blow-up times, evaluates the quadrature survival
    function on a quantile-spaced grid of the censored window (from the
    law's validity floor to ``t_end``, by default the 65% breaking
    quantile), interpolates it monotonically, and takes the the sup distance
    at the empirical jump points against the full-sample-normalised
    empirical CDF.  Restricting the sup to a sub-window only lowers the
    statistic, so comparing against the usual critical value
    c(alpha)/sqrt(n) is conservative.
    """
    if q0x >= 0.0 or sigma_prime == 0.0:
        raise ValueError("the law test needs a negative slope and nonzero noise")
    pm = params or YorQuadratureParams.default()
    t_min_valid = 4.0 * pm.min_t / sigma_prime**2
    if t_end is None:
        pilot = mc_breaking_times(
            200.0 / abs(q0x), 4000, q0x, sigma_prime, 2000, master_seed + 1
        )
        t_end = float(np.quantile(pilot[np.isfinite(pilot)], 0.65))
    tstars = mc_breaking_times(
        t_end, int(math.ceil(t_end / dt)), q0x, sigma_prime, n_paths, master_seed
    )
    sel = np.sort(tstars[(tstars >= t_min_valid) & (tstars <= t_end)])
    if sel.size < 100:
        raise ValueError("censored window holds too few samples for a KS test")
    qs = np.quantile(sel, np.linspace(0.0, 1.0, n_grid))
    grid = np.unique(np.concatenate([[t_min_valid], qs, [t_end]]))
    surv = breaking_cdf_batch(grid, q0x, sigma_prime, pm)
    cdf = PchipInterpolator(grid, 1.0 - surv)
    base = float(np.mean(tstars < t_min_valid))
    f_emp_hi = base + np.arange(1, sel.size + 1) / n_paths
    f_emp_lo = base + np.arange(0, sel.size) / n_paths
    f_quad = cdf(sel)
    stat = max(
        float(np.max(np.abs(f_emp_hi - f_quad))),
        float(np.max(np.abs(f_emp_lo - f_quad))),
    )
    critical = 1.628 / math.sqrt(n_paths)  # alpha = 0.01
    return {
        "statistic": stat,
        "critical": critical,
        "ok": stat < critical,
        "t_end": t_end,
        "t_min": t_min_valid,
        "n_in_window": int(sel.size),
    }
