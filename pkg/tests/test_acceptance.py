"""Production-scale acceptance battery.

One test per advertised guarantee, each printing a single verdict line with
the measured statistic and its wall-clock budget, so

    pytest -v -s tests/test_acceptance.py

doubles as a run report.  Everything is seeded; the statistics below are
deterministic reruns, not fresh draws.  The slowest entry is the breaking-time
law (nine parameter combinations at 10^5 paths each); the whole battery stays
inside its summed budgets on one core.
"""

import math
import time

import numpy as np

from shslab.characteristics import (
    ContinuationMode,
    SigmaSpec,
    StepInitialData,
    build_field,
    sde_cross_check,
    singular_mask,
)
from shslab.deterministic import defect_ledger, det_breaking_times, det_energy, det_solution
from shslab.diagnostics import (
    TestFunction,
    apriori_bounds_check,
    apriori_space_time_norm,
    bessel_timechange_check,
    breaking_law_ks,
    ensemble_energies,
    ensemble_stats,
    meeting_time_check,
    weak_form_residual,
)
from shslab.eulerian import energy_eulerian, energy_lagrangian, oleinik_report
from shslab.paths import TimeGrid, path_seed, refine_bridge, sample_brownian

CONS = ContinuationMode.CONSERVATIVE
DISS = ContinuationMode.DISSIPATIVE

BOX = StepInitialData.box(-1.0)  # unit box on [0, 1], breaks at t* = 2
MIXED = StepInitialData(
    np.linspace(-1.0, 2.0, 9),
    np.array([1.5, -2.0, 0.5, -0.75, 3.0, -1.2, 0.0, 2.2]),
)


def _report(num: int, ok: bool, elapsed: float, budget: float, detail: str) -> None:
    in_budget = elapsed <= budget
    verdict = "PASS" if ok and in_budget else "FAIL"
    print(f"criterion {num:02d} [{verdict}] {detail} ({elapsed:.1f}s / budget {budget:.0f}s)")
    assert ok, detail
    assert in_budget, f"criterion {num:02d} over budget: {elapsed:.1f}s > {budget:.0f}s"


def test_criterion_01_deterministic_box_reference():
    t0 = time.perf_counter()

    t_star = det_breaking_times(BOX)
    slope_at_1 = det_solution(BOX, 1.0).q_boxes

    noise_free = sample_brownian(TimeGrid(3.0, 300), 0)
    cons = build_field(SigmaSpec(0.0), BOX, CONS, noise_free)
    cons_dev = max(
        max(abs(energy_lagrangian(cons, t) - 1.0), abs(energy_eulerian(cons, t) - 1.0))
        for t in (0.0, 1.0, 3.0)
    )
    diss_dev = max(
        abs(det_energy(BOX, t) + defect_ledger(BOX, t).total - 1.0) for t in (0.0, 1.0, 3.0)
    )

    elapsed = time.perf_counter() - t0
    ok = (
        t_star.tolist() == [2.0]
        and abs(slope_at_1[0] + 2.0) <= 1e-12
        and cons_dev <= 1e-12
        and diss_dev <= 1e-12
    )
    _report(
        1,
        ok,
        elapsed,
        1.0,
        f"t*={t_star[0]:g}, q(1)={slope_at_1[0]:g}, "
        f"cons |E-1|<={cons_dev:.1e}, diss |E+defect-1|<={diss_dev:.1e}",
    )


def test_criterion_02_pathwise_energy_identity():
    # E_eulerian(t) == z(t) * ||q0||^2 at every node of every path, to
    # 1e-10 * ||q0||^2, skipping nodes flagged singular.
    t0 = time.perf_counter()
    n0 = MIXED.norm_l2_sq
    grid = TimeGrid(3.0, 300)
    worst = 0.0
    excluded = 0
    for sp in (0.5, 1.0):
        sig = SigmaSpec(sp)
        for i in range(100):
            field = build_field(sig, MIXED, CONS, sample_brownian(grid, path_seed(2024, i)))
            for k, t in enumerate(field.expf.grid.times()):
                if singular_mask(field, float(t)).any():
                    excluded += 1
                    continue
                dev = abs(energy_eulerian(field, float(t)) - field.expf.z[k] * n0)
                worst = max(worst, dev)
    elapsed = time.perf_counter() - t0
    tol = 1e-10 * n0
    _report(
        2,
        worst <= tol,
        elapsed,
        10.0,
        f"worst |E - z*E0| = {worst:.2e} (tol {tol:.1e}), nodes excluded={excluded}",
    )


def test_criterion_03_mean_energy_growth_law():
    # Conservative mean energy at t=1 with unit-slope noise: the pathwise
    # identity E(t) = e^{-W(t)} ||q0||^2 makes the mean the lognormal moment
    # ||q0||^2 e^{t/2}; the Monte Carlo mean must sit within three standard
    # errors of exp(1/2).
    t0 = time.perf_counter()
    assert abs(BOX.norm_l2_sq - 1.0) <= 1e-15
    energies = ensemble_energies(1.0, BOX, CONS, [1.0], 5e-3, 100_000, 314159)
    stats = ensemble_stats(energies[:, 0])
    target = math.exp(0.5)
    z = (stats.mean - target) / stats.stderr
    elapsed = time.perf_counter() - t0
    _report(
        3,
        abs(z) <= 3.0,
        elapsed,
        120.0,
        f"mean={stats.mean:.4f}+-{stats.stderr:.4f}, z={z:+.2f} against e^(1/2)={target:.4f} "
        f"(a e^(1/4) target would sit at z={(stats.mean - math.exp(0.25)) / stats.stderr:+.0f})",
    )


def test_criterion_04_breaking_time_law():
    # Empirical breaking-time CDF against the quadrature law for all nine
    # (slope, q0) combinations at 10^5 paths, KS below the 1% critical value
    # adjusted for censoring.
    t0 = time.perf_counter()
    worst_d = 0.0
    crit = math.inf
    all_ok = True
    min_window = None
    for j, sp in enumerate((0.5, 1.0, 2.0)):
        for k, q0 in enumerate((-0.5, -1.0, -2.0)):
            ks = breaking_law_ks(q0, sp, 100_000, 9000 + 3 * j + k)
            all_ok = all_ok and ks["ok"]
            if ks["statistic"] > worst_d:
                worst_d, crit = ks["statistic"], ks["critical"]
            n_win = ks["n_in_window"]
            min_window = n_win if min_window is None else min(min_window, n_win)
    elapsed = time.perf_counter() - t0
    _report(
        4,
        all_ok and min_window >= 40_000,
        elapsed,
        300.0,
        f"9/9 combos pass, worst D={worst_d:.4f} < {crit:.4f}, "
        f"smallest comparison window {min_window} paths",
    )


def test_criterion_05_meeting_time_matches_blowup():
    # Detected breakpoint-meeting times agree with the closed-form blow-up
    # time to 1e-3 on every uncensored path.
    t0 = time.perf_counter()
    res = meeting_time_check(1.0, BOX, 6.0, 12_000, 1_000, 5, tol=1e-3)
    elapsed = time.perf_counter() - t0
    _report(
        5,
        res["ok"] and res["max_gap"] <= 1e-3 and res["n_checked"] >= 800,
        elapsed,
        30.0,
        f"max |t_meet - t*| = {res['max_gap']:.2e} over {res['n_checked']} paths "
        f"({res['n_censored']} censored past t=6)",
    )


def test_criterion_06_weak_form_refinement():
    # Median distributional residual of the dynamics shrinks under time
    # refinement with fitted rate >= 0.5 in both continuation modes, and the
    # two noise discretisations (endpoint-average vs left-point plus
    # correction) agree up to a gap that vanishes under the same refinement.
    t0 = time.perf_counter()
    phi = TestFunction(0.5, 2.0)
    levels = [125, 250, 500, 1000]
    log_dt = np.log([3.0 / n for n in levels])
    sig = SigmaSpec(1.0)

    rates = {}
    for mode in (CONS, DISS):
        meds = []
        for n in levels:
            grid = TimeGrid(3.0, n)
            res = [
                abs(
                    weak_form_residual(
                        build_field(sig, BOX, mode, sample_brownian(grid, path_seed(424, i))),
                        phi,
                        3.0,
                    ).residual
                )
                for i in range(200)
            ]
            meds.append(float(np.median(res)))
        rates[mode] = float(np.polyfit(log_dt, np.log(meds), 1)[0])

    gaps = []
    for n in levels:
        grid = TimeGrid(3.0, n)
        g = []
        for i in range(200):
            field = build_field(sig, BOX, CONS, sample_brownian(grid, path_seed(424, i)))
            g.append(
                abs(
                    weak_form_residual(field, phi, 3.0, "stratonovich").residual
                    - weak_form_residual(field, phi, 3.0, "ito").residual
                )
            )
        gaps.append(float(np.median(g)))
    gap_rate = float(np.polyfit(log_dt, np.log(gaps), 1)[0])
    gap_shrink = gaps[0] / gaps[-1]

    elapsed = time.perf_counter() - t0
    ok = (
        rates[CONS] >= 0.5
        and rates[DISS] >= 0.5
        and gap_rate >= 0.4
        and gap_shrink >= 2.0
    )
    _report(
        6,
        ok,
        elapsed,
        120.0,
        f"median-residual rates cons={rates[CONS]:.2f} diss={rates[DISS]:.2f} (>=0.5), "
        f"scheme-gap rate={gap_rate:.2f}, gap shrinks x{gap_shrink:.1f} over 8x refinement",
    )


def test_criterion_07_one_sided_slope_bound():
    # Dissipative slopes never exceed the sharp per-box bound (nor the
    # universal envelope) on any of 100 paths at ten sample times.
    t0 = time.perf_counter()
    grid = TimeGrid(3.0, 600)
    all_ok = True
    worst_excess = -math.inf
    for i in range(100):
        field = build_field(SigmaSpec(1.0), MIXED, DISS, sample_brownian(grid, path_seed(7577, i)))
        for k in range(60, 601, 60):
            rep = oleinik_report(field, k * 0.005)
            all_ok = all_ok and rep["ok"]
            excess = rep["q"] - rep["sharp"]
            if np.any(~np.isnan(excess)):
                worst_excess = max(worst_excess, float(np.nanmax(excess)))
    elapsed = time.perf_counter() - t0
    _report(
        7,
        all_ok and worst_excess <= 1e-9,
        elapsed,
        30.0,
        f"0 violations over 100 paths x 10 times, worst slope excess {worst_excess:.1e}",
    )


def test_criterion_08_bessel_clock():
    # On the blow-up clock the driving process matches a two-dimensional
    # squared Bessel flow: the realised quadratic variation of 2 sqrt(chi)
    # mismatches the clock by under 5% in the median at dt=1e-4, and the
    # drift residual shrinks by one order of magnitude per decade of dt.
    t0 = time.perf_counter()
    mism = []
    res_fine = []
    res_coarse = []
    for i in range(60):
        seed = path_seed(11, i)
        fine = bessel_timechange_check(sample_brownian(TimeGrid(1.0, 10_000), seed), 1.0)
        coarse = bessel_timechange_check(sample_brownian(TimeGrid(1.0, 1_000), seed), 1.0)
        mism.append(fine["qv_rel_mismatch"])
        res_fine.append(fine["residual_scale"])
        res_coarse.append(coarse["residual_scale"])
    med_mism = float(np.median(mism))
    decade = float(np.median(res_coarse) / np.median(res_fine))
    elapsed = time.perf_counter() - t0
    _report(
        8,
        med_mism < 0.05 and 0.8 <= math.log10(decade) <= 1.2,
        elapsed,
        60.0,
        f"median QV mismatch {med_mism:.2%} (<5%), residual scale x{decade:.1f} per dt decade",
    )


def test_criterion_09_heun_cross_check():
    # Direct Heun integration of the characteristic system converges to the
    # closed form with strong order about one.
    t0 = time.perf_counter()
    out = sde_cross_check(
        SigmaSpec(1.0, 0.2), StepInitialData.box(0.8), 1.0, [64, 128, 256, 512], 42, n_paths=32
    )
    elapsed = time.perf_counter() - t0
    _report(
        9,
        0.7 <= out["order"] <= 1.3,
        elapsed,
        60.0,
        f"fitted strong order {out['order']:.3f} in [0.7, 1.3]",
    )


def test_criterion_10_space_time_norm_bounds():
    # The L^{2+alpha} space-time norm is refinement-stable below the critical
    # exponent and grows logarithmically at it: alpha=0.5 moves under 5%
    # between a resolution and its bridge-refined halving, while alpha=1 on
    # the breaking box gains exactly 2 ln 2 per halving without noise and
    # keeps a positive mean gain per halving with it.
    t0 = time.perf_counter()

    bounds = apriori_bounds_check(1.0, BOX, DISS, 0.5, 5.0, 1000, 50, 7)
    gap = bounds["refinement_rel_gap"]

    det_norms = [apriori_space_time_norm(BOX, 1.0, 2.5, n) for n in (500, 1000, 2000)]
    det_incs = np.diff(det_norms)
    det_exact = bool(np.allclose(det_incs, 2.0 * math.log(2.0), rtol=1e-9))

    incs = []
    for i in range(40):
        p1 = sample_brownian(TimeGrid(2.5, 500), path_seed(31337, i))
        p2 = refine_bridge(p1)
        p4 = refine_bridge(p2)
        norms = [
            apriori_space_time_norm(BOX, 1.0, 2.5, p.grid.n_steps, 1.0, path=p)
            for p in (p1, p2, p4)
        ]
        incs.append(np.diff(norms))
    mean_incs = np.asarray(incs).mean(axis=0)

    elapsed = time.perf_counter() - t0
    ok = gap < 0.05 and det_exact and bool(np.all(mean_incs > 0.5))
    _report(
        10,
        ok,
        elapsed,
        120.0,
        f"alpha=0.5 refinement gap {gap:.2%} (<5%); alpha=1 noise-free gain per halving "
        f"= 2 ln 2 exactly, mean stochastic gains {mean_incs[0]:.2f}, {mean_incs[1]:.2f} > 0",
    )
