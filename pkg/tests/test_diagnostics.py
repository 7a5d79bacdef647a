"""Tests for weak-form residuals, ensemble checks and law diagnostics."""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from shslab.characteristics import (
    ContinuationMode,
    SigmaSpec,
    StepInitialData,
    build_field,
)
from shslab.diagnostics import (
    SupportError,
    TestFunction,
    apriori_bounds_check,
    apriori_space_time_norm,
    bessel_timechange_check,
    breaking_law_ks,
    energy_form_residual,
    ensemble_energies,
    ensemble_stats,
    expected_energy_check,
    holder_exponent,
    meeting_time_check,
    weak_form_residual,
)
from shslab.paths import TimeGrid, path_seed, sample_brownian

BOX = StepInitialData.box(-1.0)
PHI = TestFunction(0.5, 2.0)
CONS = ContinuationMode.CONSERVATIVE
DISS = ContinuationMode.DISSIPATIVE


def _field(sigma_prime, mode, seed, t_end=3.0, n_steps=1000, initial=BOX):
    path = sample_brownian(TimeGrid(t_end, n_steps), seed)
    return build_field(SigmaSpec(sigma_prime), initial, mode, path)


# ---------------------------------------------------------------------------
# test functions


def test_bump_vanishes_outside_support():
    phi = TestFunction(1.0, 2.0)
    assert phi.support == (-1.0, 3.0)
    assert phi(-1.0) == 0.0 and phi(3.0) == 0.0 and phi(-5.0) == 0.0
    assert phi.d1(3.1) == 0.0 and phi.d2(-1.0) == 0.0
    assert phi(1.0) == pytest.approx(math.exp(-1.0))


def test_bump_derivatives_match_finite_differences():
    phi = TestFunction(0.3, 1.7)
    xs = np.linspace(-1.2, 1.8, 41)
    h = 1e-6
    d1_fd = (phi(xs + h) - phi(xs - h)) / (2 * h)
    d2_fd = (phi(xs + h) - 2 * phi(xs) + phi(xs - h)) / h**2
    np.testing.assert_allclose(phi.d1(xs), d1_fd, rtol=1e-7, atol=1e-9)
    # the second difference carries ~eps/h^2 of cancellation noise
    np.testing.assert_allclose(phi.d2(xs), d2_fd, rtol=2e-3, atol=1e-3)


def test_bump_validates_halfwidth():
    with pytest.raises(ValueError):
        TestFunction(0.0, 0.0)


def test_scalar_argument_gives_scalar_shape():
    assert np.shape(PHI(0.2)) == ()
    assert np.shape(PHI.d1(0.2)) == ()


# ---------------------------------------------------------------------------
# ensemble stats


def test_ensemble_stats_needs_two_values():
    with pytest.raises(ValueError):
        ensemble_stats(np.array([1.0]))
    s = ensemble_stats(np.array([1.0, 3.0]))
    assert s.n_paths == 2
    assert s.mean == 2.0
    assert s.stderr == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# weak form


def test_zero_initial_data_gives_exactly_zero_residual():
    flat = StepInitialData(np.array([0.0, 1.0]), np.array([0.0]))
    f = _field(1.0, CONS, 3, initial=flat)
    assert weak_form_residual(f, PHI, 3.0).residual == 0.0


def test_test_function_must_meet_the_support():
    far = TestFunction(100.0, 0.5)
    with pytest.raises(SupportError):
        weak_form_residual(_field(0.0, DISS, 0), far, 1.5)


def test_deterministic_weak_residual_rates():
    # conservative: pure trapezoid error, second order; dissipative: the
    # frozen-box mask moves by one cell per level, first order
    rates = {}
    for mode in (CONS, DISS):
        res = [
            abs(weak_form_residual(_field(0.0, mode, 0, n_steps=n), PHI, 3.0).residual)
            for n in (250, 500, 1000)
        ]
        assert res[0] > res[1] > res[2]
        rates[mode] = np.polyfit(np.log([3 / 250, 3 / 500, 3 / 1000]), np.log(res), 1)[0]
    assert rates[CONS] == pytest.approx(2.0, abs=0.1)
    assert rates[DISS] == pytest.approx(1.0, abs=0.1)


def test_stochastic_weak_residual_shrinks_under_refinement():
    meds = {}
    for mode in (CONS, DISS):
        meds[mode] = [
            np.median(
                [
                    abs(
                        weak_form_residual(
                            _field(1.0, mode, path_seed(424, i), n_steps=n), PHI, 3.0
                        ).residual
                    )
                    for i in range(40)
                ]
            )
            for n in (250, 1000)
        ]
    # a factor 4 in dt must buy at least a factor 2 (rate >= 1/2 pathwise)
    assert meds[CONS][0] / meds[CONS][1] > 2.0
    assert meds[DISS][0] / meds[DISS][1] > 2.0
    assert meds[CONS][0] == pytest.approx(1.7187446957e-3, rel=1e-6)


def test_ito_and_stratonovich_schemes_converge_together():
    gaps = []
    for n in (250, 1000):
        g = []
        for i in range(40):
            f = _field(1.0, CONS, path_seed(424, i), n_steps=n)
            g.append(
                abs(
                    weak_form_residual(f, PHI, 3.0, "stratonovich").residual
                    - weak_form_residual(f, PHI, 3.0, "ito").residual
                )
            )
        gaps.append(np.median(g))
    assert gaps[0] / gaps[1] > 2.0


def test_unknown_scheme_rejected():
    with pytest.raises(ValueError):
        weak_form_residual(_field(0.0, CONS, 0), PHI, 1.0, scheme="milstein")


# ---------------------------------------------------------------------------
# energy form


def test_deterministic_energy_residual_conservative_is_rounding():
    f = _field(0.0, CONS, 0, n_steps=2000)
    assert abs(energy_form_residual(f, PHI, 3.0).residual) < 1e-6


def test_dissipative_energy_residual_captures_the_jump():
    # box(-1) collapses at t* = 2 onto x = 0, removing dx V^2 phi(0)
    f = _field(0.0, DISS, 0, n_steps=2000)
    r = energy_form_residual(f, PHI, 3.0).residual
    assert r < 0.0
    assert r == pytest.approx(-PHI(0.0), abs=1e-6)


def test_stochastic_conservative_energy_residual_small():
    worst = max(
        abs(energy_form_residual(_field(1.0, CONS, path_seed(77, i), n_steps=2000), PHI, 3.0).residual)
        for i in range(20)
    )
    assert worst < 5e-3


def test_stochastic_dissipative_energy_residual_nonpositive():
    tol = 5e-3
    for i in range(20):
        f = _field(1.0, DISS, path_seed(99, i), n_steps=2000)
        assert energy_form_residual(f, PHI, 3.0).residual < tol


# ---------------------------------------------------------------------------
# ensemble energies


def test_conservative_energy_is_exactly_z_times_initial():
    ts = np.array([0.5, 1.0, 2.0])
    e = ensemble_energies(1.0, BOX, CONS, ts, 1e-2, 7, 123)
    assert e.shape == (7, 3)
    # reproduce the chunk's paths: energy must equal Z(t) * ||q0||^2
    rng = np.random.default_rng(np.random.SeedSequence((123, 0)))
    w = np.cumsum(rng.standard_normal((7, 200)) * math.sqrt(1e-2), axis=1)
    for j, t in enumerate(ts):
        k = int(round(t / 1e-2)) - 1
        np.testing.assert_allclose(e[:, j], np.exp(-w[:, k]), rtol=1e-12)


def test_dissipative_energies_never_exceed_conservative():
    ts = np.array([1.0, 3.0])
    e_c = ensemble_energies(1.0, BOX, CONS, ts, 5e-3, 200, 5)
    e_d = ensemble_energies(1.0, BOX, DISS, ts, 5e-3, 200, 5)
    assert np.all(e_d <= e_c + 1e-12)
    assert np.any(e_d[:, 1] == 0.0)  # some box has collapsed by t = 3


def test_ensemble_energies_independent_of_worker_count():
    ts = np.array([0.5, 1.0])
    serial = ensemble_energies(1.0, BOX, DISS, ts, 5e-3, 150, 11)
    with ThreadPoolExecutor(max_workers=4) as pool:
        threaded = ensemble_energies(1.0, BOX, DISS, ts, 5e-3, 150, 11, map_fn=pool.map)
    np.testing.assert_array_equal(serial, threaded)


def test_expected_energy_matches_exponential_law():
    rep = expected_energy_check(1.0, BOX, [0.5, 1.0], 5000, 31)
    for entry in rep["per_time"]:
        assert abs(entry["z"]) < 3.0
        assert abs(entry["log_var_z"]) < 3.0
        assert abs(entry["skew_z"]) < 3.0
        assert abs(entry["kurt_z"]) < 3.0
    assert rep["per_time"][1]["target"] == pytest.approx(math.exp(0.5), rel=1e-12)
    assert rep["per_time"][1]["stats"].mean == pytest.approx(1.6616, abs=2e-3)


# ---------------------------------------------------------------------------
# a priori space-time norms


def test_apriori_alpha_validation():
    with pytest.raises(ValueError):
        apriori_space_time_norm(BOX, 1.5, 1.0, 100)


def test_apriori_quadratic_norm_deterministic():
    # int_0^2 ||q||^2 dt = 2 for box(-1); the excluded root cell costs one dt
    v = apriori_space_time_norm(BOX, 0.0, 3.0, 600)
    assert v == pytest.approx(2.0 - 3.0 / 600, abs=1e-9)


def test_apriori_subcritical_norm_converges_deterministic():
    # exact value 4; the excluded cell costs 4 sqrt(dt/2), computable exactly
    for n in (500, 1000, 2000):
        dt = 2.5 / n
        v = apriori_space_time_norm(BOX, 0.5, 2.5, n)
        assert v == pytest.approx(4.0 - 4.0 * math.sqrt(dt / 2.0), abs=1e-9)


def test_apriori_critical_norm_grows_logarithmically():
    # at alpha = 1 each halving adds exactly 2 dx V^2 z(t*) log 2 per
    # broken box (z = 1 here; t* = 2 sits on a node at every level)
    vals = [apriori_space_time_norm(BOX, 1.0, 2.5, n) for n in (500, 1000, 2000)]
    diffs = np.diff(vals)
    np.testing.assert_allclose(diffs, 2.0 * math.log(2.0), rtol=1e-9)


def test_apriori_bounds_check_conservative():
    rep = apriori_bounds_check(1.0, BOX, CONS, 0.5, 2.0, 400, 50, 7)
    assert rep["law_ok"]
    assert rep["l2_sup"] == pytest.approx(3.199719, rel=1e-5)
    assert rep["refinement_rel_gap"] == pytest.approx(0.014740, abs=1e-4)
    assert rep["refinement_rel_gap"] < 0.05


def test_apriori_bounds_check_dissipative():
    rep = apriori_bounds_check(1.0, BOX, DISS, 0.5, 5.0, 1000, 50, 7)
    assert "law_ok" not in rep
    assert rep["l2_sup"] == pytest.approx(1.448821, rel=1e-5)
    assert rep["refinement_rel_gap"] < 0.05
    # dissipative energy can only decay below the initial value
    assert rep["l2_sup"] <= BOX.norm_l2_sq * math.exp(0.5 * 5.0) + 1e-9


# ---------------------------------------------------------------------------
# meeting times


def test_meeting_detector_deterministic_box():
    rep = meeting_time_check(0.0, BOX, 3.0, 300, 1, 0)
    assert rep["n_checked"] == 1
    assert rep["max_gap"] == pytest.approx(rep["dt"], abs=1e-12)
    assert rep["ok"]


def test_meeting_detector_stochastic():
    rep = meeting_time_check(1.0, BOX, 6.0, 6000, 100, 5, tol=2e-3)
    assert rep["ok"]
    assert rep["n_checked"] == 86
    assert rep["n_censored"] == 14
    assert rep["max_gap"] == pytest.approx(1.003076e-3, rel=1e-4)


def test_meeting_detector_ignores_positive_boxes():
    rep = meeting_time_check(1.0, StepInitialData.box(1.0), 4.0, 2000, 20, 2)
    assert rep["n_checked"] == 0
    assert rep["max_gap"] == 0.0


# ---------------------------------------------------------------------------
# Bessel clock


def test_bessel_clock_requires_noise():
    with pytest.raises(ValueError):
        bessel_timechange_check(sample_brownian(TimeGrid(1.0, 10), 0), 0.0)


def test_bessel_quadratic_variation_matches_clock():
    reps = [
        bessel_timechange_check(sample_brownian(TimeGrid(1.0, 10_000), path_seed(11, i)), 1.0)
        for i in range(60)
    ]
    med = np.median([r["qv_rel_mismatch"] for r in reps])
    assert med == pytest.approx(0.00799, abs=5e-4)
    assert med < 0.05


def test_bessel_defect_scales_linearly_in_dt():
    coarse = np.median(
        [
            bessel_timechange_check(sample_brownian(TimeGrid(1.0, 1000), path_seed(11, i)), 1.0)[
                "residual_scale"
            ]
            for i in range(60)
        ]
    )
    fine = np.median(
        [
            bessel_timechange_check(sample_brownian(TimeGrid(1.0, 10_000), path_seed(11, i)), 1.0)[
                "residual_scale"
            ]
            for i in range(60)
        ]
    )
    # one decade in dt buys close to one decade in the defect
    assert 5.0 < coarse / fine < 15.0


def test_bessel_integrated_defect_vanishes():
    # at the correct dimension the summed defect is a small martingale
    # remainder; at dimension one it would approach the clock (~0.4) itself
    reps = [
        bessel_timechange_check(sample_brownian(TimeGrid(1.0, 10_000), path_seed(11, i)), 1.0)
        for i in range(40)
    ]
    med_defect = np.median([r["integrated_defect"] for r in reps])
    med_clock = np.median([r["clock"] for r in reps])
    assert med_defect < 0.05 * med_clock


# ---------------------------------------------------------------------------
# velocity roughness


def test_velocity_increments_have_brownian_exponent():
    rep = holder_exponent(
        SigmaSpec(1.0), BOX, (0.01, 0.1), 1.0, np.geomspace(5e-4, 8e-3, 6), 200, 17, dt=5e-4
    )
    assert rep["exponent"] == pytest.approx(0.5345, abs=0.01)
    assert 0.35 < rep["exponent"] < 0.65


# ---------------------------------------------------------------------------
# breaking law goodness of fit


def test_breaking_law_ks_validates_inputs():
    with pytest.raises(ValueError):
        breaking_law_ks(1.0, 1.0, 1000, 0)
    with pytest.raises(ValueError):
        breaking_law_ks(-1.0, 0.0, 1000, 0)


def test_breaking_law_ks_needs_enough_samples():
    with pytest.raises(ValueError, match="too few"):
        breaking_law_ks(-1.0, 1.0, 30, 12)
