"""Tests for Brownian path sampling and exponential functionals."""

import math

import numpy as np
import pytest
from scipy import stats

from shslab import (
    BrownianPath,
    TimeGrid,
    a_mu_functional,
    exp_functionals,
    path_seed,
    refine_bridge,
    sample_brownian,
)


def test_time_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 0)
    g = TimeGrid(2.0, 400)
    assert g.dt == pytest.approx(0.005)
    t = g.times()
    assert t.shape == (401,)
    assert t[0] == 0.0 and t[-1] == 2.0
    assert g.index_of(1.0) == 200
    with pytest.raises(ValueError):
        g.index_of(1.0001)


def test_brownian_path_validation():
    g = TimeGrid(1.0, 4)
    with pytest.raises(ValueError):
        BrownianPath(g, np.array([0.1, 0.2, 0.3, 0.4, 0.5]), seed=0)  # w[0] != 0
    with pytest.raises(ValueError):
        BrownianPath(g, np.zeros(3), seed=0)  # wrong length


def test_sampling_reproducible_and_seed_sensitive():
    g = TimeGrid(1.0, 256)
    w1 = sample_brownian(g, seed=123).w
    w2 = sample_brownian(g, seed=123).w
    w3 = sample_brownian(g, seed=124).w
    assert np.array_equal(w1, w2)
    assert not np.array_equal(w1, w3)


def test_path_seed_splittable():
    seeds = {path_seed(7, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert path_seed(7, 3) == path_seed(7, 3)
    assert path_seed(8, 3) != path_seed(7, 3)


def test_terminal_variance_mc():
    # Var W(1) = 1; chi-square fluctuation of the estimator has sd sqrt(2/n)
    g = TimeGrid(1.0, 4)
    n = 100_000
    wT = np.array([sample_brownian(g, path_seed(2024, i)).w[-1] for i in range(n)])
    se = math.sqrt(2.0 / n)
    assert abs(np.var(wT) - 1.0) < 3 * se
    assert abs(np.mean(wT)) < 3 / math.sqrt(n)


def test_zero_noise_exact_half_t():
    # sigma' = 0 freezes Z at 1, so A(t) = t/2 up to summation rounding
    g = TimeGrid(3.0, 1500)
    ef = exp_functionals(sample_brownian(g, seed=9), 0.0)
    assert np.all(ef.z == 1.0)
    np.testing.assert_allclose(ef.a, g.times() / 2.0, rtol=0.0, atol=1e-12)


def test_functional_invariants():
    g = TimeGrid(4.0, 2000)
    for seed in (1, 2, 3):
        ef = exp_functionals(sample_brownian(g, seed=seed), 1.3)
        assert np.all(ef.z > 0.0)
        assert np.all(np.diff(ef.a) > 0.0)
        assert ef.a[0] == 0.0
        # interpolation hits grid nodes exactly
        assert ef.a_at(2.0) == ef.a[g.index_of(2.0)]


def test_overflow_guard():
    g = TimeGrid(4.0, 1000)
    p = sample_brownian(g, seed=3)
    with pytest.raises(OverflowError):
        exp_functionals(p, 4000.0)


def test_a_mu_functional_edges():
    g = TimeGrid(1.0, 1000)
    flat = BrownianPath(g, np.zeros(1001), seed=0)
    # W = 0: integrand exp(2 mu s), and mu = 0 gives exactly t
    assert a_mu_functional(flat, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert a_mu_functional(flat, 0.0, 0.0) == 0.0
    assert a_mu_functional(flat, 1.0, 1.0) == pytest.approx((math.e**2 - 1) / 2, rel=1e-6)
    p = sample_brownian(g, seed=4)
    with pytest.raises(ValueError):
        a_mu_functional(p, 0.0, 2.0)  # beyond the grid horizon


def test_a_mu_functional_mc_mean():
    # E int_0^1 e^{2W} ds = (e^2 - 1)/2; sd of a single sample is ~4.3
    g = TimeGrid(1.0, 1000)
    n = 100_000
    vals = np.empty(n)
    for i in range(n):
        vals[i] = a_mu_functional(sample_brownian(g, path_seed(55, i)), 0.0, 1.0)
    target = (math.e**2 - 1) / 2
    se = np.std(vals) / math.sqrt(n)
    assert abs(np.mean(vals) - target) < 3 * se


def test_bridge_refinement_interleaves_and_converges():
    g = TimeGrid(1.0, 64)
    p = sample_brownian(g, seed=21)
    fine = refine_bridge(p)
    assert fine.grid.n_steps == 128
    np.testing.assert_array_equal(fine.w[0::2], p.w)
    assert fine.seed == p.seed

    # ensemble mean of the A(t_end) update must shrink O(dt) under halving
    def mean_update(n_steps: int) -> float:
        acc = 0.0
        m = 300
        for i in range(m):
            coarse = sample_brownian(TimeGrid(1.0, n_steps), path_seed(31, i))
            a0 = exp_functionals(coarse, 1.0).a[-1]
            a1 = exp_functionals(refine_bridge(coarse), 1.0).a[-1]
            acc += abs(a1 - a0)
        return acc / m

    u_coarse = mean_update(32)
    u_fine = mean_update(64)
    assert u_fine < u_coarse  # shrinking
    assert u_coarse / u_fine == pytest.approx(2.0, abs=0.8)


def test_scaling_law_two_sample_ks():
    # A(t) with slope s equals (2/s^2) A0(s^2 t / 4) in law; s = 2, t = 1
    s = 2.0
    n = 20_000
    g1 = TimeGrid(1.0, 1000)
    lhs = np.array(
        [exp_functionals(sample_brownian(g1, path_seed(61, i)), s).a[-1] for i in range(n)]
    )
    g2 = TimeGrid(s * s / 4.0, 1000)
    rhs = np.array(
        [
            (2.0 / s**2) * a_mu_functional(sample_brownian(g2, path_seed(62, i)), 0.0, s * s / 4.0)
            for i in range(n)
        ]
    )
    res = stats.ks_2samp(lhs, rhs)
    assert res.pvalue > 0.01
