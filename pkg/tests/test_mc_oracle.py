import warnings

import numpy as np
import pytest
from scipy.stats import poisson

from conftest import merton_put_series
from levycos import cev_like, cev_merton, cev_vg, constant_merton
from levycos.bermudan import BermudanProblem, price_bermudan
from levycos.cos import make_grid
from levycos.expansion import ExactLevyCharFn
from levycos.mc_oracle import (
    SimConfig,
    _poisson_inverse,
    _step_grid,
    convergence_order,
    european_ci,
    fit_slope,
    ls_bermudan_ci,
    martingale_check,
    mc_char_fn,
    mc_char_fn_grid,
    simulate_paths,
)
from levycos.models import ExpCoefficient, LocalLevyModel

SMALL = SimConfig(n_paths=20_000, steps_per_year=100, seed=11)


def test_poisson_inverse_matches_ppf(rng):
    u = rng.uniform(size=2000)
    lam = np.full(2000, 0.8)
    assert np.array_equal(_poisson_inverse(u, lam), poisson.ppf(u, 0.8).astype(int))


def test_step_grid_hits_observation_times():
    steps = _step_grid([0.1, 0.35], 40)
    t, recorded = 0.0, []
    for dt in steps:
        if dt is None:
            recorded.append(t)
        else:
            t += dt
    assert recorded == pytest.approx([0.1, 0.35], abs=1e-15)
    with pytest.raises(ValueError):
        _step_grid([0.3, 0.2], 10)


def test_even_step_grid_pairs_steps():
    steps = _step_grid([0.1, 0.35], 50, even=True)
    counts = []
    n = 0
    for dt in steps:
        if dt is None:
            counts.append(n)
            n = 0
        else:
            n += 1
    assert all(c % 2 == 0 for c in counts)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n_paths=0)
    with pytest.raises(ValueError):
        SimConfig(steps_per_year=0)
    assert not SimConfig(n_paths=100).supports_ci


def test_reproducible_and_thread_independent():
    m = cev_merton()
    cfg = SimConfig(n_paths=45_000, steps_per_year=20, seed=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = simulate_paths(m, [0.5, 1.0], cfg)
        b = simulate_paths(m, [0.5, 1.0], SimConfig(45_000, 20, 3, threads=3))
        c = simulate_paths(m, [0.5, 1.0], SimConfig(45_000, 20, 4))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.weight, b.weight)
    assert not np.array_equal(a.x, c.x)


@pytest.mark.filterwarnings("ignore:jump intensity times step")
@pytest.mark.parametrize("make", [cev_merton, cev_vg, cev_like, lambda: cev_like(c1=0.1, eps3=1.0, eps4=0.0)])
def test_discounted_price_is_martingale(make):
    m = make()
    mean, se = martingale_check(m, 1.0, SMALL)
    assert abs(mean - m.spot) < 4 * se + 2e-3


def test_jump_counts_are_poisson():
    m = constant_merton(lam=2.0)
    ens = simulate_paths(m, [1.0], SMALL)
    assert ens.n_jumps.mean() == pytest.approx(2.0, abs=4 * np.sqrt(2.0 / SMALL.n_paths))
    assert ens.n_jumps.var() == pytest.approx(2.0, rel=0.05)


def test_european_interval_contains_merton_series():
    m = constant_merton()
    lo, hi = european_ci(m, 1.0, 1.0, SimConfig(50_000, 100, seed=5))
    ref = merton_put_series(1.0, 1.0, 1.0, 0.05, 0.2, 0.3, -0.1, 0.4)
    assert lo <= ref <= hi


def test_char_fn_of_flat_model():
    m = constant_merton()
    xi = np.array([0.0, 1.0, 4.0])
    est, se = mc_char_fn(m, 0.5, xi, SMALL)
    exact = ExactLevyCharFn(m).char_fn(0.0, m.x0, 0.5, xi)
    assert np.all(np.abs(est - exact) < 4 * se + 1e-3)
    assert est[0] == pytest.approx(1.0, abs=1e-12)


def test_control_variate_is_exact_for_flat_model():
    m = constant_merton()
    xi = np.array([1.0, 4.0])
    est, se = mc_char_fn_grid(m, [0.25], xi, SMALL, control=True)
    exact = ExactLevyCharFn(m).char_fn(0.0, m.x0, 0.25, xi)
    assert np.allclose(est[0], exact, atol=1e-12)
    assert np.all(se < 1e-12)


def test_longstaff_schwartz_brackets_cos_price():
    # Black-Scholes Bermudan: COS with the exact transform against regression MC
    m = LocalLevyModel(rate=0.05, vol=ExpCoefficient(0.5 * 0.3**2))
    prob = BermudanProblem.uniform(1.1, 1.0, 5)
    cos = price_bermudan(m, ExactLevyCharFn(m), prob, make_grid(m, 1.0), "leading").value
    lo, hi = ls_bermudan_ci(m, prob, SimConfig(50_000, 100, seed=9))
    half = (hi - lo) / 2
    assert lo - 2 * half <= cos <= hi + 2 * half


def test_absorption_keeps_state_dependent_intensity_finite():
    m = cev_like()
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        ens = simulate_paths(m, [1.0], SimConfig(20_000, 50, seed=1))
    assert np.all(np.isfinite(ens.weight))
    payoff = np.maximum(1.0 - np.exp(ens.x[-1]), 0.0)
    assert np.all(np.isfinite(payoff))


def test_low_step_count_warns():
    with pytest.warns(UserWarning):
        simulate_paths(cev_merton(), [0.5], SimConfig(100, 10))


def test_fit_slope_recovers_power():
    t = np.array([0.1, 0.2, 0.4, 0.8])
    s, se = fit_slope(t, 3 * t**1.5)
    assert s == pytest.approx(1.5, abs=1e-12) and se == pytest.approx(0.0, abs=1e-10)


def test_convergence_flags_noise_dominated_fit():
    m = cev_merton()
    res = convergence_order(m, 2, np.linspace(0, 5, 6), [0.05, 0.1, 0.2], SimConfig(2_000, 64, seed=2))
    assert res.inconclusive
    with pytest.raises(ValueError):
        convergence_order(m, 3, [1.0], [0.1, 0.2], SMALL)
