import numpy as np
import pytest
from scipy import integrate

from conftest import merton_put_series
from levycos import constant_merton
from levycos.cos import (
    CosGrid,
    chi_psi,
    cos_sum,
    european_call_via_parity,
    european_price,
    make_grid,
    payoff_coeffs,
    truncation_range,
)
from levycos.expansion import CharFnExpansion, ExactLevyCharFn


@pytest.mark.parametrize("K", [0.6, 1.0, 1.4])
@pytest.mark.parametrize("T", [0.25, 1.0])
def test_european_matches_merton_series(flat_merton, K, T):
    grid = make_grid(flat_merton, T)
    got = european_price(flat_merton, ExactLevyCharFn(flat_merton), grid, K, T).value
    ref = merton_put_series(1.0, K, T, 0.05, 0.2, 0.3, -0.1, 0.4)
    assert got == pytest.approx(ref, abs=1e-10)


def test_expansion_prices_agree_with_exact_for_flat_model(flat_merton):
    grid = make_grid(flat_merton, 1.0)
    a = european_price(flat_merton, CharFnExpansion(flat_merton, 2), grid, 1.1, 1.0).value
    b = european_price(flat_merton, ExactLevyCharFn(flat_merton), grid, 1.1, 1.0).value
    assert a == b


def test_chi_psi_against_quadrature():
    a, b = -2.0, 1.5
    x1, x2 = -0.7, 0.4
    k = np.arange(12)
    chi, psi = chi_psi(a, b, x1, x2, k)
    for j in k:
        w = j * np.pi / (b - a)
        c = integrate.quad(lambda y: np.exp(y) * np.cos(w * (y - a)), x1, x2, epsabs=1e-13, epsrel=1e-13)[0]
        p = integrate.quad(lambda y: np.cos(w * (y - a)), x1, x2, epsabs=1e-13, epsrel=1e-13)[0]
        assert abs(chi[j] - c) < 1e-12
        assert abs(psi[j] - p) < 1e-12


def test_payoff_coefficients_reconstruct_payoff():
    grid = CosGrid(256, -3.0, 3.0)
    K = 1.2
    V = payoff_coeffs(grid, K, np.log(K))
    x = np.array([-1.0, -0.2, 0.05])
    trans = np.ones((1, grid.N), dtype=complex)
    for xi in x:
        series = cos_sum(grid, trans, V, xi, 0.0)
        assert series == pytest.approx(max(K - np.exp(xi), 0.0), abs=5e-3)


@pytest.mark.parametrize("deriv", [1, 2])
def test_cos_sum_derivatives(merton_cev, deriv):
    e = CharFnExpansion(merton_cev, 2)
    grid = make_grid(merton_cev, 1.0)
    V = payoff_coeffs(grid, 1.0, 0.0)
    trans = e.transition(1.0, grid.xi)
    h = 1e-4
    f = lambda x: cos_sum(grid, trans, V, x, e.xbar)
    fd = (f(h) - f(-h)) / (2 * h) if deriv == 1 else (f(h) - 2 * f(0.0) + f(-h)) / h**2
    assert cos_sum(grid, trans, V, 0.0, e.xbar, deriv) == pytest.approx(fd, abs=1e-6)


def test_truncation_range_is_centred_on_mean(flat_merton):
    a, b = truncation_range(flat_merton, 1.0)
    assert a < 0 < b
    mean = flat_merton.rate - 0.02 - flat_merton.jumps.exp_compensator   # drift with a = sigma^2/2
    assert (a + b) / 2 == pytest.approx(mean, abs=1e-12)


def test_truncation_range_rejects_bad_inputs(flat_merton):
    with pytest.raises(ValueError):
        truncation_range(flat_merton, 0.0)
    with pytest.raises(ValueError):
        truncation_range(flat_merton, 1.0, L=-1)


def test_grid_validation():
    with pytest.raises(ValueError):
        CosGrid(1, 0.0, 1.0)
    with pytest.raises(ValueError):
        CosGrid(10, 1.0, 1.0)


def test_put_call_parity_without_default(merton_cev):
    e = CharFnExpansion(merton_cev, 2)
    grid = make_grid(merton_cev, 1.0)
    call = european_call_via_parity(merton_cev, e, grid, 1.0, 1.0)
    put = european_price(merton_cev, e, grid, 1.0, 1.0).value
    assert call - put == pytest.approx(1.0 - np.exp(-0.05), abs=1e-14)
    # the call priced directly from the cosine series of (e^y - K)^+ agrees
    chi, psi = chi_psi(grid.a, grid.b, 0.0, grid.b, grid.k)
    Vc = 2 / grid.width * (chi - psi)
    direct = np.exp(-0.05) * cos_sum(grid, e.transition(1.0, grid.xi), Vc, 0.0, e.xbar)
    assert direct == pytest.approx(call, abs=1e-6)


def test_parity_refused_with_default(with_default):
    grid = make_grid(with_default, 1.0)
    with pytest.raises(NotImplementedError):
        european_call_via_parity(with_default, CharFnExpansion(with_default, 2), grid, 1.0, 1.0)


def test_european_greeks_match_differences(flat_merton):
    from dataclasses import replace
    e = ExactLevyCharFn(flat_merton)
    grid = make_grid(flat_merton, 1.0)
    rep = european_price(flat_merton, e, grid, 1.0, 1.0)
    h = 1e-4
    up = european_price(replace(flat_merton, spot=1 + h), e, grid, 1.0, 1.0).value
    dn = european_price(replace(flat_merton, spot=1 - h), e, grid, 1.0, 1.0).value
    assert rep.delta == pytest.approx((up - dn) / (2 * h), abs=1e-7)
    assert rep.gamma == pytest.approx((up - 2 * rep.value + dn) / h**2, abs=1e-4)


def test_european_input_checks(merton_cev):
    e = CharFnExpansion(merton_cev, 2)
    grid = make_grid(merton_cev, 1.0)
    with pytest.raises(ValueError):
        european_price(merton_cev, e, grid, -1.0, 1.0)
    with pytest.raises(ValueError):
        european_price(merton_cev, e, grid, 1.0, 0.0)
