import numpy as np
import pytest

from levycos import cev_like, cev_merton, cev_vg, constant_merton
from levycos.expansion import (
    CharFnExpansion,
    ExactLevyCharFn,
    UnsupportedOrderError,
    closed_form_term,
    duhamel_oracle,
    printed_first_order,
    printed_local_vol,
    printed_second_order_xbar_eq_x,
)
from levycos.models import ExpCoefficient, GaussianJumps, LocalLevyModel, char_exponent

XI = np.array([0.5, 2.0, 7.0])


def _only_default_varies():
    return LocalLevyModel(rate=0.05, vol=ExpCoefficient(0.02), default=ExpCoefficient(0.0, 0.1, -2.0),
                          jumps=GaussianJumps(0.2, -0.2, 0.2))


@pytest.mark.parametrize("make", [cev_merton, cev_vg, cev_like, lambda: cev_like(c1=0.1, eps3=1.0, eps4=0.0)])
@pytest.mark.parametrize("k", [1, 2])
def test_recursion_matches_duhamel_quadrature(make, k):
    m = make()
    e = CharFnExpansion(m, 2, xbar=m.x0 + 0.05)
    for x, xi in [(m.x0, 1.5), (m.x0 - 0.2, 4.0)]:
        oracle = duhamel_oracle(e, k, 0.0, x, 0.4, xi)
        closed = closed_form_term(e, k, 0.0, x, 0.4, xi)
        assert abs(oracle - closed) < 1e-8 * max(1.0, abs(closed))


def test_order_zero_is_frozen_levy_transform(merton_cev):
    e = CharFnExpansion(merton_cev, 2)
    x, T = merton_cev.x0, 0.7
    expected = np.exp(1j * XI * x + T * char_exponent(merton_cev, XI))
    assert np.allclose(e.char_fn(0.0, x, T, XI, 0), expected, rtol=1e-14, atol=0)


@pytest.mark.parametrize("kh", [(0, 0), (1, 0), (1, 1), (2, 0), (2, 2)])
def test_local_vol_closed_forms(merton_cev, kh):
    e = CharFnExpansion(merton_cev, 2)
    p1, p2 = char_exponent(merton_cev, XI, 1), char_exponent(merton_cev, XI, 2)
    printed = printed_local_vol(e.taylor, p1, p2, 0.3, XI)[kh]
    assert np.allclose(printed, e.term(*kh, 0.3, XI), rtol=1e-12, atol=1e-15)


def test_local_vol_g21_needs_first_derivative(merton_cev):
    # the (x - xbar) coefficient of the second correction carries psi', not psi''
    e = CharFnExpansion(merton_cev, 2)
    p1, p2 = char_exponent(merton_cev, XI, 1), char_exponent(merton_cev, XI, 2)
    exact = e.term(2, 1, 0.3, XI)
    as_printed = printed_local_vol(e.taylor, p1, p2, 0.3, XI)[(2, 1)]
    corrected = printed_local_vol(e.taylor, p1, p1, 0.3, XI)[(2, 1)]
    assert np.allclose(corrected, exact, rtol=1e-12, atol=1e-15)
    assert np.max(np.abs(as_printed - exact)) > 1e-3


@pytest.mark.parametrize("make", [cev_merton, cev_like, lambda: cev_like(c1=0.1, eps3=1.0, eps4=0.0)])
def test_first_order_closed_forms(make):
    m = make()
    e = CharFnExpansion(m, 2)
    p1 = char_exponent(m, XI, 1)
    g0, g1 = printed_first_order(e.taylor, m.jumps, p1, 0.3, XI)
    assert np.allclose(g0, e.term(1, 0, 0.3, XI), rtol=1e-12, atol=1e-15)
    assert np.allclose(g1, e.term(1, 1, 0.3, XI), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("make", [cev_merton, _only_default_varies])
def test_second_order_at_expansion_point(make):
    m = make()
    e = CharFnExpansion(m, 2)
    p1, p2 = char_exponent(m, XI, 1), char_exponent(m, XI, 2)
    printed = printed_second_order_xbar_eq_x(e.taylor, p1, p2, 0.3, XI)
    assert np.allclose(printed, e.term(2, 0, 0.3, XI), rtol=1e-12, atol=1e-15)


def test_constant_coefficients_are_exact_bitwise(flat_merton):
    e2 = CharFnExpansion(flat_merton, 2)
    e0 = CharFnExpansion(flat_merton, 0)
    xi = np.linspace(0, 40, 201)
    for T in (0.1, 1.0, 3.0):
        a = e2.char_fn(0.0, flat_merton.x0 + 0.3, T, xi)
        b = e0.char_fn(0.0, flat_merton.x0 + 0.3, T, xi)
        assert np.array_equal(a, b)
        assert np.array_equal(a, ExactLevyCharFn(flat_merton).char_fn(0.0, flat_merton.x0 + 0.3, T, xi))


def test_transition_rows_are_powers_of_offset(merton_cev):
    e = CharFnExpansion(merton_cev, 2, xbar=0.1)
    T, x = 0.5, -0.2
    trans = e.transition(T, XI)
    series = sum((x - 0.1) ** h * trans[h] for h in range(3)) * np.exp(1j * XI * x)
    assert np.allclose(series, e.char_fn(0.0, x, T, XI), rtol=1e-13, atol=0)


def test_recentered_expansion_moves_the_point(merton_cev):
    e = CharFnExpansion(merton_cev, 2)
    r = e.recentered(-0.4)
    assert r.xbar == -0.4 and r.order == 2 and r.model is merton_cev
    assert ExactLevyCharFn(constant_merton()).recentered(1.0).xbar == 0.0


def test_order_limits(merton_cev):
    with pytest.raises(UnsupportedOrderError):
        CharFnExpansion(merton_cev, 3)
    e = CharFnExpansion(merton_cev, 1)
    with pytest.raises(UnsupportedOrderError):
        e.g_coeff(0, 0.1, 1.0, order=2)
    with pytest.raises(UnsupportedOrderError):
        e.g_coeff(2, 0.1, 1.0)


def test_char_fn_rejects_reversed_times(merton_cev):
    with pytest.raises(ValueError):
        CharFnExpansion(merton_cev).char_fn(1.0, 0.0, 0.5, 1.0)


FROZEN_CHARFN = [0.9553794093754 + 0.0086019776594j, 0.4578511025061 + 0.101804710541j]


def test_frozen_values(merton_cev):
    # regression values of the order-2 expansion for the CEV-Merton model
    e = CharFnExpansion(merton_cev, 2)
    got = e.char_fn(0.0, 0.0, 1.0, np.array([1.0, 5.0]))
    assert got == pytest.approx(FROZEN_CHARFN, abs=1e-12)
