"""
Adjoint expansion of the characteristic function of a local Lévy model.

The order-n approximation has the structure

    Gamma^(n)(t, x; T, xi) = exp(i xi x + (T - t) psi(xi)) * sum_h (x - xbar)^h g_{n,h}(T - t, xi)

where psi is the exponent of the Lévy process with coefficients frozen at
xbar.  Each correction term G^k = exp(i xi x + tau psi) Q_k(tau, x - xbar) solves
a constant-coefficient Cauchy problem whose source is built from the lower
terms; Q_k is a polynomial in (tau, y) and is obtained here exactly, by
integrating the resulting triangular ODE system coefficient by coefficient.

The printed closed forms (orders 0 and 1 for the general model, order 2 for
the local-volatility model and for xbar = x) are kept alongside as
cross-checks, together with a quadrature oracle that evaluates the Duhamel
integral directly in Fourier space.
"""

from __future__ import annotations

from math import factorial

import numpy as np
from scipy import integrate

from .models import LocalLevyModel, TaylorCoeffs, symbol

MAX_ORDER = 2


class UnsupportedOrderError(ValueError):
    pass


class OracleError(RuntimeError):
    pass


def _check_order(n: int, h: int = 0) -> None:
    if not 0 <= n <= MAX_ORDER:
        raise UnsupportedOrderError(f"expansion order {n} not supported (0..{MAX_ORDER})")
    if not 0 <= h <= n:
        raise UnsupportedOrderError(f"power h={h} out of range for order {n}")


class CharFnExpansion:
    """Order-n characteristic-function approximation of ``model`` around ``xbar``.

    >>> from levycos.models import cev_merton
    >>> exp = CharFnExpansion(cev_merton(), order=2)
    >>> exp.g_coeff(0, 0.0, 3.0)
    (1+0j)
    """

    def __init__(self, model: LocalLevyModel, order: int = 2, xbar: float | None = None):
        _check_order(order)
        self.model = model
        self.order = order
        self.taylor: TaylorCoeffs = model.taylor(order, xbar)
        self._cache: dict = {}

    @property
    def xbar(self) -> float:
        return self.taylor.xbar

    def recentered(self, xbar: float) -> "CharFnExpansion":
        """Same model and order expanded around another point."""
        return CharFnExpansion(self.model, self.order, xbar)

    def _phi(self, h: int, xi, deriv: int = 0):
        tc = self.taylor
        return symbol(xi, tc.vol[h], tc.default[h], tc.jump[h], self.model.jumps, deriv)

    def psi(self, xi, deriv: int = 0):
        out = self._phi(0, xi, deriv)
        if deriv == 0:
            out = out + 1j * self.model.rate * np.asarray(xi, dtype=complex)
        elif deriv == 1:
            out = out + 1j * self.model.rate
        return out

    # ------------------------------------------------------------------ #
    # exact polynomial recursion
    # ------------------------------------------------------------------ #

    def _terms(self, xi: np.ndarray) -> list:
        """Q_k coefficients as arrays ``q[k][j, p, ...]`` of y^j tau^p, k = 0..order."""
        key = (xi.shape, xi.tobytes())
        if key in self._cache:
            return self._cache[key]
        n = self.order
        shape = xi.shape
        dpsi = [None] + [self.psi(xi, m) for m in range(1, n + 1)]
        dphi = {(h, m): self._phi(h, xi, m) for h in range(1, n + 1) for m in range(0, n - h + 1)}

        q = [np.zeros((1, 1) + shape, dtype=complex)]
        q[0][0, 0] = 1.0
        for k in range(1, n + 1):
            deg = 2 * k
            qk = np.zeros((k + 1, deg + 1) + shape, dtype=complex)
            for j in range(k, -1, -1):
                rhs = np.zeros((deg,) + shape, dtype=complex)
                # transport by the frozen process: sum_m (-i)^m psi^(m)/m! d_y^m Q_k
                for m in range(1, k - j + 1):
                    c = (-1j) ** m * dpsi[m] / factorial(m) * (factorial(j + m) / factorial(j))
                    rhs += c * qk[j + m, :deg]
                # source: sum_h y^h sum_m (-i)^m phi_h^(m)/m! d_y^m Q_{k-h}
                for h in range(1, min(j, k) + 1):
                    low = q[k - h]
                    l = j - h
                    for m in range(0, (k - h) - l + 1):
                        c = (-1j) ** m * dphi[(h, m)] / factorial(m) * (factorial(l + m) / factorial(l))
                        p = low.shape[1]
                        rhs[:p] += c * low[l + m]
                # integrate in tau from 0
                powers = np.arange(1, deg + 1).reshape((-1,) + (1,) * len(shape))
                qk[j, 1:] = rhs / powers
            q.append(qk)
        self._cache[key] = q
        return q

    def _poly(self, k: int, h: int, tau, xi):
        q = self._terms(xi)[k]
        if h >= q.shape[0]:
            return np.zeros(xi.shape, dtype=complex)
        coef = q[h]
        out = np.zeros(xi.shape, dtype=complex)
        for p in range(coef.shape[0] - 1, -1, -1):
            out = out * tau + coef[p]
        return out

    def term(self, k: int, h: int, tau: float, xi):
        """Coefficient of (x - xbar)^h in the k-th correction, without the exponential."""
        xi = np.atleast_1d(np.asarray(xi, dtype=complex))
        return self._poly(k, h, tau, xi)

    def g_coeff(self, h: int, tau: float, xi, order: int | None = None):
        """g_{n,h}(tau, xi): the (x - xbar)^h coefficient of the order-n expansion."""
        n = self.order if order is None else order
        _check_order(n, h)
        if n > self.order:
            raise UnsupportedOrderError(f"expansion built for order {self.order}")
        scalar = np.ndim(xi) == 0
        x = np.atleast_1d(np.asarray(xi, dtype=complex))
        out = sum(self._poly(k, h, tau, x) for k in range(h, n + 1))
        return out[0] if scalar else out

    def poly_table(self, tau: float, xi, order: int | None = None) -> np.ndarray:
        """Array (n+1, len(xi)) of g_{n,h}(tau, xi), h = 0..n."""
        n = self.order if order is None else order
        xi = np.atleast_1d(np.asarray(xi, dtype=complex))
        return np.array([self.g_coeff(h, tau, xi, n) for h in range(n + 1)])

    def transition(self, tau: float, xi, order: int | None = None) -> np.ndarray:
        """``exp(tau psi(xi)) g_{n,h}(tau, xi)``: the x-independent factors of the expansion."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return np.exp(tau * self.psi(xi)) * self.poly_table(tau, xi, order)

    def char_fn(self, t: float, x: float, T: float, xi, order: int | None = None):
        """Order-n approximation of E[exp(-int gamma) exp(i xi X_T) | X_t = x]."""
        if t > T:
            raise ValueError("t must not exceed T")
        scalar = np.ndim(xi) == 0
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        tau = T - t
        g = self.poly_table(tau, xi, order)
        y = x - self.xbar
        poly = sum(y**h * g[h] for h in range(g.shape[0]))
        out = np.exp(1j * xi * x + tau * self.psi(xi)) * poly
        return out[0] if scalar else out


def char_fn_approx(expansion: CharFnExpansion, t: float, x: float, T: float, xi, order: int | None = None):
    return expansion.char_fn(t, x, T, xi, order)


class ExactLevyCharFn:
    """Characteristic function of a constant-coefficient model, in the same interface."""

    def __init__(self, model: LocalLevyModel):
        self.model = model
        self.order = 0
        self._exp = CharFnExpansion(model, order=0)
        self.taylor = self._exp.taylor

    @property
    def xbar(self) -> float:
        return self._exp.xbar

    def recentered(self, xbar: float) -> "ExactLevyCharFn":
        return self

    def psi(self, xi, deriv: int = 0):
        return self._exp.psi(xi, deriv)

    def transition(self, tau: float, xi, order: int | None = None) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return np.exp(tau * self.psi(xi))[None, :]

    def char_fn(self, t, x, T, xi, order=None):
        return np.exp(1j * np.asarray(xi) * x + (T - t) * self.psi(xi))


# --------------------------------------------------------------------------- #
# Printed closed forms
# --------------------------------------------------------------------------- #

def printed_local_vol(tc: TaylorCoeffs, psi1, psi2, s, xi) -> dict:
    """Closed forms for the local-volatility-only model, keyed by (k, h)."""
    a1, a2 = tc.vol[1], (tc.vol[2] if len(tc.vol) > 2 else 0.0)
    w = xi * (1j + xi)
    return {
        (0, 0): np.ones_like(w),
        (1, 0): a1 * s**2 * w * 0.5j * psi1,
        (1, 1): -a1 * s * w,
        (2, 0): 0.5 * s**2 * a2 * w * psi2
        - s**3 * w * (a1**2 * (1j + 2 * xi) * psi1 - 2 * a2 * psi1**2 + a1**2 * w * psi2) / 6
        - s**4 * a1**2 * w**2 * psi1**2 / 8,
        (2, 1): 0.5 * s**2 * w * (a1**2 * (1 - 2j * xi) + 2j * a2 * psi2) - 0.5j * s**3 * a1**2 * w**2 * psi2,
        (2, 2): -a2 * s * w + 0.5 * s**2 * a1**2 * w**2,
    }


def printed_first_order(tc: TaylorCoeffs, jumps, psi1, s, xi) -> tuple:
    """General first-order closed forms (g_0^(1), g_1^(1))."""
    a1, g1, e1 = tc.vol[1], tc.default[1], tc.jump[1]
    if jumps is not None and e1 != 0.0:
        comp = e1 * jumps.exp_compensator
        jint = e1 * jumps.integral(xi)            # nu_1[e^{i xi z} - 1 - i xi z]
    else:
        comp, jint = 0.0, 0.0
    g0 = (
        0.5j * a1 * s**2 * (xi**2 + 1j * xi) * psi1
        + 0.5 * g1 * s**2 * (1j + xi) * psi1
        - 0.5 * comp * s**2 * xi * psi1
        - 0.5 * s**2 * psi1 * 1j * jint
    )
    g1_ = -a1 * s * (xi**2 + 1j * xi) + g1 * s * 1j * (1j + xi) - comp * s * xi * 1j + jint * s
    return g0, g1_


def printed_second_order_xbar_eq_x(tc: TaylorCoeffs, psi1, psi2, s, xi):
    """Second-order correction g_{2,0} at x = xbar from the local-volatility and default groups.

    Exact when at most one of a(x), gamma(x) is state dependent and the jump measure is
    not: the grouped form carries no a_1 gamma_1 cross terms.  The leading default term
    is scaled with s^4 (the xi^2 psi'^2 term of the same origin as in the volatility group).
    """
    a1, a2 = tc.vol[1], tc.vol[2]
    g1, g2 = tc.default[1], tc.default[2]
    G1 = (
        0.5 * s**2 * a2 * xi * (1j + xi) * psi2
        - s**4 * a1**2 * xi**2 * (1j + xi) ** 2 * psi1**2 / 8
        - s**3 * xi * (1j + xi) * (a1**2 * (1j + 2 * xi) * psi1 - 2 * a2 * psi1**2 + a1**2 * xi * (1j + xi) * psi2) / 6
    )
    G2 = (
        s**4 * (1j + xi) ** 2 * g1**2 * psi1**2 / 8
        + 0.5 * s**2 * (1 - 1j * xi) * g2 * psi2
        + s**3 * (1j + xi) * (g1**2 * psi1 - 2j * g2 * psi1**2 + (1j + xi) * g1**2 * psi2) / 6
    )
    return G1 + G2


# --------------------------------------------------------------------------- #
# Duhamel quadrature oracle
# --------------------------------------------------------------------------- #

def _cquad(f, lo, hi, tol):
    re, err_re = integrate.quad(lambda s: f(s).real, lo, hi, epsabs=tol, epsrel=tol, limit=200)
    im, err_im = integrate.quad(lambda s: f(s).imag, lo, hi, epsabs=tol, epsrel=tol, limit=200)
    if max(err_re, err_im) > 1e3 * tol:
        raise OracleError(f"quadrature did not converge (err {max(err_re, err_im):.2e})")
    return re + 1j * im


def _dxi(f, xi, order: int, step: float):
    """Five-point central differences in xi."""
    if order == 0:
        return f(xi)
    if order == 1:
        w = {-2: 1 / 12, -1: -2 / 3, 1: 2 / 3, 2: -1 / 12}
        return sum(c * f(xi + k * step) for k, c in w.items()) / step
    if order == 2:
        w = {-2: -1 / 12, -1: 4 / 3, 0: -5 / 2, 1: 4 / 3, 2: -1 / 12}
        return sum(c * f(xi + k * step) for k, c in w.items()) / step**2
    raise ValueError(order)


def duhamel_oracle(expansion: CharFnExpansion, k: int, t: float, x: float, T: float, xi: float,
                   tol: float = 1e-13, step: float = 1e-2) -> complex:
    """k-th correction G^k(t, x; T, xi) by direct quadrature of

        G^k(T) = int_t^T exp(psi(xi)(T - s)) sum_h phi_h(xi) (-i d_xi - xbar)^h G^{k-h}(s) ds

    with xi-derivatives taken by finite differences.  Only values of psi and of the
    symbols phi_h are used, never their analytic derivatives.
    """
    if k not in (1, 2):
        raise ValueError("oracle supports k in {1, 2}")
    if k > expansion.order:
        raise UnsupportedOrderError("expansion order too low for this oracle term")
    xbar = expansion.xbar
    psi = lambda z: complex(expansion.psi(z))
    phi = lambda h, z: complex(expansion._phi(h, z))

    def g0(s, z):
        return np.exp(1j * z * x + (s - t) * psi(z))

    def g1(s, z):
        if s <= t:
            return 0j
        return _cquad(lambda u: np.exp(psi(z) * (s - u)) * phi(1, z) * _shift(lambda w: g0(u, w), z, 1), t, s, tol)

    def _shift(f, z, h):
        # (-i d_xi - xbar)^h f at z
        if h == 1:
            return -1j * _dxi(f, z, 1, step) - xbar * f(z)
        if h == 2:
            return -_dxi(f, z, 2, step) + 2j * xbar * _dxi(f, z, 1, step) + xbar**2 * f(z)
        return f(z)

    if k == 1:
        integrand = lambda s: np.exp(psi(xi) * (T - s)) * phi(1, xi) * _shift(lambda w: g0(s, w), xi, 1)
    else:
        integrand = lambda s: np.exp(psi(xi) * (T - s)) * (
            phi(1, xi) * _shift(lambda w: g1(s, w), xi, 1) + phi(2, xi) * _shift(lambda w: g0(s, w), xi, 2)
        )
    return _cquad(integrand, t, T, tol)


def closed_form_term(expansion: CharFnExpansion, k: int, t: float, x: float, T: float, xi: float) -> complex:
    """k-th correction from the exact recursion, including the exponential factor."""
    tau = T - t
    y = x - expansion.xbar
    z = np.array([xi], dtype=complex)
    poly = sum(y**h * expansion.term(k, h, tau, z)[0] for h in range(k + 1))
    return complex(np.exp(1j * xi * x + tau * expansion.psi(xi)) * poly)
