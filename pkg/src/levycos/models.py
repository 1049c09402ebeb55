"""
Local Lévy models with local volatility, local default intensity and a
state-dependent jump measure.

The log-price X follows

    dX = mu(X) dt + sqrt(2 a(X)) dW + int z dN~(X, dz)

and the asset defaults with local hazard rate gamma(X).  All state
dependence is carried by coefficient functions of the form
``const + scale * exp(rate * x)``; the jump measure is a base Lévy measure
(Gaussian or Variance-Gamma) multiplied by such a function.  This covers the
CEV-Merton, CEV-VG and CEV-like default models used throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np


class ModelError(ValueError):
    """Invalid model parameters."""


@dataclass(frozen=True)
class ExpCoefficient:
    """Coefficient function ``f(x) = const + scale * exp(rate * x)``."""

    const: float = 0.0
    scale: float = 0.0
    rate: float = 0.0

    def __call__(self, x, deriv: int = 0):
        x = np.asarray(x, dtype=float)
        e = self.scale * self.rate**deriv * np.exp(self.rate * x)
        return e + self.const if deriv == 0 else e

    def taylor(self, xbar: float, order: int) -> np.ndarray:
        """Taylor coefficients ``f^(k)(xbar) / k!`` for k = 0..order."""
        return np.array([float(self(xbar, k)) / factorial(k) for k in range(order + 1)])

    @property
    def is_constant(self) -> bool:
        return self.scale == 0.0 or self.rate == 0.0


ZERO = ExpCoefficient()
ONE = ExpCoefficient(const=1.0)


# --------------------------------------------------------------------------- #
# Base jump measures
# --------------------------------------------------------------------------- #

class GaussianJumps:
    """Merton jumps: intensity ``lam``, normal sizes with mean ``m`` and std ``delta``.

    Jumps enter the log-price compensated, i.e. through ``int z dN~``.
    """

    kind = "gaussian"
    compensated = True

    def __init__(self, lam: float, m: float, delta: float):
        if lam < 0:
            raise ModelError(f"jump intensity must be nonnegative, got {lam}")
        if delta <= 0:
            raise ModelError(f"jump size std must be positive, got {delta}")
        self.lam = float(lam)
        self.m = float(m)
        self.delta = float(delta)

    def __repr__(self):
        return f"GaussianJumps(lam={self.lam}, m={self.m}, delta={self.delta})"

    def integral(self, xi, deriv: int = 0):
        """d^k/dxi^k of ``int nu(dz) (e^{i z xi} - 1 - i z xi)``."""
        xi = np.asarray(xi, dtype=complex)
        d2 = self.delta**2
        e = np.exp(1j * self.m * xi - 0.5 * d2 * xi**2)
        p = 1j * self.m - d2 * xi
        if deriv == 0:
            return self.lam * (e - 1.0 - 1j * self.m * xi)
        if deriv == 1:
            return self.lam * (p * e - 1j * self.m)
        # Hermite-type polynomials of p from repeated differentiation of e
        herm = {
            2: p**2 - d2,
            3: p**3 - 3 * d2 * p,
            4: p**4 - 6 * d2 * p**2 + 3 * d2**2,
        }
        if deriv not in herm:
            raise ValueError(f"derivative order {deriv} not supported")
        return self.lam * herm[deriv] * e

    @property
    def exp_compensator(self) -> float:
        """``int nu(dz) (e^z - 1 - z)``."""
        return self.lam * (np.exp(self.m + 0.5 * self.delta**2) - 1.0 - self.m)

    @property
    def mean(self) -> float:
        """``int z nu(dz)``."""
        return self.lam * self.m

    @property
    def intensity(self) -> float:
        return self.lam

    def second_moment(self) -> float:
        return self.lam * (self.m**2 + self.delta**2)

    def exponential_moment_finite(self) -> bool:
        return True

    def density(self, z):
        """Lévy density (used by quadrature tests)."""
        z = np.asarray(z, dtype=float)
        return self.lam * np.exp(-0.5 * ((z - self.m) / self.delta) ** 2) / np.sqrt(2 * np.pi * self.delta**2)


class VarianceGammaJumps:
    """Variance-Gamma jumps: Brownian motion with drift ``theta`` and volatility
    ``rho`` time-changed by a unit-mean gamma process with variance ``kappa``.

    VG jumps enter the log-price uncompensated (finite variation).
    """

    kind = "vg"
    compensated = False

    def __init__(self, theta: float, rho: float, kappa: float):
        if kappa <= 0:
            raise ModelError(f"VG variance rate kappa must be positive, got {kappa}")
        if rho <= 0:
            raise ModelError(f"VG volatility must be positive, got {rho}")
        if 1.0 - kappa * theta - 0.5 * kappa * rho**2 <= 0:
            raise ModelError("VG parameters violate 1 - kappa*theta - kappa*rho^2/2 > 0")
        self.theta = float(theta)
        self.rho = float(rho)
        self.kappa = float(kappa)
        # roots of q(xi) = 1 - i kappa theta xi + kappa rho^2 xi^2 / 2
        c2 = 0.5 * kappa * rho**2
        self._lead = c2
        self._roots = np.roots([c2, -1j * kappa * theta, 1.0])

    def __repr__(self):
        return f"VarianceGammaJumps(theta={self.theta}, rho={self.rho}, kappa={self.kappa})"

    @property
    def tail_rates(self) -> tuple[float, float]:
        """Exponential decay rates (lambda_1, lambda_2) of the right and left tails."""
        s = np.sqrt(0.25 * self.theta**2 * self.kappa**2 + 0.5 * self.rho**2 * self.kappa)
        h = 0.5 * self.theta * self.kappa
        return 1.0 / (s + h), 1.0 / (s - h)

    def _q(self, xi):
        return 1.0 - 1j * self.kappa * self.theta * xi + 0.5 * self.kappa * self.rho**2 * xi**2

    def integral(self, xi, deriv: int = 0):
        """d^k/dxi^k of ``int nu(dz) (e^{i z xi} - 1 - i z xi)``."""
        xi = np.asarray(xi, dtype=complex)
        if deriv == 0:
            return -np.log(self._q(xi)) / self.kappa - 1j * self.theta * xi
        # log q = log c + sum log(xi - root)
        dlog = sum((-1) ** (deriv - 1) * factorial(deriv - 1) / (xi - r) ** deriv for r in self._roots)
        out = -dlog / self.kappa
        if deriv == 1:
            out = out - 1j * self.theta
        return out

    @property
    def exp_compensator(self) -> float:
        return float(-np.log(1.0 - self.kappa * self.theta - 0.5 * self.kappa * self.rho**2) / self.kappa - self.theta)

    @property
    def mean(self) -> float:
        return self.theta

    @property
    def intensity(self) -> float:
        return np.inf

    def second_moment(self) -> float:
        return self.theta**2 * self.kappa + self.rho**2

    def exponential_moment_finite(self) -> bool:
        l1, l2 = self.tail_rates
        return l1 > 1.0 and l2 > 1.0

    def density(self, z):
        z = np.asarray(z, dtype=float)
        l1, l2 = self.tail_rates
        rate = np.where(z > 0, l1, l2)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.exp(-rate * np.abs(z)) / (self.kappa * np.abs(z))


JumpMeasure = GaussianJumps | VarianceGammaJumps


# --------------------------------------------------------------------------- #
# Model
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class TaylorCoeffs:
    """Taylor coefficients of a(x), gamma(x) and the jump multiplier at ``xbar``.

    ``jump[k]`` scales the base measure: nu_k(dz) = jump[k] * nu_base(dz).
    """

    xbar: float
    vol: np.ndarray
    default: np.ndarray
    jump: np.ndarray

    @property
    def order(self) -> int:
        return len(self.vol) - 1


@dataclass(frozen=True)
class LocalLevyModel:
    """A defaultable local Lévy model.

    Parameters
    ----------
    rate : risk-free rate r.
    vol : local diffusion coefficient a(x) = sigma(x)^2 / 2.
    default : local default intensity gamma(x).
    jumps : base jump measure, or None for a pure diffusion.
    jump_scale : multiplier of the base measure, nu(x, dz) = jump_scale(x) nu_base(dz).
    spot : initial asset price S_0.
    expansion_point : Taylor point xbar; defaults to log(spot).
    """

    rate: float
    vol: ExpCoefficient
    default: ExpCoefficient = ZERO
    jumps: JumpMeasure | None = None
    jump_scale: ExpCoefficient = ONE
    spot: float = 1.0
    expansion_point: float | None = None
    name: str = field(default="local-levy", compare=False)

    def __post_init__(self):
        if self.spot <= 0:
            raise ModelError("spot must be positive")
        if self.jumps is not None and not self.jumps.exponential_moment_finite():
            raise ModelError("jump measure violates the exponential moment condition")

    @property
    def x0(self) -> float:
        return float(np.log(self.spot))

    @property
    def xbar(self) -> float:
        return self.x0 if self.expansion_point is None else float(self.expansion_point)

    def check_domain(self, a: float, b: float, n: int = 201) -> None:
        """Verify a > 0 and gamma >= 0 on [a, b]."""
        x = np.linspace(a, b, n)
        if np.any(self.vol(x) <= 0):
            raise ModelError("diffusion coefficient must be positive on the truncation interval")
        if np.any(self.default(x) < 0):
            raise ModelError("default intensity must be nonnegative on the truncation interval")

    def taylor(self, order: int, xbar: float | None = None) -> TaylorCoeffs:
        xbar = self.xbar if xbar is None else float(xbar)
        jump = self.jump_scale.taylor(xbar, order) if self.jumps is not None else np.zeros(order + 1)
        return TaylorCoeffs(
            xbar=xbar,
            vol=self.vol.taylor(xbar, order),
            default=self.default.taylor(xbar, order),
            jump=jump,
        )

    @property
    def has_default(self) -> bool:
        return not (self.default.const == 0.0 and self.default.scale == 0.0)

    @property
    def is_local_vol_only(self) -> bool:
        """True when only a(x) depends on the state."""
        return self.default.is_constant and (self.jumps is None or self.jump_scale.is_constant)


def drift(model: LocalLevyModel, x):
    """Risk-neutral drift mu(x) of the log-price.

    For compensated (Gaussian) jumps this is
    ``gamma + r - a - nu(x, .)[e^z - 1 - z]``; for VG jumps, which enter
    uncompensated, it is ``r + log(1 - kappa theta - kappa rho^2/2)/kappa - a``
    scaled to the local measure and shifted by gamma.
    """
    x = np.asarray(x, dtype=float)
    mu = model.default(x) + model.rate - model.vol(x)
    if model.jumps is not None:
        j = model.jumps
        scale = model.jump_scale(x)
        mu = mu - scale * j.exp_compensator
        if not j.compensated:
            mu = mu - scale * j.mean
    return mu


def symbol(xi, vol: float, default: float, jump: float, jumps: JumpMeasure | None, deriv: int = 0):
    """Symbol of the constant-coefficient operator

        vol (d_xx - d_x) + default (d_x - 1) - jump nu[e^z-1-z] d_x + jump nu[e^{z d_x} - 1 - z d_x]

    i.e. its action on ``exp(i xi x)``, differentiated ``deriv`` times in xi.
    """
    xi = np.asarray(xi, dtype=complex)
    if deriv == 0:
        out = vol * (-xi**2 - 1j * xi) + default * (1j * xi - 1.0)
    elif deriv == 1:
        out = vol * (-2.0 * xi - 1j) + 1j * default + 0 * xi
    elif deriv == 2:
        out = -2.0 * vol + 0 * xi
    else:
        out = 0 * xi
    if jumps is not None and jump != 0.0:
        j = jumps.integral(xi, deriv)
        if deriv == 0:
            j = j - 1j * xi * jumps.exp_compensator
        elif deriv == 1:
            j = j - 1j * jumps.exp_compensator
        out = out + jump * j
    return out


def char_exponent(model: LocalLevyModel, xi, deriv: int = 0, xbar: float | None = None):
    """Characteristic exponent psi of the Lévy process with coefficients frozen at ``xbar``.

    Accepts complex ``xi``; ``deriv`` selects an analytic derivative (0..4).
    """
    if deriv < 0 or deriv > 4:
        raise ValueError("derivative order must be in 0..4")
    tc = model.taylor(0, xbar)
    out = symbol(xi, tc.vol[0], tc.default[0], tc.jump[0], model.jumps, deriv)
    if deriv == 0:
        out = out + 1j * model.rate * np.asarray(xi, dtype=complex)
    elif deriv == 1:
        out = out + 1j * model.rate
    return out


def char_exponent_derivs(model: LocalLevyModel, xi, order: int = 4, xbar: float | None = None) -> list:
    """[psi'(xi), ..., psi^(order)(xi)]."""
    if order not in (1, 2, 3, 4):
        raise ValueError("order must be in 1..4")
    return [char_exponent(model, xi, k, xbar) for k in range(1, order + 1)]


def cumulants(model: LocalLevyModel, T: float, xbar: float | None = None) -> tuple[float, float, float]:
    """First, second and fourth cumulants of the frozen-coefficient log-return over T."""
    c1 = T * (char_exponent(model, 0.0, 1, xbar) / 1j).real
    c2 = -T * char_exponent(model, 0.0, 2, xbar).real
    c4 = T * char_exponent(model, 0.0, 4, xbar).real
    return float(c1), float(c2), float(c4)


# --------------------------------------------------------------------------- #
# Catalog
# --------------------------------------------------------------------------- #

def cev_merton(r=0.05, sigma0=0.2, beta=0.5, lam=0.3, m=-0.1, delta=0.4, spot=1.0, expansion_point=None):
    """CEV local volatility a(x) = sigma0^2 exp(2(beta-1)x)/2 with Merton jumps."""
    return LocalLevyModel(
        rate=r,
        vol=ExpCoefficient(0.0, 0.5 * sigma0**2, 2.0 * (beta - 1.0)),
        jumps=GaussianJumps(lam, m, delta),
        spot=spot,
        expansion_point=expansion_point,
        name="cev-merton",
    )


def cev_vg(r=0.05, sigma0=0.2, beta=0.5, kappa=1.0, theta=-0.5, rho=0.2, spot=1.0, expansion_point=None):
    """CEV local volatility with Variance-Gamma jumps."""
    return LocalLevyModel(
        rate=r,
        vol=ExpCoefficient(0.0, 0.5 * sigma0**2, 2.0 * (beta - 1.0)),
        jumps=VarianceGammaJumps(theta, rho, kappa),
        spot=spot,
        expansion_point=expansion_point,
        name="cev-vg",
    )


def cev_like(
    r=0.05, b0=0.0, b1=0.15, beta=-2.0, c0=0.0, c1=0.0,
    eps1=1.0, eps2=1.0, eps3=0.0, eps4=1.0,
    lam=0.2, m=-0.2, delta=0.2, spot=1.0, expansion_point=None,
):
    """CEV-like model with eta(x) = exp(beta x):

    a(x) = (b0^2 + eps1 b1^2 eta(x)) / 2, gamma(x) = c0 + eps2 c1 eta(x),
    nu(x, dz) = (eps3 + eps4 eta(x)) nu_N(dz) with Gaussian nu_N.
    """
    return LocalLevyModel(
        rate=r,
        vol=ExpCoefficient(0.5 * b0**2, 0.5 * eps1 * b1**2, beta),
        default=ExpCoefficient(c0, eps2 * c1, beta),
        jumps=GaussianJumps(lam, m, delta),
        jump_scale=ExpCoefficient(eps3, eps4, beta),
        spot=spot,
        expansion_point=expansion_point,
        name="cev-like",
    )


def constant_merton(r=0.05, sigma=0.2, lam=0.3, m=-0.1, delta=0.4, spot=1.0, gamma=0.0):
    """Exponential Lévy (Merton) model with constant coefficients and default rate."""
    return LocalLevyModel(
        rate=r,
        vol=ExpCoefficient(0.5 * sigma**2),
        default=ExpCoefficient(gamma),
        jumps=GaussianJumps(lam, m, delta),
        spot=spot,
        name="merton",
    )
