"""
Fourier-cosine (COS) pricing of European puts under the expanded characteristic function.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .models import LocalLevyModel, cumulants

DEFAULT_N = 200
DEFAULT_L = 10.0


@dataclass(frozen=True)
class CosGrid:
    """N cosine terms on the log-price interval [a, b]."""

    N: int
    a: float
    b: float

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if not self.b > self.a:
            raise ValueError("truncation interval must satisfy a < b")

    @property
    def width(self) -> float:
        return self.b - self.a

    @property
    def k(self) -> np.ndarray:
        return np.arange(self.N)

    @property
    def xi(self) -> np.ndarray:
        return self.k * np.pi / self.width

    def contains(self, x: float) -> bool:
        return self.a < x < self.b


@dataclass
class PriceReport:
    value: float
    delta: float | None = None
    gamma: float | None = None
    boundary: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


def truncation_range(model: LocalLevyModel, T: float, L: float = DEFAULT_L, x0: float | None = None) -> tuple[float, float]:
    """Cumulant rule ``c1 -/+ L sqrt(c2 + sqrt(c4))`` from the frozen-coefficient exponent."""
    if L <= 0 or T <= 0:
        raise ValueError("L and T must be positive")
    x0 = model.x0 if x0 is None else x0
    c1, c2, c4 = cumulants(model, T)
    spread = c2 + np.sqrt(max(c4, 0.0))
    if not spread > 0:
        raise ValueError(f"degenerate cumulants c2={c2}, c4={c4}")
    c1 += x0
    half = L * np.sqrt(spread)
    return c1 - half, c1 + half


def make_grid(model: LocalLevyModel, T: float, N: int = DEFAULT_N, L: float = DEFAULT_L) -> CosGrid:
    a, b = truncation_range(model, T, L)
    return CosGrid(N, a, b)


def chi_psi(a: float, b: float, x1: float, x2: float, k):
    """Cosine integrals over [x1, x2] of exp(y) and 1 against cos(k pi (y - a)/(b - a))."""
    k = np.asarray(k, dtype=float)
    w = k * np.pi / (b - a)
    t1 = w * (x1 - a)
    t2 = w * (x2 - a)
    chi = (
        np.exp(x2) * np.cos(t2) - np.exp(x1) * np.cos(t1)
        + w * (np.exp(x2) * np.sin(t2) - np.exp(x1) * np.sin(t1))
    ) / (1.0 + w**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        psi = np.where(k == 0, x2 - x1, (np.sin(t2) - np.sin(t1)) / np.where(k == 0, 1.0, w))
    return chi, psi


def payoff_coeffs(grid: CosGrid, K: float, x_star: float) -> np.ndarray:
    """Put payoff coefficients F_k on [a, x*]: (2/(b-a)) (K Psi_k - chi_k)."""
    chi, psi = chi_psi(grid.a, grid.b, grid.a, x_star, grid.k)
    return 2.0 / grid.width * (K * psi - chi)


def primed(v: np.ndarray) -> np.ndarray:
    """Copy of ``v`` with its first entry halved."""
    v = np.array(v, copy=True)
    v[0] *= 0.5
    return v


def cos_sum(grid: CosGrid, trans: np.ndarray, V: np.ndarray, x: float, xbar: float,
            deriv: int = 0) -> float:
    """``sum' Re(exp(i xi (x - a)) sum_h (x - xbar)^h trans_h) V`` or its x-derivative (deriv 1, 2)."""
    xi = grid.xi
    y = x - xbar
    n = trans.shape[0]
    phase = np.exp(1j * xi * (x - grid.a))
    poly = [np.zeros(grid.N, dtype=complex) for _ in range(3)]
    for h in range(n):
        poly[0] += y**h * trans[h]
        if h >= 1:
            poly[1] += h * y ** (h - 1) * trans[h]
        if h >= 2:
            poly[2] += h * (h - 1) * y ** (h - 2) * trans[h]
    iw = 1j * xi
    if deriv == 0:
        f = poly[0]
    elif deriv == 1:
        f = iw * poly[0] + poly[1]
    elif deriv == 2:
        f = iw**2 * poly[0] + 2 * iw * poly[1] + poly[2]
    else:
        raise ValueError("deriv must be 0, 1 or 2")
    return float(np.sum((phase * f).real * primed(V)))


def european_price(model: LocalLevyModel, expansion, grid: CosGrid, K: float, T: float) -> PriceReport:
    """European put ``e^{-rT} sum' Re(e^{-i k pi a/(b-a)} Gamma(0, x0; T, xi_k)) V_k(T)``.

    Default enters through the expanded characteristic function, so only r discounts.
    """
    if K <= 0:
        raise ValueError("strike must be positive")
    if T <= 0:
        raise ValueError("maturity must be positive")
    t0 = time.perf_counter()
    V = payoff_coeffs(grid, K, np.log(K))
    trans = expansion.transition(T, grid.xi)
    disc = np.exp(-model.rate * T)
    value, dx, dxx = (disc * cos_sum(grid, trans, V, model.x0, expansion.xbar, d) for d in range(3))
    S0 = model.spot
    return PriceReport(
        value=value,
        delta=dx / S0,
        gamma=(dxx - dx) / S0**2,
        diagnostics={"grid": grid, "seconds": time.perf_counter() - t0, "order": expansion.order},
    )


def european_call_via_parity(model: LocalLevyModel, expansion, grid: CosGrid, K: float, T: float) -> float:
    """Call = put + S0 - K e^{-rT}; only valid without default."""
    if model.has_default:
        raise NotImplementedError("put-call parity under default needs the defaultable bond price")
    put = european_price(model, expansion, grid, K, T).value
    return put + model.spot - K * np.exp(-model.rate * T)
