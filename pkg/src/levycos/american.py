"""
American puts from a ladder of Bermudan prices by 4-point Richardson extrapolation.
"""

from __future__ import annotations

import numpy as np

from .bermudan import BermudanProblem, price_bermudan
from .cos import CosGrid, PriceReport
from .fft import ConvolutionPlan
from .models import LocalLevyModel

RICHARDSON_WEIGHTS = np.array([-1.0, 14.0, -56.0, 64.0]) / 21.0


def richardson(values) -> float:
    """(64 v_4 - 56 v_3 + 14 v_2 - v_1) / 21 for values ordered by increasing M."""
    values = np.asarray(values, dtype=float)
    if values.shape != (4,):
        raise ValueError("need exactly four Bermudan values")
    return float(RICHARDSON_WEIGHTS @ values)


def ladder(d: int) -> list[int]:
    if d < 0:
        raise ValueError("d must be nonnegative")
    return [2 ** (d + i) for i in range(4)]


def price_american(model: LocalLevyModel, expansion, K: float, T: float, grid: CosGrid,
                   d: int = 1, terms: str = "panels") -> PriceReport:
    """American put from Bermudan prices with M = 2^d, ..., 2^(d+3) uniform dates."""
    plan = ConvolutionPlan(grid.N)
    Ms = ladder(d)
    reports = [price_bermudan(model, expansion, BermudanProblem.uniform(K, T, M), grid, terms, plan)
               for M in Ms]
    values = [r.value for r in reports]
    return PriceReport(
        value=richardson(values),
        delta=richardson([r.delta for r in reports]),
        gamma=richardson([r.gamma for r in reports]),
        boundary=reports[-1].boundary,
        diagnostics={"M": Ms, "bermudan": values, "grid": grid, "d": d},
    )
