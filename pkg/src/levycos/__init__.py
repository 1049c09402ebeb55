"""
COS pricing of European, Bermudan and American puts under local Lévy models
with default, using an expansion of the characteristic function around a
frozen-coefficient Lévy process.
"""

from .american import price_american, richardson
from .bermudan import BermudanProblem, greeks, price_bermudan
from .cos import CosGrid, PriceReport, european_price, make_grid, truncation_range
from .expansion import CharFnExpansion, ExactLevyCharFn, UnsupportedOrderError, char_fn_approx
from .models import (
    ExpCoefficient,
    GaussianJumps,
    LocalLevyModel,
    ModelError,
    VarianceGammaJumps,
    cev_like,
    cev_merton,
    cev_vg,
    char_exponent,
    constant_merton,
)

__version__ = "0.1.0"

__all__ = [
    "BermudanProblem",
    "CharFnExpansion",
    "CosGrid",
    "ExactLevyCharFn",
    "ExpCoefficient",
    "GaussianJumps",
    "LocalLevyModel",
    "ModelError",
    "PriceReport",
    "UnsupportedOrderError",
    "VarianceGammaJumps",
    "cev_like",
    "cev_merton",
    "cev_vg",
    "char_exponent",
    "char_fn_approx",
    "constant_merton",
    "european_price",
    "greeks",
    "make_grid",
    "price_american",
    "price_bermudan",
    "richardson",
    "truncation_range",
]
