"""
Bermudan puts by backward COS recursion.

At each exercise date the continuation coefficients

    C_k = e^{-r dt} Re sum_h sum'_j M^h_{k,j} g_h(xi_j) V_j

are formed from matrices M^h that split into a Hankel part (indices j + k)
and a Toeplitz part (indices j - k); both products run through FFTs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .cos import CosGrid, PriceReport, cos_sum, payoff_coeffs, primed
from .fft import ConvolutionPlan
from .models import LocalLevyModel

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50
TERMS = ("leading", "full", "panels")


@dataclass(frozen=True)
class BermudanProblem:
    """Put with strike ``strike`` exercisable on ``dates`` (t_M = maturity)."""

    strike: float
    maturity: float
    dates: tuple

    def __post_init__(self):
        d = np.asarray(self.dates, dtype=float)
        if self.strike <= 0 or self.maturity <= 0:
            raise ValueError("strike and maturity must be positive")
        if len(d) == 0 or d[0] < 0 or np.any(np.diff(d) <= 0):
            raise ValueError("exercise dates must be nonnegative and strictly increasing")
        if not np.isclose(d[-1], self.maturity, rtol=0, atol=1e-12):
            raise ValueError("last exercise date must equal the maturity")

    @classmethod
    def uniform(cls, strike: float, maturity: float, M: int) -> "BermudanProblem":
        """M dates spaced T/M apart, the last one at T."""
        if M < 1:
            raise ValueError("need at least one exercise date")
        return cls(strike, maturity, tuple(maturity * np.arange(1, M + 1) / M))

    @property
    def M(self) -> int:
        return len(self.dates)


@dataclass
class RecursionState:
    grid: CosGrid
    V: np.ndarray
    x_star: dict = field(default_factory=dict)


# --------------------------------------------------------------------------- #
# building blocks
# --------------------------------------------------------------------------- #

def _mseq(grid: CosGrid, h: int, x1: float, x2: float, xbar: float, n: np.ndarray) -> np.ndarray:
    """(1/(b-a)) int_{x1}^{x2} (x - xbar)^h exp(i n pi (x - a)/(b - a)) dx for integer n."""
    n = np.asarray(n)
    w = n * np.pi / grid.width
    nz = n != 0
    out = np.empty(n.shape, dtype=complex)
    iw = 1j * w[nz]

    def anti(x):
        s = np.zeros(iw.shape, dtype=complex)
        for p in range(h + 1):
            s += (-1) ** p * factorial(h) / factorial(h - p) * (x - xbar) ** (h - p) / iw ** (p + 1)
        return np.exp(iw * (x - grid.a)) * s

    out[nz] = anti(x2) - anti(x1)
    out[~nz] = ((x2 - xbar) ** (h + 1) - (x1 - xbar) ** (h + 1)) / (h + 1)
    return out / grid.width


def matrix_coeffs_M(grid: CosGrid, h: int, x1: float, x2: float, xbar: float):
    """Hankel and Toeplitz sequences of M^h over [x1, x2].

    Returns ``(hankel, toeplitz)`` with ``hankel[n] = M_n`` for n = 0..2N-2 and
    ``toeplitz[n + N - 1] = M_n`` for n = -(N-1)..N-1, so that
    ``M^h[k, j] = hankel[j + k] + toeplitz[j - k + N - 1]``.
    """
    if h not in (0, 1, 2):
        raise ValueError("h must be 0, 1 or 2")
    N = grid.N
    hankel = _mseq(grid, h, x1, x2, xbar, np.arange(0, 2 * N - 1))
    toeplitz = _mseq(grid, h, x1, x2, xbar, np.arange(-(N - 1), N))
    return hankel, toeplitz


def dense_M(grid: CosGrid, h: int, x1: float, x2: float, xbar: float) -> np.ndarray:
    hankel, toeplitz = matrix_coeffs_M(grid, h, x1, x2, xbar)
    k, j = np.indices((grid.N, grid.N))
    return hankel[j + k] + toeplitz[j - k + grid.N - 1]


def _terms_used(trans: np.ndarray, terms: str) -> int:
    if terms not in TERMS:
        raise ValueError(f"terms must be one of {TERMS}")
    return 1 if terms == "leading" else trans.shape[0]


def continuation_coeffs_C(grid: CosGrid, V_next: np.ndarray, trans: np.ndarray, x_star: float,
                          xbar: float, discount: float, plan: ConvolutionPlan | None = None,
                          terms: str = "full", x_hi: float | None = None) -> np.ndarray:
    """Continuation coefficients on [x*, x_hi] (default x_hi = b) via FFT Hankel/Toeplitz products."""
    N = grid.N
    plan = plan or ConvolutionPlan(N)
    x_hi = grid.b if x_hi is None else x_hi
    out = np.zeros(N)
    if x_star >= x_hi:
        return out
    for h in range(_terms_used(trans, terms)):
        u = primed(trans[h] * V_next)
        hankel, toeplitz = matrix_coeffs_M(grid, h, x_star, x_hi, xbar)
        first_col = toeplitz[N - 1::-1]
        first_row = toeplitz[N - 1:]
        out += plan.hankel_toeplitz_matvec(hankel, first_col, first_row, u).real
    return discount * out


def continuation_coeffs_dense(grid: CosGrid, V_next, trans, x_star, xbar, discount, terms="full",
                              x_hi=None) -> np.ndarray:
    """O(N^2) reference for :func:`continuation_coeffs_C`."""
    x_hi = grid.b if x_hi is None else x_hi
    out = np.zeros(grid.N)
    if x_star >= x_hi:
        return out
    for h in range(_terms_used(trans, terms)):
        u = primed(trans[h] * V_next)
        out += (dense_M(grid, h, x_star, x_hi, xbar) @ u).real
    return discount * out


def continuation_value(grid: CosGrid, V_next: np.ndarray, trans: np.ndarray, x: float, xbar: float,
                       discount: float, deriv: int = 0, terms: str = "full") -> float:
    """c(t, x) from the next-date coefficients; ``deriv`` gives x-derivatives."""
    n = _terms_used(trans, terms)
    return discount * cos_sum(grid, trans[:n], V_next, x, xbar, deriv)


@dataclass
class StepKernel:
    """One-period transition split into pieces [lo, hi) with their own expansion point.

    A single piece covering [a, b] is the usual frozen-point scheme; several
    pieces keep every Taylor expansion local to the start point it serves.
    """

    grid: CosGrid
    discount: float
    edges: np.ndarray            # piece boundaries, edges[0] = a, edges[-1] = b
    xbars: np.ndarray
    trans: list
    terms: str
    _cache: dict = field(default_factory=dict, repr=False)

    def _piece(self, x: float) -> int:
        return int(np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.xbars) - 1))

    def value(self, V_next: np.ndarray, x: float, deriv: int = 0) -> float:
        i = self._piece(x)
        return continuation_value(self.grid, V_next, self.trans[i], x, self.xbars[i], self.discount,
                                  deriv, self.terms)

    def coeffs(self, V_next: np.ndarray, x_star: float, plan: ConvolutionPlan | None = None) -> np.ndarray:
        """Continuation coefficients on [x*, b], summed over pieces in the transform domain."""
        grid = self.grid
        N = grid.N
        plan = plan or ConvolutionPlan(N)
        spectra, vectors = [], []
        for i, (lo, hi) in enumerate(zip(self.edges[:-1], self.edges[1:])):
            if hi <= x_star:
                continue
            trans = self.trans[i]
            for h in range(_terms_used(trans, self.terms)):
                spectra.append(self._spectra(plan, i, h, max(lo, x_star)))
                vectors.append(primed(trans[h] * V_next))
        if not vectors:
            return np.zeros(N)
        return self.discount * plan.summed_matvec(spectra, np.array(vectors)).real

    def _spectra(self, plan: ConvolutionPlan, i: int, h: int, lo: float):
        # whole pieces do not depend on the date or on V, so their spectra are cached
        whole = lo == self.edges[i]
        key = (i, h, plan.size)
        if whole and key in self._cache:
            return self._cache[key]
        N = self.grid.N
        hankel, toeplitz = matrix_coeffs_M(self.grid, h, lo, self.edges[i + 1], self.xbars[i])
        out = plan.matrix_spectra(hankel, toeplitz[N - 1::-1], toeplitz[N - 1:])
        if whole:
            self._cache[key] = out
        return out


class KernelFactory:
    """Builds and caches :class:`StepKernel` objects per time step."""

    def __init__(self, expansion, grid: CosGrid, rate: float, terms: str = "panels",
                 panel_width: float = 0.5):
        if terms not in TERMS:
            raise ValueError(f"terms must be one of {TERMS}")
        if panel_width <= 0:
            raise ValueError("panel_width must be positive")
        self.expansion = expansion
        self.grid = grid
        self.rate = rate
        self.terms = terms
        if terms == "panels":
            n = max(1, int(np.ceil(grid.width / panel_width)))
            self.edges = np.linspace(grid.a, grid.b, n + 1)
            centers = 0.5 * (self.edges[:-1] + self.edges[1:])
            self.expansions = [expansion.recentered(c) for c in centers]
        else:
            self.edges = np.array([grid.a, grid.b])
            self.expansions = [expansion]
        self.xbars = np.array([e.xbar for e in self.expansions])
        self._cache = {}

    def __call__(self, dt: float) -> StepKernel:
        key = round(dt, 14)
        if key not in self._cache:
            trans = [e.transition(dt, self.grid.xi) for e in self.expansions]
            self._cache[key] = StepKernel(self.grid, float(np.exp(-self.rate * dt)), self.edges,
                                          self.xbars, trans, self.terms)
        return self._cache[key]


def find_early_exercise(kernel: StepKernel, V_next: np.ndarray, K: float, tol: float = NEWTON_TOL,
                        maxiter: int = NEWTON_MAXITER, scan: int = 64) -> tuple[float, dict]:
    """Largest root of c(x) = K - e^x in [a, log K].

    Newton from log K; if it fails, the first sign change scanning left from
    log K in ``scan`` steps is refined by bisection.  Scanning from the right
    keeps the search away from the deep in-the-money tail, where the expanded
    kernel is least reliable and never needed.  Returns a when c > K - e^x
    on the whole interval.
    """
    grid = kernel.grid
    lo, hi = grid.a, min(np.log(K), grid.b)
    ftol = tol * K

    def f(x):
        return kernel.value(V_next, x) - (K - np.exp(x))

    def fp(x):
        return kernel.value(V_next, x, 1) + np.exp(x)

    info = {"method": "newton", "iterations": 0}
    f_hi = f(hi)
    if f_hi <= 0:
        info["method"] = "payoff-root"
        return hi, info

    x = hi
    fx = f_hi
    for it in range(1, maxiter + 1):
        d = fp(x)
        if d == 0 or not np.isfinite(d):
            break
        x_new = x - fx / d
        if not lo <= x_new <= hi:
            break
        x = x_new
        fx = f(x)
        info["iterations"] = it
        if abs(fx) <= ftol:
            return x, info

    info["method"] = "bisection"
    pts = np.linspace(hi, lo, scan + 1)
    right = hi
    for left in pts[1:]:
        if f(left) < 0:
            break
        right = left
    else:
        info["method"] = "no-crossing"
        return lo, info
    a_, b_ = left, right
    for it in range(200):
        mid = 0.5 * (a_ + b_)
        fm = f(mid)
        if abs(fm) <= ftol or b_ - a_ < 1e-15:
            break
        if fm < 0:
            a_ = mid
        else:
            b_ = mid
    info["iterations"] = it + 1
    return mid, info


# --------------------------------------------------------------------------- #
# pricing
# --------------------------------------------------------------------------- #

def backward_recursion(model: LocalLevyModel, expansion, problem: BermudanProblem, grid: CosGrid,
                       terms: str = "panels", plan: ConvolutionPlan | None = None,
                       panel_width: float = 0.5, kernels: KernelFactory | None = None):
    """Run the recursion down to the first date; returns the state, per-date timings and Newton info.

    A ``kernels`` factory built for the same expansion, grid and mode may be
    shared between calls (e.g. across strikes) to reuse transitions.
    """
    K = problem.strike
    plan = plan or ConvolutionPlan(grid.N)
    dates = np.asarray(problem.dates, dtype=float)
    if kernels is None:
        kernels = KernelFactory(expansion, grid, model.rate, terms, panel_width)
    elif kernels.grid != grid or kernels.terms != terms or kernels.expansion is not expansion:
        raise ValueError("kernel factory was built for another grid, mode or expansion")
    state = RecursionState(grid, payoff_coeffs(grid, K, np.log(K)))
    timings = []
    newton = []
    for m in range(len(dates) - 2, -1, -1):
        t0 = time.perf_counter()
        kernel = kernels(dates[m + 1] - dates[m])
        x_star, info = find_early_exercise(kernel, state.V, K)
        state.V = payoff_coeffs(grid, K, x_star) + kernel.coeffs(state.V, x_star, plan)
        state.x_star[float(dates[m])] = x_star
        timings.append(time.perf_counter() - t0)
        newton.append(info)
    return state, timings, newton


def price_bermudan(model: LocalLevyModel, expansion, problem: BermudanProblem, grid: CosGrid,
                   terms: str = "panels", plan: ConvolutionPlan | None = None,
                   panel_width: float = 0.5, kernels: KernelFactory | None = None) -> PriceReport:
    """Bermudan put value at (0, x0) with Delta and Gamma in S.

    ``terms`` selects how the one-period kernel is expanded inside the recursion:

    ``"panels"`` (default)
        [a, b] is cut into pieces of width about ``panel_width``, each expanded
        around its midpoint, so the state dependence of the coefficients is
        kept wherever the continuation value is needed.
    ``"leading"``
        one expansion point xbar = x0 and only the h = 0 term, i.e. the
        coefficients are frozen at x0 for every start point.  Cheapest, but
        away from x0 it prices the frozen model, so Bermudan values can fall
        below the European value and decrease in M for out-of-the-money strikes.
    ``"full"``
        one expansion point with all (x - xbar)^h corrections.  These grow
        polynomially far from xbar and the recursion amplifies them, so this is
        only usable on short horizons.

    The last step from t_1 to 0 is expanded around ``expansion.xbar`` and uses
    all terms.
    """
    t_start = time.perf_counter()
    K = problem.strike
    dates = problem.dates
    exercisable_now = float(dates[0]) == 0.0
    if exercisable_now:
        # compare the payoff with the continuation from t_1 directly at x0 rather than
        # reading it off the cosine series of V(0, .), which converges slowly at the kink
        dates = dates[1:]
    rest = BermudanProblem(K, problem.maturity, dates)
    state, timings, newton = backward_recursion(model, expansion, rest, grid, terms, plan, panel_width,
                                                kernels)
    r = model.rate
    t1 = float(dates[0])
    x0, xbar = model.x0, expansion.xbar
    trans = expansion.transition(t1, grid.xi)
    disc = np.exp(-r * t1)
    value, dx, dxx = (continuation_value(grid, state.V, trans, x0, xbar, disc, d) for d in range(3))
    if exercisable_now:
        if value <= K - np.exp(x0):
            value, dx, dxx = K - np.exp(x0), -np.exp(x0), -np.exp(x0)
    S0 = model.spot
    boundary = np.array([state.x_star[t] for t in sorted(state.x_star)])
    return PriceReport(
        value=float(value),
        delta=float(dx / S0),
        gamma=float((dxx - dx) / S0**2),
        boundary=boundary,
        diagnostics={
            "grid": grid,
            "terms": terms,
            "order": expansion.order,
            "x_star": dict(state.x_star),
            "seconds": time.perf_counter() - t_start,
            "seconds_per_date": float(np.mean(timings)) if timings else 0.0,
            "newton": newton,
            "delta_x": float(dx),
            "gamma_x": float(dxx),
            "V_first": state.V,
        },
    )


def greeks(model: LocalLevyModel, expansion, problem: BermudanProblem, grid: CosGrid,
           terms: str = "panels", panel_width: float = 0.5) -> tuple[float, float]:
    """(Delta, Gamma) with respect to S from the final-step COS sums."""
    rep = price_bermudan(model, expansion, problem, grid, terms, panel_width=panel_width)
    return rep.delta, rep.gamma


def price_from_first_date(model: LocalLevyModel, expansion, grid: CosGrid, V_first: np.ndarray,
                          t1: float, x: float) -> float:
    """Value at (0, x) from the t_1 coefficients with xbar and grid held fixed."""
    trans = expansion.transition(t1, grid.xi)
    return continuation_value(grid, V_first, trans, x, expansion.xbar, np.exp(-model.rate * t1))
