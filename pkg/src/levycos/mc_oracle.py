"""
Monte Carlo reference for the expansion engine.

Paths of the log-price are simulated by an Euler scheme with compound-Poisson
(Gaussian) or gamma-subordinated (VG) jumps.  Default is never simulated as an
event: every path carries the survival weight exp(-int gamma(X_s) ds), which is
unbiased and has lower variance than killing paths.

Random numbers come from counter-based Philox streams keyed by (seed, block),
so a block produces the same draws whether blocks run serially or in threads.
"""

from __future__ import annotations

import csv
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bermudan import BermudanProblem
from .models import LocalLevyModel, char_exponent, drift

log = logging.getLogger(__name__)

BLOCK = 20_000
Z95 = 1.959963984540054
# log-price recorded for paths absorbed at S = 0
X_DEAD = -700.0
# a step resolves the dynamics while 2 a(x) dt and the jump intensity times dt stay below this
RESOLVE = 0.5


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    steps_per_year: int = 250
    seed: int = 2012
    basis_degree: int = 4
    threads: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if self.steps_per_year < 1:
            raise ValueError("steps_per_year must be positive")
        if self.basis_degree < 0:
            raise ValueError("basis_degree must be nonnegative")

    @property
    def supports_ci(self) -> bool:
        return self.n_paths >= 10_000 and self.steps_per_year >= 50


@dataclass
class PathEnsemble:
    """Log-prices and survival weights at the observation times."""

    times: np.ndarray
    x: np.ndarray        # (len(times), n_paths)
    weight: np.ndarray   # (len(times), n_paths)
    n_jumps: np.ndarray  # total jump count per path (Gaussian jumps only)
    diagnostics: dict

    @property
    def n_paths(self) -> int:
        return self.x.shape[1]

    def spot(self) -> np.ndarray:
        return np.exp(self.x)


def _rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _step_grid(times, steps_per_year: int, even: bool = False) -> list:
    """Step sizes so that every observation time is hit exactly; ``None`` marks a record."""
    steps = []
    prev = 0.0
    for t in times:
        span = t - prev
        if span < 0:
            raise ValueError("observation times must be nondecreasing")
        if span > 0:
            n = max(1, int(round(span * steps_per_year)))
            if even:
                n += n % 2
            steps.extend([span / n] * n)
        steps.append(None)   # marker: record here
        prev = t
    return steps


def _poisson_inverse(u: np.ndarray, lam: np.ndarray, kmax: int = 64) -> np.ndarray:
    """Poisson(lam) counts from uniforms by CDF inversion (common random numbers)."""
    p = np.exp(-lam)
    cdf = p.copy()
    n = np.zeros(u.shape, dtype=np.int64)
    active = u > cdf
    k = 0
    while active.any() and k < kmax:
        k += 1
        p = p * lam / k
        cdf = cdf + p
        n += active
        active &= u > cdf
    return n


class _Stepper:
    """Euler steps of the log-price; noise is drawn separately so that other
    processes (the frozen control, a coarse path) can be driven by it."""

    def __init__(self, model: LocalLevyModel, frozen_at: float | None = None):
        self.model = model
        self.j = model.jumps
        if frozen_at is not None:
            xb = np.array(frozen_at)
            self.frozen = (
                float(self._mu(xb)), float(np.sqrt(2 * model.vol(xb))),
                float(model.jump_scale(xb)) if self.j is not None else 0.0,
            )

    def _mu(self, x):
        mu = drift(self.model, x)
        if self.j is not None and self.j.compensated:
            mu = mu - self.model.jump_scale(x) * self.j.mean
        return mu

    def unresolved(self, x, dt) -> np.ndarray:
        """Paths below x0 whose next step the Euler scheme cannot resolve.

        In the models used here this only happens as S -> 0 with exploding
        volatility or jump intensity, where the exact process is absorbed
        almost immediately.
        """
        bad = 2 * self.model.vol(x) * dt > RESOLVE
        if self.j is not None and self.j.kind == "gaussian":
            bad |= self.j.lam * self.model.jump_scale(x) * dt > RESOLVE
        return bad & (x < self.model.x0)

    def intensity_check(self, x, dt) -> float:
        if self.j is None or self.j.kind != "gaussian" or x.size == 0:
            return 0.0
        return float(np.max(self.j.lam * self.model.jump_scale(x)) * dt)

    def draw(self, rng, x, dt):
        """Brownian normals, jump increment, jump counts and the raw jump draws for one step."""
        j = self.j
        n = x.shape[0]
        z = rng.standard_normal(n)
        if j is None:
            return z, 0.0, None, None
        scale = self.model.jump_scale(x)
        if j.kind == "gaussian":
            u = rng.random(n)
            zj = rng.standard_normal(n)
            counts = _poisson_inverse(u, j.lam * scale * dt)
            return z, j.m * counts + j.delta * np.sqrt(counts) * zj, counts, (u, zj, scale)
        zj = rng.standard_normal(n)
        shape = np.broadcast_to(np.maximum(scale, 1e-300) * dt / j.kappa, (n,))
        g = rng.gamma(shape, j.kappa)
        return z, j.theta * g + j.rho * np.sqrt(g) * zj, None, (g, zj, scale)

    def advance(self, x, w, dt, z, jump):
        """Euler step with standard normals ``z`` and a given jump increment."""
        model = self.model
        w = w * np.exp(-model.default(x) * dt)
        return x + self._mu(x) * dt + np.sqrt(2 * model.vol(x) * dt) * z + jump, w

    def advance_frozen(self, xt, dt, z, raw):
        """Exact step of the Lévy process with coefficients frozen at the control point."""
        mu0, sig0, sc0 = self.frozen
        out = xt + mu0 * dt + sig0 * np.sqrt(dt) * z
        j = self.j
        if j is None:
            return out
        if j.kind == "gaussian":
            u, zj, _ = raw
            ct = _poisson_inverse(u, np.full(u.shape, j.lam * sc0 * dt))
            return out + j.m * ct + j.delta * np.sqrt(ct) * zj
        g, zj, scale = raw
        if not np.allclose(scale, sc0):
            raise ValueError("frozen VG control needs a state-independent jump scale")
        return out + j.theta * g + j.rho * np.sqrt(g) * zj


@dataclass
class _Block:
    x: np.ndarray
    w: np.ndarray
    x_frozen: np.ndarray | None
    x_coarse: np.ndarray | None
    w_coarse: np.ndarray | None
    jumps: np.ndarray
    max_rate: float
    absorbed: int


def _simulate_block(model, times, cfg: SimConfig, block: int, n: int, frozen_at=None,
                    coarse: bool = False) -> _Block:
    """Simulate one block of paths.

    ``frozen_at`` adds the frozen-coefficient control process; ``coarse`` adds
    an Euler path on the doubled step driven by the summed fine increments
    (jump increments are reused as drawn on the fine path).
    """
    rng = _rng(cfg.seed, block)
    stepper = _Stepper(model, frozen_at)
    x = np.full(n, model.x0)
    w = np.ones(n)
    xt = np.full(n, model.x0) if frozen_at is not None else None
    xc = np.full(n, model.x0) if coarse else None
    wc = np.ones(n) if coarse else None
    jumps = np.zeros(n, dtype=np.int64)
    # absorbed paths keep their last live state for the default intensity
    dead = np.zeros(n, dtype=bool)
    dead_c = np.zeros(n, dtype=bool)
    out = {"x": [], "w": [], "xt": [], "xc": [], "wc": []}
    max_rate = 0.0
    acc_dt, acc_bm, acc_jump = 0.0, 0.0, 0.0
    steps = _step_grid(times, cfg.steps_per_year, even=coarse)
    closes = _pair_ends(steps)
    for k, dt in enumerate(steps):
        if dt is None:
            out["x"].append(np.where(dead, X_DEAD, x))
            out["w"].append(w.copy())
            if xt is not None:
                out["xt"].append(xt.copy())
            if coarse:
                out["xc"].append(np.where(dead_c, X_DEAD, xc))
                out["wc"].append(wc.copy())
            continue
        max_rate = max(max_rate, stepper.intensity_check(x[~dead], dt))
        dead |= stepper.unresolved(x, dt)
        z, jump, counts, raw = stepper.draw(rng, x, dt)
        x_new, w = stepper.advance(x, w, dt, z, jump)
        x = np.where(dead, x, x_new)
        if counts is not None:
            jumps += np.where(dead, 0, counts)
        if xt is not None:
            xt = stepper.advance_frozen(xt, dt, z, raw)
        if coarse:
            acc_dt += dt
            acc_bm = acc_bm + np.sqrt(dt) * z
            acc_jump = acc_jump + jump
            if closes[k]:
                dead_c |= stepper.unresolved(xc, acc_dt)
                xc_new, wc = stepper.advance(xc, wc, acc_dt, acc_bm / np.sqrt(acc_dt), acc_jump)
                xc = np.where(dead_c, xc, xc_new)
                acc_dt, acc_bm, acc_jump = 0.0, 0.0, 0.0

    def stack(key):
        return np.array(out[key]) if out[key] else None

    return _Block(stack("x"), stack("w"), stack("xt"), stack("xc"), stack("wc"), jumps, max_rate,
                  int(dead.sum()))


def _pair_ends(steps) -> list:
    """Flags the second step of each pair of fine steps within a span."""
    out = []
    run = 0
    for dt in steps:
        if dt is None:
            run = 0
            out.append(False)
        else:
            run += 1
            out.append(run % 2 == 0)
    return out


def _blocks(n_paths: int):
    out = []
    start = 0
    b = 0
    while start < n_paths:
        n = min(BLOCK, n_paths - start)
        out.append((b, n))
        start += n
        b += 1
    return out


def _run_blocks(model, times, cfg: SimConfig, frozen_at=None):
    work = _blocks(cfg.n_paths)
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(lambda bn: _simulate_block(model, times, cfg, bn[0], bn[1], frozen_at), work))
    else:
        parts = [_simulate_block(model, times, cfg, b, n, frozen_at) for b, n in work]
    return parts


def simulate_paths(model: LocalLevyModel, times, cfg: SimConfig) -> PathEnsemble:
    """Simulate log-prices and survival weights, recorded at ``times`` (sorted, > 0)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if cfg.steps_per_year < 50:
        warnings.warn("fewer than 50 steps per year: discretisation bias may dominate", stacklevel=2)
    parts = _run_blocks(model, times, cfg)
    x = np.concatenate([p.x for p in parts], axis=1)
    w = np.concatenate([p.w for p in parts], axis=1)
    jumps = np.concatenate([p.jumps for p in parts])
    max_rate = max(p.max_rate for p in parts)
    absorbed = sum(p.absorbed for p in parts)
    if max_rate > 0.5:
        warnings.warn(f"jump intensity times step reached {max_rate:.2f} > 0.5; {absorbed} paths "
                      "absorbed at S = 0", stacklevel=2)
    return PathEnsemble(times, x, w, jumps, {"max_intensity_step": max_rate, "absorbed": absorbed})


def martingale_check(model: LocalLevyModel, T: float, cfg: SimConfig) -> tuple[float, float]:
    """Mean and standard error of exp(-rT) weight exp(X_T); should equal S_0."""
    ens = simulate_paths(model, [T], cfg)
    y = np.exp(-model.rate * T) * ens.weight[-1] * np.exp(ens.x[-1])
    return float(y.mean()), float(y.std(ddof=1) / np.sqrt(len(y)))


# --------------------------------------------------------------------------- #
# Longstaff-Schwartz
# --------------------------------------------------------------------------- #

def _regress(s: np.ndarray, y: np.ndarray, degree: int, scale: float) -> np.ndarray:
    """Least-squares fit of y on 1, s, ..., s^degree; returns fitted values."""
    while True:
        basis = np.polynomial.polynomial.polyvander(s / scale, degree)
        coef, _, rank, _ = np.linalg.lstsq(basis, y, rcond=None)
        if rank == degree + 1 or degree == 0:
            return basis @ coef
        warnings.warn(f"regression basis rank deficient at degree {degree}; reducing", stacklevel=3)
        degree -= 1


def ls_bermudan_estimate(ens: PathEnsemble, problem: BermudanProblem, rate: float, degree: int = 4) -> np.ndarray:
    """Pathwise discounted, survival-weighted cash flows of the Longstaff-Schwartz policy."""
    K = problem.strike
    dates = np.asarray(problem.dates, dtype=float)
    idx = [int(np.argmin(np.abs(ens.times - t))) for t in dates]
    if not np.allclose(ens.times[idx], dates, atol=1e-12):
        raise ValueError("exercise dates are not on the simulation grid")
    s = np.exp(ens.x[idx[-1]])
    cash = np.exp(-rate * dates[-1]) * ens.weight[idx[-1]] * np.maximum(K - s, 0.0)
    for m in range(len(dates) - 2, -1, -1):
        i = idx[m]
        s = np.exp(ens.x[i])
        w = ens.weight[i]
        payoff = np.maximum(K - s, 0.0)
        itm = payoff > 0
        if itm.sum() <= degree + 1:
            continue
        # continuation per unit survival, in time-t_m money
        y = cash[itm] * np.exp(rate * dates[m]) / w[itm]
        cont = _regress(s[itm], y, degree, K)
        ex = np.zeros_like(itm)
        ex[itm] = payoff[itm] > cont
        cash[ex] = np.exp(-rate * dates[m]) * w[ex] * payoff[ex]
    return cash


def ls_bermudan_ci(model: LocalLevyModel, problem: BermudanProblem, cfg: SimConfig,
                   ensemble: PathEnsemble | None = None) -> tuple[float, float]:
    """95% confidence interval of the Longstaff-Schwartz Bermudan put value."""
    if not cfg.supports_ci:
        warnings.warn("configuration below 1e4 paths or 50 steps/year; CI is indicative only", stacklevel=2)
    ens = ensemble if ensemble is not None else simulate_paths(model, problem.dates, cfg)
    cash = ls_bermudan_estimate(ens, problem, model.rate, cfg.basis_degree)
    mean = cash.mean()
    half = Z95 * cash.std(ddof=1) / np.sqrt(len(cash))
    return float(mean - half), float(mean + half)


def european_ci(model: LocalLevyModel, K: float, T: float, cfg: SimConfig,
                ensemble: PathEnsemble | None = None) -> tuple[float, float]:
    ens = ensemble if ensemble is not None else simulate_paths(model, [T], cfg)
    i = int(np.argmin(np.abs(ens.times - T)))
    cash = np.exp(-model.rate * T) * ens.weight[i] * np.maximum(K - np.exp(ens.x[i]), 0.0)
    half = Z95 * cash.std(ddof=1) / np.sqrt(len(cash))
    return float(cash.mean() - half), float(cash.mean() + half)


# --------------------------------------------------------------------------- #
# characteristic function and convergence order
# --------------------------------------------------------------------------- #

def _accumulate(acc: dict, key, y: np.ndarray):
    s, s2r, s2i, n = acc.get(key, (0j, 0.0, 0.0, 0))
    acc[key] = (s + y.sum(axis=-1), s2r + (y.real**2).sum(axis=-1), s2i + (y.imag**2).sum(axis=-1),
                n + y.shape[-1])


def mc_char_fn_grid(model: LocalLevyModel, t_grid, xi_grid, cfg: SimConfig, control: bool = True,
                    extrapolate: bool = False):
    """MC estimates of E[weight exp(i xi X_t)] on a (t, xi) grid.

    With ``control=True`` the frozen-coefficient Lévy process started at x0 and
    driven by the same noise is subtracted and its exact transform added back.
    With ``extrapolate=True`` each path also runs on the doubled step and the
    estimator 2 f(fine) - f(coarse) cancels the first-order Euler bias.
    Returns ``(estimate, stderr)`` arrays of shape (len(t_grid), len(xi_grid));
    the standard error is the modulus of the componentwise errors.
    """
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    xi = np.atleast_1d(np.asarray(xi_grid, dtype=float))
    x0 = model.x0
    acc = {}
    frozen_at = x0 if control else None
    w0 = np.exp(-float(model.default(np.array(x0))) * t_grid)
    for b, n in _blocks(cfg.n_paths):
        blk = _simulate_block(model, t_grid, cfg, b, n, frozen_at, coarse=extrapolate)
        for i in range(len(t_grid)):
            y = blk.w[i][None, :] * np.exp(1j * xi[:, None] * blk.x[i][None, :])
            if extrapolate:
                yc = blk.w_coarse[i][None, :] * np.exp(1j * xi[:, None] * blk.x_coarse[i][None, :])
                y = 2 * y - yc
            if control:
                y = y - w0[i] * np.exp(1j * xi[:, None] * blk.x_frozen[i][None, :])
            _accumulate(acc, i, y)
    est = np.empty((len(t_grid), len(xi)), dtype=complex)
    se = np.empty((len(t_grid), len(xi)))
    for i, t in enumerate(t_grid):
        s, s2r, s2i, n = acc[i]
        mean = s / n
        var_r = (s2r - n * mean.real**2) / (n - 1)
        var_i = (s2i - n * mean.imag**2) / (n - 1)
        se[i] = np.sqrt(np.maximum(var_r, 0) / n + np.maximum(var_i, 0) / n)
        if control:
            mean = mean + np.exp(1j * xi * x0 + t * char_exponent(model, xi, xbar=x0))
        est[i] = mean
    return est, se


def mc_char_fn(model: LocalLevyModel, t: float, xi, cfg: SimConfig, control: bool = False):
    """Estimate and standard error of E[weight exp(i xi X_t)]."""
    scalar = np.ndim(xi) == 0
    est, se = mc_char_fn_grid(model, [t], xi, cfg, control)
    if scalar:
        return complex(est[0, 0]), float(se[0, 0])
    return est[0], se[0]


@dataclass
class ConvergenceResult:
    order: int
    t: np.ndarray
    error: np.ndarray
    noise: np.ndarray
    slope: float
    stderr: float
    inconclusive: bool


def fit_slope(t, err) -> tuple[float, float]:
    """Least-squares slope of log err on log t and its standard error."""
    lt, le = np.log(t), np.log(err)
    A = np.vstack([lt, np.ones_like(lt)]).T
    coef, res, _, _ = np.linalg.lstsq(A, le, rcond=None)
    n = len(t)
    if n <= 2:
        return float(coef[0]), float("nan")
    resid = le - A @ coef
    s2 = resid @ resid / (n - 2)
    se = np.sqrt(s2 / np.sum((lt - lt.mean()) ** 2))
    return float(coef[0]), float(se)


def convergence_order(model: LocalLevyModel, n: int, xi_grid, t_grid, cfg: SimConfig,
                      mc=None, expansion=None) -> ConvergenceResult:
    """Slope of log sup_xi |MC - order-n expansion| against log t.

    ``mc`` may carry a precomputed ``(estimate, stderr)`` from :func:`mc_char_fn_grid`
    so several orders share one simulation.
    """
    from .expansion import CharFnExpansion

    if n not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    t_grid = np.asarray(t_grid, dtype=float)
    xi = np.asarray(xi_grid, dtype=float)
    est, se = mc if mc is not None else mc_char_fn_grid(model, t_grid, xi, cfg)
    exp = expansion or CharFnExpansion(model, max(n, 2), xbar=model.x0)
    err = np.empty(len(t_grid))
    noise = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        approx = exp.char_fn(0.0, model.x0, t, xi, n)
        d = np.abs(est[i] - approx)
        j = int(np.argmax(d))
        err[i] = d[j]
        noise[i] = se[i, j]
    inconclusive = bool(np.any(err < 3 * noise))
    slope, sd = fit_slope(t_grid, err)
    return ConvergenceResult(n, t_grid, err, noise, slope, sd, inconclusive)


def dump_path_stats(ens: PathEnsemble, path: str) -> None:
    """CSV of per-time path statistics, for debugging."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "mean_x", "std_x", "mean_weight", "min_weight", "mean_spot"])
        for t, x, w in zip(ens.times, ens.x, ens.weight):
            wr.writerow([t, x.mean(), x.std(), w.mean(), w.min(), np.exp(x).mean()])
