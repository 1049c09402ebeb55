import numpy as np
import pytest
from scipy.special import gammaln
from scipy.stats import norm

from levycos import cev_like, cev_merton, cev_vg, constant_merton


@pytest.fixture
def merton_cev():
    return cev_merton()


@pytest.fixture
def vg_cev():
    return cev_vg()


@pytest.fixture
def state_jumps():
    return cev_like()


@pytest.fixture
def with_default():
    return cev_like(c1=0.1, eps3=1.0, eps4=0.0)


@pytest.fixture
def flat_merton():
    return constant_merton()


ALL_MODELS = {
    "cev-merton": cev_merton,
    "cev-vg": cev_vg,
    "cev-like": cev_like,
    "cev-like-default": lambda: cev_like(c1=0.1, eps3=1.0, eps4=0.0),
    "merton": constant_merton,
}


@pytest.fixture(params=sorted(ALL_MODELS))
def any_model(request):
    return ALL_MODELS[request.param]()


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def merton_put_series(S, K, T, r, sigma, lam, m, delta, terms=80):
    """Merton jump-diffusion put as a Poisson mixture of Black-Scholes puts."""
    kappa = np.exp(m + 0.5 * delta**2) - 1
    lam2 = lam * (1 + kappa)
    total = 0.0
    for n in range(terms):
        sn = np.sqrt(sigma**2 + n * delta**2 / T)
        rn = r - lam * kappa + n * np.log(1 + kappa) / T
        d1 = (np.log(S / K) + (rn + 0.5 * sn**2) * T) / (sn * np.sqrt(T))
        d2 = d1 - sn * np.sqrt(T)
        put = K * np.exp(-rn * T) * norm.cdf(-d2) - S * norm.cdf(-d1)
        w = np.exp(-lam2 * T + n * np.log(lam2 * T) - gammaln(n + 1))
        total += w * put
    return total
