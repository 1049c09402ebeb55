import numpy as np
import pytest

from levycos.fft import (
    ConvolutionPlan,
    circ_convolve,
    dense_hankel,
    dense_toeplitz,
    fft,
    hankel_matvec,
    ifft,
    next_pow2,
    toeplitz_matvec,
)


@pytest.mark.parametrize("n", [1, 2, 8, 64, 512])
def test_fft_matches_numpy(rng, n):
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    assert np.allclose(fft(x), np.fft.fft(x), rtol=0, atol=1e-11 * n)
    assert np.allclose(ifft(fft(x)), x, rtol=0, atol=1e-13 * n)


def test_fft_batched_rows(rng):
    x = rng.normal(size=(3, 16))
    assert np.allclose(fft(x), np.fft.fft(x, axis=-1), atol=1e-12)


def test_fft_rejects_other_lengths():
    with pytest.raises(ValueError):
        fft(np.ones(12))


def test_next_pow2():
    assert [next_pow2(n) for n in (1, 2, 3, 17, 64)] == [1, 2, 4, 32, 64]


def test_circular_convolution(rng):
    x, y = rng.normal(size=8), rng.normal(size=8)
    direct = np.array([sum(x[k] * y[(j - k) % 8] for k in range(8)) for j in range(8)])
    assert np.allclose(circ_convolve(x, y), direct, atol=1e-13)
    with pytest.raises(ValueError):
        circ_convolve(x, y[:4])


@pytest.mark.parametrize("n", [1, 3, 16, 31, 32])
def test_toeplitz_and_hankel_products(rng, n):
    col = rng.normal(size=n) + 1j * rng.normal(size=n)
    row = rng.normal(size=n) + 1j * rng.normal(size=n)
    row[0] = col[0]
    anti = rng.normal(size=2 * n - 1) + 1j * rng.normal(size=2 * n - 1)
    u = rng.normal(size=n)
    assert np.allclose(toeplitz_matvec(col, row, u), dense_toeplitz(col, row) @ u, atol=1e-12)
    assert np.allclose(hankel_matvec(anti, u), dense_hankel(anti, n) @ u, atol=1e-12)
    plan = ConvolutionPlan(n)
    both = plan.hankel_toeplitz_matvec(anti, col, row, u)
    assert np.allclose(both, (dense_hankel(anti, n) + dense_toeplitz(col, row)) @ u, atol=1e-12)
    assert plan.transforms == 5


def test_summed_products_from_cached_spectra(rng):
    n = 20
    plan = ConvolutionPlan(n)
    mats, spectra, us = [], [], []
    for _ in range(3):
        col = rng.normal(size=n)
        row = rng.normal(size=n)
        row[0] = col[0]
        anti = rng.normal(size=2 * n - 1)
        mats.append(dense_hankel(anti, n) + dense_toeplitz(col, row))
        spectra.append(plan.matrix_spectra(anti, col, row))
        us.append(rng.normal(size=n))
    plan.transforms = 0
    got = plan.summed_matvec(spectra, np.array(us))
    assert np.allclose(got, sum(M @ u for M, u in zip(mats, us)), atol=1e-12)
    assert plan.transforms == 3 + 2


def test_toeplitz_checks_corner():
    with pytest.raises(ValueError):
        toeplitz_matvec([1.0, 2.0], [3.0, 2.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        hankel_matvec([1.0, 2.0], [1.0, 1.0])


def test_plan_padding_and_phase():
    plan = ConvolutionPlan(200)
    assert plan.size == 512
    plan = ConvolutionPlan(4)
    assert plan.size == 8
    assert np.allclose(plan.sgn, (-1.0) ** np.arange(8))
