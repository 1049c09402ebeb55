"""
Radix-2 FFT, circular convolution, and fast Hankel/Toeplitz matrix-vector products.

The transform is an iterative decimation-in-time radix-2 kernel vectorised
over each butterfly stage, with twiddle factors precomputed per size.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def next_pow2(n: int) -> int:
    return 1 << max(0, (int(n) - 1).bit_length())


@lru_cache(maxsize=None)
def _bitrev(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _twiddles(n: int) -> np.ndarray:
    return np.exp(-2j * np.pi * np.arange(n // 2) / n)


def _fft(x: np.ndarray, inverse: bool) -> np.ndarray:
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    a = np.asarray(x, dtype=complex)[..., _bitrev(n)]
    w_all = _twiddles(n)
    if inverse:
        w_all = w_all.conj()
    lead = a.shape[:-1]
    size = 2
    while size <= n:
        half = size // 2
        w = w_all[:: n // size][:half]
        a = a.reshape(lead + (n // size, size))
        even = a[..., :half]
        odd = a[..., half:] * w
        a = np.concatenate((even + odd, even - odd), axis=-1)
        size *= 2
    a = a.reshape(lead + (n,))
    return a / n if inverse else a


def fft(x) -> np.ndarray:
    """Forward DFT, ``X_k = sum_n x_n exp(-2 pi i k n / N)``, for power-of-two N."""
    return _fft(x, inverse=False)


def ifft(x) -> np.ndarray:
    return _fft(x, inverse=True)


def circ_convolve(x, y) -> np.ndarray:
    """Circular convolution ``z_j = sum_k x_k y_{(j-k) mod n}``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return ifft(fft(x) * fft(y))


class ConvolutionPlan:
    """Zero-padded transform size and phase vector for an N-term Hankel/Toeplitz product.

    The transform length P is the smallest power of two >= 2N.  ``sgn`` is the
    DFT of the shift that moves ``u`` from the front to the back of the padded
    vector; for P = 2N it is (-1)^k.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be positive")
        self.n = n
        self.size = next_pow2(2 * n)
        k = np.arange(self.size)
        self.sgn = np.exp(-2j * np.pi * ((k * (self.size - n)) % self.size) / self.size)
        self.transforms = 0

    def _embed_toeplitz(self, first_col, first_row) -> np.ndarray:
        n, P = self.n, self.size
        m = np.zeros(P, dtype=complex)
        m[:n] = first_col
        m[P - n + 1:] = first_row[1:][::-1]
        return m

    def _embed_hankel(self, anti_diagonals) -> np.ndarray:
        # m_H[l] = M_{2N-1-l} for l = 1..2N-1
        n = self.n
        m = np.zeros(self.size, dtype=complex)
        m[1:2 * n] = np.asarray(anti_diagonals)[::-1]
        return m

    def _pad(self, u) -> np.ndarray:
        u = np.asarray(u)
        out = np.zeros(u.shape[:-1] + (self.size,), dtype=complex)
        out[..., :self.n] = u
        return out

    def toeplitz_matvec(self, first_col, first_row, u) -> np.ndarray:
        ut = fft(self._pad(u))
        mt = fft(self._embed_toeplitz(first_col, first_row))
        self.transforms += 3
        return ifft(mt * ut)[:self.n]

    def hankel_matvec(self, anti_diagonals, u) -> np.ndarray:
        ut = fft(self._pad(u))
        mh = fft(self._embed_hankel(anti_diagonals))
        self.transforms += 3
        return ifft(mh * self.sgn * ut)[:self.n][::-1]

    def hankel_toeplitz_matvec(self, anti_diagonals, first_col, first_row, u) -> np.ndarray:
        """(H + T) u with five transforms: D(m_T), D(m_H), D(u_T) and two inverses."""
        ut = fft(self._pad(u))
        mt = fft(self._embed_toeplitz(first_col, first_row))
        mh = fft(self._embed_hankel(anti_diagonals))
        tu = ifft(mt * ut)[:self.n]
        hu = ifft(mh * self.sgn * ut)[:self.n][::-1]
        self.transforms += 5
        return tu + hu

    def matrix_spectra(self, anti_diagonals, first_col, first_row) -> tuple[np.ndarray, np.ndarray]:
        """Transforms of the embedded Toeplitz and (phase-shifted) Hankel sequences.

        They depend only on the matrix, so callers can cache them across vectors.
        """
        self.transforms += 2
        return fft(self._embed_toeplitz(first_col, first_row)), fft(self._embed_hankel(anti_diagonals)) * self.sgn

    def summed_matvec(self, spectra, u_stack) -> np.ndarray:
        """sum_i (H_i + T_i) u_i from cached ``(toeplitz, hankel)`` spectra.

        One forward transform per vector and two inverse transforms in total.
        """
        u_stack = np.atleast_2d(u_stack)
        ut = fft(self._pad(u_stack))
        st = np.array([s[0] for s in spectra])
        sh = np.array([s[1] for s in spectra])
        tu = ifft(np.sum(st * ut, axis=0))[:self.n]
        hu = ifft(np.sum(sh * ut, axis=0))[:self.n][::-1]
        self.transforms += len(u_stack) + 2
        return tu + hu


def _check_lengths(n: int, **arrays) -> None:
    for name, (arr, expected) in arrays.items():
        if len(arr) != expected:
            raise ValueError(f"{name} has length {len(arr)}, expected {expected} for N={n}")


def toeplitz_matvec(first_col, first_row, u) -> np.ndarray:
    """Product of the Toeplitz matrix T[k, j] = t_{j-k} with ``u``.

    ``first_col[k] = t_{-k}`` and ``first_row[j] = t_j``.
    """
    u = np.asarray(u, dtype=complex)
    n = len(u)
    _check_lengths(n, first_col=(first_col, n), first_row=(first_row, n))
    if not np.isclose(first_col[0], first_row[0], rtol=0, atol=1e-14 * (1 + abs(first_row[0]))):
        raise ValueError("first_col[0] and first_row[0] disagree")
    return ConvolutionPlan(n).toeplitz_matvec(first_col, first_row, u)


def hankel_matvec(anti_diagonals, u) -> np.ndarray:
    """Product of the Hankel matrix H[k, j] = h_{j+k} with ``u``; ``anti_diagonals`` holds h_0..h_{2N-2}."""
    u = np.asarray(u, dtype=complex)
    n = len(u)
    _check_lengths(n, anti_diagonals=(anti_diagonals, 2 * n - 1))
    return ConvolutionPlan(n).hankel_matvec(anti_diagonals, u)


def dense_toeplitz(first_col, first_row) -> np.ndarray:
    n = len(first_col)
    k, j = np.indices((n, n))
    d = j - k
    return np.where(d >= 0, np.asarray(first_row, dtype=complex)[np.abs(d)], np.asarray(first_col, dtype=complex)[np.abs(d)])


def dense_hankel(anti_diagonals, n: int) -> np.ndarray:
    k, j = np.indices((n, n))
    return np.asarray(anti_diagonals, dtype=complex)[j + k]
