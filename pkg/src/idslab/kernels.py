"""Hot numeric kernels, each with a numba and a numpy implementation.

Two families live here:

* per-edge hashing: FNV-1a fold of the endpoint coordinates followed by the
  SplitMix64 finaliser, mapped to a uniform in [0, 1);
* inertia counting: LDL^T of a banded symmetric matrix without pivoting,
  counting negative pivots (Sylvester's law of inertia).

The public names (``fnv_fold``, ``mix_uniform``, ``band_negcount``) dispatch to
the numba variants unless ``IDSLAB_NO_JIT`` is set.  Both variants are always
importable as ``*_nb`` / ``*_np`` so benchmarks and tests can compare them.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_JIT, njit

FNV_OFFSET = np.uint64(0xCBF29CE484222325)
FNV_PRIME = np.uint64(0x100000001B3)
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
TWO_M53 = 2.0 ** -53

_MASK64 = (1 << 64) - 1


# --------------------------------------------------------------------------
# scalar reference (plain Python ints); used as an oracle and for one-offs


def fnv_fold_scalar(a, b) -> int:
    h = 0xCBF29CE484222325
    for c in list(a) + list(b):
        v = int(c) & _MASK64
        for i in range(8):
            h ^= (v >> (8 * i)) & 0xFF
            h = (h * 0x100000001B3) & _MASK64
    return h


def mix64_scalar(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def uniform_scalar(seed: int, a, b) -> float:
    z = mix64_scalar((int(seed) & _MASK64) ^ fnv_fold_scalar(a, b))
    return (z >> 11) * TWO_M53


# --------------------------------------------------------------------------
# numpy implementations


def fnv_fold_np(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """FNV-1a over the little-endian int64 bytes of each row of ``a`` then ``b``."""
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    h = np.full(a.shape[0], FNV_OFFSET, dtype=np.uint64)
    ff = np.uint64(0xFF)
    for coords in (a, b):
        u = coords.view(np.uint64)
        for c in range(coords.shape[1]):
            col = u[:, c]
            for i in range(8):
                h ^= (col >> np.uint64(8 * i)) & ff
                h *= FNV_PRIME
    return h


def mix_uniform_np(seed: int, h: np.ndarray) -> np.ndarray:
    z = np.asarray(h, dtype=np.uint64) ^ np.uint64(int(seed) & _MASK64)
    z = z + GOLDEN
    z = (z ^ (z >> np.uint64(30))) * MIX1
    z = (z ^ (z >> np.uint64(27))) * MIX2
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * TWO_M53


def band_negcount_np(band: np.ndarray, shift: float, tiny: float) -> tuple[int, bool]:
    """Negative pivots of LDL^T(A - shift*I); ``band[j, t] = A[j+t, j]``.

    Returns ``(count, ok)``; ``ok`` is False when a pivot fell below ``tiny``.
    Keeps the active (k+1) x (k+1) trailing block dense and slides it down
    the diagonal, one rank-1 update per step.
    """
    n, kp1 = band.shape
    k = kp1 - 1
    diag = band[:, 0] - shift
    if k == 0:
        return int(np.sum(diag < 0)), bool(np.all(np.abs(diag) > tiny))
    m0 = min(kp1, n)
    W = np.zeros((m0, m0))
    for t in range(m0):
        W[t:, t] = band[t, : m0 - t]
    W = W + np.tril(W, -1).T
    W[np.diag_indices(m0)] = diag[:m0]
    neg = 0
    for j in range(n):
        d = W[0, 0]
        if abs(d) <= tiny:
            return neg, False
        if d < 0:
            neg += 1
        col = W[1:, 0]
        W[1:, 1:] -= np.outer(col, col / d)
        nxt = j + W.shape[0]
        if nxt < n:
            # entry row nxt enters untouched: only A[nxt, j+1..nxt] can be nonzero
            new = np.zeros((W.shape[0], W.shape[0]))
            new[:-1, :-1] = W[1:, 1:]
            cols = np.arange(j + 1, nxt)
            row = band[cols, nxt - cols]
            new[-1, :-1] = row
            new[:-1, -1] = row
            new[-1, -1] = diag[nxt]
            W = new
        else:
            W = W[1:, 1:]
    return neg, True


# --------------------------------------------------------------------------
# numba implementations


@njit
def fnv_fold_nb(a, b):
    m, dim = a.shape
    out = np.empty(m, dtype=np.uint64)
    prime = np.uint64(0x100000001B3)
    ff = np.uint64(0xFF)
    for r in range(m):
        h = np.uint64(0xCBF29CE484222325)
        for c in range(dim):
            v = np.uint64(a[r, c])
            for i in range(8):
                h = (h ^ ((v >> np.uint64(8 * i)) & ff)) * prime
        for c in range(dim):
            v = np.uint64(b[r, c])
            for i in range(8):
                h = (h ^ ((v >> np.uint64(8 * i)) & ff)) * prime
        out[r] = h
    return out


@njit
def mix_uniform_nb(seed, h):
    m = h.shape[0]
    out = np.empty(m, dtype=np.float64)
    s = np.uint64(seed)
    for r in range(m):
        z = (h[r] ^ s) + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
        out[r] = np.float64(z >> np.uint64(11)) * 1.1102230246251565e-16
    return out


@njit
def band_negcount_nb(band, shift, tiny):
    n, kp1 = band.shape
    k = kp1 - 1
    w = band.copy()
    for j in range(n):
        w[j, 0] -= shift
    neg = 0
    for j in range(n):
        d = w[j, 0]
        if abs(d) <= tiny:
            return neg, False
        if d < 0:
            neg += 1
        m = min(k, n - 1 - j)
        for s in range(1, m + 1):
            ls = w[j, s] / d
            if ls == 0.0:
                continue
            for t in range(1, s + 1):
                w[j + t, s - t] -= ls * w[j, t]
    return neg, True


# --------------------------------------------------------------------------
# dispatch


def fnv_fold(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    if a.shape[0] == 0:
        return np.zeros(0, dtype=np.uint64)
    if USE_JIT:
        return fnv_fold_nb(a, b)
    return fnv_fold_np(a, b)


def mix_uniform(seed: int, h: np.ndarray) -> np.ndarray:
    h = np.ascontiguousarray(h, dtype=np.uint64)
    if USE_JIT:
        return mix_uniform_nb(np.uint64(int(seed) & _MASK64), h)
    return mix_uniform_np(seed, h)


def band_negcount(band: np.ndarray, shift: float, tiny: float) -> tuple[int, bool]:
    band = np.ascontiguousarray(band, dtype=np.float64)
    if USE_JIT:
        neg, ok = band_negcount_nb(band, float(shift), float(tiny))
        return int(neg), bool(ok)
    return band_negcount_np(band, shift, tiny)


def derive_seed(base: int, index: int) -> int:
    """Seed of the ``index``-th independent trial derived from ``base``."""
    return mix64_scalar((int(base) + (int(index) + 1) * 0x9E3779B97F4A7C15) & _MASK64)
