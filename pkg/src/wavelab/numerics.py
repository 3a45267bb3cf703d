"""Sample containers, QAM mapping, real/complex packing and seeded randomness.

Complex vectors are plain ``numpy`` complex arrays and packed real vectors are
float arrays laid out real-parts-first: ``[Re(v), Im(v)]``. Every function
accepts a single vector or a 2-D batch with one vector per row.
"""
from __future__ import annotations

import numpy as np

from .errors import RejectedInputError, UnsupportedConfigurationError

SUPPORTED_ORDERS = (4, 16, 64)
RNG_ALGORITHM = "PCG64"


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for ``seed``; extra ``keys`` derive independent child streams.

    Workers in a parallel sweep call ``make_rng(seed, worker_index)`` so the
    result does not depend on how work is partitioned.
    """
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def bits_per_symbol(order: int) -> int:
    if order not in SUPPORTED_ORDERS:
        raise UnsupportedConfigurationError(
            f"QAM order {order} not supported (choose from {SUPPORTED_ORDERS})"
        )
    return int(np.log2(order))


def _pam_levels(order: int) -> np.ndarray:
    """Per-dimension amplitudes, index 0 = most positive, unit-energy scaling."""
    side = int(round(np.sqrt(order)))
    raw = np.arange(side - 1, -side, -2, dtype=float)
    return raw / np.sqrt(2 * (order - 1) / 3)


def _gray(i):
    return i ^ (i >> 1)


def pam_levels(order: int) -> np.ndarray:
    bits_per_symbol(order)
    return _pam_levels(order)


def constellation(order: int) -> tuple[np.ndarray, np.ndarray]:
    """All points of the Gray-mapped constellation and their bit labels.

    Returns ``(points, labels)`` with ``labels[i]`` the bit vector of
    ``points[i]``. Used by tests for exhaustive checks.
    """
    k = bits_per_symbol(order)
    labels = ((np.arange(order)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.int8)
    return qam_modulate(labels.ravel(), order), labels


def qam_modulate(bits, order: int) -> np.ndarray:
    """Map bits to unit-energy Gray QAM symbols.

    The first half of each symbol's bits selects the in-phase level and the
    second half the quadrature level; within a dimension, level ``i``
    (counting from the most positive) carries the Gray code of ``i``. For
    QPSK this gives 00 -> (1+1j)/sqrt(2) and 11 -> (-1-1j)/sqrt(2).
    """
    k = bits_per_symbol(order)
    b = np.asarray(bits)
    if b.ndim != 1:
        b = b.ravel()
    if b.size % k:
        raise RejectedInputError(f"bit length {b.size} is not a multiple of {k}")
    if b.size and (b.min() < 0 or b.max() > 1):
        raise RejectedInputError("bits must be 0 or 1")
    half = k // 2
    groups = b.reshape(-1, k).astype(np.int64)
    weights = 1 << np.arange(half - 1, -1, -1)
    gi = groups[:, :half] @ weights
    gq = groups[:, half:] @ weights
    # inverse Gray: level index whose Gray code equals the label
    inv = _inverse_gray_table(1 << half)
    levels = _pam_levels(order)
    return levels[inv[gi]] + 1j * levels[inv[gq]]


def _inverse_gray_table(n: int) -> np.ndarray:
    table = np.empty(n, dtype=np.int64)
    table[_gray(np.arange(n))] = np.arange(n)
    return table


def _slice_index(x: np.ndarray, order: int) -> np.ndarray:
    levels = _pam_levels(order)
    step = levels[0] - levels[1]
    idx = np.rint((levels[0] - x) / step).astype(np.int64)
    return np.clip(idx, 0, levels.size - 1)


def qam_hard_demod(symbols, order: int) -> np.ndarray:
    """Nearest-point decisions mapped back to bits (inverse of ``qam_modulate``)."""
    k = bits_per_symbol(order)
    half = k // 2
    s = np.asarray(symbols, dtype=complex).ravel()
    gi = _gray(_slice_index(s.real, order))
    gq = _gray(_slice_index(s.imag, order))
    shifts = np.arange(half - 1, -1, -1)
    bi = (gi[:, None] >> shifts) & 1
    bq = (gq[:, None] >> shifts) & 1
    return np.concatenate([bi, bq], axis=1).astype(np.int8).ravel()


def hard_slice_real(x, order: int) -> np.ndarray:
    """Per-dimension nearest PAM level for packed real symbols."""
    levels = _pam_levels(order)
    return levels[_slice_index(np.asarray(x, dtype=float), order)]


def pack_complex_to_real(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.concatenate([v.real, v.imag], axis=-1)


def unpack_real_to_complex(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    if n % 2:
        raise RejectedInputError(f"packed vector must have even length, got {n}")
    k = n // 2
    return v[..., :k] + 1j * v[..., k:]


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.int8)


def check_finite(x, what="vector"):
    if not np.all(np.isfinite(x)):
        raise RejectedInputError(f"{what} contains NaN or Inf")
    return x
