"""Channel estimation and zero-forcing equalization.

One-tap (per-bin) processing serves every scheme whose second stage is an
orthogonal FFT. The multi-carrier NOFS chain has no such diagonalization on
the symbol side and instead estimates the time-domain taps from a circulant
pilot matrix, then inverts the circulant channel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EqualizationSingularityError,
    EstimationSingularityError,
    IllConditionedPilotError,
    RejectedInputError,
)
from .numerics import pack_complex_to_real, unpack_real_to_complex
from .transforms import apply

SINGULAR_TOL = 1e-12
RIDGE = 1e-10
RIDGE_COND = 1e8
SINGULAR_COND = 1e14


@dataclass(frozen=True, eq=False)
class FreqResponse:
    """Per-bin complex gains in natural FFT order."""
    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=complex, copy=True).ravel()
        d.flags.writeable = False
        object.__setattr__(self, "d", d)

    def __len__(self):
        return self.d.size

    @classmethod
    def flat(cls, n: int) -> "FreqResponse":
        return cls(np.ones(n, dtype=complex))

    def to_rows(self):
        """(bin, magnitude, phase) rows for CSV logging."""
        return [(i, float(abs(v)), float(np.angle(v))) for i, v in enumerate(self.d)]


@dataclass(frozen=True, eq=False)
class TimeChannelEstimate:
    h: np.ndarray

    def __post_init__(self):
        h = np.array(self.h, dtype=complex, copy=True).ravel()
        if not np.all(np.isfinite(h)):
            raise RejectedInputError("channel estimate is not finite")
        h.flags.writeable = False
        object.__setattr__(self, "h", h)


def estimate_one_tap(rx_pilot_freq, tx_pilot_freq, pilot_bins=None) -> FreqResponse:
    """Least-squares per-bin estimate ``rx / tx``.

    Two-dimensional inputs hold several pilot blocks (one per row) and are
    combined coherently. With ``pilot_bins`` only those bins are estimated and
    the others are filled by linear interpolation in frequency.
    """
    rx = np.atleast_2d(np.asarray(rx_pilot_freq, dtype=complex))
    tx = np.atleast_2d(np.asarray(tx_pilot_freq, dtype=complex))
    if rx.shape != tx.shape:
        raise RejectedInputError(f"pilot shapes differ: {rx.shape} vs {tx.shape}")
    n = rx.shape[1]
    bins = np.arange(n) if pilot_bins is None else np.asarray(pilot_bins, dtype=int)
    energy = np.sum(np.abs(tx[:, bins]) ** 2, axis=0)
    zero = energy < SINGULAR_TOL
    if pilot_bins is None and np.any(zero):
        raise EstimationSingularityError("pilot has zero-valued bins", bins=bins[zero].tolist())
    good = bins[~zero]
    if good.size == 0:
        raise EstimationSingularityError("no usable pilot bins", bins=bins.tolist())
    est = np.sum(rx[:, good] * np.conj(tx[:, good]), axis=0) / energy[~zero]
    if good.size == n:
        return FreqResponse(est)
    k = np.arange(n)
    return FreqResponse(np.interp(k, good, est.real) + 1j * np.interp(k, good, est.imag))


def equalize_one_tap(r, d: FreqResponse | np.ndarray, strict: bool = True):
    """Zero-forcing ``r / d`` per bin (rows of a 2-D ``r`` are blocks).

    Bins with ``|d| < 1e-12`` are output as 0. With ``strict`` an
    :class:`EqualizationSingularityError` carrying the output and the erased
    mask is raised; otherwise ``(output, erased)`` is returned.
    """
    dv = d.d if isinstance(d, FreqResponse) else np.asarray(d, dtype=complex)
    r = np.asarray(r, dtype=complex)
    if r.shape[-1] != dv.shape[-1]:
        raise RejectedInputError(f"length {r.shape[-1]} != response length {dv.shape[-1]}")
    erased = np.abs(dv) < SINGULAR_TOL
    safe = np.where(erased, 1.0, dv)
    out = np.where(erased, 0.0, r / safe)
    if strict:
        if np.any(erased):
            raise EqualizationSingularityError("singular channel bin", output=out, erased=erased)
        return out
    return out, erased


# ------------------------------------------------------- time-domain (MC-NOFS)


def circulant_columns(c) -> np.ndarray:
    """Circulant matrix with first column ``c``: ``P[n, k] = c[(n - k) mod N]``."""
    c = np.asarray(c)
    n = c.size
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return c[idx]


def mc_pilot_matrix(pilot_symbols, pair) -> tuple[np.ndarray, np.ndarray]:
    """``(P1, P2)``: circulant arrangements of the signal part and of the bias."""
    s = pack_complex_to_real(np.asarray(pilot_symbols, dtype=complex))
    sig = unpack_real_to_complex(apply(pair.forward, s) - pair.forward.bias)
    bias = unpack_real_to_complex(pair.forward.bias)
    return circulant_columns(sig), circulant_columns(bias)


def mc_estimate_time_domain(rx_pilot, pilot_symbols, pair, l_taps: int) -> TimeChannelEstimate:
    """Estimate the channel taps from one CP-free pilot block.

    Solves ``h = P^H (P P^H)^{-1} y`` with ``P = P1 + P2`` and keeps the first
    ``l_taps`` entries. A ridge term is added when ``P P^H`` is poorly
    conditioned and a numerically singular pilot raises
    :class:`IllConditionedPilotError`.
    """
    y = np.asarray(rx_pilot, dtype=complex)
    n = y.size
    if not 1 <= l_taps <= n:
        raise RejectedInputError(f"l_taps must lie in 1..{n}")
    p1, p2 = mc_pilot_matrix(pilot_symbols, pair)
    if p1.shape[0] != n:
        raise RejectedInputError(f"pilot block length {p1.shape[0]} != received length {n}")
    p = p1 + p2
    gram = p @ p.conj().T
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise IllConditionedPilotError("pilot matrix is rank deficient", condition_number=cond)
    if cond > RIDGE_COND:
        gram = gram + RIDGE * np.trace(gram).real / n * np.eye(n)
    h = p.conj().T @ np.linalg.solve(gram, y)
    return TimeChannelEstimate(h[:l_taps])


def mc_equalize_time_domain(y, h: TimeChannelEstimate | np.ndarray) -> np.ndarray:
    """Undo circular convolution by ``h`` (per-bin division, same as inverting the circulant)."""
    y = np.asarray(y, dtype=complex)
    taps = h.h if isinstance(h, TimeChannelEstimate) else np.asarray(h, dtype=complex)
    n = y.shape[-1]
    if taps.size > n:
        raise RejectedInputError("more taps than samples")
    hf = np.fft.fft(taps, n=n)
    yf = np.fft.fft(y, axis=-1)
    xf = equalize_one_tap(yf, hf)
    return np.fft.ifft(xf, axis=-1)
