"""Hard slicing and the iterative interference-cancellation detector (ID).

The detector works on the ``2M`` soft symbols produced by the receive-side
inverse transform. Writing ``C = W_inv @ W_fwd`` with diagonal ``d`` and
off-diagonal part ``O``, each iteration forms

    r = (y - b - O @ x) / d

where ``b`` is the known bias contribution and ``x`` is the current interim
estimate of the transmitted symbols. Three interim rules are available:

``clamp``  ``x = clip(r, -clamp, clamp)``. With ``d = 1`` this is the textbook
           fixed point ``s_k = y - (C - diag C) clamp(s_{k-1})``.
``hard``   ``x`` is the nearest PAM level of ``r``.
``soft``   ``x`` is the posterior mean of the PAM symbol given ``r`` and a
           tracked residual variance (noise plus uncancelled interference).
           This is the default because the clamp rule leaves roughly 2 dB on
           the table for compression factors near 0.8.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .numerics import _pam_levels, bits_per_symbol, hard_slice_real, qam_hard_demod

ORTHOGONAL_TOL = 1e-8
_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class DetectorConfig:
    iterations: int = 20
    mode: str = "iterative"
    clamp: float | None = None
    interim: str = "soft"
    tol: float = 1e-6
    qam_order: int = 4

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigurationError("detector iterations must be >= 1")
        if self.mode not in ("hard", "iterative"):
            raise ConfigurationError(f"detector mode {self.mode!r} not in (hard, iterative)")
        if self.interim not in ("soft", "clamp", "hard"):
            raise ConfigurationError(f"interim rule {self.interim!r} not in (soft, clamp, hard)")
        if self.clamp is not None and self.clamp <= 0:
            raise ConfigurationError("clamp must be positive")
        bits_per_symbol(self.qam_order)

    @property
    def clamp_level(self) -> float:
        """Soft limit per real dimension; defaults to the outermost PAM level."""
        return float(self.clamp) if self.clamp is not None else float(_pam_levels(self.qam_order)[0])


def hard_slice(symbols, order: int) -> np.ndarray:
    """Nearest constellation point, element-wise."""
    s = np.asarray(symbols, dtype=complex)
    return hard_slice_real(s.real, order) + 1j * hard_slice_real(s.imag, order)


def hard_decide_bits(symbols, order: int) -> np.ndarray:
    return qam_hard_demod(symbols, order)


def _posterior(r, ivar, levels):
    """Posterior mean and variance of a uniform PAM symbol observed in Gaussian noise."""
    if levels.size == 2:
        a = levels[0]
        x = a * np.tanh(a * r / ivar)
        return x, a * a - x * x
    logp = -((r[..., None] - levels) ** 2) / (2.0 * ivar[..., None])
    logp -= logp.max(axis=-1, keepdims=True)
    p = np.exp(logp)
    p /= p.sum(axis=-1, keepdims=True)
    x = p @ levels
    return x, p @ (levels * levels) - x * x


def bias_offset(pair) -> np.ndarray:
    """Known constant added to the inverse output by the two biases."""
    return pair.inverse.effective_weights @ pair.forward.bias + pair.inverse.bias


def iterative_detect(y, pair, det: DetectorConfig = DetectorConfig(), noise_var=0.0,
                     history: list | None = None) -> np.ndarray:
    """Cancel the mutual interference left by a non-orthogonal transform pair.

    Parameters
    ----------
    y : array, shape (2M,) or (B, 2M)
        Inverse-transform outputs (biases included).
    pair : TransformPair
    det : DetectorConfig
    noise_var : float or array broadcastable to ``y``
        Noise variance of each entry of ``y``; only the soft rule uses it.
    history : list, optional
        When given, every iterate is appended (for convergence studies).

    Returns the refined soft symbols; slicing is left to the caller.
    """
    y = np.asarray(y, dtype=float)
    c = pair.correlation()
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ConfigurationError(f"correlation matrix must be square, got {c.shape}")
    if y.shape[-1] != c.shape[0]:
        raise ConfigurationError(f"detector input length {y.shape[-1]} != {c.shape[0]}")
    y_lin = y - bias_offset(pair)
    d = np.diag(c).copy()
    if np.any(np.abs(d) < _VAR_FLOOR):
        raise ConfigurationError("transform pair has a zero diagonal gain")
    if det.mode == "hard" or np.max(np.abs(c - np.eye(c.shape[0]))) < ORTHOGONAL_TOL:
        out = y_lin / d
        if history is not None:
            history.append(out)
        return out

    off = c - np.diag(d)
    r = y_lin / d
    if history is not None:
        history.append(r)
    if det.interim == "soft":
        levels = _pam_levels(det.qam_order)
        off2t = (off * off).T
        nv = np.broadcast_to(np.asarray(noise_var, dtype=float), y.shape)
        x = np.zeros_like(y_lin)
        v = np.full_like(y_lin, float(np.mean(levels * levels)))
    for k in range(det.iterations):
        prev = r
        if det.interim == "soft":
            r = (y_lin - x @ off.T) / d
            ivar = np.maximum((v @ off2t + nv) / (d * d), _VAR_FLOOR)
            x, v = _posterior(r, ivar, levels)
        elif det.interim == "clamp":
            lim = det.clamp_level
            r = (y_lin - np.clip(r, -lim, lim) @ off.T) / d
        else:
            r = (y_lin - hard_slice_real(r, det.qam_order) @ off.T) / d
        if history is not None:
            history.append(r)
        # the first soft pass starts from x = 0 and reproduces y / d
        if (k > 0 or det.interim != "soft") and np.max(np.abs(r - prev)) < det.tol:
            break
    return r


def detect_symbols(y, pair, det: DetectorConfig = DetectorConfig(), noise_var=0.0) -> np.ndarray:
    """Detector output packed back to complex symbols (not yet sliced)."""
    r = iterative_detect(y, pair, det, noise_var)
    m = r.shape[-1] // 2
    return r[..., :m] + 1j * r[..., m:]


__all__ = [
    "DetectorConfig", "hard_slice", "hard_decide_bits", "iterative_detect",
    "detect_symbols", "bias_offset",
]
