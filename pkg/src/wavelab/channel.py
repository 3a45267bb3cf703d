"""Channel emulation: calibrated AWGN, static FIR multipath and block Rayleigh fading."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInputError

# Tap sets of the frequency-selective experiments, as (delay in samples, gain).
PDP_H = ((0, 0.8765), (1, -0.2279), (4, 0.1315), (7, -0.4032j))
PDP_HB = ((0, 0.6965), (1, -0.3279), (3, 0.1765), (5, 0.5991), (7, 0.1315))


@dataclass(frozen=True)
class ChannelSpec:
    """Tapped-delay-line channel.

    ``fading="rayleigh_block"`` keeps the tap magnitudes of ``taps`` as a power
    delay profile and redraws every tap as ``|m_k| g`` with ``g ~ CN(0, 1)``
    once per ``block_len`` blocks.
    """
    taps: tuple = ((0, 1.0),)
    fading: str = "static"
    block_len: int = 10
    seed: int = 0
    normalize_power: bool = False

    def __post_init__(self):
        taps = tuple((int(d), complex(g)) for d, g in self.taps)
        if not taps:
            raise RejectedInputError("channel needs at least one tap")
        delays = [d for d, _ in taps]
        if delays[0] < 0 or any(b <= a for a, b in zip(delays, delays[1:])):
            raise RejectedInputError("tap delays must be non-negative and strictly increasing")
        if self.fading not in ("static", "rayleigh_block"):
            raise RejectedInputError(f"fading mode {self.fading!r} not supported")
        if self.block_len < 1:
            raise RejectedInputError("fading block length must be >= 1")
        object.__setattr__(self, "taps", taps)

    @property
    def delays(self) -> np.ndarray:
        return np.array([d for d, _ in self.taps], dtype=int)

    @property
    def gains(self) -> np.ndarray:
        g = np.array([g for _, g in self.taps], dtype=complex)
        if self.normalize_power:
            g = g / np.sqrt(np.sum(np.abs(g) ** 2))
        return g

    @property
    def max_delay(self) -> int:
        return int(self.delays[-1])

    def impulse_response(self) -> np.ndarray:
        h = np.zeros(self.max_delay + 1, dtype=complex)
        h[self.delays] = self.gains
        return h

    def check_cp(self, cp_len: int) -> None:
        if self.max_delay >= max(cp_len, 1) and self.max_delay > 0:
            warnings.warn(
                f"channel delay spread {self.max_delay} is not shorter than the CP ({cp_len});"
                " one-tap equalization will see inter-block interference",
                RuntimeWarning,
            )


def draw_block_gains(spec: ChannelSpec, n_groups: int, rng: np.random.Generator) -> np.ndarray:
    """Tap gains for ``n_groups`` fading intervals, shape ``(n_groups, n_taps)``."""
    if spec.fading == "static":
        return np.broadcast_to(spec.gains, (n_groups, len(spec.taps))).copy()
    mags = np.abs(spec.gains)
    g = (rng.standard_normal((n_groups, mags.size)) + 1j * rng.standard_normal((n_groups, mags.size)))
    return mags * g / math.sqrt(2.0)


def apply_fir(samples, spec: ChannelSpec, block_samples: int | None = None,
              rng: np.random.Generator | None = None, gains=None) -> np.ndarray:
    """Pass ``samples`` through the tapped delay line (output has the input length).

    For block fading ``block_samples`` is the length of one transmitted block
    (CP included); the tap set in force at an output sample is the one of the
    fading interval that sample belongs to. ``gains`` overrides the draw with
    explicit per-interval gains of shape ``(n_groups, n_taps)``.
    """
    x = np.asarray(samples, dtype=complex)
    n = x.size
    delays = spec.delays
    if gains is None and spec.fading == "static":
        h = spec.impulse_response()
        return np.convolve(x, h)[:n]
    if block_samples is None:
        block_samples = n
    interval = block_samples * (spec.block_len if spec.fading == "rayleigh_block" else 1)
    n_groups = max(1, -(-n // interval))
    if gains is None:
        if rng is None:
            from .numerics import make_rng
            rng = make_rng(spec.seed, 0xFAD)
        gains = draw_block_gains(spec, n_groups, rng)
    gains = np.asarray(gains, dtype=complex)
    group = np.minimum(np.arange(n) // interval, gains.shape[0] - 1)
    y = np.zeros(n, dtype=complex)
    for k, dk in enumerate(delays):
        if dk >= n:
            continue
        y[dk:] += gains[group[dk:], k] * x[: n - dk]
    return y


def channel_freq_response(spec: ChannelSpec, n: int, gains=None):
    """Per-bin response in natural FFT order: DFT of the zero-padded impulse response."""
    from .equalization import FreqResponse

    if spec.max_delay >= n:
        raise RejectedInputError(f"tap delay {spec.max_delay} does not fit in {n} bins")
    h = np.zeros(n, dtype=complex)
    h[spec.delays] = spec.gains if gains is None else gains
    return FreqResponse(np.fft.fft(h))


# ------------------------------------------------------------------ AWGN


@dataclass(frozen=True)
class AwgnSpec:
    """Noise calibration in terms of Eb/N0.

    ``alpha = Q/M`` and ``occupancy = Q/N`` together fix the information rate
    per (CP-free) time sample: ``bits_per_symbol * occupancy / alpha``, i.e.
    ``M`` symbols' worth of bits per ``N`` samples. A compressed scheme that
    carries the same bits on fewer subcarriers therefore gets no free SNR.
    """
    ebn0_db: float
    bits_per_symbol: int = 2
    alpha: float = 1.0
    occupancy: float = 1.0
    cp_fraction: float = 0.0
    include_cp_overhead: bool = False
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise RejectedInputError("compression factor alpha must lie in (0, 1]")
        if not 0 < self.occupancy <= 1:
            raise RejectedInputError("occupancy must lie in (0, 1]")

    @property
    def bits_per_sample(self) -> float:
        return self.bits_per_symbol * self.occupancy / self.alpha

    @property
    def overhead_factor(self) -> float:
        return 1.0 + self.cp_fraction if self.include_cp_overhead else 1.0

    def noise_variance(self, signal_power: float = 1.0) -> float:
        """Per-complex-sample noise variance for a given average signal power."""
        if math.isinf(self.ebn0_db) and self.ebn0_db > 0:
            return 0.0
        ebn0 = 10.0 ** (self.ebn0_db / 10.0)
        return signal_power * self.overhead_factor / (ebn0 * self.bits_per_sample)

    def describe(self, signal_power: float = 1.0) -> dict:
        return {
            "ebn0_db": self.ebn0_db,
            "bits_per_sample": self.bits_per_sample,
            "alpha": self.alpha,
            "cp_overhead_factor": self.overhead_factor,
            "signal_power": signal_power,
            "noise_variance": self.noise_variance(signal_power),
        }


def add_awgn(samples, spec: AwgnSpec, rng: np.random.Generator, signal_power: float | None = None):
    """Add circular complex Gaussian noise calibrated by ``spec``.

    ``signal_power`` defaults to the measured mean power of ``samples``; chains
    pass their nominal payload power instead so CP and guard samples do not
    enter the measurement.
    """
    x = np.asarray(samples, dtype=complex)
    if signal_power is None:
        signal_power = float(np.mean(np.abs(x) ** 2)) if x.size else 0.0
    var = spec.noise_variance(signal_power)
    spec.diagnostics.update(spec.describe(signal_power))
    if var == 0.0:
        return x.copy()
    noise = rng.standard_normal(x.shape + (2,)) @ np.array([1.0, 1j])
    return x + noise * math.sqrt(var / 2.0)
