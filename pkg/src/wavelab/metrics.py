"""BER, EVM, PAPR, PSD, complexity and link-budget arithmetic."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal, stats
from scipy.special import erfc

from .errors import RejectedInputError
from .numerics import hard_slice_real

EVM_FLOOR_DB = -100.0
COMPLEX_MULT_COST = 4


# ------------------------------------------------------------------- BER


def bit_errors(tx, rx) -> int:
    a = np.asarray(tx).ravel()
    b = np.asarray(rx).ravel()
    if a.size != b.size:
        raise RejectedInputError(f"bit streams differ in length ({a.size} vs {b.size})")
    return int(np.count_nonzero(a != b))


def ber(tx, rx) -> float:
    n = np.asarray(tx).size
    e = bit_errors(tx, rx)
    if n == 0:
        return 0.0
    rate = e / n
    if rate > 0.5:
        warnings.warn(f"BER {rate:.3f} exceeds 0.5; receiver is saturated or inverted",
                      RuntimeWarning)
    return rate


def clopper_pearson(errors: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for an error rate."""
    if n <= 0:
        return 0.0, 1.0
    a = (1.0 - confidence) / 2.0
    lo = 0.0 if errors == 0 else float(stats.beta.ppf(a, errors, n - errors + 1))
    hi = 1.0 if errors == n else float(stats.beta.ppf(1 - a, errors + 1, n - errors))
    return lo, hi


@dataclass(frozen=True)
class BerEstimate:
    errors: int
    bits: int
    confidence: float = 0.95

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return clopper_pearson(self.errors, self.bits, self.confidence)

    def __add__(self, other: "BerEstimate") -> "BerEstimate":
        return BerEstimate(self.errors + other.errors, self.bits + other.bits, self.confidence)


def qpsk_theory_ber(ebn0_db) -> np.ndarray:
    """``Q(sqrt(2 Eb/N0))`` for Gray QPSK in AWGN."""
    g = 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)
    return 0.5 * erfc(np.sqrt(g))


def ebn0_at_ber(ebn0_db, bers, target: float) -> float:
    """Eb/N0 where a BER curve crosses ``target`` (log-linear interpolation).

    Returns ``nan`` if the curve never reaches the target.
    """
    x = np.asarray(ebn0_db, dtype=float)
    y = np.asarray(bers, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    ly = np.log10(np.maximum(y, 1e-300))
    lt = math.log10(target)
    for i in range(x.size - 1):
        if y[i] >= target > y[i + 1] or (y[i] > target >= y[i + 1]):
            if y[i + 1] <= 0:
                return float(x[i + 1])
            t = (ly[i] - lt) / (ly[i] - ly[i + 1])
            return float(x[i] + t * (x[i + 1] - x[i]))
    return float("nan")


# ------------------------------------------------------------------- EVM


def evm_db(rx, ref) -> float:
    """``10 log10(mean|rx - ref|^2 / mean|ref|^2)`` with a -100 dB floor."""
    r = np.asarray(rx, dtype=complex).ravel()
    s = np.asarray(ref, dtype=complex).ravel()
    if r.size != s.size:
        raise RejectedInputError("EVM inputs differ in length")
    p_ref = float(np.mean(np.abs(s) ** 2)) if s.size else 0.0
    if p_ref == 0.0:
        raise RejectedInputError("reference has zero power")
    ratio = float(np.mean(np.abs(r - s) ** 2)) / p_ref
    if ratio <= 10.0 ** (EVM_FLOOR_DB / 10.0):
        return EVM_FLOOR_DB
    return 10.0 * math.log10(ratio)


def decision_evm_db(symbols, order: int) -> float:
    """EVM against the receiver's own hard decisions (no reference needed)."""
    s = np.asarray(symbols, dtype=complex)
    ref = hard_slice_real(s.real, order) + 1j * hard_slice_real(s.imag, order)
    return evm_db(s, ref)


# ------------------------------------------------------------------ PAPR


def oversample(blocks, factor: int = 4) -> np.ndarray:
    """Band-limited interpolation by zero-stuffing the middle of the spectrum."""
    x = np.atleast_2d(np.asarray(blocks, dtype=complex))
    n = x.shape[1]
    if factor == 1:
        return x
    f = np.fft.fft(x, axis=1)
    out = np.zeros((x.shape[0], factor * n), dtype=complex)
    h = (n + 1) // 2
    out[:, :h] = f[:, :h]
    out[:, out.shape[1] - (n - h):] = f[:, h:]
    return np.fft.ifft(out, axis=1) * factor


def papr_db(blocks, oversampling: int = 4) -> np.ndarray:
    """Per-block peak-to-average power ratio in dB (CP must already be removed)."""
    x = np.atleast_2d(np.asarray(blocks, dtype=complex))
    if x.size == 0 or x.shape[1] == 0:
        raise RejectedInputError("PAPR needs non-empty blocks")
    p = np.abs(oversample(x, oversampling)) ** 2
    mean = p.mean(axis=1)
    if np.any(mean == 0):
        raise RejectedInputError("PAPR undefined for an all-zero block")
    return 10.0 * np.log10(p.max(axis=1) / mean)


def papr_ccdf(blocks, thresholds_db, oversampling: int = 4) -> list[tuple[float, float]]:
    """``[(gamma, P(PAPR > gamma)), ...]`` over the given blocks."""
    values = papr_db(blocks, oversampling)
    return ccdf_from_values(values, thresholds_db)


def ccdf_from_values(values, thresholds_db) -> list[tuple[float, float]]:
    v = np.sort(np.asarray(values, dtype=float))
    t = np.asarray(thresholds_db, dtype=float)
    exceed = v.size - np.searchsorted(v, t, side="right")
    return [(float(a), float(b)) for a, b in zip(t, exceed / v.size)]


def papr_at_ccdf(values, probability: float) -> float:
    """PAPR level exceeded by a fraction ``probability`` of blocks."""
    return float(np.quantile(np.asarray(values, dtype=float), 1.0 - probability))


# ------------------------------------------------------------------- PSD


def psd_welch(samples, seg_len: int, overlap: float = 0.5, sample_rate_hz: float = 1.0):
    """Hann-window averaged periodogram, centred, normalized to a 0 dB peak."""
    x = np.asarray(samples, dtype=complex)
    if seg_len > x.size:
        raise RejectedInputError(f"segment length {seg_len} exceeds {x.size} samples")
    if not 0 <= overlap < 1:
        raise RejectedInputError("overlap must lie in [0, 1)")
    f, p = signal.welch(x, fs=sample_rate_hz, window="hann", nperseg=seg_len,
                        noverlap=int(overlap * seg_len), return_onesided=False,
                        detrend=False, scaling="density")
    f = np.fft.fftshift(f)
    p = np.fft.fftshift(p)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(p / p.max())
    return f, db


def occupied_bandwidth(freqs, db, level_db: float = -10.0) -> float:
    """Width between the outermost frequencies within ``level_db`` of the in-band level.

    The in-band reference is the median of the bins above -30 dB, which
    ignores the random ripple of any single peak bin.
    """
    f = np.asarray(freqs, dtype=float)
    d = np.asarray(db, dtype=float)
    ref = np.median(d[d > -30.0])
    above = np.flatnonzero(d >= ref + level_db)
    if above.size == 0:
        return 0.0
    df = f[1] - f[0] if f.size > 1 else 0.0
    return float(f[above[-1]] - f[above[0]] + df)


# ------------------------------------------------------------ complexity


def real_mult_breakdown(cfg, prune_ratio: float = 0.0, complex_mult_cost: int = COMPLEX_MULT_COST) -> dict:
    """Transmit-side real multiplications per block.

    Stage 1 is a dense DFT (``M^2`` complex products) for DFT precoding or the
    real ``2Q x 2M`` matrix for the learned transform, whose surviving
    connections scale with ``1 - prune_ratio``. Stage 2 is a radix-2 FFT with
    ``(N/2) log2 N`` complex products.
    """
    if not 0 <= prune_ratio < 1:
        raise RejectedInputError("prune_ratio must lie in [0, 1)")
    M, Q, N = cfg.M, cfg.Q, cfg.N
    stage2 = complex_mult_cost * (N // 2) * int(round(math.log2(N)))
    if cfg.scheme == "sc_ofdm":
        stage1 = complex_mult_cost * M * M
    elif cfg.scheme in ("sc_nofs", "sinc_truncated"):
        stage1 = int(round(4 * Q * M * (1 - prune_ratio)))
    elif cfg.scheme == "mc_nofs":
        stage1 = int(round(4 * N * N * (1 - prune_ratio)))
        stage2 = 0
    else:
        stage1 = 0
    return {"stage1": stage1, "stage2": stage2, "total": stage1 + stage2}


def real_mult_count(cfg, prune_ratio: float = 0.0, complex_mult_cost: int = COMPLEX_MULT_COST) -> int:
    return real_mult_breakdown(cfg, prune_ratio, complex_mult_cost)["total"]


# ------------------------------------------------------------ link budget


@dataclass(frozen=True)
class LinkRecord:
    occupied_bw_hz: float
    raw_rate_bps: float
    cp_adjusted_rate_bps: float
    frame_s: float
    guard_s: float
    sample_rate_hz: float
    frame_samples: int
    guard_samples: int


def link_budget(cfg, fcfg) -> LinkRecord:
    """Bandwidth, rate and frame timing of a configuration.

    The raw rate counts ``M`` information symbols per block whatever ``Q`` is.
    When ``fcfg.numerology_rate_hz`` is set, a frame laid out at that rate is
    played at ``cfg.sample_rate_hz``; the airtime saved becomes guard time.
    """
    spacing = cfg.subcarrier_spacing_hz
    raw = cfg.M * cfg.bits_per_symbol * spacing
    cp_len = cfg.mean_cp_fraction * cfg.N
    cp_adj = raw * cfg.N / (cfg.N + cp_len)
    layout_rate = fcfg.numerology_rate_hz or cfg.sample_rate_hz
    frame_samples = fcfg.total_samples(layout_rate)
    frame_s = fcfg.frame_duration_s * layout_rate / cfg.sample_rate_hz
    guard_s = fcfg.guard_gap_s + (fcfg.frame_duration_s - frame_s)
    return LinkRecord(
        occupied_bw_hz=cfg.active_bins * spacing,
        raw_rate_bps=raw,
        cp_adjusted_rate_bps=cp_adj,
        frame_s=frame_s,
        guard_s=guard_s,
        sample_rate_hz=cfg.sample_rate_hz,
        frame_samples=frame_samples,
        guard_samples=int(math.floor(guard_s * cfg.sample_rate_hz + 1e-9)),
    )


# ------------------------------------------------------------- reporting


@dataclass
class RunReport:
    config: dict
    seed: int
    ber: float | None = None
    bit_count: int | None = None
    evm_db: float | None = None
    papr_ccdf: list = field(default_factory=list)
    mult_counts: dict = field(default_factory=dict)
    link: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ber is not None and not 0 <= self.ber <= 0.5 + 1e-12:
            warnings.warn(f"BER {self.ber} outside [0, 0.5]", RuntimeWarning)
        probs = [p for _, p in self.papr_ccdf]
        if any(b > a + 1e-15 for a, b in zip(probs, probs[1:])):
            raise RejectedInputError("CCDF must be non-increasing in threshold")

    def to_json(self, **kw) -> str:
        return json.dumps(asdict(self), sort_keys=True, default=_json_default, **kw)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)

