"""Transmit and receive chains, cyclic prefix, pilots, sync and frame assembly.

Supported schemes:

``ofdm``            QAM symbols straight onto ``M`` centred subcarriers.
``sc_ofdm``         size-``M`` DFT precoding, then OFDM (DFT-spread OFDM).
``sinc_truncated``  DFT precoding, only the centre ``Q`` of ``M`` outputs kept.
``sc_nofs``         learned ``2Q x 2M`` forward transform, then OFDM on ``Q`` bins.
``mc_nofs``         learned ``2N x 2N`` transform producing time samples directly.

All chains operate on a batch of blocks at once: symbols are ``(B, M)``
arrays and time blocks ``(B, N)``. Every transmitter is scaled to unit
average power per sample (CP excluded) so one Eb/N0 calibration fits all.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import signal

from .detection import DetectorConfig, iterative_detect
from .equalization import (
    FreqResponse,
    TimeChannelEstimate,
    equalize_one_tap,
    estimate_one_tap,
    mc_estimate_time_domain,
)
from .errors import (
    ConfigurationError,
    FrameCapacityError,
    FramingError,
    RejectedInputError,
    SyncFailureError,
)
from .numerics import (
    bits_per_symbol,
    make_rng,
    pack_complex_to_real,
    qam_hard_demod,
    qam_modulate,
    unpack_real_to_complex,
)
from .transforms import (
    TransformPair,
    apply,
    mc_legacy_pair,
    payload_bins,
    sinc_truncated_pair,
    truncate_symmetric,
    zero_pad_symmetric,
)

SCHEMES = ("ofdm", "sc_ofdm", "sc_nofs", "mc_nofs", "sinc_truncated")
ORTHOGONAL_SCHEMES = ("ofdm", "sc_ofdm")
CP_SCHEMES = ("none", "lte_like", "fixed")
DEFAULT_FIXED_CP = {128: 16, 256: 32, 1024: 80}
LTE_CP_FIRST, LTE_CP_REST, LTE_REF_N, LTE_SLOT = 80, 72, 1024, 7
PILOT_SEED = 0x9105
SYNC_ROOT = 25


@dataclass(frozen=True)
class WaveformConfig:
    scheme: str = "sc_ofdm"
    M: int = 600
    Q: int | None = None
    N: int = 1024
    cp_scheme: str = "fixed"
    cp_len: int | None = None
    qam_order: int = 4
    subcarrier_spacing_hz: float = 15000.0
    sample_rate_hz: float | None = None
    pilot_period: int = 10
    sync_len: int = 256

    def __post_init__(self):
        if self.Q is None:
            object.__setattr__(self, "Q", self.N if self.scheme == "mc_nofs" else self.M)
        if self.sample_rate_hz is None:
            object.__setattr__(self, "sample_rate_hz", self.N * self.subcarrier_spacing_hz)
        if self.cp_scheme == "fixed" and self.cp_len is None:
            object.__setattr__(self, "cp_len", DEFAULT_FIXED_CP.get(self.N, self.N // 8))
        problems = self.check(**{f: getattr(self, f) for f in self.__dataclass_fields__})
        if problems:
            raise ConfigurationError("; ".join(problems))

    @staticmethod
    def check(scheme="sc_ofdm", M=600, Q=None, N=1024, cp_scheme="fixed", cp_len=None,
              qam_order=4, subcarrier_spacing_hz=15000.0, sample_rate_hz=None,
              pilot_period=10, sync_len=256) -> list[str]:
        """Every invariant violation of a candidate configuration, as messages."""
        out = []
        if scheme not in SCHEMES:
            out.append(f"scheme: unknown scheme {scheme!r}")
        q = Q if Q is not None else M
        if M < 1 or q < 1:
            out.append("M, Q: must be positive")
        if q > M:
            out.append(f"Q: compression factor exceeds 1 (Q={q} > M={M})")
        if M > N:
            out.append(f"M: {M} data symbols do not fit in N={N} subcarriers")
        if scheme in ORTHOGONAL_SCHEMES and Q is not None and Q != M:
            out.append(f"Q: orthogonal scheme {scheme} requires Q == M")
        if scheme == "mc_nofs" and (M != N or (Q is not None and Q != N)):
            out.append("M, Q: mc_nofs uses M == Q == N")
        if qam_order not in (4, 16, 64):
            out.append(f"qam_order: {qam_order} not in (4, 16, 64)")
        if cp_scheme not in CP_SCHEMES:
            out.append(f"cp_scheme: unknown CP scheme {cp_scheme!r}")
        if cp_len is not None and not 0 <= cp_len < N:
            out.append(f"cp_len: must satisfy 0 <= L < N (got {cp_len})")
        if subcarrier_spacing_hz <= 0:
            out.append("subcarrier_spacing_hz: must be positive")
        if sample_rate_hz is not None and not math.isclose(
                sample_rate_hz, N * subcarrier_spacing_hz, rel_tol=1e-9):
            out.append(
                f"sample_rate_hz: {sample_rate_hz} inconsistent with N * spacing = "
                f"{N * subcarrier_spacing_hz}"
            )
        if pilot_period < 0:
            out.append("pilot_period: must be >= 0 (0 disables pilots)")
        if sync_len < 0:
            out.append("sync_len: must be >= 0")
        return out

    # -- derived quantities

    @property
    def alpha(self) -> float:
        return self.Q / self.M

    @property
    def bits_per_symbol(self) -> int:
        return bits_per_symbol(self.qam_order)

    @property
    def bits_per_block(self) -> int:
        return self.M * self.bits_per_symbol

    @property
    def active_bins(self) -> int:
        """Occupied subcarriers per block."""
        return {"ofdm": self.M, "sc_ofdm": self.M, "mc_nofs": self.N}.get(self.scheme, self.Q)

    @property
    def occupancy(self) -> float:
        return self.active_bins / self.N

    def cp_lengths(self, n_blocks: int) -> np.ndarray:
        if self.cp_scheme == "none":
            return np.zeros(n_blocks, dtype=int)
        if self.cp_scheme == "fixed":
            return np.full(n_blocks, self.cp_len, dtype=int)
        first = round(LTE_CP_FIRST * self.N / LTE_REF_N)
        rest = round(LTE_CP_REST * self.N / LTE_REF_N)
        return np.where(np.arange(n_blocks) % LTE_SLOT == 0, first, rest).astype(int)

    @property
    def mean_cp_fraction(self) -> float:
        if self.cp_scheme == "lte_like":
            return float(np.mean(self.cp_lengths(LTE_SLOT))) / self.N
        return float(self.cp_lengths(1)[0]) / self.N

    @property
    def min_cp(self) -> int:
        return int(self.cp_lengths(LTE_SLOT).min())

    def for_scheme(self, scheme: str, **changes) -> "WaveformConfig":
        """Same numerology under another scheme (Q reset for orthogonal ones)."""
        q = changes.pop("Q", self.M if scheme in ORTHOGONAL_SCHEMES else self.Q)
        return replace(self, scheme=scheme, Q=q, **changes)

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


@dataclass(frozen=True)
class FrameConfig:
    """Frame timing.

    ``numerology_rate_hz`` is the rate at which the frame was laid out; when a
    faster sample rate plays the same samples (the higher-rate deployment),
    the airtime shrinks by the ratio of the two rates.
    """
    frame_duration_s: float = 0.01
    subframes: int = 10
    guard_gap_s: float = 0.0
    numerology_rate_hz: float | None = None

    def __post_init__(self):
        if self.frame_duration_s <= 0:
            raise ConfigurationError("frame_duration_s must be positive")
        if self.guard_gap_s < 0:
            raise ConfigurationError("guard_gap_s must be non-negative")
        if self.guard_gap_s >= self.frame_duration_s:
            raise ConfigurationError("guard gap must be shorter than the frame")
        if self.subframes < 1:
            raise ConfigurationError("subframes must be >= 1")

    def total_samples(self, rate_hz: float) -> int:
        return int(math.floor(self.frame_duration_s * rate_hz + 1e-9))

    def guard_samples(self, rate_hz: float) -> int:
        return int(math.floor(self.guard_gap_s * rate_hz + 1e-9))

    def capacity(self, rate_hz: float) -> int:
        return self.total_samples(rate_hz) - self.guard_samples(rate_hz)


@dataclass(eq=False)
class TxBlockSet:
    time_samples: np.ndarray
    tx_bits: np.ndarray
    block_boundaries: np.ndarray
    pilot_flags: np.ndarray
    symbols: np.ndarray = None
    scale: float = 1.0

    @property
    def n_blocks(self) -> int:
        return self.pilot_flags.size

    def __len__(self):
        return self.time_samples.size


# ----------------------------------------------------------- transform lookup


@lru_cache(maxsize=16)
def _cached_sinc_pair(m, q):
    return sinc_truncated_pair(m, q)


@lru_cache(maxsize=8)
def _cached_mc_pair(n):
    return mc_legacy_pair(n)


def resolve_pair(cfg: WaveformConfig, pair: TransformPair | None) -> TransformPair | None:
    """Transform pair a scheme runs with; raises if a required one is missing."""
    if cfg.scheme == "sc_nofs":
        if pair is None:
            raise ConfigurationError("sc_nofs needs a trained transform pair")
        if (pair.M, pair.Q) != (cfg.M, cfg.Q):
            raise ConfigurationError(
                f"transform pair is {pair.M}->{pair.Q} but config asks for {cfg.M}->{cfg.Q}"
            )
        return pair
    if cfg.scheme == "sinc_truncated":
        return _cached_sinc_pair(cfg.M, cfg.Q)
    if cfg.scheme == "mc_nofs":
        p = pair if pair is not None else _cached_mc_pair(cfg.N)
        if p.M != cfg.N or p.Q != cfg.N:
            raise ConfigurationError("mc_nofs transform must be 2N x 2N")
        return p
    return None


def tx_scale(cfg: WaveformConfig, pair: TransformPair | None = None) -> float:
    """Amplitude factor giving unit expected power per time sample."""
    p = resolve_pair(cfg, pair)
    energy = float(cfg.M) if p is None else p.block_energy()
    return math.sqrt(cfg.N / energy)


# --------------------------------------------------------- stage-1 mappings


def stage1_forward(cfg: WaveformConfig, symbols, pair: TransformPair | None = None) -> np.ndarray:
    """Symbols ``(B, M)`` to the active-bin payload ``(B, active_bins)`` (centred order).

    For ``mc_nofs`` the output is the time block itself.
    """
    s = np.atleast_2d(np.asarray(symbols, dtype=complex))
    if cfg.scheme == "ofdm":
        return s
    if cfg.scheme == "sc_ofdm":
        return np.fft.fftshift(np.fft.fft(s, axis=1, norm="ortho"), axes=1)
    p = resolve_pair(cfg, pair)
    return unpack_real_to_complex(apply(p.forward, pack_complex_to_real(s)))


def payload_to_time(cfg: WaveformConfig, payload) -> np.ndarray:
    """Centred payload to unitary-IFFT time blocks ``(B, N)`` (no scaling, no CP)."""
    if cfg.scheme == "mc_nofs":
        return np.atleast_2d(payload)
    grid = zero_pad_symmetric(np.atleast_2d(payload), cfg.N)
    return np.fft.ifft(np.fft.ifftshift(grid, axes=1), axis=1, norm="ortho")


def time_to_payload(cfg: WaveformConfig, blocks) -> np.ndarray:
    """Inverse of :func:`payload_to_time` on the active bins."""
    spec = np.fft.fftshift(np.fft.fft(np.atleast_2d(blocks), axis=1, norm="ortho"), axes=1)
    return truncate_symmetric(spec, cfg.active_bins)


def active_bin_indices(cfg: WaveformConfig) -> np.ndarray:
    return payload_bins(cfg.active_bins, cfg.N)


def stage1_inverse(cfg: WaveformConfig, payload, pair=None, det: DetectorConfig | None = None,
                   noise_var=0.0) -> tuple[np.ndarray, np.ndarray]:
    """Equalized payload to symbol estimates.

    ``noise_var`` is the per-complex-entry noise variance of ``payload``
    (scalar or per-bin). Returns ``(pre_detection, post_detection)`` complex
    symbol estimates of shape ``(B, M)``.
    """
    x = np.atleast_2d(np.asarray(payload, dtype=complex))
    if cfg.scheme == "ofdm":
        return x, x
    if cfg.scheme == "sc_ofdm":
        s = np.fft.ifft(np.fft.ifftshift(x, axes=1), axis=1, norm="ortho")
        return s, s
    p = resolve_pair(cfg, pair)
    det = det or DetectorConfig(qam_order=cfg.qam_order)
    y = apply(p.inverse, pack_complex_to_real(x))
    var_in = np.broadcast_to(np.asarray(noise_var, dtype=float), x.shape) / 2.0
    w = p.inverse.effective_weights
    nv = np.concatenate([var_in, var_in], axis=-1) @ (w * w).T
    z = iterative_detect(y, p, det, nv)
    return unpack_real_to_complex(y), unpack_real_to_complex(z)


# ------------------------------------------------------------------- CP


def add_cp(block, L: int) -> np.ndarray:
    b = np.asarray(block)
    n = b.shape[-1]
    if L < 0 or (L and L >= n):
        raise RejectedInputError(f"CP length {L} must satisfy 0 <= L < N={n}")
    if L == 0:
        return b.copy()
    return np.concatenate([b[..., n - L:], b], axis=-1)


def remove_cp(block, L: int) -> np.ndarray:
    b = np.asarray(block)
    if L < 0 or L >= b.shape[-1]:
        raise RejectedInputError(f"CP length {L} invalid for a block of {b.shape[-1]} samples")
    return b[..., L:].copy()


def serialize_blocks(blocks, cp_lengths) -> tuple[np.ndarray, np.ndarray]:
    """CP-prefixed blocks concatenated; also returns the boundary offsets."""
    blocks = np.atleast_2d(blocks)
    n = blocks.shape[1]
    cps = np.asarray(cp_lengths, dtype=int)
    if cps.size and np.all(cps == cps[0]):
        L = int(cps[0])
        stream = add_cp(blocks, L).ravel() if L else blocks.ravel().copy()
    else:
        stream = np.concatenate([add_cp(b, int(L)) for b, L in zip(blocks, cps)]) if cps.size \
            else np.zeros(0, dtype=complex)
    bounds = np.concatenate([[0], np.cumsum(cps + n)])
    return stream, bounds


def deserialize_blocks(samples, n: int, cp_lengths) -> np.ndarray:
    """Split a stream into CP-free blocks; raises :class:`FramingError` on misalignment."""
    x = np.asarray(samples, dtype=complex)
    cps = np.asarray(cp_lengths, dtype=int)
    need = int(np.sum(cps + n))
    if x.size != need:
        raise FramingError(f"stream of {x.size} samples does not match {cps.size} blocks ({need})")
    if cps.size and np.all(cps == cps[0]):
        return x.reshape(cps.size, n + cps[0])[:, cps[0]:]
    bounds = np.concatenate([[0], np.cumsum(cps + n)])
    return np.stack([x[bounds[i] + cps[i]:bounds[i + 1]] for i in range(cps.size)])


def count_blocks(cfg: WaveformConfig, n_samples: int) -> int:
    """Number of whole blocks in ``n_samples``; :class:`FramingError` if it is not exact."""
    if cfg.cp_scheme != "lte_like":
        per = cfg.N + cfg.cp_lengths(1)[0]
        if n_samples % per:
            raise FramingError(f"{n_samples} samples is not a whole number of {per}-sample blocks")
        return n_samples // per
    slot = int(np.sum(cfg.cp_lengths(LTE_SLOT) + cfg.N))
    full, rem = divmod(n_samples, slot)
    lens = cfg.cp_lengths(LTE_SLOT) + cfg.N
    part = np.concatenate([[0], np.cumsum(lens)])
    hit = np.nonzero(part == rem)[0]
    if hit.size == 0:
        raise FramingError(f"{n_samples} samples do not end on a block boundary")
    return full * LTE_SLOT + int(hit[0])


# ------------------------------------------------------------------ pilots


def pilot_symbols(cfg: WaveformConfig) -> np.ndarray:
    """Fixed seeded QPSK pilot.

    One-tap schemes place it directly on the active bins (length
    ``active_bins``); ``mc_nofs`` sends it through the transform as a symbol
    block of length ``N``.
    """
    rng = make_rng(PILOT_SEED, cfg.active_bins)
    bits = rng.integers(0, 2, size=2 * cfg.active_bins)
    return qam_modulate(bits, 4)


def pilot_time_block(cfg: WaveformConfig, pair=None) -> np.ndarray:
    """Scaled, CP-free pilot block with unit power per sample."""
    p = pilot_symbols(cfg)
    if cfg.scheme == "mc_nofs":
        mc = resolve_pair(cfg, pair)
        return tx_scale(cfg, mc) * payload_to_time(cfg, stage1_forward(cfg, p, mc))[0]
    return math.sqrt(cfg.N / cfg.active_bins) * payload_to_time(cfg, p)[0]


def block_layout(cfg: WaveformConfig, n_data: int, pilots: bool = True) -> np.ndarray:
    """Pilot flags for ``n_data`` data blocks: ``[P, D x period, P, D x period, ...]``."""
    if not pilots or cfg.pilot_period == 0 or n_data == 0:
        return np.zeros(n_data, dtype=bool)
    n_pilots = -(-n_data // cfg.pilot_period)
    flags = np.zeros(n_data + n_pilots, dtype=bool)
    flags[:: cfg.pilot_period + 1] = True
    return flags


# --------------------------------------------------------------------- TX


def tx(cfg: WaveformConfig, bits, pair: TransformPair | None = None, pilots: bool = True) -> TxBlockSet:
    """Modulate ``bits`` into a CP-prefixed sample stream (pilot blocks interleaved)."""
    b = np.asarray(bits).ravel()
    if b.size % cfg.bits_per_block:
        raise RejectedInputError(
            f"bit length {b.size} is not a multiple of {cfg.bits_per_block} bits per block"
        )
    p = resolve_pair(cfg, pair)
    n_data = b.size // cfg.bits_per_block
    symbols = qam_modulate(b, cfg.qam_order).reshape(n_data, cfg.M)
    scale = tx_scale(cfg, p)
    data_blocks = scale * payload_to_time(cfg, stage1_forward(cfg, symbols, p))
    flags = block_layout(cfg, n_data, pilots)
    blocks = np.empty((flags.size, cfg.N), dtype=complex)
    blocks[~flags] = data_blocks
    if flags.any():
        blocks[flags] = pilot_time_block(cfg, p)
    stream, bounds = serialize_blocks(blocks, cfg.cp_lengths(flags.size))
    return TxBlockSet(stream, b.astype(np.int8), bounds, flags, symbols, scale)


# --------------------------------------------------------------------- RX


@dataclass(eq=False)
class RxResult:
    bits: np.ndarray
    soft_symbols: np.ndarray
    pre_detection: np.ndarray
    evm_db: np.ndarray
    erased_blocks: np.ndarray
    estimates: list = field(default_factory=list)


def _estimate_from_pilot(cfg, block, pair, scale):
    if cfg.scheme == "mc_nofs":
        l_taps = max(1, cfg.min_cp)
        h = mc_estimate_time_domain(block / scale, pilot_symbols(cfg), pair, l_taps)
        return FreqResponse(np.fft.fft(h.h, n=cfg.N))
    rx_f = np.fft.fft(block, norm="ortho")
    tx_f = np.fft.fft(pilot_time_block(cfg, pair), norm="ortho")
    bins = active_bin_indices(cfg)
    full = np.ones(cfg.N, dtype=complex)
    full[bins] = estimate_one_tap(rx_f[bins], tx_f[bins]).d
    return FreqResponse(full)


def rx(cfg: WaveformConfig, samples, pair: TransformPair | None = None,
       est: FreqResponse | TimeChannelEstimate | None = None, det: DetectorConfig | None = None,
       noise_var: float = 0.0, pilot_flags=None) -> RxResult:
    """Demodulate a block-aligned stream back to bits.

    ``noise_var`` is the per-sample noise variance of ``samples``; it only
    steers the soft detector. When ``pilot_flags`` marks pilot blocks, each
    pilot refreshes the one-tap estimate and data blocks use the latest one
    (hold-last); otherwise ``est`` (default: flat) applies to every block.
    """
    p = resolve_pair(cfg, pair)
    det = det or DetectorConfig(qam_order=cfg.qam_order)
    n_blocks = count_blocks(cfg, np.asarray(samples).size)
    blocks = deserialize_blocks(samples, cfg.N, cfg.cp_lengths(n_blocks))
    flags = np.zeros(n_blocks, dtype=bool) if pilot_flags is None else np.asarray(pilot_flags, bool)
    if flags.size != n_blocks:
        raise FramingError(f"{flags.size} pilot flags for {n_blocks} blocks")
    scale = tx_scale(cfg, p)

    if isinstance(est, TimeChannelEstimate):
        est = FreqResponse(np.fft.fft(est.h, n=cfg.N))
    current = est if est is not None else FreqResponse.flat(cfg.N)
    # index of the response in force for every data block
    responses, which = [current], []
    for is_pilot, blk in zip(flags, blocks):
        if is_pilot:
            responses.append(_estimate_from_pilot(cfg, blk, p, scale))
        else:
            which.append(len(responses) - 1)
    which = np.asarray(which, dtype=int)
    data = blocks[~flags]
    resp = np.stack([r.d for r in responses])[which] if which.size else np.zeros((0, cfg.N))

    erased_blocks = np.zeros(data.shape[0], dtype=bool)
    if cfg.scheme == "mc_nofs":
        f = np.fft.fft(data, axis=1)
        eq, erased = equalize_one_tap(f, resp, strict=False)
        payload = np.fft.ifft(eq, axis=1) / scale
        gain2 = np.abs(resp) ** 2
        # circulant inversion spreads per-bin noise evenly over the block
        var = noise_var * np.mean(1.0 / np.where(erased, np.inf, gain2), axis=1, keepdims=True)
        var = np.broadcast_to(var / scale**2, payload.shape)
    else:
        spec = time_to_payload(cfg, data)
        d_active = truncate_symmetric(np.fft.fftshift(resp, axes=1), cfg.active_bins)
        eq, erased = equalize_one_tap(spec, d_active, strict=False)
        payload = eq / scale
        with np.errstate(divide="ignore"):
            var = noise_var / (scale**2 * np.abs(d_active) ** 2)
        var = np.where(erased, 0.0, var)
    erased_blocks |= np.any(erased, axis=-1)

    pre, post = stage1_inverse(cfg, payload, p, det, var)
    bits = qam_hard_demod(post, cfg.qam_order)
    from .metrics import decision_evm_db
    evm = np.array([decision_evm_db(row, cfg.qam_order) for row in post]) if post.size else np.zeros(0)
    return RxResult(bits, post, pre, evm, erased_blocks, responses[1:])


# --------------------------------------------------------------- sync / frame


def sync_sequence(length: int = 256, root: int = SYNC_ROOT) -> np.ndarray:
    """Zadoff-Chu sequence: constant amplitude, ideal periodic autocorrelation."""
    if length < 1:
        raise RejectedInputError("sync length must be positive")
    n = np.arange(length)
    if length % 2 == 0:
        return np.exp(-1j * np.pi * root * n * n / length)
    return np.exp(-1j * np.pi * root * n * (n + 1) / length)


def correlation_metric(stream, sync_seq) -> np.ndarray:
    """Normalized cross-correlation magnitude at every admissible lag."""
    x = np.asarray(stream, dtype=complex)
    s = np.asarray(sync_seq, dtype=complex)
    if x.size <= s.size:
        raise RejectedInputError("stream must be longer than the sync sequence")
    corr = np.abs(signal.correlate(x, s, mode="valid", method="fft"))
    power = np.abs(x) ** 2
    csum = np.concatenate([[0.0], np.cumsum(power)])
    win = np.maximum(csum[s.size:] - csum[:-s.size], 0.0)
    denom = np.sqrt(win * np.sum(np.abs(s) ** 2))
    # round-off guard: windows with no energy cannot match
    return np.where(denom > 1e-12, corr / np.where(denom > 1e-12, denom, 1.0), 0.0)


def synchronize(stream, sync_seq, threshold: float = 0.5) -> int:
    """Start index of ``sync_seq`` in ``stream`` (earliest index among equal peaks)."""
    metric = correlation_metric(stream, sync_seq)
    peak = float(metric.max())
    if peak < threshold:
        raise SyncFailureError(f"sync peak {peak:.3f} below threshold {threshold}", peak_metric=peak)
    return int(np.flatnonzero(metric >= peak - 1e-12)[0])


@dataclass
class FrameSchedule:
    """Sample offsets of the parts of one frame."""
    sample_rate_hz: float
    total_samples: int
    sync_samples: int
    guard_samples: int
    guard_duration_s: float
    rows: list = field(default_factory=list)

    @property
    def payload_samples(self) -> int:
        return sum(r["length"] for r in self.rows)

    def write_csv(self, path, header_comments=()):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            for line in header_comments:
                fh.write(f"# {line}\n")
            w = csv.DictWriter(fh, fieldnames=["subframe", "offset", "length", "n_blocks", "start_s"])
            w.writeheader()
            for r in self.rows:
                w.writerow(r)
        return path


def build_frame(fcfg: FrameConfig, cfg: WaveformConfig, payload: list[TxBlockSet],
                sync_seq=None) -> tuple[np.ndarray, FrameSchedule]:
    """Sync preamble, then each payload set in order, then silence to the frame end."""
    rate = cfg.sample_rate_hz
    total = fcfg.total_samples(rate)
    guard = fcfg.guard_samples(rate)
    sync = sync_sequence(cfg.sync_len) if sync_seq is None else np.asarray(sync_seq, complex)
    required = sync.size + sum(len(p) for p in payload)
    if required > total - guard:
        raise FrameCapacityError(required, total - guard)
    stream = np.zeros(total, dtype=complex)
    stream[: sync.size] = sync
    sched = FrameSchedule(rate, total, sync.size, guard, fcfg.guard_gap_s)
    pos = sync.size
    for i, part in enumerate(payload):
        stream[pos:pos + len(part)] = part.time_samples
        sched.rows.append({"subframe": i, "offset": pos, "length": len(part),
                           "n_blocks": part.n_blocks, "start_s": pos / rate})
        pos += len(part)
    return stream, sched


# ------------------------------------------------------------------- I/Q I/O


def write_iq(path, samples) -> Path:
    """Interleaved little-endian float32 I/Q."""
    x = np.asarray(samples, dtype=complex)
    inter = np.empty(2 * x.size, dtype="<f4")
    inter[0::2] = x.real
    inter[1::2] = x.imag
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    inter.tofile(path)
    return path


def read_iq(path) -> np.ndarray:
    raw = np.fromfile(path, dtype="<f4")
    if raw.size % 2:
        raise FramingError("I/Q file has an odd number of floats")
    return raw[0::2].astype(float) + 1j * raw[1::2].astype(float)
