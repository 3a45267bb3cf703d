"""DFT matrices, real-block decomposition and the learned linear transforms.

A :class:`LinearTransform` is a real affine map ``x = (W * mask) @ s + b``.
The transmit side of a compressed chain uses a ``2Q x 2M`` forward map and
the receiver a ``2M x 2Q`` inverse map, bundled as a :class:`TransformPair`.

Frequency layout: payloads of length ``Q`` are placed on the centre of an
``N``-point spectrum written in fft-shifted order (index ``N // 2`` is DC).
:func:`payload_bins` converts those centre positions to FFT bin numbers and
is the only place that mapping is defined.
"""
from __future__ import annotations

import hashlib
import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import RejectedInputError
from .numerics import pack_complex_to_real, unpack_real_to_complex

ACTIVATIONS = ("linear",)


def dft_matrix(n: int, direction: str = "forward") -> np.ndarray:
    """Unitary ``n``-point DFT (``forward``) or IDFT (``inverse``) matrix."""
    if n < 1:
        raise RejectedInputError("DFT size must be at least 1")
    if direction not in ("forward", "inverse"):
        raise RejectedInputError(f"unknown direction {direction!r}")
    k = np.arange(n)
    sign = -1.0 if direction == "forward" else 1.0
    # reduce the exponent mod n before scaling to keep large-n entries accurate
    phase = (np.outer(k, k) % n) * (2.0 * np.pi / n)
    return np.exp(sign * 1j * phase) / np.sqrt(n)


def centered_dft_matrix(m: int) -> np.ndarray:
    """DFT whose output rows are ordered by signed frequency (DC in the middle).

    This is the single-carrier precoder: its outputs drop straight onto the
    centred payload positions of the second stage.
    """
    return np.fft.fftshift(dft_matrix(m), axes=0)


def real_block_of(g) -> np.ndarray:
    """``[[Re G, -Im G], [Im G, Re G]]`` so that ``real_block_of(G) @ pack(v) == pack(G @ v)``."""
    g = np.atleast_2d(np.asarray(g, dtype=complex))
    return np.block([[g.real, -g.imag], [g.imag, g.real]])


def complex_of_real_block(w) -> np.ndarray:
    """Complex matrix read from the top half of a real-block matrix."""
    w = np.asarray(w, dtype=float)
    k, l2 = w.shape[0] // 2, w.shape[1] // 2
    return w[:k, :l2] - 1j * w[:k, l2:]


# ---------------------------------------------------------------- transforms


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class LinearTransform:
    weights: np.ndarray
    bias: np.ndarray = None
    activation: str = "linear"
    prune_mask: np.ndarray = None

    def __post_init__(self):
        w = _frozen(np.atleast_2d(self.weights), float)
        rows, cols = w.shape
        b = np.zeros(rows) if self.bias is None else self.bias
        m = np.ones((rows, cols), dtype=bool) if self.prune_mask is None else self.prune_mask
        b = _frozen(b, float)
        m = _frozen(m, bool)
        if b.shape != (rows,):
            raise RejectedInputError(f"bias length {b.shape} does not match {rows} rows")
        if m.shape != w.shape:
            raise RejectedInputError("prune mask shape must equal weight shape")
        if self.activation not in ACTIVATIONS:
            raise RejectedInputError(f"activation {self.activation!r} not supported")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "prune_mask", m)

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    @property
    def effective_weights(self) -> np.ndarray:
        return self.weights * self.prune_mask

    def replace(self, **changes) -> "LinearTransform":
        kw = dict(weights=self.weights, bias=self.bias, activation=self.activation,
                  prune_mask=self.prune_mask)
        kw.update(changes)
        return LinearTransform(**kw)


def apply(t: LinearTransform, s) -> np.ndarray:
    """Evaluate ``t`` on a packed vector or a batch of them (one per row)."""
    s = np.asarray(s, dtype=float)
    if s.shape[-1] != t.cols:
        raise RejectedInputError(f"input length {s.shape[-1]} != transform cols {t.cols}")
    out = s @ t.effective_weights.T + t.bias
    # the only activation is linear, so there is nothing else to do
    return out


@dataclass(frozen=True, eq=False)
class TransformPair:
    forward: LinearTransform
    inverse: LinearTransform
    M: int
    Q: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        f, i = self.forward, self.inverse
        if f.cols != 2 * self.M or f.rows != 2 * self.Q:
            raise RejectedInputError(f"forward must be {2*self.Q}x{2*self.M}, got {f.rows}x{f.cols}")
        if i.cols != 2 * self.Q or i.rows != 2 * self.M:
            raise RejectedInputError(f"inverse must be {2*self.M}x{2*self.Q}, got {i.rows}x{i.cols}")
        if not 0 < self.Q <= self.M:
            raise RejectedInputError("compression factor Q/M must lie in (0, 1]")

    @property
    def alpha(self) -> float:
        return self.Q / self.M

    def correlation(self) -> np.ndarray:
        """Effective ``2M x 2M`` map ``C = W_inv @ W_fwd`` (biases excluded)."""
        return self.inverse.effective_weights @ self.forward.effective_weights

    def block_energy(self) -> float:
        """Expected ``||forward(s)||^2`` for unit-energy i.i.d. QAM input."""
        w = self.forward.effective_weights
        return 0.5 * float(np.sum(w * w)) + float(self.forward.bias @ self.forward.bias)


def legacy_pair(m: int) -> TransformPair:
    """Exact real-valued emulation of the centred DFT precoder and its inverse."""
    g = real_block_of(centered_dft_matrix(m))
    return TransformPair(LinearTransform(g), LinearTransform(g.T.copy()), m, m,
                         meta={"origin": "legacy"})


def sinc_truncated_pair(m: int, q: int) -> TransformPair:
    """DFT precoding that keeps only the centre ``q`` of ``m`` outputs."""
    f = centered_dft_matrix(m)
    start = (m - q) // 2
    g = real_block_of(f[start:start + q])
    return TransformPair(LinearTransform(g), LinearTransform(g.T.copy()), m, q,
                         meta={"origin": "sinc_truncated"})


def mc_legacy_pair(n: int) -> TransformPair:
    """``2N x 2N`` multi-carrier generator equal to the unitary IDFT (OFDM)."""
    g = real_block_of(dft_matrix(n, "inverse"))
    return TransformPair(LinearTransform(g), LinearTransform(g.T.copy()), n, n,
                         meta={"origin": "mc_legacy"})


# ------------------------------------------------------- padding / bin map


def _check_q_n(q, n):
    if q > n:
        raise RejectedInputError(f"payload length {q} exceeds FFT size {n}")
    if q < 0:
        raise RejectedInputError("payload length must be non-negative")


def pad_offset(q: int, n: int) -> int:
    """Leading zeros; an odd surplus puts the extra zero at the end."""
    return (n - q) // 2


def zero_pad_symmetric(v, n: int) -> np.ndarray:
    v = np.asarray(v)
    q = v.shape[-1]
    _check_q_n(q, n)
    out = np.zeros(v.shape[:-1] + (n,), dtype=np.result_type(v.dtype, complex))
    start = pad_offset(q, n)
    out[..., start:start + q] = v
    return out


def truncate_symmetric(v, q: int) -> np.ndarray:
    v = np.asarray(v)
    n = v.shape[-1]
    _check_q_n(q, n)
    start = pad_offset(q, n)
    return v[..., start:start + q]


def payload_bins(q: int, n: int) -> np.ndarray:
    """FFT bin index of each centred payload position (``n // 2`` maps to DC)."""
    _check_q_n(q, n)
    pos = pad_offset(q, n) + np.arange(q)
    return (pos - n // 2) % n


def centered_to_bins(v) -> np.ndarray:
    """Centred (fft-shifted) spectrum to natural FFT bin order."""
    return np.fft.ifftshift(v, axes=-1)


def bins_to_centered(v) -> np.ndarray:
    return np.fft.fftshift(v, axes=-1)


# --------------------------------------------------------------- irSinc


def row_as_complex(t: LinearTransform, row_index: int) -> np.ndarray:
    """Complex coefficient vector realized by one (1-based) row of ``t``."""
    if not 1 <= row_index <= t.rows:
        raise RejectedInputError(f"row index {row_index} outside 1..{t.rows}")
    w = t.effective_weights[row_index - 1]
    half = t.cols // 2
    if row_index <= t.rows // 2:
        # real-part output row: [Re g, -Im g]
        return w[:half] - 1j * w[half:]
    # imaginary-part output row: [Im g, Re g]
    return w[half:] + 1j * w[:half]


def irsinc_response(t: LinearTransform, row_index: int, oversample: int = 8) -> np.ndarray:
    """Peak-normalized oversampled magnitude response of one transform row.

    Plot helper for subcarrier shapes. A zero row gives an all-zero spectrum
    and a ``RuntimeWarning`` instead of a division by zero.
    """
    if oversample < 4:
        raise RejectedInputError("oversample must be at least 4")
    g = row_as_complex(t, row_index)
    spec = np.abs(np.fft.fftshift(np.fft.fft(g, n=oversample * g.size)))
    peak = spec.max()
    if peak == 0:
        warnings.warn("degenerate all-zero transform row; normalization skipped", RuntimeWarning)
        return spec
    return spec / peak


# ---------------------------------------------------------- serialization

MAGIC = b"WLXP"
FORMAT_VERSION = 1


def _pack_transform(t: LinearTransform) -> bytes:
    tag = t.activation.encode("ascii")
    mask_bits = np.packbits(t.prune_mask.ravel())
    return b"".join([
        struct.pack("<H", len(tag)), tag,
        struct.pack("<II", t.rows, t.cols),
        t.weights.astype("<f8").tobytes(order="C"),
        t.bias.astype("<f8").tobytes(),
        mask_bits.tobytes(),
    ])


def _unpack_transform(buf: memoryview, pos: int):
    (tag_len,) = struct.unpack_from("<H", buf, pos)
    pos += 2
    tag = bytes(buf[pos:pos + tag_len]).decode("ascii")
    pos += tag_len
    rows, cols = struct.unpack_from("<II", buf, pos)
    pos += 8
    n = rows * cols
    w = np.frombuffer(buf, dtype="<f8", count=n, offset=pos).reshape(rows, cols)
    pos += 8 * n
    b = np.frombuffer(buf, dtype="<f8", count=rows, offset=pos)
    pos += 8 * rows
    nbytes = (n + 7) // 8
    mask = np.unpackbits(np.frombuffer(buf, dtype=np.uint8, count=nbytes, offset=pos))[:n]
    pos += nbytes
    t = LinearTransform(w, b, tag, mask.reshape(rows, cols).astype(bool))
    return t, pos


def pair_to_bytes(pair: TransformPair, metadata: dict | None = None) -> bytes:
    meta = dict(pair.meta)
    meta.update(metadata or {})
    meta.update(M=pair.M, Q=pair.Q)
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    return b"".join([
        MAGIC, struct.pack("<H", FORMAT_VERSION),
        _pack_transform(pair.forward), _pack_transform(pair.inverse),
        struct.pack("<I", len(meta_bytes)), meta_bytes,
    ])


def pair_from_bytes(data: bytes) -> TransformPair:
    buf = memoryview(data)
    if bytes(buf[:4]) != MAGIC:
        raise RejectedInputError("not a transform-pair file (bad magic)")
    (version,) = struct.unpack_from("<H", buf, 4)
    if version != FORMAT_VERSION:
        raise RejectedInputError(f"unsupported transform file version {version}")
    fwd, pos = _unpack_transform(buf, 6)
    inv, pos = _unpack_transform(buf, pos)
    (mlen,) = struct.unpack_from("<I", buf, pos)
    meta = json.loads(bytes(buf[pos + 4:pos + 4 + mlen]).decode("utf-8"))
    return TransformPair(fwd, inv, int(meta["M"]), int(meta["Q"]), meta=meta)


def save_pair(pair: TransformPair, path, metadata: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(pair_to_bytes(pair, metadata))
    return path


def load_pair(path) -> TransformPair:
    return pair_from_bytes(Path(path).read_bytes())


def digest(obj) -> str:
    """Short stable hash of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def pack(v):
    return pack_complex_to_real(v)


def unpack(v):
    return unpack_real_to_complex(v)
