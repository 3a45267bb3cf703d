"""Two-stage training of the compressed transform pair.

Stage 1 learns a real ``2M x 2M`` pair that emulates DFT precoding and its
inverse. Stage 2 cuts the forward map to ``2Q`` outputs and fine-tunes both
maps by minibatch SGD on the symbol MSE measured through the actual chain
(padding, IFFT, AWGN, FFT, truncation). Every ``checkpoint_every``
iterations the pair is scored by the post-detection MSE gap to SC-OFDM on a
fixed validation stream; training stops at the first checkpoint that does
not improve and returns the best pair seen.

Stage-2 initialization
----------------------
Keeping only the centre ``Q`` rows of the DFT discards the energy of the
``M - Q`` edge outputs, which is the sinc-truncation baseline: its loss is
irrecoverable and it is also a stationary point of the MSE objective, so SGD
started there does not leave it. The default ``fold`` initialization keeps
the centre rows and adds the discarded rows back, mixed by a random
isometry ``S`` (``Q x (M - Q)``, orthonormal columns) and scaled by
``fold_gain``::

    W* = F_centre + fold_gain * S @ F_edge

The folded energy lets the detector recover every symbol, while a moderate
gain keeps the waveform close to single-carrier so its PAPR stays near that
of SC-OFDM. ``fold_gain = 0`` reproduces plain truncation.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .chains import WaveformConfig
from .detection import DetectorConfig, iterative_detect
from .errors import RejectedInputError, TrainingFailureError
from .numerics import make_rng, pack_complex_to_real
from .transforms import (
    LinearTransform,
    TransformPair,
    centered_dft_matrix,
    complex_of_real_block,
    digest,
    real_block_of,
    truncate_symmetric,
    zero_pad_symmetric,
)

INITS = ("fold", "truncate", "random")
# stage-1 loss at which the emulation is exact to machine precision
STAGE1_CONVERGED = 1e-20


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    iterations: int = 1000
    train_symbols: int = 600_000
    batch_size: int = 512
    seed: int = 0
    train_ebn0_db: float = 10.0
    prune_threshold: float = 0.0
    loss: str = "mse"
    stage1_init: str = "analytic"
    stage1_iterations: int | None = None
    stage1_tolerance: float = 1e-6
    init: str = "fold"
    fold_gain: float = 0.6
    checkpoint_every: int = 50
    validation_bits: int = 100_000
    eval_ebn0_db: float = 7.0
    eval_bits: int = 100_000
    refine_iterations: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise RejectedInputError("learning_rate must be positive")
        if self.iterations < 1 or self.batch_size < 1:
            raise RejectedInputError("iterations and batch_size must be >= 1")
        if not 0 <= self.prune_threshold < 1:
            raise RejectedInputError("prune_threshold must lie in [0, 1)")
        if self.loss != "mse":
            raise RejectedInputError(f"loss {self.loss!r} not supported")
        if self.stage1_init not in ("analytic", "random"):
            raise RejectedInputError("stage1_init must be 'analytic' or 'random'")
        if self.init not in INITS:
            raise RejectedInputError(f"init must be one of {INITS}")
        if self.checkpoint_every < 1:
            raise RejectedInputError("checkpoint_every must be >= 1")

    def digest(self) -> str:
        return digest(asdict(self))


@dataclass
class TrainReport:
    loss_curve: list
    final_ber_gap: float
    prune_ratio: float
    wall_time: float
    config_digest: str
    checkpoints: list = field(default_factory=list)
    best_iteration: int = 0
    stopped_at: int = 0
    train_ebn0_db: float = 10.0
    batch_size: int = 512

    def write(self, out_dir, stem: str = "train") -> tuple[Path, Path]:
        """CSV loss curve plus JSON metadata."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        curve = out / f"{stem}_loss.csv"
        with curve.open("w", newline="") as fh:
            fh.write(f"# config_digest={self.config_digest}\n")
            w = csv.writer(fh)
            w.writerow(["iteration", "mse"])
            for i, v in enumerate(self.loss_curve):
                w.writerow([i, repr(float(v))])
        meta = out / f"{stem}_report.json"
        d = asdict(self)
        d.pop("loss_curve")
        d["iterations_run"] = len(self.loss_curve)
        meta.write_text(json.dumps(d, indent=2, sort_keys=True, default=float))
        return curve, meta


# ------------------------------------------------------------------ pruning


def prune(t: LinearTransform, threshold: float) -> LinearTransform:
    """Mask every connection with ``|w| < threshold * max|w|`` (weights are kept)."""
    if not 0 <= threshold < 1:
        raise RejectedInputError("prune threshold must lie in [0, 1)")
    mag = np.abs(t.weights)
    mask = mag >= threshold * mag.max()
    return t.replace(prune_mask=mask)


def prune_ratio(t: LinearTransform) -> float:
    return 1.0 - float(np.mean(t.prune_mask))


# ------------------------------------------------------------------ stage 1


def _qpsk_packed(rng, n_vectors, m):
    return rng.choice(np.array([-1.0, 1.0]) / math.sqrt(2.0), size=(n_vectors, 2 * m))


def stage1_learn_legacy(M: int, cfg: TrainConfig = TrainConfig()) -> tuple[TransformPair, list]:
    """Learn a pair emulating the centred DFT precoder (``Q = M``).

    The loss per vector is ``||fwd(s) - G s||^2 + ||inv(G s) - s||^2`` with
    ``G`` the real form of the precoder; it is averaged over the batch.
    Returns the pair and the per-iteration loss curve. Iteration stops early
    once the loss reaches machine precision, which the analytic start does
    immediately.
    """
    if M < 2:
        raise RejectedInputError("stage 1 needs M >= 2")
    g = real_block_of(centered_dft_matrix(M))
    rng = make_rng(cfg.seed, 1)
    if cfg.stage1_init == "analytic":
        wf, wi = g.copy(), g.T.copy()
    else:
        wf = rng.standard_normal(g.shape) * 0.1
        wi = rng.standard_normal(g.shape) * 0.1
    bf = np.zeros(2 * M)
    bi = np.zeros(2 * M)
    iters = cfg.stage1_iterations if cfg.stage1_iterations is not None else cfg.iterations
    curve = []
    lr, bs = cfg.learning_rate, cfg.batch_size
    for _ in range(iters):
        s = _qpsk_packed(rng, bs, M)
        legacy = s @ g.T
        e1 = s @ wf.T + bf - legacy
        e2 = legacy @ wi.T + bi - s
        loss = float(np.mean(np.sum(e1 * e1, axis=1) + np.sum(e2 * e2, axis=1)))
        if not math.isfinite(loss):
            raise TrainingFailureError("stage-1 loss diverged", curve)
        curve.append(loss)
        if loss < STAGE1_CONVERGED:
            break
        wf -= lr * 2.0 / bs * e1.T @ s
        bf -= lr * 2.0 / bs * e1.sum(axis=0)
        wi -= lr * 2.0 / bs * e2.T @ legacy
        bi -= lr * 2.0 / bs * e2.sum(axis=0)
    pair = TransformPair(LinearTransform(wf, bf), LinearTransform(wi, bi), M, M,
                         meta={"origin": "stage1", "stage1_init": cfg.stage1_init})
    held = _qpsk_packed(make_rng(cfg.seed, 2), 1000, M)
    rt = (held @ wf.T + bf) @ wi.T + bi
    mse = float(np.mean((rt - held) ** 2))
    if not mse < cfg.stage1_tolerance:
        raise TrainingFailureError(f"stage-1 round-trip MSE {mse:.3e} above tolerance", curve)
    return pair, curve


# ------------------------------------------------------------------ stage 2


def _isometry(rng, rows, cols):
    a = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, _ = np.linalg.qr(a)
    return q


def _normalize_power(w, m):
    return w * math.sqrt(2 * m / float(np.sum(w * w)))


def stage2_init(pair: TransformPair, Q: int, cfg: TrainConfig) -> np.ndarray:
    """Initial ``2Q x 2M`` forward weights (see module docstring)."""
    M = pair.M
    rng = make_rng(cfg.seed, 3)
    if cfg.init == "random":
        a = rng.standard_normal((2 * M, 2 * M))
        q, _ = np.linalg.qr(a)
        return _normalize_power(q[: 2 * Q].copy(), M)
    g = complex_of_real_block(pair.forward.weights)
    start = (M - Q) // 2
    centre = g[start:start + Q]
    if cfg.init == "truncate" or Q == M or cfg.fold_gain == 0:
        return real_block_of(centre)
    edge = np.concatenate([g[:start], g[start + Q:]])
    w = centre + cfg.fold_gain * _isometry(rng, Q, M - Q) @ edge
    return _normalize_power(real_block_of(w), M)


class _Chain:
    """Literal noisy SC-NOFS chain used for training and validation."""

    def __init__(self, wcfg: WaveformConfig, Q: int):
        self.N, self.Q, self.M = wcfg.N, Q, wcfg.M
        self.bps = wcfg.bits_per_symbol

    def noise_std(self, wf, bf, ebn0_db):
        energy = 0.5 * float(np.sum(wf * wf)) + float(bf @ bf)
        var = energy / (10.0 ** (ebn0_db / 10.0) * self.M * self.bps)
        return math.sqrt(var / 2.0)

    def received(self, x, z, std):
        """Packed payload ``x`` -> pad -> IFFT -> noise -> FFT -> truncate."""
        q = self.Q
        xc = x[:, :q] + 1j * x[:, q:]
        grid = np.fft.ifftshift(zero_pad_symmetric(xc, self.N), axes=1)
        t = np.fft.ifft(grid, axis=1, norm="ortho") + std * z
        back = np.fft.fftshift(np.fft.fft(t, axis=1, norm="ortho"), axes=1)
        return pack_complex_to_real(truncate_symmetric(back, q))


def _validation_set(cfg, M, N, n_vectors):
    rng = make_rng(cfg.seed, 4)
    s = _qpsk_packed(rng, n_vectors, M)
    z = rng.standard_normal((n_vectors, N)) + 1j * rng.standard_normal((n_vectors, N))
    return s, z


def _reference_mse(s, z, wcfg, ebn0_db):
    """Post-detection MSE of SC-OFDM for the same symbols and noise draws."""
    M = wcfg.M
    # per-bin variance after undoing the TX scale: 1 / (Eb/N0 * bits per symbol)
    var = 1.0 / (10.0 ** (ebn0_db / 10.0) * wcfg.bits_per_symbol)
    # SC-OFDM is orthogonal: the symbol error is the noise on its M bins, rotated by a unitary map
    zb = truncate_symmetric(np.fft.fftshift(np.fft.fft(z, axis=1, norm="ortho"), axes=1), M)
    sc = np.fft.ifft(np.fft.ifftshift(zb, axes=1), axis=1, norm="ortho") * math.sqrt(var / 2.0)
    return float(np.mean(pack_complex_to_real(sc) ** 2))


def _post_detection_mse(wf, bf, wi, bi, s, z, chain, ebn0_db, M, Q, det):
    pair = TransformPair(LinearTransform(wf, bf), LinearTransform(wi, bi), M, Q)
    std = chain.noise_std(wf, bf, ebn0_db)
    y_in = chain.received(s @ wf.T + bf, z, std)
    y = y_in @ wi.T + bi
    nv = np.full(2 * Q, std * std) @ (wi * wi).T
    r = iterative_detect(y, pair, det, nv)
    return float(np.mean((r - s) ** 2))


def stage2_compress(pair: TransformPair, Q: int, cfg: TrainConfig, wcfg: WaveformConfig,
                    det: DetectorConfig | None = None) -> tuple[TransformPair, TrainReport]:
    """Compress a stage-1 pair to ``Q`` outputs and fine-tune it (see module docstring)."""
    t0 = time.perf_counter()
    M = pair.M
    if Q > M:
        raise RejectedInputError(f"compression factor exceeds 1 (Q={Q} > M={M})")
    if Q < 1 or Q > wcfg.N:
        raise RejectedInputError(f"Q={Q} must lie in 1..N={wcfg.N}")
    if wcfg.M != M:
        raise RejectedInputError(f"waveform M={wcfg.M} differs from the pair's M={M}")
    det = det or DetectorConfig(qam_order=wcfg.qam_order)
    chain = _Chain(wcfg, Q)

    wf = stage2_init(pair, Q, cfg)
    wi = wf.T.copy()
    bf = np.zeros(2 * Q)
    bi = np.zeros(2 * M)
    mask_f = np.ones_like(wf, dtype=bool)
    mask_i = np.ones_like(wi, dtype=bool)

    rng = make_rng(cfg.seed, 5)
    pool = _qpsk_packed(rng, max(1, cfg.train_symbols // M), M)
    n_val = max(1, -(-cfg.validation_bits // (2 * M)))
    val_s, val_z = _validation_set(cfg, M, wcfg.N, n_val)
    ref_mse = _reference_mse(val_s, val_z, wcfg, cfg.train_ebn0_db)

    def score(wf_, bf_, wi_, bi_):
        return _post_detection_mse(wf_, bf_, wi_, bi_, val_s, val_z, chain,
                                   cfg.train_ebn0_db, M, Q, det) - ref_mse

    best = (wf.copy(), bf.copy(), wi.copy(), bi.copy())
    best_gap = score(*best)
    checkpoints = [(0, best_gap)]
    best_iter = 0
    curve = []
    cursor = 0

    def sgd(n_iter, stop_rule):
        nonlocal wf, bf, wi, bi, cursor, best, best_gap, best_iter
        bs = cfg.batch_size
        lr = cfg.learning_rate
        for it in range(n_iter):
            idx = (cursor + np.arange(bs)) % pool.shape[0]
            cursor = (cursor + bs) % pool.shape[0]
            s = pool[idx]
            z = rng.standard_normal((bs, wcfg.N)) + 1j * rng.standard_normal((bs, wcfg.N))
            std = chain.noise_std(wf, bf, cfg.train_ebn0_db)
            y_in = chain.received(s @ wf.T + bf, z, std)
            s_hat = y_in @ wi.T + bi
            e = s_hat - s
            loss = float(np.mean(e * e))
            if not math.isfinite(loss):
                raise TrainingFailureError("stage-2 loss diverged", curve)
            curve.append(loss)
            g_y = e @ wi
            d_wi = 2.0 / bs * e.T @ y_in
            d_bi = 2.0 / bs * e.sum(axis=0)
            # the chain between x and y_in is unitary plus noise, so dL/dx = dL/dy_in
            d_wf = 2.0 / bs * g_y.T @ s
            d_bf = 2.0 / bs * g_y.sum(axis=0)
            wi = (wi - lr * d_wi) * mask_i
            bi = bi - lr * d_bi
            wf = (wf - lr * d_wf) * mask_f
            bf = bf - lr * d_bf
            scale = math.sqrt(2 * M / float(np.sum(wf * wf)))
            wf *= scale
            bf *= scale
            done = len(curve)
            if stop_rule and done % cfg.checkpoint_every == 0:
                gap = score(wf, bf, wi, bi)
                checkpoints.append((done, gap))
                if gap < best_gap:
                    best, best_gap, best_iter = (wf.copy(), bf.copy(), wi.copy(), bi.copy()), gap, done
                else:
                    return

    sgd(cfg.iterations, stop_rule=True)
    stopped_at = len(curve)
    wf, bf, wi, bi = (a.copy() for a in best)

    if cfg.prune_threshold > 0:
        fwd = prune(LinearTransform(wf, bf), cfg.prune_threshold)
        inv = prune(LinearTransform(wi, bi), cfg.prune_threshold)
        mask_f, mask_i = np.array(fwd.prune_mask), np.array(inv.prune_mask)
        wf, wi = wf * mask_f, wi * mask_i
        if cfg.refine_iterations:
            sgd(cfg.refine_iterations, stop_rule=False)
    fwd_t = LinearTransform(wf, bf, prune_mask=mask_f)
    inv_t = LinearTransform(wi, bi, prune_mask=mask_i)
    meta = {"origin": "stage2", "N": wcfg.N, "seed": cfg.seed, "train_digest": cfg.digest(),
            "init": cfg.init, "fold_gain": cfg.fold_gain}
    out = TransformPair(fwd_t, inv_t, M, Q, meta=meta)

    gap = evaluate_ber_gap(out, wcfg.for_scheme("sc_nofs", Q=Q), cfg.eval_ebn0_db,
                           cfg.eval_bits, seed=cfg.seed, det=det) if cfg.eval_bits else float("nan")
    report = TrainReport(
        loss_curve=curve,
        final_ber_gap=gap,
        prune_ratio=1.0 - float(np.mean(mask_f)),
        wall_time=time.perf_counter() - t0,
        config_digest=cfg.digest(),
        checkpoints=checkpoints,
        best_iteration=best_iter,
        stopped_at=stopped_at,
        train_ebn0_db=cfg.train_ebn0_db,
        batch_size=cfg.batch_size,
    )
    return out, report


def evaluate_ber_gap(pair: TransformPair, wcfg: WaveformConfig, ebn0_db: float, n_bits: int,
                     seed: int = 0, det: DetectorConfig | None = None, scheme: str = "sc_nofs") -> float:
    """BER of the compressed scheme minus BER of SC-OFDM, same bits and noise draws.

    ``scheme="sinc_truncated"`` scores the truncation baseline instead (``pair``
    is then ignored).
    """
    if n_bits < 10_000:
        raise RejectedInputError("n_bits must be >= 1e4")
    from .simulate import simulate_ber

    q = pair.Q if pair is not None else wcfg.Q
    cfg = wcfg.for_scheme(scheme, Q=q)
    test = simulate_ber(cfg, pair if scheme == "sc_nofs" else None, ebn0_db, n_bits, seed,
                        keys=(0xBE,), det=det)
    ref = simulate_ber(wcfg.for_scheme("sc_ofdm"), None, ebn0_db, n_bits, seed, keys=(0xBE,))
    return test.ber - ref.ber


def train_pair(M: int, Q: int, N: int, cfg: TrainConfig = TrainConfig(),
               wcfg: WaveformConfig | None = None) -> tuple[TransformPair, TrainReport]:
    """Stage 1 then stage 2 for one ``(M, Q, N)`` configuration."""
    wcfg = wcfg or WaveformConfig(scheme="sc_nofs", M=M, Q=Q, N=N)
    stage1, _ = stage1_learn_legacy(M, cfg)
    return stage2_compress(stage1, Q, cfg, wcfg)
