"""Monte Carlo link simulation: bits -> chain -> channel -> receiver -> error counts.

Work is split into fixed-size chunks, each with its own random stream derived
from ``(seed, *keys, chunk_index)``. Results therefore do not depend on how
many workers run the chunks, and two schemes simulated with the same seed and
keys see the same bits and the same normalized noise draws.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chains import WaveformConfig, rx, tx
from .channel import AwgnSpec, ChannelSpec, add_awgn, apply_fir, channel_freq_response, draw_block_gains
from .detection import DetectorConfig
from .metrics import EVM_FLOOR_DB, BerEstimate
from .numerics import make_rng, random_bits
from .transforms import TransformPair

CHUNK_BITS = 200_000


@dataclass(frozen=True)
class SimResult:
    errors: int
    bits: int
    err_energy: float
    ref_energy: float

    def __add__(self, other):
        return SimResult(self.errors + other.errors, self.bits + other.bits,
                         self.err_energy + other.err_energy, self.ref_energy + other.ref_energy)

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else 0.0

    @property
    def estimate(self) -> BerEstimate:
        return BerEstimate(self.errors, self.bits)

    @property
    def evm_db(self) -> float:
        if self.err_energy <= 0:
            return EVM_FLOOR_DB
        return max(EVM_FLOOR_DB, 10.0 * math.log10(self.err_energy / self.ref_energy))


def awgn_for(cfg: WaveformConfig, ebn0_db: float, include_cp: bool = False) -> AwgnSpec:
    return AwgnSpec(ebn0_db=ebn0_db, bits_per_symbol=cfg.bits_per_symbol, alpha=cfg.alpha,
                    occupancy=cfg.occupancy, cp_fraction=cfg.mean_cp_fraction,
                    include_cp_overhead=include_cp)


def run_chunk(cfg: WaveformConfig, pair: TransformPair | None, ebn0_db: float, n_blocks: int,
              rng_keys: tuple, channel: ChannelSpec | None = None,
              det: DetectorConfig | None = None, estimation: str = "perfect",
              include_cp: bool = False) -> SimResult:
    """Simulate ``n_blocks`` data blocks.

    ``estimation`` is ``perfect`` (true channel response handed to the
    receiver) or ``pilot`` (pilot blocks interleaved and estimated, hold-last).
    """
    rng = make_rng(*rng_keys)
    bits = random_bits(rng, n_blocks * cfg.bits_per_block)
    use_pilots = estimation == "pilot"
    txs = tx(cfg, bits, pair, pilots=use_pilots)
    stream = txs.time_samples
    est = None
    if channel is not None:
        block_samples = cfg.N + int(cfg.cp_lengths(1)[0])
        fade_rng = make_rng(channel.seed, *rng_keys[1:], 0xFAD)
        interval = block_samples * (channel.block_len if channel.fading == "rayleigh_block" else 1)
        n_groups = max(1, -(-stream.size // interval))
        gains = draw_block_gains(channel, n_groups, fade_rng)
        stream = apply_fir(stream, channel, block_samples, gains=gains)
        if not use_pilots:
            if channel.fading != "static":
                raise ValueError("perfect-CSI simulation of a fading channel is not supported;"
                                 " use pilot estimation")
            est = channel_freq_response(channel, cfg.N)
    awgn = awgn_for(cfg, ebn0_db, include_cp)
    noise_rng = make_rng(*rng_keys, 0xA3)
    received = add_awgn(stream, awgn, noise_rng, signal_power=1.0)
    var = awgn.noise_variance(1.0)
    res = rx(cfg, received, pair, est, det, noise_var=var,
             pilot_flags=txs.pilot_flags if use_pilots else None)
    errors = int(np.count_nonzero(res.bits != bits))
    err = float(np.sum(np.abs(res.soft_symbols - txs.symbols) ** 2))
    ref = float(np.sum(np.abs(txs.symbols) ** 2))
    return SimResult(errors, bits.size, err, ref)


def _run_chunk_args(args):
    return run_chunk(*args)


def simulate_ber(cfg: WaveformConfig, pair: TransformPair | None, ebn0_db: float, n_bits: int,
                 seed: int, keys: tuple = (), channel: ChannelSpec | None = None,
                 det: DetectorConfig | None = None, estimation: str = "perfect",
                 include_cp: bool = False, jobs: int = 1, chunk_bits: int = CHUNK_BITS) -> SimResult:
    """At least ``n_bits`` bits through the link (rounded up to whole blocks)."""
    blocks_per_chunk = max(1, chunk_bits // cfg.bits_per_block)
    n_blocks = max(1, -(-n_bits // cfg.bits_per_block))
    sizes = []
    while n_blocks > 0:
        sizes.append(min(blocks_per_chunk, n_blocks))
        n_blocks -= sizes[-1]
    tasks = [(cfg, pair, ebn0_db, nb, (seed, *keys, i), channel, det, estimation, include_cp)
             for i, nb in enumerate(sizes)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_chunk_args, tasks))
    else:
        parts = [_run_chunk_args(t) for t in tasks]
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total
