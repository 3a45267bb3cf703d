import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavelab.chains import (
    FrameConfig,
    WaveformConfig,
    add_cp,
    block_layout,
    build_frame,
    count_blocks,
    deserialize_blocks,
    payload_to_time,
    pilot_time_block,
    read_iq,
    remove_cp,
    resolve_pair,
    rx,
    serialize_blocks,
    stage1_forward,
    sync_sequence,
    synchronize,
    time_to_payload,
    tx,
    write_iq,
)
from wavelab.channel import PDP_H, ChannelSpec, apply_fir, channel_freq_response
from wavelab.errors import (
    ConfigurationError,
    FrameCapacityError,
    FramingError,
    RejectedInputError,
    SyncFailureError,
)
from wavelab.numerics import make_rng, random_bits


def cfg76(scheme="sc_nofs", **kw):
    q = {"sc_nofs": 64, "sinc_truncated": 64}.get(scheme)
    return WaveformConfig(scheme=scheme, M=76, Q=q, N=128, **kw)


class TestWaveformConfig:
    def test_derived_quantities(self):
        c = cfg76()
        assert c.alpha == pytest.approx(0.8421, abs=1e-4)
        assert (c.active_bins, c.cp_len, c.bits_per_block) == (64, 16, 152)
        assert c.sample_rate_hz == 128 * 15000

    def test_q_equal_m_allowed(self):
        assert WaveformConfig(scheme="sc_nofs", M=76, Q=76, N=128).alpha == 1.0

    def test_q_above_m_rejected(self):
        with pytest.raises(ConfigurationError, match="compression factor"):
            WaveformConfig(scheme="sc_nofs", M=76, Q=80, N=128)

    @pytest.mark.parametrize("kw", [
        {"scheme": "sc_ofdm", "M": 76, "Q": 64, "N": 128},
        {"scheme": "sc_ofdm", "M": 200, "N": 128},
        {"scheme": "ofdm", "M": 76, "N": 128, "cp_len": 128},
        {"scheme": "ofdm", "M": 76, "N": 128, "sample_rate_hz": 1e6},
        {"scheme": "bpsk_magic"},
        {"scheme": "ofdm", "qam_order": 32},
        {"scheme": "ofdm", "cp_scheme": "huge"},
    ])
    def test_rejected(self, kw):
        with pytest.raises(ConfigurationError):
            WaveformConfig(**kw)

    def test_check_collects_all_problems(self):
        problems = WaveformConfig.check(scheme="nope", M=10, Q=20, N=8)
        assert len(problems) >= 3

    def test_lte_like_cp_pattern(self):
        c = WaveformConfig(scheme="sc_ofdm", M=600, N=1024, cp_scheme="lte_like")
        assert c.cp_lengths(8).tolist() == [80, 72, 72, 72, 72, 72, 72, 80]
        assert c.mean_cp_fraction == pytest.approx((80 + 6 * 72) / 7 / 1024)

    def test_lte_like_scales_with_n(self):
        c = WaveformConfig(scheme="sc_ofdm", M=76, N=128, cp_scheme="lte_like")
        assert c.cp_lengths(2).tolist() == [10, 9]

    def test_for_scheme_resets_q(self):
        assert cfg76().for_scheme("sc_ofdm").Q == 76
        assert cfg76().for_scheme("sinc_truncated").Q == 64

    def test_missing_pair(self):
        with pytest.raises(ConfigurationError):
            resolve_pair(cfg76(), None)


class TestStages:
    @pytest.mark.parametrize("scheme", ["ofdm", "sc_ofdm"])
    def test_payload_time_round_trip(self, scheme, rng):
        c = cfg76(scheme)
        s = rng.standard_normal((3, 76)) + 1j * rng.standard_normal((3, 76))
        pl = stage1_forward(c, s)
        np.testing.assert_allclose(time_to_payload(c, payload_to_time(c, pl)), pl, atol=1e-12)

    def test_sc_ofdm_is_dft_spread(self, rng):
        c = cfg76("sc_ofdm")
        s = rng.standard_normal(76) + 0j
        spec = np.fft.fft(payload_to_time(c, stage1_forward(c, s))[0], norm="ortho")
        occupied = np.flatnonzero(np.abs(spec) > 1e-9)
        assert occupied.size <= 76
        assert set(occupied) <= set(((np.arange(76) + 26) - 64) % 128)


class TestTxRx:
    @pytest.mark.parametrize("scheme", ["ofdm", "sc_ofdm", "sc_nofs", "mc_nofs"])
    def test_noise_free_round_trip(self, scheme, small_pair, rng):
        c = cfg76(scheme) if scheme != "mc_nofs" else WaveformConfig(scheme="mc_nofs", M=64, N=64, cp_len=8)
        pair = small_pair if scheme == "sc_nofs" else None
        bits = random_bits(rng, 12 * c.bits_per_block)
        t = tx(c, bits, pair, pilots=False)
        r = rx(c, t.time_samples, pair)
        np.testing.assert_array_equal(r.bits, bits)

    @pytest.mark.parametrize("scheme", ["ofdm", "sc_ofdm", "sc_nofs", "sinc_truncated"])
    def test_unit_power_per_sample(self, scheme, small_pair, rng):
        c = cfg76(scheme, cp_len=0, cp_scheme="fixed")
        bits = random_bits(rng, 2000 * c.bits_per_block)
        t = tx(c, bits, small_pair if scheme == "sc_nofs" else None, pilots=False)
        assert np.mean(np.abs(t.time_samples) ** 2) == pytest.approx(1.0, rel=0.02)

    def test_pilot_block_unit_power(self):
        assert np.mean(np.abs(pilot_time_block(cfg76("sc_ofdm"))) ** 2) == pytest.approx(1.0)

    def test_layout_puts_pilot_first(self):
        flags = block_layout(cfg76("sc_ofdm"), 25)
        assert flags.tolist()[:12] == [True] + [False] * 10 + [True]
        assert (~flags).sum() == 25

    @pytest.mark.parametrize("scheme", ["sc_ofdm", "sc_nofs"])
    def test_pilot_estimation_static_channel(self, scheme, small_pair, rng):
        c = cfg76(scheme)
        pair = small_pair if scheme == "sc_nofs" else None
        bits = random_bits(rng, 21 * c.bits_per_block)
        t = tx(c, bits, pair)
        y = apply_fir(t.time_samples, ChannelSpec(PDP_H))
        r = rx(c, y, pair, pilot_flags=t.pilot_flags)
        np.testing.assert_array_equal(r.bits, bits)
        est = r.estimates[0].d[np.array([0, 1, 127])]
        true = channel_freq_response(ChannelSpec(PDP_H), 128).d[np.array([0, 1, 127])]
        np.testing.assert_allclose(est, true, atol=1e-9)

    def test_perfect_csi_static_channel(self, rng):
        c = cfg76("sc_ofdm")
        bits = random_bits(rng, 5 * c.bits_per_block)
        y = apply_fir(tx(c, bits, pilots=False).time_samples, ChannelSpec(PDP_H))
        r = rx(c, y, est=channel_freq_response(ChannelSpec(PDP_H), 128))
        np.testing.assert_array_equal(r.bits, bits)

    def test_mc_nofs_pilot_estimation(self, rng):
        c = WaveformConfig(scheme="mc_nofs", M=64, N=64, cp_len=8)
        bits = random_bits(rng, 10 * c.bits_per_block)
        t = tx(c, bits)
        y = apply_fir(t.time_samples, ChannelSpec(((0, 0.9), (2, 0.3j), (5, -0.2))))
        np.testing.assert_array_equal(rx(c, y, pilot_flags=t.pilot_flags).bits, bits)

    def test_partial_block_rejected(self, rng):
        with pytest.raises(RejectedInputError):
            tx(cfg76("ofdm"), random_bits(rng, 100))

    def test_misaligned_stream(self, rng):
        c = cfg76("ofdm")
        t = tx(c, random_bits(rng, c.bits_per_block), pilots=False)
        with pytest.raises(FramingError):
            rx(c, t.time_samples[:-1])

    def test_deterministic(self, small_pair):
        c = cfg76()
        bits = random_bits(make_rng(3), 4 * c.bits_per_block)
        a = tx(c, bits, small_pair).time_samples
        b = tx(c, bits, small_pair).time_samples
        np.testing.assert_array_equal(a, b)


class TestBlocks:
    @given(st.integers(1, 6), st.integers(0, 15), st.integers(0, 100))
    def test_cp_round_trip(self, n_blocks, cp, seed):
        x = make_rng(seed).standard_normal((n_blocks, 16)) + 0j
        np.testing.assert_array_equal(remove_cp(add_cp(x, cp), cp), x)

    def test_cp_is_tail_copy(self):
        np.testing.assert_array_equal(add_cp(np.arange(6), 2), [4, 5, 0, 1, 2, 3, 4, 5])

    def test_cp_bounds(self):
        with pytest.raises(RejectedInputError):
            add_cp(np.zeros(4), 4)

    @settings(max_examples=30)
    @given(st.lists(st.integers(0, 7), min_size=1, max_size=8), st.integers(0, 100))
    def test_serialize_round_trip(self, cps, seed):
        x = make_rng(seed).standard_normal((len(cps), 8)) + 0j
        stream, bounds = serialize_blocks(x, cps)
        assert bounds[-1] == stream.size
        np.testing.assert_array_equal(deserialize_blocks(stream, 8, cps), x)

    def test_lte_block_count(self):
        c = WaveformConfig(scheme="sc_ofdm", M=76, N=128, cp_scheme="lte_like")
        n = int(np.sum(c.cp_lengths(9) + 128))
        assert count_blocks(c, n) == 9
        with pytest.raises(FramingError):
            count_blocks(c, n + 3)


class TestFraming:
    def test_sync_is_constant_amplitude(self):
        np.testing.assert_allclose(np.abs(sync_sequence(255)), 1.0)

    @pytest.mark.parametrize("offset", [0, 17, 500])
    def test_sync_finds_offset(self, offset, rng):
        s = sync_sequence(64)
        stream = 0.05 * (rng.standard_normal(800) + 1j * rng.standard_normal(800))
        stream[offset:offset + 64] += s
        assert synchronize(stream, s) == offset

    def test_sync_failure(self, rng):
        with pytest.raises(SyncFailureError) as exc:
            synchronize(rng.standard_normal(400) + 0j, sync_sequence(64), threshold=0.9)
        assert exc.value.peak_metric < 0.9

    def test_frame_layout(self, rng, tmp_path):
        c = cfg76("sc_ofdm")
        parts = [tx(c, random_bits(rng, 3 * c.bits_per_block), pilots=False) for _ in range(2)]
        stream, sched = build_frame(FrameConfig(frame_duration_s=0.001), c, parts)
        assert stream.size == 1920
        assert sched.rows[1]["offset"] == 256 + len(parts[0])
        assert synchronize(stream, sync_sequence(256)) == 0
        assert sched.write_csv(tmp_path / "f.csv", ["seed=1"]).read_text().startswith("# seed=1")

    def test_frame_capacity(self, rng):
        c = cfg76("sc_ofdm")
        part = tx(c, random_bits(rng, 20 * c.bits_per_block), pilots=False)
        with pytest.raises(FrameCapacityError) as exc:
            build_frame(FrameConfig(frame_duration_s=0.001), c, [part])
        assert exc.value.required > exc.value.available

    def test_guard_too_long(self):
        with pytest.raises(ConfigurationError):
            FrameConfig(frame_duration_s=0.01, guard_gap_s=0.01)

    def test_iq_round_trip(self, tmp_path, rng):
        x = (rng.standard_normal(50) + 1j * rng.standard_normal(50)).astype(np.complex64)
        path = write_iq(tmp_path / "a.iq", x)
        assert path.stat().st_size == 400
        np.testing.assert_array_equal(read_iq(path), x)
