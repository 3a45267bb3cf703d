import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from wavelab.equalization import (
    FreqResponse,
    circulant_columns,
    equalize_one_tap,
    estimate_one_tap,
    mc_equalize_time_domain,
    mc_estimate_time_domain,
    mc_pilot_matrix,
)
from wavelab.errors import (
    EqualizationSingularityError,
    EstimationSingularityError,
    IllConditionedPilotError,
    RejectedInputError,
)
from wavelab.numerics import make_rng, qam_modulate, random_bits
from wavelab.transforms import LinearTransform, TransformPair, mc_legacy_pair


def cn(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


class TestOneTap:
    def test_noise_free_estimate_is_exact(self, rng):
        d = cn(rng, 64)
        p = qam_modulate(random_bits(rng, 128), 4)
        np.testing.assert_allclose(estimate_one_tap(d * p, p).d, d, atol=1e-12)

    def test_multiple_pilots_average(self, rng):
        d = cn(rng, 16)
        p = np.stack([qam_modulate(random_bits(rng, 32), 4) for _ in range(3)])
        np.testing.assert_allclose(estimate_one_tap(p * d, p).d, d, atol=1e-12)

    def test_sparse_pilots_interpolate_linear_response(self):
        d = np.linspace(1, 2, 32) + 0.5j
        bins = np.arange(0, 32, 4).tolist() + [31]
        tx = np.ones(32)
        np.testing.assert_allclose(estimate_one_tap(d * tx, tx, bins).d, d, atol=1e-12)

    def test_zero_pilot_bin_raises(self):
        tx = np.ones(8)
        tx[3] = 0
        with pytest.raises(EstimationSingularityError) as exc:
            estimate_one_tap(np.ones(8), tx)
        assert exc.value.bins == [3]

    @given(st.integers(0, 10_000))
    def test_equalize_inverts_gains(self, seed):
        rng = make_rng(seed)
        d = cn(rng, 32) + 0.1
        x = cn(rng, 32)
        np.testing.assert_allclose(equalize_one_tap(x * d, FreqResponse(d)), x, rtol=1e-9, atol=1e-9)

    def test_singular_bin_strict(self):
        d = np.array([1, 0, 2], complex)
        with pytest.raises(EqualizationSingularityError) as exc:
            equalize_one_tap(np.array([1, 1, 1]), d)
        np.testing.assert_array_equal(exc.value.erased, [False, True, False])
        np.testing.assert_allclose(exc.value.output, [1, 0, 0.5])

    def test_singular_bin_lenient(self):
        out, erased = equalize_one_tap(np.array([[2, 3]]), np.array([2, 1e-15]), strict=False)
        np.testing.assert_allclose(out, [[1, 0]])
        assert erased.tolist() == [False, True]

    def test_length_mismatch(self):
        with pytest.raises(RejectedInputError):
            equalize_one_tap(np.ones(4), np.ones(5))

    def test_flat_response(self):
        assert np.all(FreqResponse.flat(5).d == 1)
        assert len(FreqResponse.flat(5).to_rows()) == 5


class TestCirculant:
    @settings(max_examples=40)
    @given(st.integers(1, 64), st.integers(0, 10_000))
    def test_matches_scipy(self, n, seed):
        c = cn(make_rng(seed), n)
        np.testing.assert_array_equal(circulant_columns(c), scipy.linalg.circulant(c))

    @settings(max_examples=40)
    @given(st.integers(2, 64), st.integers(0, 10_000))
    def test_diagonalized_by_dft(self, n, seed):
        c = cn(make_rng(seed), n)
        f = np.fft.fft(np.eye(n))
        lam = f @ circulant_columns(c) @ np.linalg.inv(f)
        np.testing.assert_allclose(lam, np.diag(np.fft.fft(c)), atol=1e-8 * n * np.abs(c).sum())

    def test_pilot_matrix_parts_add_up(self, rng):
        base = mc_legacy_pair(16)
        bias = rng.standard_normal(32)
        pair = TransformPair(base.forward.replace(bias=bias), base.inverse, 16, 16)
        s = qam_modulate(random_bits(rng, 32), 4)
        p1, p2 = mc_pilot_matrix(s, pair)
        x = np.fft.ifft(s, norm="ortho") + bias[:16] + 1j * bias[16:]
        np.testing.assert_allclose(p1 + p2, scipy.linalg.circulant(x), atol=1e-12)


class TestTimeDomainEstimation:
    @pytest.mark.parametrize("n,l_taps", [(32, 1), (64, 5), (128, 8)])
    def test_noise_free_recovery(self, n, l_taps, rng):
        pair = mc_legacy_pair(n)
        s = qam_modulate(random_bits(rng, 2 * n), 4)
        x = np.fft.ifft(s, norm="ortho")
        h = cn(rng, l_taps)
        y = np.fft.ifft(np.fft.fft(x) * np.fft.fft(h, n))
        est = mc_estimate_time_domain(y, s, pair, l_taps)
        assert np.max(np.abs(est.h - h)) < 1e-9

    def test_equalizer_undoes_channel(self, rng):
        x = cn(rng, 64)
        h = np.array([1.0, 0.3j, -0.2])
        y = np.fft.ifft(np.fft.fft(x) * np.fft.fft(h, 64))
        np.testing.assert_allclose(mc_equalize_time_domain(y, h), x, atol=1e-10)

    def test_rank_deficient_pilot(self):
        n = 8
        pair = TransformPair(LinearTransform(np.zeros((2 * n, 2 * n))),
                             LinearTransform(np.eye(2 * n)), n, n)
        with pytest.raises(IllConditionedPilotError) as exc:
            mc_estimate_time_domain(np.zeros(n), np.ones(n), pair, 2)
        assert exc.value.condition_number > 1e14 or not np.isfinite(exc.value.condition_number)

    def test_rejects_tap_count(self, rng):
        with pytest.raises(RejectedInputError):
            mc_estimate_time_domain(np.zeros(8), np.ones(8), mc_legacy_pair(8), 9)
