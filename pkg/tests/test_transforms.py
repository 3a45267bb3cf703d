import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wavelab.errors import RejectedInputError
from wavelab.numerics import pack_complex_to_real, unpack_real_to_complex
from wavelab.transforms import (
    FORMAT_VERSION,
    MAGIC,
    LinearTransform,
    TransformPair,
    apply,
    centered_dft_matrix,
    centered_to_bins,
    bins_to_centered,
    complex_of_real_block,
    dft_matrix,
    digest,
    irsinc_response,
    legacy_pair,
    load_pair,
    mc_legacy_pair,
    pair_from_bytes,
    pair_to_bytes,
    payload_bins,
    real_block_of,
    row_as_complex,
    save_pair,
    sinc_truncated_pair,
    truncate_symmetric,
    zero_pad_symmetric,
)

cplx = st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False)


def complex_matrix(rows, cols):
    return arrays(complex, (rows, cols), elements=cplx)


class TestDft:
    @pytest.mark.parametrize("n", [1, 2, 7, 64, 128])
    def test_matches_numpy_fft(self, n, rng):
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        np.testing.assert_allclose(dft_matrix(n) @ x, np.fft.fft(x, norm="ortho"), atol=1e-10)
        np.testing.assert_allclose(dft_matrix(n, "inverse") @ x, np.fft.ifft(x, norm="ortho"), atol=1e-10)

    @pytest.mark.parametrize("n", [3, 16, 1024])
    def test_unitary(self, n):
        f = dft_matrix(n)
        np.testing.assert_allclose(f.conj().T @ f, np.eye(n), atol=1e-9)

    def test_centered_rows_are_signed_frequencies(self):
        x = np.arange(8.0)
        np.testing.assert_allclose(centered_dft_matrix(8) @ x,
                                   np.fft.fftshift(np.fft.fft(x, norm="ortho")), atol=1e-12)

    @pytest.mark.parametrize("bad", [0, -3])
    def test_rejects_empty(self, bad):
        with pytest.raises(RejectedInputError):
            dft_matrix(bad)


class TestRealBlock:
    @settings(max_examples=50)
    @given(st.integers(1, 6), st.integers(1, 6), st.data())
    def test_homomorphism(self, rows, cols, data):
        g = data.draw(complex_matrix(rows, cols))
        v = data.draw(arrays(complex, cols, elements=cplx))
        np.testing.assert_allclose(real_block_of(g) @ pack_complex_to_real(v),
                                   pack_complex_to_real(g @ v), atol=1e-6)

    @settings(max_examples=50)
    @given(st.integers(1, 5), st.data())
    def test_products_commute_with_block_form(self, n, data):
        a = data.draw(complex_matrix(n, n))
        b = data.draw(complex_matrix(n, n))
        np.testing.assert_allclose(real_block_of(a) @ real_block_of(b), real_block_of(a @ b),
                                   atol=1e-6 * (1 + np.abs(a).max() * np.abs(b).max()))

    @given(st.integers(1, 6), st.integers(1, 6), st.data())
    def test_inverse_of_block_form(self, rows, cols, data):
        g = data.draw(complex_matrix(rows, cols))
        np.testing.assert_array_equal(complex_of_real_block(real_block_of(g)), g)


class TestPairs:
    @pytest.mark.parametrize("m", [4, 76, 150])
    def test_legacy_pair_is_exact_inverse(self, m):
        p = legacy_pair(m)
        np.testing.assert_allclose(p.correlation(), np.eye(2 * m), atol=1e-10)

    @pytest.mark.parametrize("m", [8, 76])
    def test_legacy_pair_emulates_precoder(self, m, rng):
        s = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        x = unpack_real_to_complex(apply(legacy_pair(m).forward, pack_complex_to_real(s)))
        np.testing.assert_allclose(x, np.fft.fftshift(np.fft.fft(s, norm="ortho")), atol=1e-10)

    def test_sinc_truncation_keeps_centre_outputs(self, rng):
        s = rng.standard_normal(76) + 1j * rng.standard_normal(76)
        x = unpack_real_to_complex(apply(sinc_truncated_pair(76, 64).forward, pack_complex_to_real(s)))
        full = np.fft.fftshift(np.fft.fft(s, norm="ortho"))
        np.testing.assert_allclose(x, full[6:70], atol=1e-10)

    def test_mc_pair_is_idft(self, rng):
        s = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        x = unpack_real_to_complex(apply(mc_legacy_pair(32).forward, pack_complex_to_real(s)))
        np.testing.assert_allclose(x, np.fft.ifft(s, norm="ortho"), atol=1e-10)

    def test_block_energy_matches_monte_carlo(self, rng):
        p = sinc_truncated_pair(20, 15)
        s = pack_complex_to_real((rng.choice([-1, 1], (20000, 20)) + 1j * rng.choice([-1, 1], (20000, 20)))
                                 / np.sqrt(2))
        mc = np.mean(np.sum(apply(p.forward, s) ** 2, axis=1))
        assert mc == pytest.approx(p.block_energy(), rel=0.01)

    @pytest.mark.parametrize("q,m", [(5, 4), (0, 4)])
    def test_rejects_bad_compression(self, q, m):
        with pytest.raises(RejectedInputError):
            TransformPair(LinearTransform(np.zeros((2 * q, 2 * m))),
                          LinearTransform(np.zeros((2 * m, 2 * q))), m, q)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(RejectedInputError):
            TransformPair(LinearTransform(np.zeros((6, 8))), LinearTransform(np.zeros((8, 8))), 4, 3)

    def test_transform_is_immutable(self):
        t = LinearTransform(np.eye(2))
        with pytest.raises(ValueError):
            t.weights[0, 0] = 5.0

    def test_prune_mask_applies(self):
        t = LinearTransform(np.ones((2, 2)), prune_mask=np.array([[1, 0], [0, 1]], bool))
        np.testing.assert_array_equal(apply(t, np.array([1.0, 2.0])), [1.0, 2.0])

    def test_apply_rejects_wrong_length(self):
        with pytest.raises(RejectedInputError):
            apply(LinearTransform(np.eye(4)), np.zeros(3))


class TestLayout:
    @given(st.integers(1, 64), st.integers(0, 64))
    def test_pad_truncate_round_trip(self, q, extra):
        n = q + extra
        v = np.arange(q) + 1j
        np.testing.assert_array_equal(truncate_symmetric(zero_pad_symmetric(v, n), q), v)

    @given(st.integers(1, 64), st.integers(0, 64))
    def test_padding_energy_preserved(self, q, extra):
        v = np.ones(q)
        assert np.sum(np.abs(zero_pad_symmetric(v, q + extra)) ** 2) == q

    def test_payload_bins_centre_on_dc(self):
        bins = payload_bins(64, 128)
        assert bins[32] == 0
        assert bins[0] == 128 - 32 and bins[-1] == 31

    @given(st.integers(1, 128), st.integers(0, 128))
    def test_payload_bins_agree_with_shift(self, q, extra):
        n = q + extra
        grid = centered_to_bins(zero_pad_symmetric(np.arange(1, q + 1), n))
        np.testing.assert_array_equal(grid[payload_bins(q, n)], np.arange(1, q + 1))

    def test_shift_round_trip(self):
        v = np.arange(9)
        np.testing.assert_array_equal(bins_to_centered(centered_to_bins(v)), v)

    def test_rejects_overfull(self):
        with pytest.raises(RejectedInputError):
            zero_pad_symmetric(np.ones(9), 8)


class TestShape:
    def test_row_recovers_complex_coefficients(self, rng):
        g = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
        t = LinearTransform(real_block_of(g))
        np.testing.assert_allclose(row_as_complex(t, 2), g[1])
        # imaginary-part output rows carry the same coefficients
        np.testing.assert_allclose(row_as_complex(t, 5), g[1])

    def test_dft_row_response_is_sinc_like(self):
        mag = irsinc_response(legacy_pair(16).forward, 1, 8)
        assert mag.max() == pytest.approx(1.0)
        assert np.sum(mag > 0.999) == 1

    def test_zero_row_warns(self):
        t = LinearTransform(np.zeros((2, 4)))
        with pytest.warns(RuntimeWarning):
            mag = irsinc_response(t, 1)
        assert not np.any(mag)

    @pytest.mark.parametrize("row", [0, 9])
    def test_row_bounds(self, row):
        with pytest.raises(RejectedInputError):
            row_as_complex(LinearTransform(np.eye(8)), row)


class TestSerialization:
    def test_bytes_round_trip_is_bit_exact(self, rng):
        p = sinc_truncated_pair(10, 8)
        mask = rng.random(p.forward.weights.shape) > 0.3
        p = TransformPair(p.forward.replace(prune_mask=mask, bias=rng.standard_normal(16)),
                          p.inverse, 10, 8, meta={"note": "x"})
        q = pair_from_bytes(pair_to_bytes(p))
        for a, b in [(p.forward, q.forward), (p.inverse, q.inverse)]:
            assert a.weights.tobytes() == b.weights.tobytes()
            assert a.bias.tobytes() == b.bias.tobytes()
            np.testing.assert_array_equal(a.prune_mask, b.prune_mask)
        assert (q.M, q.Q, q.meta["note"]) == (10, 8, "x")

    def test_header(self):
        blob = pair_to_bytes(legacy_pair(2))
        assert blob[:4] == MAGIC
        assert int.from_bytes(blob[4:6], "little") == FORMAT_VERSION

    def test_file_round_trip(self, tmp_path):
        p = legacy_pair(6)
        path = save_pair(p, tmp_path / "sub" / "pair.wlxp")
        np.testing.assert_array_equal(load_pair(path).forward.weights, p.forward.weights)

    def test_bad_magic(self):
        with pytest.raises(RejectedInputError):
            pair_from_bytes(b"XXXX" + pair_to_bytes(legacy_pair(2))[4:])

    def test_bad_version(self):
        blob = bytearray(pair_to_bytes(legacy_pair(2)))
        blob[4:6] = (99).to_bytes(2, "little")
        with pytest.raises(RejectedInputError):
            pair_from_bytes(bytes(blob))

    def test_digest_is_order_independent(self):
        assert digest({"a": 1, "b": 2}) == digest({"b": 2, "a": 1})
        assert digest({"a": 1}) != digest({"a": 2})
