import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wavelab.errors import RejectedInputError, UnsupportedConfigurationError
from wavelab.numerics import (
    bits_per_symbol,
    constellation,
    hard_slice_real,
    make_rng,
    pack_complex_to_real,
    pam_levels,
    qam_hard_demod,
    qam_modulate,
    random_bits,
    unpack_real_to_complex,
)

ORDERS = [4, 16, 64]
finite = st.floats(-1e6, 1e6, allow_nan=False)


class TestQam:
    @pytest.mark.parametrize("order", ORDERS)
    def test_unit_average_energy(self, order):
        points, _ = constellation(order)
        assert np.mean(np.abs(points) ** 2) == pytest.approx(1.0)

    @pytest.mark.parametrize("order", ORDERS)
    def test_points_are_distinct(self, order):
        points, _ = constellation(order)
        assert np.unique(np.round(points, 12)).size == order

    @pytest.mark.parametrize("order", ORDERS)
    def test_gray_neighbours_differ_in_one_bit(self, order):
        points, labels = constellation(order)
        step = pam_levels(order)[0] - pam_levels(order)[1]
        for i, p in enumerate(points):
            for j, q in enumerate(points):
                if np.isclose(abs(p - q), step):
                    assert np.sum(labels[i] != labels[j]) == 1

    def test_qpsk_reference_points(self):
        s = qam_modulate(np.array([0, 0, 1, 1, 0, 1, 1, 0]), 4)
        r = 1 / np.sqrt(2)
        np.testing.assert_allclose(s, [r + 1j * r, -r - 1j * r, r - 1j * r, -r + 1j * r])

    def test_16qam_symbol_count(self):
        # 8 bits at 4 bits per symbol
        assert qam_modulate(np.array([0, 1, 1, 0, 1, 1, 0, 0]), 16).size == 2

    @pytest.mark.parametrize("order", ORDERS)
    @given(data=st.data())
    def test_modulate_demodulate_round_trip(self, order, data):
        k = bits_per_symbol(order)
        n = data.draw(st.integers(0, 40))
        bits = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n * k, max_size=n * k)),
                        dtype=np.int8)
        np.testing.assert_array_equal(qam_hard_demod(qam_modulate(bits, order), order), bits)

    @pytest.mark.parametrize("order", ORDERS)
    def test_demod_tolerates_small_noise(self, order, rng):
        bits = random_bits(rng, 600 * bits_per_symbol(order))
        s = qam_modulate(bits, order)
        half_step = (pam_levels(order)[0] - pam_levels(order)[1]) / 2
        noisy = s + 0.9 * half_step * (rng.uniform(-1, 1, s.size) + 1j * rng.uniform(-1, 1, s.size))
        np.testing.assert_array_equal(qam_hard_demod(noisy, order), bits)

    def test_rejects_partial_symbol(self):
        with pytest.raises(RejectedInputError):
            qam_modulate(np.array([0, 1, 1]), 4)

    def test_rejects_non_binary(self):
        with pytest.raises(RejectedInputError):
            qam_modulate(np.array([0, 2]), 4)

    @pytest.mark.parametrize("order", [2, 8, 32, 256])
    def test_unsupported_order(self, order):
        with pytest.raises(UnsupportedConfigurationError):
            bits_per_symbol(order)

    @given(arrays(float, st.integers(1, 30), elements=finite))
    def test_slice_returns_levels(self, x):
        out = hard_slice_real(x, 16)
        assert set(np.round(out, 12)) <= set(np.round(pam_levels(16), 12))


class TestPacking:
    @given(arrays(complex, st.integers(0, 50),
                  elements=st.complex_numbers(max_magnitude=1e6, allow_nan=False)))
    def test_round_trip(self, v):
        np.testing.assert_array_equal(unpack_real_to_complex(pack_complex_to_real(v)), v)

    def test_layout_is_real_first(self):
        np.testing.assert_array_equal(pack_complex_to_real([1 + 2j, 3 + 4j]), [1, 3, 2, 4])

    def test_batch_rows_packed_independently(self):
        v = np.array([[1 + 1j, 2], [3j, 4 - 1j]])
        np.testing.assert_array_equal(pack_complex_to_real(v)[1], [0, 4, 3, -1])

    def test_odd_length_rejected(self):
        with pytest.raises(RejectedInputError):
            unpack_real_to_complex(np.zeros(5))


class TestRng:
    def test_same_seed_same_stream(self):
        a = make_rng(7, 1, 2).standard_normal(8)
        b = make_rng(7, 1, 2).standard_normal(8)
        np.testing.assert_array_equal(a, b)

    @settings(max_examples=30)
    @given(st.integers(0, 2**32), st.integers(0, 1000))
    def test_keys_give_independent_streams(self, seed, key):
        a = make_rng(seed, key).integers(0, 2**62, 4)
        b = make_rng(seed, key + 1).integers(0, 2**62, 4)
        assert not np.array_equal(a, b)

    def test_bits_are_binary_and_balanced(self):
        b = random_bits(make_rng(0), 100_000)
        assert set(np.unique(b)) == {0, 1}
        assert abs(b.mean() - 0.5) < 0.01
