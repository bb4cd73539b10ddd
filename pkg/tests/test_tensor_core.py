"""
Unit tests for tensor core primitives and ConvKernel
"""

import pytest
import sys
from pathlib import Path

import numpy as np
from hypothesis import given, settings
import hypothesis.strategies as st

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from modules.errors import DimensionError
from modules.tensor_core import (
    ConvKernel, as_tensor, identity_kernel, pad_kernel, random_kernel, reshape, vec,
)


class TestTensorPrimitives:
    """Test cases for as_tensor, vec and reshape"""

    def test_as_tensor_is_read_only_float64(self):
        t = as_tensor([[1, 2], [3, 4]])
        assert t.dtype == np.float64
        assert not t.flags.writeable
        with pytest.raises(ValueError):
            t[0, 0] = 5.0

    def test_as_tensor_copies_input(self):
        source = np.ones((2, 2))
        t = as_tensor(source)
        source[0, 0] = 7.0
        assert t[0, 0] == 1.0

    def test_as_tensor_with_shape(self):
        t = as_tensor(range(6), shape=(2, 3))
        np.testing.assert_array_equal(t, [[0, 1, 2], [3, 4, 5]])

    def test_as_tensor_rejects_nan_and_inf(self):
        with pytest.raises(DimensionError):
            as_tensor([1.0, np.nan])
        with pytest.raises(DimensionError):
            as_tensor([np.inf])

    def test_as_tensor_rejects_empty_extent(self):
        with pytest.raises(DimensionError):
            as_tensor(np.zeros((0, 3)))

    def test_vec_is_row_major(self):
        t = np.arange(24.0).reshape(2, 3, 4)
        np.testing.assert_array_equal(vec(t), np.arange(24.0))
        assert vec(t)[1 * 12 + 2 * 4 + 3] == t[1, 2, 3]

    @pytest.mark.parametrize("shape,new_shape", [
        ((4,), (2, 2)),
        ((2, 3), (3, 2)),
        ((1, 6), (6,)),
    ])
    def test_reshape_keeps_row_major_data(self, shape, new_shape):
        t = np.arange(float(np.prod(shape))).reshape(shape)
        out = reshape(t, new_shape)
        assert out.shape == new_shape
        np.testing.assert_array_equal(out.ravel(), np.arange(float(t.size)))

    def test_reshape_two_by_three_order(self):
        out = reshape(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]), (3, 2))
        np.testing.assert_array_equal(out, [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])

    @settings(max_examples=50, deadline=None)
    @given(shape=st.lists(st.integers(1, 4), min_size=1, max_size=4), data=st.data())
    def test_vec_survives_any_compatible_reshape(self, shape, data):
        size = int(np.prod(shape))
        divisors = [d for d in range(1, size + 1) if size % d == 0]
        d = data.draw(st.sampled_from(divisors))
        new_shape = data.draw(st.sampled_from([(size,), (d, size // d), (size // d, 1, d)]))
        t = np.random.default_rng(size).standard_normal(shape)
        np.testing.assert_array_equal(vec(reshape(t, new_shape)), vec(t))

    def test_reshape_size_mismatch(self):
        with pytest.raises(DimensionError):
            reshape(np.zeros(6), (4, 2))


class TestConvKernel:
    """Test cases for ConvKernel construction and properties"""

    def test_properties(self):
        kern = random_kernel(3, 2, 5, stride=2, signal_size=8)
        assert kern.k == 3
        assert kern.c_in == 2
        assert kern.c_out == 5
        assert kern.output_size == 4
        assert kern.input_shape == (2, 8, 8)
        assert kern.output_shape == (5, 4, 4)

    def test_non_square_filter_rejected(self):
        with pytest.raises(DimensionError):
            ConvKernel(np.zeros((2, 3, 1, 1)), 1, 4)

    def test_filter_larger_than_signal_rejected(self):
        with pytest.raises(DimensionError):
            ConvKernel(np.zeros((5, 5, 1, 1)), 1, 4)

    def test_stride_must_divide_signal_size(self):
        with pytest.raises(DimensionError):
            ConvKernel(np.zeros((3, 3, 1, 1)), 3, 8)

    def test_non_positive_stride_rejected(self):
        with pytest.raises(DimensionError):
            ConvKernel(np.zeros((1, 1, 1, 1)), 0, 4)

    def test_dimension_error_is_value_error(self):
        with pytest.raises(ValueError):
            ConvKernel(np.zeros((3, 3)), 1, 4)

    def test_scaled(self):
        kern = random_kernel(2, 1, 1, 1, 4, seed=3)
        np.testing.assert_allclose(kern.scaled(-2.0).weights, -2.0 * kern.weights)

    def test_with_geometry_keeps_weights(self):
        kern = random_kernel(3, 2, 2, 1, 8, seed=1)
        moved = kern.with_geometry(stride=2, signal_size=4)
        assert (moved.stride, moved.signal_size) == (2, 4)
        np.testing.assert_array_equal(moved.weights, kern.weights)

    def test_random_kernel_is_seeded(self):
        a = random_kernel(3, 2, 2, 1, 4, seed=11)
        b = random_kernel(3, 2, 2, 1, 4, seed=11)
        c = random_kernel(3, 2, 2, 1, 4, seed=12)
        np.testing.assert_array_equal(a.weights, b.weights)
        assert not np.array_equal(a.weights, c.weights)


class TestPadKernel:
    """Test cases for zero padding to the signal size"""

    def test_single_tap_example(self):
        kern = ConvKernel(np.full((1, 1, 1, 1), 2.5), 1, 2)
        padded = pad_kernel(kern)
        np.testing.assert_array_equal(padded[:, :, 0, 0], [[2.5, 0.0], [0.0, 0.0]])

    def test_leading_window_and_zeros(self):
        kern = random_kernel(3, 2, 3, 1, 6, seed=5)
        padded = pad_kernel(kern)
        assert padded.shape == (6, 6, 2, 3)
        np.testing.assert_array_equal(padded[:3, :3], kern.weights)
        assert not np.any(padded[3:])
        assert not np.any(padded[:, 3:])

    def test_full_support_kernel_unchanged(self):
        kern = random_kernel(4, 1, 1, 1, 4, seed=2)
        np.testing.assert_array_equal(pad_kernel(kern), kern.weights)

    def test_identity_kernel(self):
        kern = identity_kernel(3, 4, scale=2.0)
        assert kern.weights.shape == (1, 1, 3, 3)
        np.testing.assert_array_equal(kern.weights[0, 0], 2.0 * np.eye(3))


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
