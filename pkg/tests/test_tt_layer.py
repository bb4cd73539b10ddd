"""
Unit tests for TT kernels: decomposition, orthogonalization, spectra and losses
"""

import itertools
import logging

import pytest
import sys
from pathlib import Path

import numpy as np
from hypothesis import given, settings
import hypothesis.strategies as st

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from modules.conv_engine import conv_apply
from modules.dense_oracle import build_dense_operator, dense_spectrum
from modules.errors import DimensionError
from modules.fft_spectrum import relative_deviation, spectrum, spectrum_count
from modules.tensor_core import random_kernel
from modules.tt_layer import (
    TTKernel, combined_loss, ortho_report, orth_loss, orthogonalize, random_tt_kernel,
    tt_apply, tt_decompose, tt_reconstruct, tt_spectrum,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def unit_example():
    """r1 = r2 = 1, K1 = 2·e1, K3 = e1^T"""
    k1 = np.array([[2.0], [0.0]])
    k2 = np.ones((1, 1, 1, 1))
    k3 = np.array([[1.0, 0.0]])
    return TTKernel(k1, k2, k3, 1, 4)


def direct_orth_loss(layers):
    """Entry-by-entry summation of the normalized frame loss"""
    num, den = 0.0, 0
    for tt in layers:
        r1, r2 = tt.ranks
        for a in range(r1):
            for b in range(r1):
                g = sum(tt.k1[i, a] * tt.k1[i, b] for i in range(tt.c_in))
                num += (g - (1.0 if a == b else 0.0)) ** 2
        for a in range(r2):
            for b in range(r2):
                g = sum(tt.k3[a, j] * tt.k3[b, j] for j in range(tt.c_out))
                num += (g - (1.0 if a == b else 0.0)) ** 2
        den += r1 * r1 + r2 * r2
    return num / den


class TestTTKernel:
    """Test cases for TTKernel construction"""

    def test_properties(self):
        tt = random_tt_kernel(4, 6, 2, 3, 3, 8, stride=2)
        assert (tt.c_in, tt.c_out, tt.k) == (4, 6, 3)
        assert tt.ranks == (2, 3)
        assert tt.core_kernel().weights.shape == (3, 3, 2, 3)

    def test_rank_above_channels_rejected(self):
        with pytest.raises(DimensionError):
            TTKernel(np.ones((2, 3)), np.ones((1, 1, 3, 1)), np.ones((1, 2)), 1, 4)

    def test_core_rank_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            TTKernel(np.ones((3, 2)), np.ones((1, 1, 1, 1)), np.ones((1, 2)), 1, 4)

    def test_geometry_checked(self):
        with pytest.raises(DimensionError):
            random_tt_kernel(2, 2, 1, 1, 3, 8, stride=3)


class TestReconstructAndApply:
    """Test cases for tt_reconstruct and tt_apply"""

    def test_reconstruct_contraction(self):
        tt = random_tt_kernel(3, 4, 2, 2, 3, 6, seed=1)
        expected = np.zeros((3, 3, 3, 4))
        for a in range(2):
            for b in range(2):
                expected += np.einsum("i,pq,j->pqij", tt.k1[:, a], tt.k2[:, :, a, b], tt.k3[b])
        np.testing.assert_allclose(tt_reconstruct(tt).weights, expected, atol=1e-12)

    @pytest.mark.parametrize("s", [1, 2])
    def test_three_stage_apply_matches_full_layer(self, s):
        tt = random_tt_kernel(3, 4, 2, 3, 3, 8, stride=s, seed=2)
        x = np.random.default_rng(0).standard_normal((3, 8, 8))
        np.testing.assert_allclose(tt_apply(tt, x), conv_apply(tt_reconstruct(tt), x), atol=1e-10)


class TestDecompose:
    """Test cases for TT-SVD"""

    def test_full_ranks_are_exact(self):
        kern = random_kernel(3, 3, 4, 1, 6, seed=3)
        tt = tt_decompose(kern, 3, 4)
        np.testing.assert_allclose(tt_reconstruct(tt).weights, kern.weights, atol=1e-10)

    def test_recovers_low_rank_kernel(self):
        source = tt_reconstruct(random_tt_kernel(5, 6, 2, 3, 3, 6, seed=4))
        tt = tt_decompose(source, 2, 3)
        assert tt.ranks == (2, 3)
        np.testing.assert_allclose(tt_reconstruct(tt).weights, source.weights, atol=1e-10)

    def test_frames_are_orthonormal(self):
        tt = tt_decompose(random_kernel(3, 4, 5, 1, 4, seed=5), 2, 3)
        report = ortho_report(tt)
        assert report.left_residual < 1e-12
        assert report.right_residual < 1e-12

    def test_sign_convention_is_deterministic(self):
        kern = random_kernel(3, 4, 4, 1, 4, seed=6)
        a, b = tt_decompose(kern, 2, 2), tt_decompose(kern, 2, 2)
        np.testing.assert_array_equal(a.k1, b.k1)
        idx = np.argmax(np.abs(a.k1), axis=0)
        assert np.all(a.k1[idx, np.arange(2)] > 0)

    @staticmethod
    def _tail(matrix, rank):
        sigma = np.linalg.svd(matrix, compute_uv=False)
        return float(np.sqrt(np.sum(sigma[rank:] ** 2)))

    @pytest.mark.parametrize("seed", range(3))
    def test_truncation_error_is_sum_of_unfolding_tails(self, seed):
        source = tt_reconstruct(random_tt_kernel(4, 5, 2, 2, 3, 6, seed=seed))
        w = source.weights
        tt = tt_decompose(source, 1, 1)

        tail_in = self._tail(w.transpose(2, 0, 1, 3).reshape(4, -1), 1)
        projected = np.einsum("pqij,ia->pqaj", w, tt.k1).reshape(-1, 5)
        tail_out = self._tail(projected, 1)
        error = np.linalg.norm(tt_reconstruct(tt).weights - w)

        assert tail_in > 0 and tail_out > 0
        assert error == pytest.approx(np.hypot(tail_in, tail_out), rel=1e-8)

    def test_one_sided_truncation_error_is_input_tail(self):
        source = tt_reconstruct(random_tt_kernel(4, 3, 2, 3, 3, 6, seed=9))
        w = source.weights
        tt = tt_decompose(source, 1, 3)
        tail_in = self._tail(w.transpose(2, 0, 1, 3).reshape(4, -1), 1)
        error = np.linalg.norm(tt_reconstruct(tt).weights - w)
        assert error == pytest.approx(tail_in, rel=1e-8)

    @pytest.mark.parametrize("r1,r2", [(0, 1), (1, 0), (5, 1), (1, 5)])
    def test_rank_bounds(self, r1, r2):
        with pytest.raises(DimensionError):
            tt_decompose(random_kernel(1, 4, 4, 1, 4), r1, r2)


class TestOrthogonalize:
    """Test cases for frame orthogonalization"""

    @settings(max_examples=100, deadline=None)
    @given(seed=seeds, s=st.sampled_from([1, 2]))
    def test_preserves_layer_and_orthonormalizes(self, seed, s):
        gen = np.random.default_rng(seed)
        c_in, c_out = int(gen.integers(1, 6)), int(gen.integers(1, 6))
        r1, r2 = int(gen.integers(1, c_in + 1)), int(gen.integers(1, c_out + 1))
        tt = random_tt_kernel(c_in, c_out, r1, r2, 3, 4, stride=s, seed=seed)
        ortho = orthogonalize(tt)

        before = tt_reconstruct(tt).weights
        after = tt_reconstruct(ortho).weights
        assert np.linalg.norm(after - before) <= 1e-10 * np.linalg.norm(before)
        report = ortho_report(ortho)
        assert report.left_residual < 1e-12
        assert report.right_residual < 1e-12

    def test_frame_scales_move_into_core(self):
        tt = random_tt_kernel(4, 5, 2, 3, 3, 6, seed=11, orthogonal=True)
        scaled = TTKernel(2.0 * tt.k1, tt.k2, 3.0 * tt.k3, tt.stride, tt.signal_size)
        ortho = orthogonalize(scaled)
        np.testing.assert_allclose(ortho.k1, tt.k1, atol=1e-12)
        np.testing.assert_allclose(ortho.k3, tt.k3, atol=1e-12)
        np.testing.assert_allclose(ortho.k2, 6.0 * tt.k2, atol=1e-12)

    def test_idempotent(self):
        once = orthogonalize(random_tt_kernel(4, 5, 2, 3, 3, 6, seed=7))
        twice = orthogonalize(once)
        np.testing.assert_allclose(twice.k1, once.k1, atol=1e-12)
        np.testing.assert_allclose(twice.k3, once.k3, atol=1e-12)
        np.testing.assert_allclose(twice.k2, once.k2, atol=1e-12)

    def test_rank_deficient_frame_warns(self, caplog):
        k1 = np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
        tt = TTKernel(k1, np.ones((1, 1, 2, 1)), np.ones((1, 2)), 1, 4)
        assert ortho_report(tt).deficient_factors == ["K1"]
        with caplog.at_level(logging.WARNING):
            orthogonalize(tt)
        assert "Rank-deficient" in caplog.text


class TestTTSpectrum:
    """The core spectrum plus implied zeros equals the full layer spectrum"""

    @pytest.mark.parametrize("c", [2, 4, 6])
    @pytest.mark.parametrize("k", [1, 3])
    @pytest.mark.parametrize("n,s", [(4, 1), (8, 1), (4, 2), (8, 2)])
    def test_matches_oracle(self, c, k, n, s):
        for r1, r2 in itertools.product(range(1, c + 1), repeat=2):
            tt = random_tt_kernel(c, c, r1, r2, k, n, stride=s, seed=c * 1000 + r1 * 100 + r2 * 10 + n + s)
            full = dense_spectrum(build_dense_operator(tt_reconstruct(tt))).values
            assert relative_deviation(tt_spectrum(tt).with_implied_zeros(), full) <= 1e-8

    def test_nonzero_values_match_reconstructed_layer(self):
        tt = random_tt_kernel(4, 5, 2, 3, 3, 8, seed=9)
        core = tt_spectrum(tt)
        full = spectrum(tt_reconstruct(tt))
        assert core.implied_zeros == len(full) - len(core)
        assert relative_deviation(core.values, full.values[:len(core)]) <= 1e-8
        assert np.all(full.values[len(core):] <= 1e-10 * full.sigma1)

    def test_counts(self):
        tt = random_tt_kernel(4, 6, 2, 3, 3, 8, stride=2)
        spec = tt_spectrum(tt)
        assert len(spec) == 16 * min(4 * 2, 3)
        assert len(spec) + spec.implied_zeros == spectrum_count(4, 6, 2, 8)


class TestLosses:
    """Test cases for orth_loss and combined_loss"""

    def test_unit_example(self):
        assert orth_loss([unit_example()]) == pytest.approx(4.5)

    def test_combined_example(self):
        assert combined_loss(1.0, [unit_example()], lambda_ort=2.0) == pytest.approx(10.0)

    def test_zero_on_orthogonal_frames(self):
        layers = [random_tt_kernel(5, 4, 3, 2, 3, 6, seed=s, orthogonal=True) for s in range(3)]
        assert orth_loss(layers) == pytest.approx(0.0, abs=1e-24)

    @settings(max_examples=20, deadline=None)
    @given(seed=seeds)
    def test_matches_direct_summation(self, seed):
        layers = [random_tt_kernel(4, 3, 2, 3, 1, 2, seed=seed),
                  random_tt_kernel(2, 5, 1, 4, 1, 2, seed=seed + 1)]
        assert orth_loss(layers) == pytest.approx(direct_orth_loss(layers), rel=1e-12)

    def test_lambda_zero_returns_ce(self):
        assert combined_loss(0.75, [unit_example()], lambda_ort=0.0) == 0.75

    def test_default_weight(self):
        tt = unit_example()
        assert combined_loss(1.0, [tt]) == pytest.approx(1.0 + 1e5 * 4.5)

    def test_negative_lambda_rejected(self):
        with pytest.raises(DimensionError):
            combined_loss(1.0, [unit_example()], lambda_ort=-1.0)

    def test_empty_layers(self):
        with pytest.raises(DimensionError):
            orth_loss([])
        assert combined_loss(2.0, []) == 2.0


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
