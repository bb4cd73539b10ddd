"""
FFT Spectrum Module for spconv
Exact singular values of strided periodic convolutional layers via
reshape -> 2-D FFT -> per-frequency SVD, plus clipping with kernel reconstruction

Frequency matrices
------------------
The padded kernel is split into its s*s stride-polyphase components
R[q] = padded[t1::s, t2::s] with q = t1*s + t2. After an unnormalized 2-D DFT
of size n/s, every frequency (p1, p2) gives a matrix P of shape
(s*s*c_in) × c_out with row index d = i*s*s + q, i.e. t1 = (d mod s^2) // s and
t2 = d mod s. The layer's singular values are the union of the singular values
of all (n/s)^2 matrices P. Frequency indices are reported 0-based.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.fft

from modules.errors import DimensionError, SpectrumError
from modules.tensor_core import ConvKernel, pad_kernel

logger = logging.getLogger(__name__)

IMAG_RESIDUE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    Multiset of singular values, stored sorted descending

    grouping, when present, has shape (n/s, n/s, m) and holds the singular
    values of each frequency matrix (descending along the last axis).
    implied_zeros counts zero singular values of the full layer that are
    known to exist but are not materialized (rank-reduced TT layers).
    """

    values: np.ndarray
    grouping: Optional[np.ndarray] = None
    implied_zeros: int = 0

    @classmethod
    def from_values(cls, values, implied_zeros: int = 0) -> "Spectrum":
        values = np.asarray(values, dtype=np.float64).ravel()
        if np.any(values < 0):
            raise SpectrumError("singular values must be nonnegative")
        return cls(np.sort(values)[::-1].copy(), None, implied_zeros)

    @classmethod
    def from_grouped(cls, grouped: np.ndarray, implied_zeros: int = 0) -> "Spectrum":
        grouped = np.asarray(grouped, dtype=np.float64)
        values = np.sort(grouped.ravel())[::-1].copy()
        return cls(values, grouped, implied_zeros)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def sigma1(self) -> float:
        """Largest singular value (the layer's Lipschitz constant)"""
        return float(self.values[0]) if self.values.size else 0.0

    def nonzero(self, rtol: float = 1e-10) -> np.ndarray:
        """Values above rtol * sigma1"""
        if not self.values.size:
            return self.values
        return self.values[self.values > rtol * max(self.sigma1, np.finfo(float).tiny)]

    def with_implied_zeros(self) -> np.ndarray:
        """Values padded with the implied zeros, sorted descending"""
        return np.concatenate([self.values, np.zeros(self.implied_zeros)])

    def scaled(self, factor: float) -> "Spectrum":
        grouping = None if self.grouping is None else self.grouping * abs(factor)
        return Spectrum(self.values * abs(factor), grouping, self.implied_zeros)

    def groups(self) -> Iterator[Tuple[Tuple[int, int], np.ndarray]]:
        """Yield ((p1, p2), values) for every frequency"""
        if self.grouping is None:
            raise SpectrumError("spectrum carries no frequency grouping")
        m1, m2 = self.grouping.shape[:2]
        for p1 in range(m1):
            for p2 in range(m2):
                yield (p1, p2), self.grouping[p1, p2]


@dataclass(frozen=True, eq=False)
class StridedReshape:
    """Polyphase components R of shape (s*s, n/s, n/s, c_in, c_out)"""

    r: np.ndarray
    stride: int
    signal_size: int

    @property
    def c_in(self) -> int:
        return self.r.shape[3]

    @property
    def c_out(self) -> int:
        return self.r.shape[4]


@dataclass(frozen=True, eq=False)
class FrequencyFactors:
    """
    Per-frequency matrices and their (economy) SVDs

    p: (n/s, n/s, s*s*c_in, c_out) complex
    u: (n/s, n/s, s*s*c_in, m), sigma: (n/s, n/s, m), vh: (n/s, n/s, m, c_out)
    with m = min(s*s*c_in, c_out) and p = u @ diag(sigma) @ vh.
    """

    p: np.ndarray
    u: np.ndarray
    sigma: np.ndarray
    vh: np.ndarray
    stride: int
    signal_size: int

    @property
    def frequency_count(self) -> int:
        return self.p.shape[0] * self.p.shape[1]

    def rebuild(self, sigma: Optional[np.ndarray] = None) -> np.ndarray:
        """P rebuilt from the factors with (optionally) replaced singular values"""
        sigma = self.sigma if sigma is None else sigma
        return self.u @ (sigma[..., :, None] * self.vh)


class ClipResult(NamedTuple):
    """Outputs of clip_spectrum"""

    expanded: np.ndarray
    truncated: ConvKernel

    def expanded_kernel(self) -> ConvKernel:
        """The expanded n×n kernel as a ConvKernel on the same geometry"""
        return ConvKernel(self.expanded, self.truncated.stride, self.truncated.signal_size)


def strided_reshape(kern: ConvKernel) -> StridedReshape:
    """
    R[q, a, b, i, j] = padded[q // s + a*s, q % s + b*s, i, j]

    Args:
        kern: Convolution kernel (n mod s == 0 is enforced by ConvKernel)

    Returns:
        StridedReshape with s*s slices of size (n/s)×(n/s)
    """
    padded = pad_kernel(kern)
    s = kern.stride
    r = np.stack([padded[q // s::s, q % s::s] for q in range(s * s)])
    return StridedReshape(r, s, kern.signal_size)


def inverse_strided_reshape(r: np.ndarray, stride: int) -> np.ndarray:
    """Reassemble the n×n×c_in×c_out kernel from its polyphase components"""
    s = stride
    m = r.shape[1]
    out = np.empty((m * s, m * s) + r.shape[3:], dtype=r.dtype)
    for q in range(s * s):
        out[q // s::s, q % s::s] = r[q]
    return out


def _frequency_stack(r: StridedReshape, workers: Optional[int]) -> np.ndarray:
    r_hat = scipy.fft.fft2(r.r, axes=(1, 2), workers=workers)
    ss, m = r_hat.shape[0], r_hat.shape[1]
    # (q, a, b, i, j) -> (a, b, i, q, j) so that row d = i*s^2 + q
    return r_hat.transpose(1, 2, 3, 0, 4).reshape(m, m, r.c_in * ss, r.c_out)


def _svd(p: np.ndarray, compute_uv: bool):
    try:
        return np.linalg.svd(p, full_matrices=False, compute_uv=compute_uv)
    except np.linalg.LinAlgError as e:
        raise SpectrumError(f"per-frequency SVD did not converge: {e}") from e


def frequency_matrices(r: StridedReshape, workers: Optional[int] = None) -> FrequencyFactors:
    """
    Per-frequency matrices P and their SVD factors

    Args:
        r: Polyphase components of the padded kernel
        workers: scipy.fft worker threads

    Returns:
        FrequencyFactors with (n/s)^2 frequency entries
    """
    p = _frequency_stack(r, workers)
    u, sigma, vh = _svd(p, compute_uv=True)
    return FrequencyFactors(p, u, sigma, vh, r.stride, r.signal_size)


def spectrum(kern: ConvKernel, workers: Optional[int] = None) -> Spectrum:
    """
    All singular values of the layer, grouped by frequency

    The count is (n/s)^2 * min(s*s*c_in, c_out).
    """
    p = _frequency_stack(strided_reshape(kern), workers)
    grouped = _svd(p, compute_uv=False)
    logger.debug(
        f"Spectrum of k={kern.k} c_in={kern.c_in} c_out={kern.c_out} "
        f"s={kern.stride} n={kern.signal_size}: {grouped.size} values"
    )
    return Spectrum.from_grouped(grouped)


def spectrum_count(c_in: int, c_out: int, stride: int, signal_size: int) -> int:
    """Number of singular values of the layer"""
    m = signal_size // stride
    return m * m * min(stride * stride * c_in, c_out)


def reconstruct_kernel(factors: FrequencyFactors, sigma: Optional[np.ndarray] = None,
                       workers: Optional[int] = None) -> np.ndarray:
    """
    Inverse of the spectrum pipeline

    Rebuilds P from the factors, inverts the DFT (dividing by (n/s)^2) and the
    strided reshape. Real kernels in give real kernels out; an imaginary residue
    above IMAG_RESIDUE_TOL (relative to the kernel scale) is an error.

    Returns:
        Real n×n×c_in×c_out kernel with full spatial support
    """
    p = factors.rebuild(sigma)
    m, rows, c_out = p.shape[0], p.shape[2], p.shape[3]
    ss = factors.stride * factors.stride
    c_in = rows // ss
    r_hat = p.reshape(m, m, c_in, ss, c_out).transpose(3, 0, 1, 2, 4)
    r = scipy.fft.ifft2(r_hat, axes=(1, 2), workers=workers)

    scale = max(1.0, float(np.max(np.abs(r.real))) if r.size else 1.0)
    residue = float(np.max(np.abs(r.imag))) if r.size else 0.0
    if residue > IMAG_RESIDUE_TOL * scale:
        raise SpectrumError(f"reconstructed kernel has imaginary residue {residue:.3e}")
    return inverse_strided_reshape(np.ascontiguousarray(r.real), factors.stride)


def clip_spectrum(kern: ConvKernel, delta: float, workers: Optional[int] = None) -> ClipResult:
    """
    Replace every singular value above delta with delta

    Args:
        kern: Convolution kernel
        delta: Positive threshold

    Returns:
        ClipResult(expanded n×n×c_in×c_out kernel, k×k truncation of it)
    """
    if not delta > 0:
        raise DimensionError(f"clipping threshold must be positive, got {delta}")

    factors = frequency_matrices(strided_reshape(kern), workers)
    if not np.any(factors.sigma > delta):
        logger.info(f"All singular values are <= {delta}; kernel left unchanged")
        return ClipResult(np.array(pad_kernel(kern)), kern)

    clipped = np.minimum(factors.sigma, delta)
    n_clipped = int(np.count_nonzero(factors.sigma > delta))
    logger.info(f"Clipping {n_clipped} singular values above {delta}")

    expanded = reconstruct_kernel(factors, clipped, workers)
    k = kern.k
    truncated = ConvKernel(expanded[:k, :k], kern.stride, kern.signal_size)
    return ClipResult(expanded, truncated)


def grouped_rows(spec: Spectrum) -> List[Tuple[int, int, float]]:
    """(p1, p2, value) rows, frequencies in row-major order, values descending"""
    return [(p1, p2, float(v)) for (p1, p2), vals in spec.groups() for v in vals]


def relative_deviation(a, b, abs_floor: float = 1e-2) -> float:
    """
    max_i |a_i - b_i| / max(|b_i|, abs_floor) on descending-sorted copies

    Raises:
        DimensionError: if the multisets differ in size
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())[::-1]
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())[::-1]
    if a.shape != b.shape:
        raise DimensionError(f"spectra differ in size: {a.size} vs {b.size}")
    if not a.size:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), abs_floor)))
