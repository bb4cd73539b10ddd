"""
Dense Oracle Module for spconv
Builds the explicit matrix of a strided periodic convolution by probing
conv_apply with basis tensors and computes its full SVD.
This is the ground truth used to verify every spectral computation.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from modules.conv_engine import conv_apply
from modules.errors import DimensionError, SpectrumError
from modules.fft_spectrum import Spectrum
from modules.tensor_core import ConvKernel, vec

logger = logging.getLogger(__name__)

DEFAULT_COLUMN_CAP = 16384
_PROBE_CHUNK = 256


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Explicit matrix of shape (c_out*(n/s)^2) × (c_in*n^2)"""

    matrix: np.ndarray
    k: int
    c_in: int
    c_out: int
    stride: int
    signal_size: int

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Dense matrix-vector product on a (c_in, n, n) signal"""
        m = self.signal_size // self.stride
        return (self.matrix @ vec(np.asarray(x, dtype=np.float64))).reshape(self.c_out, m, m)

    def apply_transpose(self, y: np.ndarray) -> np.ndarray:
        n = self.signal_size
        return (self.matrix.T @ vec(np.asarray(y, dtype=np.float64))).reshape(self.c_in, n, n)


def build_dense_operator(kern: ConvKernel, column_cap: int = DEFAULT_COLUMN_CAP,
                         workers: Optional[int] = None) -> DenseOperator:
    """
    Build T_K column by column from conv_apply on standard basis tensors

    Args:
        kern: Convolution kernel
        column_cap: Refuse to build when c_in*n^2 exceeds this
        workers: Threads used for the probe chunks (None = serial)

    Returns:
        DenseOperator with matrix @ vec(x) == vec(conv_apply(kern, x))
    """
    n_cols = kern.c_in * kern.signal_size ** 2
    if n_cols > column_cap:
        raise DimensionError(
            f"dense operator would have {n_cols} columns, above the cap of {column_cap}"
        )
    n_rows = kern.c_out * kern.output_size ** 2
    matrix = np.empty((n_rows, n_cols))

    def fill(start: int) -> None:
        stop = min(start + _PROBE_CHUNK, n_cols)
        basis = np.zeros((stop - start, n_cols))
        basis[np.arange(stop - start), np.arange(start, stop)] = 1.0
        out = conv_apply(kern, basis.reshape((-1,) + kern.input_shape))
        matrix[:, start:stop] = out.reshape(stop - start, n_rows).T

    starts = range(0, n_cols, _PROBE_CHUNK)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, starts))
    else:
        for start in starts:
            fill(start)

    logger.debug(f"Built dense operator {matrix.shape} for k={kern.k}, s={kern.stride}")
    return DenseOperator(matrix, kern.k, kern.c_in, kern.c_out, kern.stride, kern.signal_size)


def dense_spectrum(op: DenseOperator) -> Spectrum:
    """
    All singular values of the dense operator, sorted descending

    Raises:
        SpectrumError: if the SVD does not converge
    """
    try:
        values = np.linalg.svd(op.matrix, compute_uv=False)
    except np.linalg.LinAlgError as e:
        raise SpectrumError(f"dense SVD did not converge: {e}") from e
    return Spectrum.from_values(values)


def kron_pointwise(channel_matrix: np.ndarray, signal_size: int) -> np.ndarray:
    """
    Dense matrix of a stride-1 1×1 convolution with channel matrix W (c_in×c_out)

    Under the channel-major vec convention this is kron(W^T, I_{n^2}).
    """
    return np.kron(np.asarray(channel_matrix).T, np.eye(signal_size ** 2))
