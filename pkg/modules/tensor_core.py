"""
Tensor Core Module for spconv
Dense float64 array primitives with a row-major flattening convention,
kernel padding and the ConvKernel value type shared by every other module
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from modules.errors import DimensionError

logger = logging.getLogger(__name__)

# Tensors are plain float64 ndarrays validated by as_tensor()
TensorD = np.ndarray


def as_tensor(data, shape: Optional[Sequence[int]] = None) -> TensorD:
    """
    Validate and freeze data as a TensorD

    Args:
        data: Array-like of real values
        shape: Optional target shape; data is reshaped row-major to it

    Returns:
        Read-only C-contiguous float64 array
    """
    arr = np.array(data, dtype=np.float64, order="C", copy=True)
    if shape is not None:
        arr = reshape(arr, shape)
        arr = np.array(arr, copy=True)
    if any(extent <= 0 for extent in arr.shape):
        raise DimensionError(f"tensor extents must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("tensor contains NaN or Inf values")
    arr.flags.writeable = False
    return arr


def vec(t: TensorD) -> np.ndarray:
    """Row-major flattening"""
    return np.ravel(t, order="C")


def reshape(t: TensorD, new_shape: Sequence[int]) -> TensorD:
    """
    Reshape keeping row-major data order

    Raises:
        DimensionError: if the element counts differ
    """
    new_shape = tuple(int(e) for e in new_shape)
    if int(np.prod(new_shape)) != t.size:
        raise DimensionError(
            f"cannot reshape {t.shape} ({t.size} elements) to {new_shape}"
        )
    return np.reshape(t, new_shape, order="C")


@dataclass(frozen=True, eq=False)
class ConvKernel:
    """
    Periodic strided convolution kernel

    weights has layout (k, k, c_in, c_out). The operator maps c_in×n×n signals
    to c_out×(n/s)×(n/s) signals.
    """

    weights: TensorD
    stride: int
    signal_size: int

    def __post_init__(self):
        w = as_tensor(self.weights)
        if w.ndim != 4 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"kernel must have shape k×k×c_in×c_out, got {w.shape}")
        if self.stride < 1 or self.signal_size < 1:
            raise DimensionError(
                f"stride and signal size must be positive (s={self.stride}, n={self.signal_size})"
            )
        if w.shape[0] > self.signal_size:
            raise DimensionError(f"filter size k={w.shape[0]} exceeds signal size n={self.signal_size}")
        if self.signal_size % self.stride != 0:
            raise DimensionError(
                f"n mod s must be 0 (n={self.signal_size}, s={self.stride})"
            )
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "stride", int(self.stride))
        object.__setattr__(self, "signal_size", int(self.signal_size))

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def c_in(self) -> int:
        return self.weights.shape[2]

    @property
    def c_out(self) -> int:
        return self.weights.shape[3]

    @property
    def output_size(self) -> int:
        """Output spatial size n/s of the periodic strided convolution"""
        return self.signal_size // self.stride

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        return (self.c_in, self.signal_size, self.signal_size)

    @property
    def output_shape(self) -> Tuple[int, int, int]:
        return (self.c_out, self.output_size, self.output_size)

    def scaled(self, factor: float) -> "ConvKernel":
        return ConvKernel(self.weights * factor, self.stride, self.signal_size)

    def with_geometry(self, stride: Optional[int] = None,
                      signal_size: Optional[int] = None) -> "ConvKernel":
        """Same weights on a different stride or signal size"""
        return ConvKernel(
            self.weights,
            self.stride if stride is None else stride,
            self.signal_size if signal_size is None else signal_size,
        )


def pad_kernel(kern: ConvKernel) -> TensorD:
    """
    Zero-pad the filter modes up to the signal size

    Zeros are appended on the high-index side of each filter mode.

    Returns:
        Array of shape n×n×c_in×c_out whose leading k×k window is the kernel
    """
    n, k = kern.signal_size, kern.k
    if k > n:
        raise DimensionError(f"filter size k={k} exceeds signal size n={n}")
    padded = np.pad(kern.weights, ((0, n - k), (0, n - k), (0, 0), (0, 0)))
    padded.flags.writeable = False
    return padded


def random_kernel(k: int, c_in: int, c_out: int, stride: int, signal_size: int,
                  seed: int = 0, scale: float = 1.0) -> ConvKernel:
    """Seeded standard-normal kernel"""
    rng = np.random.default_rng(seed)
    weights = scale * rng.standard_normal((k, k, c_in, c_out))
    return ConvKernel(weights, stride, signal_size)


def identity_kernel(channels: int, signal_size: int, stride: int = 1,
                    scale: float = 1.0) -> ConvKernel:
    """1×1 kernel whose channel matrix is scale·I"""
    weights = scale * np.eye(channels).reshape(1, 1, channels, channels)
    return ConvKernel(weights, stride, signal_size)
