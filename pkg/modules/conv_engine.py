"""
Convolution Engine Module for spconv
Applies the multichannel periodic strided convolution and its adjoint

Both functions accept a single signal (c, h, w) or a batch (..., c, h, w).
Sums are evaluated by numpy.einsum / numpy.add.at with a fixed contraction
order, so results do not depend on how callers split batches.
"""

import logging
from typing import Optional, Tuple

import numpy as np
import scipy.fft

from modules.errors import DimensionError
from modules.tensor_core import ConvKernel, TensorD, pad_kernel

logger = logging.getLogger(__name__)


def _window_rows(n: int, k: int, s: int) -> np.ndarray:
    """rows[q, p] = (q*s + p) mod n, the input index read by output q at tap p"""
    return (np.arange(n // s)[:, None] * s + np.arange(k)[None, :]) % n


def _check_signal(x, expected: Tuple[int, int, int], what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 3 or tuple(x.shape[-3:]) != tuple(expected):
        raise DimensionError(f"{what} must have trailing shape {expected}, got {x.shape}")
    return x


def conv_apply(kern: ConvKernel, x: TensorD) -> np.ndarray:
    """
    Periodic strided correlation

    Y[j,q1,q2] = sum_i sum_{p1,p2<k} K[p1,p2,i,j] * x[i, (q1*s+p1) mod n, (q2*s+p2) mod n]

    Args:
        kern: Convolution kernel
        x: Signal of shape (c_in, n, n) or a batch (..., c_in, n, n)

    Returns:
        Output of shape (..., c_out, n/s, n/s)
    """
    x = _check_signal(x, kern.input_shape, "input signal")
    rows = _window_rows(kern.signal_size, kern.k, kern.stride)
    patches = x[..., rows[:, None, :, None], rows[None, :, None, :]]
    return np.einsum("...iabpq,pqij->...jab", patches, kern.weights, optimize=True)


def conv_adjoint_apply(kern: ConvKernel, y: TensorD) -> np.ndarray:
    """
    Transpose of conv_apply under the row-major vec convention

    Args:
        kern: Convolution kernel
        y: Output-space signal (c_out, n/s, n/s) or a batch of them

    Returns:
        Input-space signal of shape (..., c_in, n, n)
    """
    y = _check_signal(y, kern.output_shape, "output signal")
    n, k, s = kern.signal_size, kern.k, kern.stride
    m = kern.output_size
    rows = _window_rows(n, k, s)

    batch = y.shape[:-3]
    contrib = np.einsum("...jab,pqij->...iabpq", y, kern.weights, optimize=True)
    contrib = contrib.reshape((-1, kern.c_in, m, m, k, k))

    out = np.zeros((contrib.shape[0], kern.c_in, n, n))
    np.add.at(
        out,
        (slice(None), slice(None), rows[:, None, :, None], rows[None, :, None, :]),
        contrib,
    )
    return out.reshape(batch + (kern.c_in, n, n))


def polyphase_transform(kern: ConvKernel, workers: Optional[int] = None) -> np.ndarray:
    """
    DFT of the stride-polyphase components of the padded kernel

    Returns:
        Complex array of shape (s*s, n/s, n/s, c_in, c_out); entry q = t1*s + t2
        holds fft2 of padded[t1::s, t2::s] over the two spatial axes
    """
    padded = pad_kernel(kern)
    s = kern.stride
    slices = [padded[t1::s, t2::s] for t1 in range(s) for t2 in range(s)]
    return scipy.fft.fft2(np.stack(slices), axes=(1, 2), workers=workers)


def conv_apply_fft(kern: ConvKernel, x: TensorD, workers: Optional[int] = None) -> np.ndarray:
    """
    FFT evaluation of conv_apply

    Splits the input into its s*s polyphase components; each frequency of the
    output is then a c_out × (s*s*c_in) matrix-vector product with the
    conjugated kernel transform.
    """
    x = _check_signal(x, kern.input_shape, "input signal")
    s = kern.stride
    r_hat = polyphase_transform(kern, workers=workers)
    phases = np.stack(
        [x[..., t1::s, t2::s] for t1 in range(s) for t2 in range(s)], axis=-4
    )
    x_hat = scipy.fft.fft2(phases, axes=(-2, -1), workers=workers)
    y_hat = np.einsum("tabij,...tiab->...jab", np.conj(r_hat), x_hat, optimize=True)
    return scipy.fft.ifft2(y_hat, axes=(-2, -1), workers=workers).real


def conv_apply_batch(kern: ConvKernel, xs: TensorD, chunk: int = 256) -> np.ndarray:
    """
    Apply conv_apply to a stack of signals in fixed-size chunks

    Chunking only bounds the size of the gathered patch array; every output
    is computed independently.
    """
    xs = _check_signal(xs, kern.input_shape, "input batch")
    flat = xs.reshape((-1,) + kern.input_shape)
    out = np.empty((flat.shape[0],) + kern.output_shape)
    for start in range(0, flat.shape[0], chunk):
        out[start:start + chunk] = conv_apply(kern, flat[start:start + chunk])
    return out.reshape(xs.shape[:-3] + kern.output_shape)
