"""
TT Layer Module for spconv
Tensor-train (Tucker-2) compressed convolution kernels:
decomposition, reconstruction, frame orthogonalization, orthogonality loss
and the reduced spectrum computation on the middle core
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from modules.conv_engine import conv_apply
from modules.errors import DimensionError
from modules.fft_spectrum import Spectrum, spectrum, spectrum_count
from modules.tensor_core import ConvKernel, as_tensor

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_ORT = 1e5


@dataclass(frozen=True, eq=False)
class TTKernel:
    """
    Kernel K[p1,p2,i,j] = sum_{a,b} K1[i,a] * K2[p1,p2,a,b] * K3[b,j]

    k1: c_in × r1 frame, k2: k×k×r1×r2 core, k3: r2 × c_out frame.
    """

    k1: np.ndarray
    k2: np.ndarray
    k3: np.ndarray
    stride: int
    signal_size: int

    def __post_init__(self):
        k1, k2, k3 = as_tensor(self.k1), as_tensor(self.k2), as_tensor(self.k3)
        if k1.ndim != 2 or k2.ndim != 4 or k3.ndim != 2:
            raise DimensionError("TT factors must be c_in×r1, k×k×r1×r2 and r2×c_out")
        c_in, r1 = k1.shape
        r2, c_out = k3.shape
        if k2.shape[2:] != (r1, r2) or k2.shape[0] != k2.shape[1]:
            raise DimensionError(
                f"middle core shape {k2.shape} does not match ranks ({r1}, {r2})"
            )
        if not (1 <= r1 <= c_in and 1 <= r2 <= c_out):
            raise DimensionError(
                f"ranks must satisfy 1 <= r1 <= c_in and 1 <= r2 <= c_out "
                f"(r1={r1}, c_in={c_in}, r2={r2}, c_out={c_out})"
            )
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "k2", k2)
        object.__setattr__(self, "k3", k3)
        # geometry checks (k <= n, n mod s == 0) live in ConvKernel
        self.core_kernel()

    @property
    def k(self) -> int:
        return self.k2.shape[0]

    @property
    def c_in(self) -> int:
        return self.k1.shape[0]

    @property
    def c_out(self) -> int:
        return self.k3.shape[1]

    @property
    def ranks(self) -> Tuple[int, int]:
        return self.k1.shape[1], self.k3.shape[0]

    def core_kernel(self) -> ConvKernel:
        """The middle core as an r1 -> r2 convolution"""
        return ConvKernel(self.k2, self.stride, self.signal_size)

    def with_core(self, k2: np.ndarray) -> "TTKernel":
        return TTKernel(self.k1, k2, self.k3, self.stride, self.signal_size)


@dataclass
class OrthoReport:
    """Orthogonality residuals of the frame matrices"""

    left_residual: float
    right_residual: float
    left_min_sv: float
    right_min_sv: float
    deficient_factors: List[str] = field(default_factory=list)

    @property
    def rank_deficient(self) -> bool:
        return bool(self.deficient_factors)


def tt_reconstruct(tt: TTKernel) -> ConvKernel:
    """Contract the three factors into the full k×k×c_in×c_out kernel"""
    weights = np.einsum("ia,pqab,bj->pqij", tt.k1, tt.k2, tt.k3, optimize=True)
    return ConvKernel(weights, tt.stride, tt.signal_size)


def tt_apply(tt: TTKernel, x: np.ndarray) -> np.ndarray:
    """
    Three-stage evaluation: 1×1 conv with K1, k×k conv with K2 at stride s,
    then 1×1 conv with K3 on the sub-sampled grid
    """
    n, s = tt.signal_size, tt.stride
    first = ConvKernel(tt.k1[None, None], 1, n)
    last = ConvKernel(tt.k3[None, None], 1, n // s)
    return conv_apply(last, conv_apply(tt.core_kernel(), conv_apply(first, x)))


def _fix_sign(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column positive"""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def tt_decompose(kern: ConvKernel, r1: int, r2: int) -> TTKernel:
    """
    Rank-(r1, r2) TT-SVD of a kernel

    K1 holds the top-r1 left singular vectors of the c_in unfolding; the
    kernel is projected on them, and K3 holds the top-r2 right singular vectors
    of the c_out unfolding of the projection. The remaining core is K2.

    Args:
        kern: Full kernel
        r1: Input rank, 1 <= r1 <= c_in
        r2: Output rank, 1 <= r2 <= c_out

    Returns:
        TTKernel on the same geometry
    """
    if not (1 <= r1 <= kern.c_in and 1 <= r2 <= kern.c_out):
        raise DimensionError(
            f"ranks ({r1}, {r2}) out of bounds for c_in={kern.c_in}, c_out={kern.c_out}"
        )
    w = kern.weights
    unfold_in = w.transpose(2, 0, 1, 3).reshape(kern.c_in, -1)
    u, _, _ = np.linalg.svd(unfold_in, full_matrices=True)
    k1 = _fix_sign(u[:, :r1])

    projected = np.einsum("pqij,ia->pqaj", w, k1)
    unfold_out = projected.reshape(-1, kern.c_out)
    _, _, vh = np.linalg.svd(unfold_out, full_matrices=True)
    k3 = _fix_sign(vh[:r2].T).T

    k2 = np.einsum("pqaj,bj->pqab", projected, k3)
    tt = TTKernel(k1, k2, k3, kern.stride, kern.signal_size)

    err = np.linalg.norm(tt_reconstruct(tt).weights - w) / max(np.linalg.norm(w), np.finfo(float).tiny)
    logger.debug(f"TT-SVD at ranks ({r1}, {r2}): relative error {err:.3e}")
    return tt


def ortho_report(tt: TTKernel) -> OrthoReport:
    """Residuals ||K1^T K1 - I|| and ||K3 K3^T - I|| plus a rank check of both frames"""
    r1, r2 = tt.ranks
    left = float(np.linalg.norm(tt.k1.T @ tt.k1 - np.eye(r1)))
    right = float(np.linalg.norm(tt.k3 @ tt.k3.T - np.eye(r2)))

    deficient = []
    min_svs = []
    for name, frame in (("K1", tt.k1), ("K3", tt.k3.T)):
        sv = np.linalg.svd(frame, compute_uv=False)
        tol = max(frame.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
        min_svs.append(float(sv[-1]))
        if sv[-1] <= tol:
            deficient.append(name)
    return OrthoReport(left, right, min_svs[0], min_svs[1], deficient)


def _positive_qr(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Householder QR (economy) with a nonnegative diagonal in R"""
    q, r = scipy.linalg.qr(a, mode="economic")
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs, signs[:, None] * r


def orthogonalize(tt: TTKernel) -> TTKernel:
    """
    Make both frames orthonormal without changing the layer

    K1 = Q1 R1 and K3^T = Q3 R3; the triangular factors are absorbed into the
    core as R1 · K2[p1,p2] · R3^T. Rank-deficient frames are reported with a
    warning; QR still proceeds.
    """
    report = ortho_report(tt)
    if report.rank_deficient:
        logger.warning(
            f"Rank-deficient frame(s) {', '.join(report.deficient_factors)} "
            f"(smallest singular values: K1={report.left_min_sv:.3e}, K3={report.right_min_sv:.3e}); "
            f"orthogonality holds only on the column space"
        )
    q1, r1 = _positive_qr(tt.k1)
    q3, r3 = _positive_qr(tt.k3.T)
    core = np.einsum("ab,pqbc,dc->pqad", r1, tt.k2, r3, optimize=True)
    return TTKernel(q1, core, q3.T, tt.stride, tt.signal_size)


def tt_spectrum(tt: TTKernel, workers: Optional[int] = None) -> Spectrum:
    """
    Nonzero-part spectrum of a TT layer from its middle core

    After orthogonalization the layer's singular values are those of the
    r1 -> r2 core layer plus zeros; the zeros are counted in implied_zeros
    instead of being materialized.
    """
    core = orthogonalize(tt).core_kernel()
    core_spec = spectrum(core, workers=workers)
    full_count = spectrum_count(tt.c_in, tt.c_out, tt.stride, tt.signal_size)
    implied = full_count - len(core_spec)
    logger.debug(f"TT spectrum: {len(core_spec)} core values, {implied} implied zeros")
    return Spectrum(core_spec.values, core_spec.grouping, implied)


def orth_loss(layers: Sequence[TTKernel]) -> float:
    """
    Normalized frame orthogonality loss

    (sum ||K1^T K1 - I||_F^2 + ||K3 K3^T - I||_F^2) / (sum r1^2 + r2^2)
    """
    if not layers:
        raise DimensionError("orthogonality loss needs at least one layer")
    numerator = 0.0
    denominator = 0
    for tt in layers:
        r1, r2 = tt.ranks
        numerator += np.sum((tt.k1.T @ tt.k1 - np.eye(r1)) ** 2)
        numerator += np.sum((tt.k3 @ tt.k3.T - np.eye(r2)) ** 2)
        denominator += r1 * r1 + r2 * r2
    return float(numerator / denominator)


def combined_loss(ce: float, layers: Sequence[TTKernel],
                  lambda_ort: float = DEFAULT_LAMBDA_ORT) -> float:
    """Training objective ce + lambda_ort * orth_loss(layers)"""
    if lambda_ort < 0:
        raise DimensionError(f"lambda_ort must be nonnegative, got {lambda_ort}")
    if lambda_ort == 0 or not layers:
        return float(ce)
    return float(ce + lambda_ort * orth_loss(layers))


def random_tt_kernel(c_in: int, c_out: int, r1: int, r2: int, k: int,
                     signal_size: int, stride: int = 1, seed: int = 0,
                     orthogonal: bool = False) -> TTKernel:
    """Seeded standard-normal TT kernel, optionally with orthonormal frames"""
    rng = np.random.default_rng(seed)
    k1 = rng.standard_normal((c_in, r1))
    k2 = rng.standard_normal((k, k, r1, r2))
    k3 = rng.standard_normal((r2, c_out))
    if orthogonal:
        k1 = _positive_qr(k1)[0]
        k3 = _positive_qr(k3.T)[0].T
    return TTKernel(k1, k2, k3, stride, signal_size)
