"""
Spectral Control Module for spconv
Clipping and division of a layer's largest singular value, power iteration
on the periodic signal map, and empirical Lipschitz ratios
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from modules.conv_engine import conv_adjoint_apply, conv_apply, conv_apply_batch
from modules.errors import DegenerateKernelError, DimensionError
from modules.fft_spectrum import ClipResult, clip_spectrum, spectrum
from modules.tensor_core import ConvKernel

logger = logging.getLogger(__name__)

DEFAULT_POWER_ITERS = 100


@dataclass
class ClipReport:
    """Largest singular value before clipping, after expansion and after truncation"""

    sigma1_pre: float
    sigma1_expanded: float
    sigma1_truncated: float

    @property
    def truncation_gap(self) -> float:
        return self.sigma1_truncated - self.sigma1_expanded


def power_iteration_sigma1(kern: ConvKernel, iters: int = DEFAULT_POWER_ITERS,
                           seed: int = 0) -> Tuple[float, List[float]]:
    """
    Estimate the largest singular value with power iteration on A^T A

    Args:
        kern: Convolution kernel defining A
        iters: Number of iterations (>= 1)
        seed: Seed of the random unit start signal

    Returns:
        (estimate, history) where history[t] = ||A x_t|| after iteration t
    """
    if iters < 1:
        raise DimensionError(f"power iteration needs iters >= 1, got {iters}")

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(kern.input_shape)
    x /= np.linalg.norm(x)

    history: List[float] = []
    estimate = 0.0
    for _ in range(iters):
        z = conv_adjoint_apply(kern, conv_apply(kern, x))
        norm = np.linalg.norm(z)
        if norm == 0.0:
            logger.info("Power iteration hit the null space; estimate is 0")
            history.append(0.0)
            return 0.0, history
        x = z / norm
        estimate = float(np.linalg.norm(conv_apply(kern, x)))
        history.append(estimate)

    logger.debug(f"Power iteration: sigma1 ~ {estimate:.12g} after {iters} iterations")
    return estimate, history


def division_factor(kern: ConvKernel, target: float, iters: int = DEFAULT_POWER_ITERS,
                    seed: int = 0) -> Tuple[float, float]:
    """
    Scale factor target / sigma1-estimate for a kernel

    Returns:
        (factor, estimate)

    Raises:
        DegenerateKernelError: for a kernel whose estimate is 0
    """
    if not target > 0:
        raise DimensionError(f"target must be positive, got {target}")
    estimate, _ = power_iteration_sigma1(kern, iters, seed)
    if estimate == 0.0:
        raise DegenerateKernelError("cannot normalize a kernel whose largest singular value is 0")
    return target / estimate, estimate


def divide_to_target(kern: ConvKernel, target: float, iters: int = DEFAULT_POWER_ITERS,
                     seed: int = 0) -> ConvKernel:
    """Rescale the kernel so its estimated largest singular value equals target"""
    factor, estimate = division_factor(kern, target, iters, seed)
    logger.info(f"Dividing by estimate {estimate:.6g}, scaling weights by {factor:.6g}")
    return kern.scaled(factor)


def clip_to_threshold(kern: ConvKernel, delta: float,
                      workers: Optional[int] = None) -> Tuple[ConvKernel, ClipReport]:
    """
    Clip singular values above delta and return the k×k truncated kernel

    The expanded kernel is exact; the truncated one is only approximately
    clipped, so its sigma1 is reported rather than guaranteed.
    """
    result = clip_spectrum(kern, delta, workers=workers)
    return result.truncated, clip_report(kern, result, delta, workers)


def clip_report(kern: ConvKernel, result: ClipResult, delta: float,
                workers: Optional[int] = None) -> ClipReport:
    """sigma1 of the original, expanded and truncated kernels of a clip"""
    pre = spectrum(kern, workers=workers).sigma1
    expanded = spectrum(result.expanded_kernel(), workers=workers).sigma1
    truncated = spectrum(result.truncated, workers=workers).sigma1

    report = ClipReport(pre, expanded, truncated)
    logger.info(
        f"Clip to {delta}: sigma1 {pre:.6g} -> expanded {expanded:.6g}, truncated {truncated:.6g}"
    )
    if truncated > delta * (1 + 1e-8):
        logger.warning(f"Truncated kernel exceeds the threshold by {truncated - delta:.3e}")
    return report


def empirical_lipschitz(kern: ConvKernel, probes: int = 1000,
                        seed: int = 0) -> Tuple[float, List[float]]:
    """
    Largest ||A d|| / ||d|| over seeded random directions d

    For a linear map this is a lower bound on sigma1.
    """
    if probes < 1:
        raise DimensionError(f"need at least one probe, got {probes}")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((probes,) + kern.input_shape)
    images = conv_apply_batch(kern, directions)

    num = np.linalg.norm(images.reshape(probes, -1), axis=1)
    den = np.linalg.norm(directions.reshape(probes, -1), axis=1)
    ratios = (num / den).tolist()
    return float(max(ratios)), ratios
