"""
Verification Module for spconv
Runs the FFT spectrum and TT spectrum against the dense oracle over a grid
of layer shapes and reports the worst deviation per case
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

import numpy as np

from modules.dense_oracle import DEFAULT_COLUMN_CAP, build_dense_operator, dense_spectrum
from modules.errors import DimensionError
from modules.fft_spectrum import relative_deviation, spectrum
from modules.tensor_core import random_kernel
from modules.tt_layer import random_tt_kernel, tt_reconstruct, tt_spectrum

logger = logging.getLogger(__name__)

GRIDS = {
    "small": {
        "spectrum": {"n": (4, 8), "k": (1, 3), "c": (1, 2), "s": (1, 2), "reps": 1},
        "tt": {"c": (2, 4), "k": (1, 3), "n": (4, 8), "s": (1, 2), "reps": 1},
    },
    "full": {
        "spectrum": {"n": (4, 6, 8), "k": (1, 2, 3), "c": (1, 2, 3), "s": (1, 2), "reps": 3},
        "tt": {"c": (2, 4, 6), "k": (1, 3), "n": (4, 8), "s": (1, 2), "reps": 1},
    },
}
# strided cases use these signal sizes only
STRIDED_SIZES = (4, 8)


@dataclass
class VerifyResult:
    """Per-case deviations and the overall verdict"""

    rows: List[Tuple[str, float]] = field(default_factory=list)
    tolerance: float = 1e-8

    @property
    def worst(self) -> Tuple[str, float]:
        if not self.rows:
            return ("", 0.0)
        return max(self.rows, key=lambda row: row[1])

    @property
    def passed(self) -> bool:
        return self.worst[1] <= self.tolerance


def case_seed(base_seed: int, *params: int) -> int:
    """Deterministic per-case seed"""
    return int(np.random.SeedSequence([base_seed, *params]).generate_state(1)[0])


def _spectrum_cases(grid: dict) -> Iterator[Tuple[int, int, int, int, int, int]]:
    for n, k, c_in, c_out, s in itertools.product(grid["n"], grid["k"], grid["c"], grid["c"], grid["s"]):
        if k > n or n % s:
            continue
        if s > 1 and n not in STRIDED_SIZES:
            continue
        for rep in range(grid["reps"]):
            yield n, k, c_in, c_out, s, rep


def _tt_cases(grid: dict) -> Iterator[Tuple[int, int, int, int, int, int, int]]:
    for c, k, n, s in itertools.product(grid["c"], grid["k"], grid["n"], grid["s"]):
        if k > n or n % s:
            continue
        for r1, r2 in itertools.product(range(1, c + 1), repeat=2):
            for rep in range(grid["reps"]):
                yield c, r1, r2, k, n, s, rep


def run_verification(grid: str = "small", seed: int = 0, tolerance: float = 1e-8,
                     abs_floor: float = 1e-2, corrupt: bool = False,
                     workers: Optional[int] = None,
                     column_cap: int = DEFAULT_COLUMN_CAP) -> VerifyResult:
    """
    Compare fast spectra with the dense oracle over a grid

    Args:
        grid: "small" or "full"
        seed: Base seed; every case derives its own seed from it
        tolerance: Pass threshold on relative_deviation
        abs_floor: Floor of the relative deviation denominator
        corrupt: Test hook that perturbs every fast spectrum (must fail)
        workers: scipy.fft worker threads
        column_cap: Dense oracle size guard

    Returns:
        VerifyResult with one (case-id, deviation) row per case
    """
    if grid not in GRIDS:
        raise DimensionError(f"unknown grid {grid!r}; choose from {', '.join(GRIDS)}")
    cases = GRIDS[grid]
    result = VerifyResult(tolerance=tolerance)

    for n, k, c_in, c_out, s, rep in _spectrum_cases(cases["spectrum"]):
        kern = random_kernel(k, c_in, c_out, s, n, seed=case_seed(seed, 0, n, k, c_in, c_out, s, rep))
        fast = spectrum(kern, workers=workers).values
        if corrupt:
            fast = fast * (1.0 + 1e-3)
        oracle = dense_spectrum(build_dense_operator(kern, column_cap)).values
        dev = relative_deviation(fast, oracle, abs_floor)
        case_id = f"spectrum-n{n}-k{k}-ci{c_in}-co{c_out}-s{s}-rep{rep}"
        logger.debug(f"{case_id}: {dev:.3e}")
        result.rows.append((case_id, dev))

    for c, r1, r2, k, n, s, rep in _tt_cases(cases["tt"]):
        tt = random_tt_kernel(c, c, r1, r2, k, n, s, seed=case_seed(seed, 1, c, r1, r2, k, n, s, rep))
        fast = tt_spectrum(tt, workers=workers).with_implied_zeros()
        if corrupt:
            fast = fast * (1.0 + 1e-3)
        oracle = dense_spectrum(build_dense_operator(tt_reconstruct(tt), column_cap)).values
        dev = relative_deviation(fast, oracle, abs_floor)
        case_id = f"tt-c{c}-r{r1}x{r2}-k{k}-n{n}-s{s}-rep{rep}"
        logger.debug(f"{case_id}: {dev:.3e}")
        result.rows.append((case_id, dev))

    worst_id, worst_dev = result.worst
    logger.info(f"Verified {len(result.rows)} cases on the {grid} grid; worst {worst_id} at {worst_dev:.3e}")
    return result
