"""
Benchmark Module for spconv
Times the full-layer spectrum against the TT middle-core spectrum and
reports parameter counts, storage and speedup figures
"""

import logging
import math
import statistics
import time
from dataclasses import dataclass, asdict
from typing import Callable, Dict, List, Optional, Sequence

from modules.errors import DimensionError
from modules.fft_spectrum import spectrum
from modules.tt_layer import random_tt_kernel, tt_reconstruct, tt_spectrum

logger = logging.getLogger(__name__)

BENCH_FIELDS = [
    "method", "n", "k", "c", "r", "s", "wall_time_s", "params",
    "bytes_f64", "bytes_f32", "speedup", "memory_ratio", "theoretical_speedup",
]


@dataclass
class BenchRecord:
    """One timed spectrum computation"""

    method: str
    n: int
    k: int
    c: int
    r: int
    s: int
    wall_time_s: float
    params: int
    speedup: float = 1.0
    memory_ratio: float = 1.0
    theoretical_speedup: float = 1.0

    @property
    def bytes_f64(self) -> int:
        return 8 * self.params

    @property
    def bytes_f32(self) -> int:
        return 4 * self.params

    def as_row(self) -> List:
        data = asdict(self)
        data["bytes_f64"] = self.bytes_f64
        data["bytes_f32"] = self.bytes_f32
        return [data[name] for name in BENCH_FIELDS]


def full_padded_params(n: int, c_in: int, c_out: int) -> int:
    """Entries of the n×n×c_in×c_out padded kernel"""
    return n * n * c_in * c_out


def tt_padded_params(n: int, c_in: int, c_out: int, r1: int, r2: int) -> int:
    """Entries of the frames plus the n×n×r1×r2 padded core"""
    return c_in * r1 + n * n * r1 * r2 + r2 * c_out


def theoretical_speedup(c: int, r: int, s: int, n: int) -> float:
    """Ratio of n²c²(c s² + log(n/s)) to n²r²(r s² + log(n/s))"""
    log_term = math.log(n / s)
    return (c * c * (c * s * s + log_term)) / (r * r * (r * s * s + log_term))


def parse_rank(token: str, c: int) -> int:
    """
    Resolve a rank token: an integer or a fraction of c such as 'c/2'

    Raises:
        DimensionError: malformed token, zero divisor or a non-positive rank
    """
    token = token.strip()
    fraction = token.startswith("c/")
    try:
        value = int(token[2:] if fraction else token)
    except ValueError:
        raise DimensionError(f"cannot parse rank token {token!r}; use an integer or c/<int>") from None
    if value < 1:
        raise DimensionError(f"rank token {token!r} must be positive")
    return max(1, c // value) if fraction else value


def median_time(fn: Callable[[], object], reps: int) -> float:
    """Median wall time of fn over reps runs"""
    times = []
    for _ in range(max(1, reps)):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    # perf_counter resolution can round very fast calls down to 0
    return max(statistics.median(times), 1e-9)


def run_bench(n: int, s: int, c_list: Sequence[int], r_list: Sequence[str],
              reps: int = 5, k: int = 3, seed: int = 0,
              workers: Optional[int] = None) -> List[BenchRecord]:
    """
    Time full vs TT spectra over a channel/rank grid

    Args:
        n: Signal size
        s: Stride
        c_list: Channel counts (c_in = c_out = c)
        r_list: Rank tokens (integers or 'c/<d>')
        reps: Repetitions per measurement (median is reported)
        k: Filter size
        seed: Kernel seed

    Returns:
        Two records (full, tt) per admissible (c, r) pair
    """
    records: List[BenchRecord] = []
    for c in c_list:
        for token in r_list:
            r = parse_rank(str(token), c)
            if r > c:
                logger.warning(f"Skipping rank {r} > channels {c}")
                continue
            tt = random_tt_kernel(c, c, r, r, k, n, s, seed=seed)
            full = tt_reconstruct(tt)

            t_full = median_time(lambda: spectrum(full, workers=workers), reps)
            t_tt = median_time(lambda: tt_spectrum(tt, workers=workers), reps)

            p_full = full_padded_params(n, c, c)
            p_tt = tt_padded_params(n, c, c, r, r)
            ideal = theoretical_speedup(c, r, s, n)

            records.append(BenchRecord("full", n, k, c, c, s, t_full, p_full))
            records.append(BenchRecord("tt", n, k, c, r, s, t_tt, p_tt,
                                       speedup=t_full / t_tt,
                                       memory_ratio=p_full / p_tt,
                                       theoretical_speedup=ideal))
            logger.info(
                f"c={c} r={r}: full {t_full:.4f}s, tt {t_tt:.4f}s, "
                f"speedup {t_full / t_tt:.2f}x (ideal {ideal:.2f}x), memory ratio {p_full / p_tt:.2f}"
            )
    return records


def summarize(records: Sequence[BenchRecord]) -> Dict[str, float]:
    """Best measured speedup and memory ratio across TT records"""
    tt_records = [rec for rec in records if rec.method == "tt"]
    if not tt_records:
        return {"best_speedup": 0.0, "best_memory_ratio": 0.0}
    return {
        "best_speedup": max(rec.speedup for rec in tt_records),
        "best_memory_ratio": max(rec.memory_ratio for rec in tt_records),
    }
