"""
Command Executor Module for spconv
Executes parsed commands against the library and maps failures to exit codes

Exit codes: 0 ok, 1 verification failure, 2 parse error,
3 dimension/rank violation, 4 degenerate input
"""

import logging
import pathlib
from typing import Dict, Optional

import numpy as np

from modules.bench import BENCH_FIELDS, run_bench, summarize
from modules.config import Settings
from modules.errors import KernelFileError, SpconvError
from modules.fft_spectrum import clip_spectrum, grouped_rows, spectrum
from modules.kernel_io import load_kernel, save_kernel, write_csv
from modules.spectral_control import clip_report, division_factor
from modules.tensor_core import ConvKernel
from modules.tt_layer import (
    TTKernel, ortho_report, orthogonalize, tt_decompose, tt_reconstruct, tt_spectrum,
)
from modules.verify import run_verification

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1


class Executor:
    """Executes spconv commands"""

    def __init__(self, settings: Optional[Settings] = None):
        """
        Initialize executor

        Args:
            settings: Effective settings (defaults when None)
        """
        self.settings = settings or Settings()
        self.workers = self.settings.worker_count()
        self.handlers = {
            "spectrum": self._execute_spectrum,
            "clip": self._execute_clip,
            "divide": self._execute_divide,
            "decompose": self._execute_decompose,
            "verify": self._execute_verify,
            "bench": self._execute_bench,
        }
        logger.debug(f"Executor initialized with {self.workers} worker thread(s)")

    def execute(self, command: Dict) -> int:
        """
        Execute parsed command

        Args:
            command: Parsed command dictionary

        Returns:
            Process exit code
        """
        if not command:
            return EXIT_FAILURE

        intent = command.get("intent")
        params = command.get("parameters", {})
        handler = self.handlers.get(intent)
        if handler is None:
            logger.error(f"Unknown command: {intent}")
            return EXIT_FAILURE

        logger.info(f"Executing: {intent}")
        try:
            return handler(params)
        except SpconvError as e:
            logger.error(f"{intent} failed: {e}")
            return e.exit_code
        except Exception as e:
            logger.error(f"Error executing {intent}: {e}", exc_info=True)
            return EXIT_FAILURE

    @staticmethod
    def _regeometry(kernel, n: Optional[int], s: Optional[int]):
        """Apply --n/--s overrides; constructors enforce n mod s == 0"""
        if n is None and s is None:
            return kernel
        n = kernel.signal_size if n is None else n
        s = kernel.stride if s is None else s
        if isinstance(kernel, TTKernel):
            return TTKernel(kernel.k1, kernel.k2, kernel.k3, s, n)
        return kernel.with_geometry(stride=s, signal_size=n)

    @staticmethod
    def _option(params: Dict, name: str, default):
        value = params.get(name)
        return default if value is None else value

    @staticmethod
    def _as_full(kernel) -> ConvKernel:
        return tt_reconstruct(kernel) if isinstance(kernel, TTKernel) else kernel

    def _execute_spectrum(self, params: Dict) -> int:
        kernel = self._regeometry(load_kernel(params["input"]), params.get("n"), params.get("s"))

        if isinstance(kernel, TTKernel):
            spec = tt_spectrum(kernel, workers=self.workers)
            logger.info(f"TT layer: {len(spec)} core values, {spec.implied_zeros} implied zeros omitted")
        else:
            spec = spectrum(kernel, workers=self.workers)

        if params.get("grouped"):
            write_csv(grouped_rows(spec), ["p1", "p2", "value"], params.get("out"))
        else:
            write_csv(([float(v)] for v in spec.values), None, params.get("out"))
        logger.info(f"sigma1 = {spec.sigma1:.12g}")
        return EXIT_OK

    def _execute_clip(self, params: Dict) -> int:
        kernel = self._as_full(load_kernel(params["input"]))
        delta = self._option(params, "delta", self.settings.clip_delta)
        every = self._option(params, "every", self.settings.clip_every)
        logger.info(f"Clipping at delta={delta} (loop cadence: every {every} iterations)")

        result = clip_spectrum(kernel, delta, workers=self.workers)
        report = clip_report(kernel, result, delta, workers=self.workers)
        expanded, truncated = result.expanded_kernel(), result.truncated

        out_dir = pathlib.Path(params["out"])
        save_kernel(out_dir / "expanded.spck", expanded)
        save_kernel(out_dir / "truncated.spck", truncated)
        write_csv(
            [[report.sigma1_pre, report.sigma1_expanded, report.sigma1_truncated]],
            ["sigma1_pre", "sigma1_expanded", "sigma1_truncated"],
            out_dir / "report.csv",
        )
        return EXIT_OK

    def _execute_divide(self, params: Dict) -> int:
        kernel = load_kernel(params["input"])
        iters = self._option(params, "iters", self.settings.cli_power_iters)
        target = params.get("target", 1.0)
        seed = params.get("seed", 0)

        factor, estimate = division_factor(self._as_full(kernel), target, iters, seed)

        if isinstance(kernel, TTKernel):
            # scaling the core scales every singular value of the layer
            result = kernel.with_core(kernel.k2 * factor)
            exact = tt_spectrum(result, workers=self.workers).sigma1
        else:
            result = kernel.scaled(factor)
            exact = spectrum(result, workers=self.workers).sigma1

        save_kernel(params["out"], result)
        logger.info(f"Estimate {estimate:.6g} after {iters} iteration(s); exact sigma1 now {exact:.6g}")
        write_csv([[estimate, exact]], ["sigma1_estimate", "sigma1_exact"])
        return EXIT_OK

    def _execute_decompose(self, params: Dict) -> int:
        kernel = load_kernel(params["input"])
        if isinstance(kernel, TTKernel):
            raise KernelFileError("decompose expects a FULL kernel file, got a TT file")

        tt = tt_decompose(kernel, params["r1"], params["r2"])
        if params.get("orthogonalize"):
            tt = orthogonalize(tt)

        rebuilt = tt_reconstruct(tt).weights
        norm = np.linalg.norm(kernel.weights)
        rel_error = float(np.linalg.norm(rebuilt - kernel.weights) / norm) if norm else 0.0
        report = ortho_report(tt)

        save_kernel(params["out"], tt)
        write_csv(
            [[rel_error, report.left_residual, report.right_residual]],
            ["relative_error", "left_residual", "right_residual"],
        )
        return EXIT_OK

    def _execute_verify(self, params: Dict) -> int:
        result = run_verification(
            grid=params.get("grid", "small"),
            seed=params.get("seed", 0),
            tolerance=self.settings.rel_tol,
            abs_floor=self.settings.abs_floor,
            corrupt=params.get("inject_corruption", False),
            workers=self.workers,
            column_cap=self.settings.dense_column_cap,
        )
        write_csv(result.rows, ["case_id", "max_rel_deviation"], params.get("out"))
        if not result.passed:
            worst_id, worst_dev = result.worst
            logger.error(f"Verification failed: worst case {worst_id} deviates by {worst_dev:.3e}")
            return EXIT_FAILURE
        return EXIT_OK

    def _execute_bench(self, params: Dict) -> int:
        records = run_bench(
            n=params.get("n", 16),
            s=params.get("s", 1),
            c_list=params.get("c_list", [64, 128]),
            r_list=params.get("r_list", ["c/2", "c/3"]),
            reps=params.get("reps", 5),
            k=params.get("k", 3),
            seed=params.get("seed", 0),
            workers=self.workers,
        )
        write_csv((rec.as_row() for rec in records), BENCH_FIELDS, params.get("out"))
        summary = summarize(records)
        logger.info(
            f"Best speedup {summary['best_speedup']:.2f}x, best memory ratio {summary['best_memory_ratio']:.2f}"
        )
        return EXIT_OK
