"""
Command Parser Module for spconv
Parses command-line arguments into a command dictionary
Uses fuzzy matching to suggest the intended command on typos
"""

import argparse
import logging
from typing import Dict, List, Optional, Sequence

from rapidfuzz import fuzz, process

logger = logging.getLogger(__name__)

COMMANDS = {
    "spectrum": "Singular values of a FULL or TT kernel file",
    "clip": "Clip singular values above a threshold and write the clipped kernels",
    "divide": "Rescale a kernel to a target largest singular value (power iteration)",
    "decompose": "TT-SVD of a FULL kernel file into a TT kernel file",
    "verify": "Run the dense-oracle equivalence grid",
    "bench": "Time full vs TT spectra and report memory ratios",
}


class UnknownCommandError(Exception):
    """Raised when the first argument is not a known command"""

    def __init__(self, name: str, suggestions: List[str]):
        self.name = name
        self.suggestions = suggestions
        hint = f" Did you mean: {', '.join(suggestions)}?" if suggestions else ""
        super().__init__(f"Unknown command '{name}'.{hint}")


def _int_list(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _token_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


class CommandParser:
    """Parses spconv command lines into actionable commands"""

    def __init__(self):
        self.fuzzy_threshold = 60  # Minimum similarity score
        self.parser = self._build_parser()

    def _build_parser(self) -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--config", default=None, help="Settings file (YAML or JSON)")
        common.add_argument("--threads", type=int, default=None,
                            help="Worker threads, 0 = auto (env SPCONV_THREADS)")
        common.add_argument("--log-file", default=None, help="Also log to this file")
        verbosity = common.add_mutually_exclusive_group()
        verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
        verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings only")

        parser = argparse.ArgumentParser(
            prog="spconv",
            description="Exact singular values of periodic convolutional layers",
        )
        sub = parser.add_subparsers(dest="intent", metavar="command")
        sub.required = True

        p = sub.add_parser("spectrum", parents=[common], help=COMMANDS["spectrum"])
        p.add_argument("input", help="Kernel file (FULL or TT)")
        p.add_argument("--n", type=int, default=None, help="Signal size (defaults to the file's)")
        p.add_argument("--s", type=int, default=None, help="Stride (defaults to the file's)")
        p.add_argument("--grouped", action="store_true", help="Emit (p1, p2, value) rows")
        p.add_argument("--out", default=None, help="CSV path (default stdout)")

        p = sub.add_parser("clip", parents=[common], help=COMMANDS["clip"])
        p.add_argument("input", help="Kernel file (FULL or TT)")
        p.add_argument("--delta", type=float, default=None,
                       help="Threshold; 1 or 2 in the reference experiments")
        p.add_argument("--every", type=int, default=None,
                       help="Training-loop cadence in iterations (informational)")
        p.add_argument("--out", required=True,
                       help="Directory for expanded.spck, truncated.spck and report.csv")

        p = sub.add_parser("divide", parents=[common], help=COMMANDS["divide"])
        p.add_argument("input", help="Kernel file (FULL or TT)")
        p.add_argument("--target", type=float, default=1.0, help="Desired largest singular value")
        p.add_argument("--iters", type=int, default=None,
                       help="Power iterations (default: one, as in per-step training)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="Output kernel file")

        p = sub.add_parser("decompose", parents=[common], help=COMMANDS["decompose"])
        p.add_argument("input", help="FULL kernel file")
        p.add_argument("--r1", type=int, required=True, help="Input rank")
        p.add_argument("--r2", type=int, required=True, help="Output rank")
        p.add_argument("--orthogonalize", action="store_true", help="QR-orthogonalize the frames")
        p.add_argument("--out", required=True, help="Output TT kernel file")

        p = sub.add_parser("verify", parents=[common], help=COMMANDS["verify"])
        p.add_argument("--grid", choices=["small", "full"], default="small")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="CSV path (default stdout)")
        p.add_argument("--inject-corruption", action="store_true", help=argparse.SUPPRESS)

        p = sub.add_parser("bench", parents=[common], help=COMMANDS["bench"])
        p.add_argument("--n", type=int, default=16)
        p.add_argument("--s", type=int, default=1)
        p.add_argument("--k", type=int, default=3)
        p.add_argument("--c-list", type=_int_list, default=[64, 128])
        p.add_argument("--r-list", type=_token_list, default=["c/2", "c/3"],
                       help="Ranks: integers or fractions of c such as c/2")
        p.add_argument("--reps", type=int, default=5)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="CSV path (default stdout)")

        return parser

    def get_command_suggestions(self, partial_text: str, limit: int = 3) -> List[str]:
        """
        Get command suggestions for a mistyped command

        Args:
            partial_text: What the user typed
            limit: Maximum number of suggestions

        Returns:
            List of suggested commands
        """
        matches = process.extract(partial_text, list(COMMANDS), scorer=fuzz.ratio, limit=limit)
        return [match[0] for match in matches if match[1] >= self.fuzzy_threshold]

    def parse(self, argv: Optional[Sequence[str]] = None) -> Dict:
        """
        Parse a command line

        Args:
            argv: Arguments without the program name

        Returns:
            Dictionary with intent, parameters and global options

        Raises:
            UnknownCommandError: first positional is not a command
            SystemExit: argparse usage errors (exit code 2)
        """
        argv = list(argv or [])
        if argv and not argv[0].startswith("-") and argv[0] not in COMMANDS:
            raise UnknownCommandError(argv[0], self.get_command_suggestions(argv[0]))

        args = vars(self.parser.parse_args(argv))
        intent = args.pop("intent")
        options = {key: args.pop(key) for key in ("config", "threads", "log_file", "verbose", "quiet")}
        logger.debug(f"Parsed command {intent} with {args}")
        return {"intent": intent, "parameters": args, "options": options}
