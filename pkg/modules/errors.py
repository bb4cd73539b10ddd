"""
Error Types for spconv
Every library failure is a SpconvError carrying the CLI exit code it maps to
"""


class SpconvError(Exception):
    """Base class for all spconv failures"""

    exit_code = 1


class VerificationError(SpconvError):
    """An oracle comparison exceeded its tolerance"""

    exit_code = 1


class KernelFileError(SpconvError):
    """Kernel file is malformed or uses an unsupported layout"""

    exit_code = 2


class DimensionError(SpconvError, ValueError):
    """Shape, stride, size-cap or rank constraint violated"""

    exit_code = 3


class DegenerateKernelError(SpconvError):
    """Kernel cannot be processed as asked (e.g. normalizing a zero kernel)"""

    exit_code = 4


class SpectrumError(SpconvError):
    """Numerical failure while computing or reconstructing a spectrum"""

    exit_code = 4
