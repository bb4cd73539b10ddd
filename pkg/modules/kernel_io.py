"""
Kernel File I/O Module for spconv
Binary KernelFile format for full and TT kernels, plus CSV output helpers

KernelFile layout (little-endian):
    magic     5 bytes  b"SPCK1"
    dtype     4 bytes  b"F64L"
    role      4 bytes  b"FULL" or b"TT\\0\\0"
    dims      7 × int64: k, c_in, c_out, s, n, r1, r2   (r1 = r2 = 0 for FULL)
    payload   float64 values, row-major; TT payload is K1, K2, K3 concatenated
"""

import csv
import io
import logging
import math
import pathlib
import struct
import sys
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from modules.errors import KernelFileError
from modules.tensor_core import ConvKernel
from modules.tt_layer import TTKernel

logger = logging.getLogger(__name__)

MAGIC = b"SPCK1"
DTYPE_TAG = b"F64L"
ROLE_FULL = b"FULL"
ROLE_TT = b"TT\x00\x00"
HEADER = struct.Struct("<5s4s4s7q")
PAYLOAD_DTYPE = np.dtype("<f8")

AnyKernel = Union[ConvKernel, TTKernel]


def encode(kernel: AnyKernel) -> bytes:
    """Serialize a ConvKernel or TTKernel to KernelFile bytes"""
    if isinstance(kernel, TTKernel):
        r1, r2 = kernel.ranks
        header = HEADER.pack(MAGIC, DTYPE_TAG, ROLE_TT, kernel.k, kernel.c_in, kernel.c_out,
                             kernel.stride, kernel.signal_size, r1, r2)
        parts = (kernel.k1, kernel.k2, kernel.k3)
    elif isinstance(kernel, ConvKernel):
        header = HEADER.pack(MAGIC, DTYPE_TAG, ROLE_FULL, kernel.k, kernel.c_in, kernel.c_out,
                             kernel.stride, kernel.signal_size, 0, 0)
        parts = (kernel.weights,)
    else:
        raise TypeError(f"cannot encode {type(kernel).__name__}")
    return header + b"".join(np.ascontiguousarray(p, dtype=PAYLOAD_DTYPE).tobytes() for p in parts)


def decode(data: bytes) -> AnyKernel:
    """
    Parse KernelFile bytes

    Raises:
        KernelFileError: bad magic/tags, truncated or oversized payload, non-finite values
        DimensionError: dimensions that violate kernel invariants
    """
    if len(data) < HEADER.size:
        raise KernelFileError(f"file too short for a header ({len(data)} < {HEADER.size} bytes)")
    magic, dtype, role, k, c_in, c_out, s, n, r1, r2 = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise KernelFileError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if dtype != DTYPE_TAG:
        raise KernelFileError(f"unsupported dtype tag {dtype!r}")
    if min(k, c_in, c_out, s, n) < 1:
        raise KernelFileError(f"non-positive dimension in header (k={k}, c_in={c_in}, c_out={c_out}, s={s}, n={n})")

    if role == ROLE_FULL:
        shapes = [(k, k, c_in, c_out)]
    elif role == ROLE_TT:
        if r1 < 1 or r2 < 1:
            raise KernelFileError(f"TT file declares non-positive ranks ({r1}, {r2})")
        shapes = [(c_in, r1), (k, k, r1, r2), (r2, c_out)]
    else:
        raise KernelFileError(f"unknown role tag {role!r}")

    count = sum(math.prod(shape) for shape in shapes)
    payload = data[HEADER.size:]
    if len(payload) != PAYLOAD_DTYPE.itemsize * count:
        raise KernelFileError(
            f"payload is {len(payload)} bytes, header declares {count} values "
            f"({PAYLOAD_DTYPE.itemsize * count} bytes)"
        )
    values = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise KernelFileError("payload contains NaN or Inf values")

    arrays = []
    offset = 0
    for shape in shapes:
        size = math.prod(shape)
        arrays.append(values[offset:offset + size].reshape(shape))
        offset += size

    if role == ROLE_FULL:
        return ConvKernel(arrays[0], s, n)
    return TTKernel(arrays[0], arrays[1], arrays[2], s, n)


def save_kernel(path, kernel: AnyKernel) -> pathlib.Path:
    """Write a kernel file"""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode(kernel))
    logger.info(f"Saved {'TT' if isinstance(kernel, TTKernel) else 'FULL'} kernel to {path}")
    return path


def load_kernel(path) -> AnyKernel:
    """Read a kernel file"""
    path = pathlib.Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise KernelFileError(f"cannot read {path}: {e}") from e
    kernel = decode(data)
    logger.debug(f"Loaded {type(kernel).__name__} from {path}")
    return kernel


def write_csv(rows: Iterable[Sequence], header: Optional[Sequence[str]] = None,
              out: Optional[Union[str, pathlib.Path]] = None) -> str:
    """
    Write RFC-4180 CSV to a file, or to stdout when out is None

    Floats are written with repr(), which never depends on the locale.

    Returns:
        The CSV text
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\r\n")
    if header:
        writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    text = buffer.getvalue()

    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        out = pathlib.Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        logger.info(f"Wrote {out}")
    return text
