"""
Unit tests for the KernelFile format and CSV output
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from modules.errors import DimensionError, KernelFileError
from modules.kernel_io import (
    HEADER, MAGIC, ROLE_FULL, decode, encode, load_kernel, save_kernel, write_csv,
)
from modules.tensor_core import ConvKernel, random_kernel
from modules.tt_layer import TTKernel, random_tt_kernel


class TestKernelFile:
    """Test cases for encode/decode and file helpers"""

    @pytest.mark.parametrize("seed", range(5))
    def test_full_round_trip_is_bitwise(self, tmp_path, seed):
        gen = np.random.default_rng(seed)
        k, c_in, c_out, s = (int(v) for v in gen.integers(1, 4, size=4))
        kern = random_kernel(k, c_in, c_out, s, 4 * s * k, seed=seed)
        path = save_kernel(tmp_path / "k.spck", kern)
        loaded = load_kernel(path)
        assert isinstance(loaded, ConvKernel)
        assert (loaded.stride, loaded.signal_size) == (kern.stride, kern.signal_size)
        assert loaded.weights.tobytes() == kern.weights.tobytes()
        assert path.read_bytes() == encode(loaded)

    @pytest.mark.parametrize("seed", range(5))
    def test_tt_round_trip_is_bitwise(self, tmp_path, seed):
        tt = random_tt_kernel(4, 3, 2, 1 + seed % 3, 3, 8, stride=2, seed=seed)
        loaded = load_kernel(save_kernel(tmp_path / "tt.spck", tt))
        assert isinstance(loaded, TTKernel)
        assert loaded.ranks == tt.ranks
        for a, b in ((loaded.k1, tt.k1), (loaded.k2, tt.k2), (loaded.k3, tt.k3)):
            assert a.tobytes() == b.tobytes()

    def test_header_layout(self):
        kern = random_kernel(3, 2, 5, 2, 8)
        data = encode(kern)
        fields = HEADER.unpack_from(data)
        assert fields[0] == MAGIC
        assert fields[2] == ROLE_FULL
        assert fields[3:] == (3, 2, 5, 2, 8, 0, 0)
        assert len(data) == HEADER.size + 8 * kern.weights.size

    def test_bad_magic(self):
        data = bytearray(encode(random_kernel(1, 1, 1, 1, 2)))
        data[:5] = b"XXXXX"
        with pytest.raises(KernelFileError):
            decode(bytes(data))

    def test_short_file(self):
        with pytest.raises(KernelFileError):
            decode(b"SPCK1")

    def test_truncated_payload(self):
        data = encode(random_kernel(2, 1, 1, 1, 4))
        with pytest.raises(KernelFileError):
            decode(data[:-8])

    def test_unknown_role(self):
        header = HEADER.pack(MAGIC, b"F64L", b"CONV", 1, 1, 1, 1, 2, 0, 0)
        with pytest.raises(KernelFileError):
            decode(header + np.zeros(1).tobytes())

    def test_unsupported_dtype(self):
        header = HEADER.pack(MAGIC, b"F32L", ROLE_FULL, 1, 1, 1, 1, 2, 0, 0)
        with pytest.raises(KernelFileError):
            decode(header + np.zeros(1).tobytes())

    def test_nan_payload(self):
        header = HEADER.pack(MAGIC, b"F64L", ROLE_FULL, 1, 1, 1, 1, 2, 0, 0)
        with pytest.raises(KernelFileError):
            decode(header + np.array([np.nan]).tobytes())

    def test_tt_without_ranks(self):
        header = HEADER.pack(MAGIC, b"F64L", b"TT\x00\x00", 1, 1, 1, 1, 2, 0, 0)
        with pytest.raises(KernelFileError):
            decode(header)

    @pytest.mark.parametrize("role,dims", [
        (ROLE_FULL, (2 ** 32, 1, 1, 1, 2 ** 33, 0, 0)),
        (ROLE_FULL, (2 ** 16, 2 ** 16, 2 ** 16, 1, 2 ** 16, 0, 0)),
        (b"TT\x00\x00", (2 ** 32, 1, 1, 1, 2 ** 33, 1, 1)),
    ])
    def test_huge_dimensions_with_empty_payload(self, role, dims):
        header = HEADER.pack(MAGIC, b"F64L", role, *dims)
        with pytest.raises(KernelFileError):
            decode(header)

    def test_invalid_geometry(self):
        header = HEADER.pack(MAGIC, b"F64L", ROLE_FULL, 1, 1, 1, 3, 4, 0, 0)
        with pytest.raises(DimensionError):
            decode(header + np.ones(1).tobytes())

    def test_missing_file(self, tmp_path):
        with pytest.raises(KernelFileError):
            load_kernel(tmp_path / "missing.spck")


class TestWriteCsv:
    """Test cases for CSV output"""

    def test_stdout(self, capsys):
        text = write_csv([[0.1, 2], [1e-20, 3]], ["value", "count"])
        assert capsys.readouterr().out == text
        assert text == "value,count\r\n0.1,2\r\n1e-20,3\r\n"

    def test_floats_round_trip(self, capsys):
        value = 1.0 / 3.0
        text = write_csv([[value]])
        capsys.readouterr()
        assert float(text.strip()) == value

    def test_file(self, tmp_path):
        out = tmp_path / "nested" / "rows.csv"
        write_csv([(0, 1, 2.5)], ["p1", "p2", "value"], out)
        assert out.read_bytes() == b"p1,p2,value\r\n0,1,2.5\r\n"


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
