"""NMX1 field files and CSV slices."""

import csv
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_field
from nlmaxwell import fieldio
from nlmaxwell.field_core import GridSpec, VectorField


def write_random(tmp_path, n=4, seed=0, kind=fieldio.KIND_GENERIC):
    f = random_field(GridSpec(n, 3.0), np.random.default_rng(seed))
    path = tmp_path / "f.nmx"
    fieldio.write_field(f, kind, path)
    return f, path


class TestLayout:
    def test_header_bytes(self, tmp_path):
        f, path = write_random(tmp_path, kind=fieldio.KIND_DUAL)
        raw = path.read_bytes()
        assert raw[:4] == b"NMX1"
        assert struct.unpack("<I", raw[4:8])[0] == 1
        assert struct.unpack("<I", raw[8:12])[0] == 4
        assert struct.unpack("<d", raw[12:20])[0] == 3.0
        assert raw[20] == 1
        assert raw[21:24] == b"\0\0\0"
        assert len(raw) == 24 + 24 * 4**3

    def test_payload_order(self, tmp_path):
        # component-major, x index fastest
        g = GridSpec(4, 1.0)
        data = np.arange(3 * 64, dtype=float).reshape(3, 4, 4, 4)
        path = tmp_path / "o.nmx"
        fieldio.write_field(VectorField(g, data), 0, path)
        payload = np.frombuffer(path.read_bytes()[24:], dtype="<f8")
        assert payload[0] == data[0, 0, 0, 0]
        assert payload[1] == data[0, 1, 0, 0]
        assert payload[4] == data[0, 0, 1, 0]
        assert payload[16] == data[0, 0, 0, 1]
        assert payload[64] == data[1, 0, 0, 0]

    def test_header_info(self, tmp_path):
        _, path = write_random(tmp_path, kind=fieldio.KIND_PRIMAL)
        info = fieldio.read_header(path)
        assert (info["version"], info["n"], info["l"], info["kind"]) == (1, 4, 3.0, 2)


class TestRoundTrip:
    @given(n=st.sampled_from([4, 8, 16]), seed=st.integers(0, 2**32 - 1))
    def test_bitwise(self, tmp_path_factory, n, seed):
        f, path = write_random(tmp_path_factory.mktemp("rt"), n=n, seed=seed)
        g, kind = fieldio.read_field_with_kind(path)
        assert g.grid == f.grid and kind == 0
        assert g.data.tobytes() == f.data.tobytes()

    def test_hundred_fields(self, tmp_path):
        rng = np.random.default_rng(7)
        path = tmp_path / "h.nmx"
        for k in range(100):
            n = (4, 8, 16)[k % 3]
            f = random_field(GridSpec(n, float(rng.uniform(0.5, 20))), rng, scale=10.0 ** rng.uniform(-5, 5))
            fieldio.write_field(f, k % 3, path)
            assert fieldio.read_field(path).data.tobytes() == f.data.tobytes()


class TestErrors:
    def test_truncated(self, tmp_path):
        _, path = write_random(tmp_path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(fieldio.SizeMismatchError):
            fieldio.read_field(path)

    def test_short_header(self, tmp_path):
        path = tmp_path / "s.nmx"
        path.write_bytes(b"NMX1")
        with pytest.raises(fieldio.SizeMismatchError):
            fieldio.read_field(path)

    def test_wrong_magic(self, tmp_path):
        _, path = write_random(tmp_path)
        path.write_bytes(b"NMX2" + path.read_bytes()[4:])
        with pytest.raises(fieldio.CorruptHeaderError):
            fieldio.read_field(path)

    def test_wrong_version(self, tmp_path):
        _, path = write_random(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = struct.pack("<I", 2)
        path.write_bytes(bytes(raw))
        with pytest.raises(fieldio.CorruptHeaderError):
            fieldio.read_field(path)

    def test_unknown_kind(self, tmp_path):
        _, path = write_random(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[20] = 9
        path.write_bytes(bytes(raw))
        with pytest.raises(fieldio.CorruptHeaderError):
            fieldio.read_field(path)
        with pytest.raises(ValueError):
            fieldio.write_field(VectorField.zeros(GridSpec(4, 1.0)), 9, tmp_path / "x.nmx")

    def test_non_finite_payload(self, tmp_path):
        _, path = write_random(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[24:32] = struct.pack("<d", float("nan"))
        path.write_bytes(bytes(raw))
        with pytest.raises(fieldio.FieldFileError):
            fieldio.read_field(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            fieldio.read_field(tmp_path / "none.nmx")


class TestExportSlice:
    def test_constant_field(self, tmp_path):
        g = GridSpec(4, 1.0)
        one, zero = np.ones(g.shape), np.zeros(g.shape)
        fieldio.write_field(VectorField.from_components(g, one, zero, zero), 0, tmp_path / "c.nmx")
        rows = fieldio.export_slice(tmp_path / "c.nmx", "z", 2, tmp_path / "c.csv")
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert rows == 16 and len(lines) == 17
        assert lines[0] == "i,j,c1,c2,c3,magnitude"
        assert all(line.endswith(",1,0,0,1") for line in lines[1:])

    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    def test_values_and_magnitude(self, tmp_path, axis):
        f, path = write_random(tmp_path, n=8, seed=3)
        fieldio.export_slice(path, axis, 5, tmp_path / "s.csv")
        with open(tmp_path / "s.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 64
        ax = fieldio.AXES[axis]
        for row in rows:
            i, j = int(row["i"]), int(row["j"])
            idx = [i, j]
            idx.insert(ax, 5)
            c = np.array([float(row[k]) for k in ("c1", "c2", "c3")])
            # 17 significant digits reproduce the doubles exactly
            assert np.array_equal(c, f.data[(slice(None),) + tuple(idx)])
            assert abs(float(row["magnitude"]) - np.sqrt(np.sum(c**2))) <= 1e-15 * max(1.0, np.sqrt(np.sum(c**2)))

    def test_index_out_of_range(self, tmp_path):
        _, path = write_random(tmp_path)
        with pytest.raises(IndexError):
            fieldio.export_slice(path, "z", 4, tmp_path / "s.csv")
        with pytest.raises(IndexError):
            fieldio.export_slice(path, "z", -1, tmp_path / "s.csv")

    def test_bad_axis(self, tmp_path):
        _, path = write_random(tmp_path)
        with pytest.raises(ValueError):
            fieldio.export_slice(path, "w", 0, tmp_path / "s.csv")
