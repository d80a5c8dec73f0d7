"""
Tests for the safetensors reader and writer.
"""

from __future__ import annotations

import contextlib
import json
import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schatten_bounds.core.errors import ParseError
from schatten_bounds.ingest.tensorfile import (
    TensorTable,
    load_tensor_file,
    parse_safetensors,
    write_safetensors,
)


def raw_file(header: dict | str, payload: bytes = b"") -> bytes:
    """Assemble a file from a header object (or raw header text) and payload."""
    text = header if isinstance(header, str) else json.dumps(header)
    encoded = text.encode("utf-8")
    return struct.pack("<Q", len(encoded)) + encoded + payload


def f32_entry(shape: list[int], begin: int, end: int) -> dict:
    return {"dtype": "F32", "shape": shape, "data_offsets": [begin, end]}


class TestRoundTrip:
    """Tests for writing and re-reading tables."""

    def test_f64_exact(self) -> None:
        arr = np.arange(6, dtype=np.float64).reshape(2, 3) / 7.0
        data = write_safetensors(TensorTable.from_arrays({"w": arr}, "F64"))
        table = parse_safetensors(data)
        np.testing.assert_array_equal(table.get_tensor("w"), arr)

    def test_f32_and_f16_precision(self) -> None:
        arr = np.linspace(-1.0, 1.0, 12).reshape(3, 4)
        for dtype, tol in (("F32", 1e-7), ("F16", 1e-3)):
            table = parse_safetensors(
                write_safetensors(TensorTable.from_arrays({"w": arr}, dtype))
            )
            np.testing.assert_allclose(table.get_tensor("w"), arr, atol=tol)

    def test_bf16_bit_pattern(self) -> None:
        """1.0 is stored as 0x3F80 and -2.0 as 0xC000."""
        table = TensorTable.from_arrays({"w": np.array([1.0, -2.0])}, "BF16")
        assert table.raw_bytes("w") == struct.pack("<HH", 0x3F80, 0xC000)
        parsed = parse_safetensors(write_safetensors(table))
        np.testing.assert_array_equal(parsed.get_tensor("w"), [1.0, -2.0])

    def test_writer_is_canonical(self) -> None:
        """Keys are sorted, the header has no whitespace and output is a fixed point."""
        table = TensorTable.from_arrays(
            {"b": np.ones((2, 2)), "a": np.zeros(3)}, "F32", metadata={"k": "v"}
        )
        data = write_safetensors(table)
        header_len = struct.unpack("<Q", data[:8])[0]
        header_text = data[8 : 8 + header_len].decode("utf-8")
        assert " " not in header_text
        assert list(json.loads(header_text)) == ["__metadata__", "a", "b"]
        assert write_safetensors(parse_safetensors(data)) == data

    def test_gapped_file_is_repacked(self) -> None:
        """Gaps and out-of-order offsets are dropped; tensor values survive."""
        a = struct.pack("<2f", 1.5, -2.0)
        b = struct.pack("<f", 3.0)
        payload = b"\xff" * 4 + b + b"\xff" * 4 + a
        header = {"a": f32_entry([2], 12, 20), "b": f32_entry([1], 4, 8)}
        original = parse_safetensors(raw_file(header, payload))
        data = write_safetensors(original)
        repacked = parse_safetensors(data)
        assert len(repacked.payload) == 12
        assert repacked.payload == a + b
        assert repacked.entries["a"].begin == 0
        assert repacked.entries["b"].begin == 8
        for name in ("a", "b"):
            np.testing.assert_array_equal(
                repacked.get_tensor(name), original.get_tensor(name)
            )
        assert write_safetensors(repacked) == data

    def test_metadata_preserved(self) -> None:
        table = TensorTable.from_arrays({"w": np.ones(2)}, metadata={"seed": "3"})
        assert parse_safetensors(write_safetensors(table)).metadata == {"seed": "3"}

    def test_empty_tensor(self) -> None:
        table = parse_safetensors(raw_file({"e": f32_entry([0, 3], 0, 0)}))
        assert table.get_tensor("e").shape == (0, 3)

    def test_keys_sorted(self) -> None:
        table = TensorTable.from_arrays({"z": np.ones(1), "a": np.ones(1)})
        assert table.keys() == ["a", "z"]
        assert "z" in table
        assert len(table) == 2

    def test_unknown_tensor_name(self) -> None:
        table = TensorTable.from_arrays({"w": np.ones(1)})
        with pytest.raises(KeyError, match="No tensor named"):
            table.get_tensor("missing")

    def test_unknown_dtype_on_write(self) -> None:
        with pytest.raises(ParseError) as exc_info:
            TensorTable.from_arrays({"w": np.ones(1)}, "I8")
        assert exc_info.value.reason == "unknown_dtype"

    def test_load_from_disk(self, tmp_path: Path) -> None:
        path = tmp_path / "w.safetensors"
        path.write_bytes(write_safetensors(TensorTable.from_arrays({"w": np.eye(2)})))
        np.testing.assert_array_equal(load_tensor_file(path).get_tensor("w"), np.eye(2))

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(OSError):
            load_tensor_file(tmp_path / "absent.safetensors")


class TestParseErrors:
    """Every structural problem maps to a distinct ParseError reason."""

    @pytest.mark.parametrize(
        ("data", "reason"),
        [
            (b"\x01\x02\x03", "truncated_header"),
            (struct.pack("<Q", 100) + b"{}", "header_too_long"),
            (raw_file("{not json"), "malformed_json"),
            (raw_file("[1, 2]"), "malformed_json"),
            (raw_file('{"a": 1, "a": 2}'), "malformed_json"),
            (struct.pack("<Q", 2) + b"\xff\xfe", "malformed_json"),
            (
                raw_file(
                    {"w": {"dtype": "I4", "shape": [1], "data_offsets": [0, 4]}},
                    b"\0" * 4,
                ),
                "unknown_dtype",
            ),
            (raw_file({"w": {"dtype": "F32", "shape": [1]}}), "bad_entry"),
            (raw_file({"w": f32_entry([-1], 0, 0)}), "bad_entry"),
            (raw_file({"w": f32_entry([1], 4, 0)}), "bad_entry"),
            (raw_file({"__metadata__": {"k": 1}}), "bad_entry"),
            (raw_file({"w": f32_entry([2], 0, 8)}, b"\0" * 4), "out_of_bounds"),
            (raw_file({"w": f32_entry([2], 0, 4)}, b"\0" * 8), "size_mismatch"),
            (
                raw_file(
                    {"a": f32_entry([2], 0, 8), "b": f32_entry([2], 4, 12)}, b"\0" * 12
                ),
                "overlap",
            ),
        ],
    )
    def test_reason(self, data: bytes, reason: str) -> None:
        with pytest.raises(ParseError) as exc_info:
            parse_safetensors(data)
        assert exc_info.value.reason == reason
        assert exc_info.value.to_record()["kind"] == "parse"

    def test_adjacent_ranges_do_not_overlap(self) -> None:
        data = raw_file(
            {"a": f32_entry([2], 0, 8), "b": f32_entry([1], 8, 12)}, b"\0" * 12
        )
        assert parse_safetensors(data).keys() == ["a", "b"]

    @settings(max_examples=200, deadline=None)
    @given(st.binary(max_size=256))
    def test_arbitrary_bytes_only_raise_parse_error(self, data: bytes) -> None:
        with contextlib.suppress(ParseError):
            parse_safetensors(data)

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_mutated_files_only_raise_parse_error(self, data: st.DataObject) -> None:
        valid = bytearray(
            write_safetensors(
                TensorTable.from_arrays({"a": np.ones((2, 2)), "b": np.zeros(3)})
            )
        )
        position = data.draw(st.integers(0, len(valid) - 1))
        valid[position] = data.draw(st.integers(0, 255))
        with contextlib.suppress(ParseError):
            parse_safetensors(bytes(valid))
