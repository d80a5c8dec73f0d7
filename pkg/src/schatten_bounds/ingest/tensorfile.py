"""
Reader and writer for the safetensors container format.

Layout: an 8-byte little-endian header length, that many bytes of UTF-8
JSON mapping tensor names to ``{dtype, shape, data_offsets}`` (offsets
relative to the end of the header), an optional ``__metadata__`` string
map, then the raw little-endian payload.

Tensors are materialized on demand as float64 arrays. Every structural
problem raises ``ParseError`` with a distinct ``reason``.
"""

import json
import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core.errors import ParseError
from ..utils.constants import PACKAGE_LOGGER_NAME

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.ingest.tensorfile")

HEADER_PREFIX_BYTES = 8
METADATA_KEY = "__metadata__"

# dtype tag -> (element size in bytes, numpy storage dtype)
DTYPES: dict[str, tuple[int, str]] = {
    "F64": (8, "<f8"),
    "F32": (4, "<f4"),
    "F16": (2, "<f2"),
    "BF16": (2, "<u2"),
}


@dataclass(frozen=True)
class TensorEntry:
    name: str
    dtype: str
    shape: tuple[int, ...]
    begin: int
    end: int

    @property
    def count(self) -> int:
        return math.prod(self.shape)


class TensorTable:
    """Parsed tensor file: validated entries over an immutable payload."""

    def __init__(
        self,
        entries: Mapping[str, TensorEntry],
        payload: bytes,
        metadata: Mapping[str, str] | None = None,
    ):
        self.entries = dict(entries)
        self.payload = bytes(payload)
        self.metadata = dict(metadata) if metadata is not None else None

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: object) -> bool:
        return name in self.entries

    def keys(self) -> list[str]:
        """Tensor names in lexicographic order."""
        return sorted(self.entries)

    def get_tensor(self, name: str) -> np.ndarray:
        """Materialize one tensor as a float64 array of its declared shape."""
        try:
            entry = self.entries[name]
        except KeyError:
            raise KeyError(f"No tensor named '{name}'") from None
        if entry.count == 0:
            return np.zeros(entry.shape)
        _, storage = DTYPES[entry.dtype]
        raw = np.frombuffer(
            self.payload, dtype=storage, count=entry.count, offset=entry.begin
        )
        if entry.dtype == "BF16":
            raw = (raw.astype(np.uint32) << 16).view(np.float32)
        return raw.astype(np.float64).reshape(entry.shape)

    def raw_bytes(self, name: str) -> bytes:
        entry = self.entries[name]
        return self.payload[entry.begin : entry.end]

    @classmethod
    def from_arrays(
        cls,
        arrays: Mapping[str, np.ndarray],
        dtype: str = "F32",
        metadata: Mapping[str, str] | None = None,
    ) -> "TensorTable":
        """Pack arrays contiguously in lexicographic name order."""
        if dtype not in DTYPES:
            raise ParseError(f"Unknown dtype '{dtype}'", reason="unknown_dtype")
        entries: dict[str, TensorEntry] = {}
        chunks: list[bytes] = []
        offset = 0
        for name in sorted(arrays):
            arr = np.asarray(arrays[name], dtype=np.float64)
            data = _encode(arr, dtype)
            entries[name] = TensorEntry(
                name, dtype, tuple(arr.shape), offset, offset + len(data)
            )
            chunks.append(data)
            offset += len(data)
        return cls(entries, b"".join(chunks), metadata)


def _encode(arr: np.ndarray, dtype: str) -> bytes:
    if dtype == "BF16":
        # round to nearest even on the upper 16 bits
        bits = arr.astype(np.float32).view(np.uint32).astype(np.uint64)
        rounded = (bits + 0x7FFF + ((bits >> 16) & 1)) >> 16
        return rounded.astype("<u2").tobytes()
    return arr.astype(DTYPES[dtype][1]).tobytes()


def _unique_keys(pairs: list[tuple[str, object]]) -> dict[str, object]:
    keys = [key for key, _ in pairs]
    if len(set(keys)) != len(keys):
        raise ValueError("duplicate keys in header object")
    return dict(pairs)


def _header_entry(name: str, value: object, payload_size: int) -> TensorEntry:
    if not isinstance(value, dict) or set(value) != {"dtype", "shape", "data_offsets"}:
        raise ParseError(f"Header entry '{name}' is malformed", reason="bad_entry")
    dtype, shape, offsets = value["dtype"], value["shape"], value["data_offsets"]
    if not isinstance(dtype, str) or dtype not in DTYPES:
        raise ParseError(
            f"Tensor '{name}' has unknown dtype '{dtype}'", reason="unknown_dtype"
        )
    if not isinstance(shape, list) or not all(
        isinstance(d, int) and not isinstance(d, bool) and d >= 0 for d in shape
    ):
        raise ParseError(f"Tensor '{name}' has an invalid shape", reason="bad_entry")
    if (
        not isinstance(offsets, list)
        or len(offsets) != 2
        or not all(isinstance(o, int) and not isinstance(o, bool) for o in offsets)
        or not 0 <= offsets[0] <= offsets[1]
    ):
        raise ParseError(f"Tensor '{name}' has invalid offsets", reason="bad_entry")
    begin, end = offsets
    if end > payload_size:
        raise ParseError(
            f"Tensor '{name}' range [{begin}, {end}) exceeds payload of "
            f"{payload_size} bytes",
            reason="out_of_bounds",
        )
    size, _ = DTYPES[dtype]
    expected = size * math.prod(shape)
    if end - begin != expected:
        raise ParseError(
            f"Tensor '{name}' spans {end - begin} bytes, shape needs {expected}",
            reason="size_mismatch",
        )
    return TensorEntry(name, dtype, tuple(shape), begin, end)


def parse_safetensors(data: bytes) -> TensorTable:
    """Parse and validate a safetensors byte string."""
    if len(data) < HEADER_PREFIX_BYTES:
        raise ParseError(
            f"File has {len(data)} bytes, fewer than the 8-byte header length",
            reason="truncated_header",
        )
    header_len = int.from_bytes(data[:HEADER_PREFIX_BYTES], "little")
    if HEADER_PREFIX_BYTES + header_len > len(data):
        raise ParseError(
            f"Header length {header_len} exceeds file size {len(data)}",
            reason="header_too_long",
        )
    try:
        header_bytes = data[HEADER_PREFIX_BYTES : HEADER_PREFIX_BYTES + header_len]
        header = json.loads(
            header_bytes.decode("utf-8"),
            object_pairs_hook=_unique_keys,
        )
    except (UnicodeDecodeError, RecursionError, ValueError) as e:
        raise ParseError(
            f"Header is not valid JSON: {e}", reason="malformed_json"
        ) from e
    if not isinstance(header, dict):
        raise ParseError("Header must be a JSON object", reason="malformed_json")
    payload = data[HEADER_PREFIX_BYTES + header_len :]
    metadata = header.pop(METADATA_KEY, None)
    if metadata is not None and (
        not isinstance(metadata, dict)
        or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()
        )
    ):
        raise ParseError("Metadata must map strings to strings", reason="bad_entry")
    entries = {
        name: _header_entry(name, value, len(payload)) for name, value in header.items()
    }
    occupied = sorted(
        (e.begin, e.end, e.name) for e in entries.values() if e.end > e.begin
    )
    for (_, prev_end, prev_name), (begin, _, name) in zip(
        occupied, occupied[1:], strict=False
    ):
        if begin < prev_end:
            raise ParseError(
                f"Tensors '{prev_name}' and '{name}' overlap", reason="overlap"
            )
    logger.debug(f"Parsed tensor table with {len(entries)} entries")
    return TensorTable(entries, payload, metadata)


def write_safetensors(table: TensorTable) -> bytes:
    """Serialize with lexicographic keys and no whitespace in the header.

    Tensors are repacked contiguously in key order with no padding, so only
    tables this writer produced re-serialize byte for byte. A parsed file
    with gaps or another tensor order comes back with new offsets.
    """
    header: dict[str, object] = {}
    if table.metadata is not None:
        header[METADATA_KEY] = dict(sorted(table.metadata.items()))
    chunks: list[bytes] = []
    offset = 0
    for name in table.keys():
        entry = table.entries[name]
        data = table.raw_bytes(name)
        header[name] = {
            "dtype": entry.dtype,
            "shape": list(entry.shape),
            "data_offsets": [offset, offset + len(data)],
        }
        chunks.append(data)
        offset += len(data)
    encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    prefix = len(encoded).to_bytes(HEADER_PREFIX_BYTES, "little")
    return prefix + encoded + b"".join(chunks)


def load_tensor_file(path: str | Path) -> TensorTable:
    """Read and parse a safetensors file from disk."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        logger.error(f"Failed to read tensor file {path}: {e}")
        raise
    table = parse_safetensors(data)
    logger.info(f"Parsed {path.name}: {len(table)} tensors, {len(table.payload)} bytes")
    return table
