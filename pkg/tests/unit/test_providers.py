"""
Unit tests for the local weight sources.
"""

from __future__ import annotations

import hashlib
import threading
from pathlib import Path

import numpy as np
import pytest
from _test_env import TINY_SPEC, write_checkpoint, write_spec_json

from providers.local import SafetensorsFileSource, SyntheticSpecSource, open_source
from schatten_bounds.core.contracts import WeightSource
from schatten_bounds.core.errors import LayoutError, ParseError
from schatten_bounds.ingest.synth import SynthSpec


class TestOpenSource:
    """Tests for picking a source by extension."""

    def test_json_is_synthetic(self, tmp_path: Path) -> None:
        source = open_source(write_spec_json(tmp_path))
        assert isinstance(source, SyntheticSpecSource)
        assert isinstance(source, WeightSource)

    def test_other_extensions_are_files(self, tmp_path: Path) -> None:
        source = open_source(write_checkpoint(tmp_path), head_dim=4)
        assert isinstance(source, SafetensorsFileSource)
        assert isinstance(source, WeightSource)

    def test_missing_file_fails_lazily(self, tmp_path: Path) -> None:
        """Opening never touches the disk; loading does."""
        source = open_source(tmp_path / "absent.safetensors")
        with pytest.raises(OSError):
            source.load_table()


class TestSafetensorsFileSource:
    """Tests for SafetensorsFileSource."""

    def test_name_and_provenance(self, tmp_path: Path) -> None:
        path = write_checkpoint(tmp_path, name="mini")
        source = SafetensorsFileSource(path, head_dim=4)
        assert source.name == "mini"
        record = source.provenance()
        assert record["source"] == "safetensors"
        assert record["file"] == "mini.safetensors"
        assert record["sha256"] == hashlib.sha256(path.read_bytes()).hexdigest()

    def test_checkpoint_is_cached(self, tmp_path: Path) -> None:
        source = SafetensorsFileSource(write_checkpoint(tmp_path), head_dim=4)
        first = source.load_checkpoint()
        assert source.load_checkpoint() is first
        assert first.name == "tiny"
        assert (first.depth, first.width, first.heads) == (1, 8, 2)

    def test_close_drops_cache(self, tmp_path: Path) -> None:
        source = SafetensorsFileSource(write_checkpoint(tmp_path), head_dim=4)
        first = source.load_table()
        source.close()
        assert source.load_table() is not first

    def test_concurrent_loads_share_one_table(self, tmp_path: Path) -> None:
        source = SafetensorsFileSource(write_checkpoint(tmp_path), head_dim=4)
        tables: list[object] = []
        threads = [
            threading.Thread(target=lambda: tables.append(source.load_table()))
            for _ in range(8)
        ]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        assert all(table is tables[0] for table in tables)

    def test_corrupt_file(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.safetensors"
        path.write_bytes(b"\x00\x01")
        with pytest.raises(ParseError):
            SafetensorsFileSource(path).load_checkpoint()

    def test_wrong_prefix(self, tmp_path: Path) -> None:
        source = SafetensorsFileSource(
            write_checkpoint(tmp_path), prefix="roberta.layer", head_dim=4
        )
        with pytest.raises(LayoutError, match="No tensors found"):
            source.load_checkpoint()


class TestSyntheticSpecSource:
    """Tests for SyntheticSpecSource."""

    def test_name_precedence(self, tmp_path: Path) -> None:
        """Spec name, then file stem, then a shape label."""
        named = SynthSpec(**{**TINY_SPEC, "name": "given"})
        assert SyntheticSpecSource(named, tmp_path / "file.json").name == "given"
        unnamed = SynthSpec(**TINY_SPEC)
        assert SyntheticSpecSource(unnamed, tmp_path / "file.json").name == "file"
        assert SyntheticSpecSource(unnamed).name == "synth-L1-N8"

    def test_provenance_from_file(self, tmp_path: Path) -> None:
        path = write_spec_json(tmp_path)
        record = SyntheticSpecSource.from_file(path).provenance()
        assert record["source"] == "synthetic"
        assert record["spec"]["width"] == 8
        assert record["spec"]["qk"]["law"] == "exact_rank"
        assert record["sha256"] == hashlib.sha256(path.read_bytes()).hexdigest()

    def test_provenance_in_memory(self) -> None:
        record = SyntheticSpecSource(SynthSpec(**TINY_SPEC)).provenance()
        assert "file" not in record
        assert "sha256" not in record

    def test_spec_overrides_head_dim(self) -> None:
        """The spec's own head dimension is used, not the default 64."""
        ckpt = SyntheticSpecSource(SynthSpec(**TINY_SPEC)).load_checkpoint()
        assert ckpt.head_dim == 4
        assert ckpt.heads == 2

    def test_matches_file_source(self, tmp_path: Path) -> None:
        synthetic = SyntheticSpecSource(SynthSpec(**TINY_SPEC)).load_checkpoint()
        stored = SafetensorsFileSource(
            write_checkpoint(tmp_path), head_dim=4
        ).load_checkpoint()
        np.testing.assert_array_equal(synthetic.vo[0][0], stored.vo[0][0])
        np.testing.assert_array_equal(synthetic.m_out[0], stored.m_out[0])
