"""
Tests for synthetic checkpoints and the tensor-name layouts.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from _test_env import (
    TINY_SPEC,
    rng,
    write_checkpoint,
    write_spec_json,
    write_theory_file,
)
from pydantic import ValidationError

from schatten_bounds.analysis.model import random_theory_weights
from schatten_bounds.core.errors import InputError, LayoutError
from schatten_bounds.ingest.layout import (
    file_digest,
    map_bert_layout,
    map_theory_layout,
    read_checkpoint,
    read_table,
)
from schatten_bounds.ingest.synth import (
    ExactRank,
    Gaussian,
    PowerLaw,
    SynthSpec,
    load_synth_spec,
    synth_checkpoint,
)
from schatten_bounds.ingest.tensorfile import (
    TensorTable,
    load_tensor_file,
    write_safetensors,
)


def tiny(**fields: object) -> SynthSpec:
    return SynthSpec(**{**TINY_SPEC, **fields})


def spectrum(mat: np.ndarray) -> np.ndarray:
    return np.linalg.svd(mat, compute_uv=False)


class TestSpectrumLaws:
    """Tests for the spectrum laws."""

    def test_exact_rank(self) -> None:
        values = ExactRank(rank=2, sigma=3.0).spectrum(4)
        assert values.tolist() == [3.0, 3.0, 0.0, 0.0]
        assert ExactRank().spectrum(3).tolist() == [1.0, 1.0, 1.0]

    def test_exact_rank_too_large(self) -> None:
        with pytest.raises(InputError, match="exceeds"):
            ExactRank(rank=5).spectrum(4)

    def test_power_law(self) -> None:
        np.testing.assert_allclose(
            PowerLaw(sigma1=2.0, beta=1.0).spectrum(3), [2.0, 1.0, 2.0 / 3.0]
        )


class TestSynthSpec:
    """Tests for SynthSpec validation and loading."""

    def test_defaults(self) -> None:
        spec = SynthSpec(depth=2, width=128)
        assert spec.head_dim == 64
        assert spec.heads == 2
        assert spec.ffn_width == 512
        assert spec.ffn_in == PowerLaw(sigma1=20.0)

    def test_head_dim_must_divide_width(self) -> None:
        with pytest.raises(ValidationError, match="does not divide"):
            SynthSpec(depth=1, width=10, head_dim=4)

    def test_unknown_dtype(self) -> None:
        with pytest.raises(ValidationError, match="Unknown dtype"):
            tiny(dtype="I8")

    def test_law_discriminator(self) -> None:
        spec = SynthSpec.model_validate(
            {**TINY_SPEC, "qk": {"law": "power_law", "beta": 0.5}}
        )
        assert isinstance(spec.qk, PowerLaw)

    def test_load_missing_depth(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.json"
        path.write_text('{"width": 8}', encoding="utf-8")
        with pytest.raises(InputError, match="Invalid synthetic spec"):
            load_synth_spec(path)

    def test_load_not_json(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.json"
        path.write_text("depth: 1", encoding="utf-8")
        with pytest.raises(InputError):
            load_synth_spec(path)


class TestSynthCheckpoint:
    """Tests for synth_checkpoint and the BERT layout mapping."""

    def test_deterministic(self) -> None:
        first = write_safetensors(synth_checkpoint(tiny(seed=3)))
        again = write_safetensors(synth_checkpoint(tiny(seed=3)))
        other = write_safetensors(synth_checkpoint(tiny(seed=4)))
        assert first == again
        assert first != other

    def test_tensor_names(self) -> None:
        table = synth_checkpoint(tiny(depth=2))
        assert "encoder.layer.1.attention.self.query.weight" in table
        assert "encoder.layer.0.output.dense.weight" in table
        assert len(table) == 12
        assert table.metadata["seed"] == "0"

    def test_composed_attention_spectrum(self) -> None:
        """Default exact-rank attention gives d_h unit singular values per head."""
        ckpt = map_bert_layout(synth_checkpoint(tiny()), head_dim=4)
        for mat in ckpt.qk[0] + ckpt.vo[0]:
            np.testing.assert_allclose(
                spectrum(mat), [1.0] * 4 + [0.0] * 4, atol=1e-10
            )

    def test_prescribed_rank_and_scale(self) -> None:
        ckpt = map_bert_layout(
            synth_checkpoint(tiny(qk=ExactRank(rank=2, sigma=3.0))), head_dim=4
        )
        np.testing.assert_allclose(
            spectrum(ckpt.qk[0][1]), [3.0, 3.0] + [0.0] * 6, atol=1e-10
        )

    def test_feedforward_power_law(self) -> None:
        ckpt = map_bert_layout(synth_checkpoint(tiny()), head_dim=4)
        expected = 20.0 * np.arange(1, 9, dtype=np.float64) ** (-0.7)
        assert ckpt.m_in[0].shape == (8, 16)
        assert ckpt.m_out[0].shape == (16, 8)
        np.testing.assert_allclose(spectrum(ckpt.m_in[0]), expected, rtol=1e-10)
        np.testing.assert_allclose(spectrum(ckpt.m_out[0]), expected, rtol=1e-10)

    def test_gaussian_law(self) -> None:
        ckpt = map_bert_layout(
            synth_checkpoint(tiny(vo=Gaussian(scale=0.5))), head_dim=4
        )
        assert np.linalg.matrix_rank(ckpt.vo[0][0]) == 4

    def test_f32_storage(self) -> None:
        ckpt = map_bert_layout(synth_checkpoint(tiny(dtype="F32")), head_dim=4)
        assert spectrum(ckpt.qk[0][0])[0] == pytest.approx(1.0, rel=1e-5)

    def test_custom_prefix(self) -> None:
        table = synth_checkpoint(tiny(prefix="bert.encoder.layer"))
        assert map_bert_layout(table, "bert.encoder.layer", 4).depth == 1
        with pytest.raises(LayoutError, match="No tensors found"):
            map_bert_layout(table, "encoder.layer", 4)


class TestLayoutErrors:
    """Tests for inconsistent BERT layouts."""

    def test_missing_tensor(self) -> None:
        table = synth_checkpoint(tiny())
        arrays = {
            name: table.get_tensor(name)
            for name in table.keys()
            if not name.endswith("attention.self.key.weight")
        }
        with pytest.raises(LayoutError, match="Missing tensor 'encoder.layer.0"):
            map_bert_layout(TensorTable.from_arrays(arrays), head_dim=4)

    def test_wrong_shape(self) -> None:
        table = synth_checkpoint(tiny())
        arrays = {name: table.get_tensor(name) for name in table.keys()}
        arrays["encoder.layer.0.attention.self.value.weight"] = np.ones((8, 4))
        with pytest.raises(LayoutError, match="expected"):
            map_bert_layout(TensorTable.from_arrays(arrays), head_dim=4)

    def test_head_dim_must_divide(self) -> None:
        with pytest.raises(LayoutError, match="not divisible"):
            map_bert_layout(synth_checkpoint(tiny()), head_dim=3)


class TestTheoryLayout:
    """Tests for map_theory_layout."""

    def test_round_trip(self, tmp_path: Path) -> None:
        weights = random_theory_weights(rng(0), 4, 2)
        path = write_theory_file(tmp_path, weights)
        loaded = map_theory_layout(load_tensor_file(path))
        assert loaded.depth == 2
        np.testing.assert_array_equal(loaded.layers[1].v, weights.layers[1].v)
        np.testing.assert_array_equal(loaded.readout, weights.readout)

    def test_default_readout(self) -> None:
        table = TensorTable.from_arrays(
            {f"layer.1.{kind}": np.eye(3) for kind in ("qk", "v", "m")}, "F64"
        )
        assert map_theory_layout(table).readout.tolist() == [1.0, 0.0, 0.0]

    def test_zero_based_rejected(self) -> None:
        table = TensorTable.from_arrays(
            {f"layer.0.{kind}": np.eye(3) for kind in ("qk", "v", "m")}
        )
        with pytest.raises(LayoutError, match="1-based"):
            map_theory_layout(table)

    def test_inconsistent_shapes(self) -> None:
        table = TensorTable.from_arrays(
            {"layer.1.qk": np.eye(3), "layer.1.v": np.eye(2), "layer.1.m": np.eye(3)}
        )
        with pytest.raises(LayoutError, match="Inconsistent"):
            map_theory_layout(table)


class TestReaders:
    """Tests for read_table, read_checkpoint and file_digest."""

    def test_read_checkpoint_from_spec(self, tmp_path: Path) -> None:
        ckpt = read_checkpoint(write_spec_json(tmp_path, name="mini"))
        assert ckpt.name == "mini"
        assert (ckpt.depth, ckpt.width, ckpt.heads) == (1, 8, 2)

    def test_spec_name_wins(self, tmp_path: Path) -> None:
        path = tmp_path / "file.json"
        path.write_text(json.dumps({**TINY_SPEC, "name": "x"}), encoding="utf-8")
        assert read_checkpoint(path).name == "x"

    def test_spec_and_file_agree(self, tmp_path: Path) -> None:
        from_spec = read_checkpoint(write_spec_json(tmp_path))
        from_file = read_checkpoint(write_checkpoint(tmp_path), head_dim=4)
        np.testing.assert_array_equal(from_spec.qk[0][1], from_file.qk[0][1])
        assert from_file.name == "tiny"

    def test_read_table(self, tmp_path: Path) -> None:
        assert len(read_table(write_spec_json(tmp_path))) == 6
        assert len(read_table(write_checkpoint(tmp_path))) == 6

    def test_file_digest(self, tmp_path: Path) -> None:
        path = write_checkpoint(tmp_path)
        assert file_digest(path) == hashlib.sha256(path.read_bytes()).hexdigest()
