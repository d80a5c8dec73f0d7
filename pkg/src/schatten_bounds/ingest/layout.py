"""
Tensor-name layouts: BERT encoders and the simplified theory model.

Stored linear weights have shape ``(out, in)`` and act as ``x W^T``; every
matrix is transposed once here so downstream code always sees row-vector
orientation ``X W``. Heads are contiguous blocks of ``head_dim`` along the
projection output dimension.
"""

import hashlib
import logging
import re
from pathlib import Path

import numpy as np

from ..analysis.bertproxy import BertCheckpoint, compose_heads
from ..analysis.model import TheoryWeights
from ..core.errors import InputError, LayoutError
from ..utils.constants import (
    DEFAULT_HEAD_DIM,
    DEFAULT_TENSOR_PREFIX,
    PACKAGE_LOGGER_NAME,
)
from .synth import load_synth_spec, synth_checkpoint
from .tensorfile import TensorTable, load_tensor_file

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.ingest.layout")

BERT_SUFFIXES = {
    "query": "attention.self.query.weight",
    "key": "attention.self.key.weight",
    "value": "attention.self.value.weight",
    "attn_out": "attention.output.dense.weight",
    "ffn_in": "intermediate.dense.weight",
    "ffn_out": "output.dense.weight",
}


def _layer_indices(keys: list[str], prefix: str) -> list[int]:
    pattern = re.compile(rf"^{re.escape(prefix)}\.(\d+)\.")
    return sorted({int(m.group(1)) for key in keys if (m := pattern.match(key))})


def _require(table: TensorTable, name: str) -> np.ndarray:
    if name not in table:
        raise LayoutError(f"Missing tensor '{name}'")
    tensor = table.get_tensor(name)
    if tensor.ndim != 2:
        raise LayoutError(f"Tensor '{name}' must be 2-D, got shape {tensor.shape}")
    return tensor


def map_bert_layout(
    table: TensorTable,
    prefix: str = DEFAULT_TENSOR_PREFIX,
    head_dim: int = DEFAULT_HEAD_DIM,
    name: str = "",
) -> BertCheckpoint:
    """Build composed per-head matrices from standard BERT encoder tensor names."""
    layers = _layer_indices(table.keys(), prefix)
    if not layers:
        raise LayoutError(f"No tensors found under prefix '{prefix}'")
    depth = layers[-1] + 1
    width = intermediate = None
    qk, vo, m_in, m_out = [], [], [], []
    for ell in range(depth):
        base = f"{prefix}.{ell}"
        stored = {
            key: _require(table, f"{base}.{suffix}")
            for key, suffix in BERT_SUFFIXES.items()
        }
        if width is None:
            width = stored["query"].shape[0]
            intermediate = stored["ffn_in"].shape[0]
            if width % head_dim:
                raise LayoutError(
                    f"Hidden dimension {width} is not divisible by head dim {head_dim}"
                )
        expected = {
            "query": (width, width),
            "key": (width, width),
            "value": (width, width),
            "attn_out": (width, width),
            "ffn_in": (intermediate, width),
            "ffn_out": (width, intermediate),
        }
        for key, shape in expected.items():
            if stored[key].shape != shape:
                raise LayoutError(
                    f"Tensor '{base}.{BERT_SUFFIXES[key]}' has shape "
                    f"{stored[key].shape}, expected {shape}"
                )
        layer_qk, layer_vo = [], []
        for h in range(width // head_dim):
            rows = slice(h * head_dim, (h + 1) * head_dim)
            w_qk, w_vo = compose_heads(
                stored["query"][rows, :],
                stored["key"][rows, :],
                stored["value"][rows, :].T,
                stored["attn_out"][:, rows].T,
            )
            layer_qk.append(w_qk)
            layer_vo.append(w_vo)
        qk.append(layer_qk)
        vo.append(layer_vo)
        m_in.append(stored["ffn_in"].T)
        m_out.append(stored["ffn_out"].T)
    logger.info(
        f"Mapped BERT layout: L={depth}, N={width}, heads={width // head_dim}, "
        f"I={intermediate}"
    )
    return BertCheckpoint(
        depth=depth,
        width=width,
        head_dim=head_dim,
        intermediate=intermediate,
        qk=qk,
        vo=vo,
        m_in=m_in,
        m_out=m_out,
        name=name,
    )


def map_theory_layout(table: TensorTable) -> TheoryWeights:
    """Read ``layer.{l}.{qk|v|m}`` (1-based) and an optional ``readout`` vector.

    Theory weights already act on row vectors and are not transposed. The
    readout defaults to the first basis vector.
    """
    layers = _layer_indices(table.keys(), "layer")
    if not layers:
        raise LayoutError("No tensors named 'layer.{l}.{qk|v|m}' found")
    if layers[0] != 1:
        raise LayoutError(f"Theory layers are 1-based, found layer {layers[0]}")
    depth = layers[-1]
    mats = [
        tuple(_require(table, f"layer.{ell}.{kind}") for kind in ("qk", "v", "m"))
        for ell in range(1, depth + 1)
    ]
    width = mats[0][0].shape[0]
    if "readout" in table:
        readout = table.get_tensor("readout").ravel()
    else:
        readout = np.zeros(width)
        readout[0] = 1.0
    try:
        return TheoryWeights.from_matrices(mats, readout)  # type: ignore[arg-type]
    except InputError as e:
        raise LayoutError(f"Inconsistent theory weights: {e}") from e


def file_digest(path: str | Path) -> str:
    """SHA-256 hex digest of a file."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_table(path: str | Path) -> TensorTable:
    """Load a tensor file, or synthesize one from a ``.json`` spec."""
    path = Path(path)
    if path.suffix == ".json":
        return synth_checkpoint(load_synth_spec(path))
    return load_tensor_file(path)


def read_checkpoint(
    path: str | Path,
    prefix: str = DEFAULT_TENSOR_PREFIX,
    head_dim: int = DEFAULT_HEAD_DIM,
) -> BertCheckpoint:
    """Load a BERT checkpoint from ``.safetensors`` or a synthetic ``.json`` spec.

    A synthetic spec's own prefix and head dimension take precedence.
    """
    path = Path(path)
    if path.suffix == ".json":
        spec = load_synth_spec(path)
        return map_bert_layout(
            synth_checkpoint(spec),
            spec.prefix,
            spec.head_dim,
            name=spec.name or path.stem,
        )
    return map_bert_layout(load_tensor_file(path), prefix, head_dim, name=path.stem)
