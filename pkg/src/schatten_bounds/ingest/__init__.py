"""
Weight ingestion: the tensor file codec, synthetic checkpoints and the
mapping from tensor names to model layouts.
"""

from .layout import (
    file_digest,
    map_bert_layout,
    map_theory_layout,
    read_checkpoint,
    read_table,
)
from .synth import SynthSpec, load_synth_spec, synth_checkpoint
from .tensorfile import (
    TensorTable,
    load_tensor_file,
    parse_safetensors,
    write_safetensors,
)

__all__ = [
    # Tensor files
    "TensorTable",
    "load_tensor_file",
    "parse_safetensors",
    "write_safetensors",
    # Synthetic checkpoints
    "SynthSpec",
    "load_synth_spec",
    "synth_checkpoint",
    # Layouts
    "file_digest",
    "map_bert_layout",
    "map_theory_layout",
    "read_checkpoint",
    "read_table",
]
