import logging
import threading
from collections.abc import Mapping
from pathlib import Path
from typing import Any

from schatten_bounds.analysis.bertproxy import BertCheckpoint
from schatten_bounds.core.contracts import WeightSource
from schatten_bounds.ingest.layout import file_digest, map_bert_layout
from schatten_bounds.ingest.synth import SynthSpec, load_synth_spec, synth_checkpoint
from schatten_bounds.ingest.tensorfile import TensorTable, load_tensor_file
from schatten_bounds.utils.constants import (
    DEFAULT_HEAD_DIM,
    DEFAULT_TENSOR_PREFIX,
    PACKAGE_LOGGER_NAME,
)

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.providers.local")


class _LazySource:
    """Loads a tensor table once and maps it to composed matrices once.

    Per-matrix work runs on a thread pool, so concurrent first loads
    coalesce on a ``threading.Lock``.
    """

    def __init__(self, prefix: str, head_dim: int) -> None:
        self._prefix = prefix
        self._head_dim = head_dim
        self._table: TensorTable | None = None
        self._checkpoint: BertCheckpoint | None = None
        self._lock = threading.Lock()

    @property
    def name(self) -> str:
        raise NotImplementedError

    def _load(self) -> TensorTable:
        raise NotImplementedError

    def load_table(self) -> TensorTable:
        """Return the tensor table, loading it on the first call."""
        if self._table is not None:
            return self._table
        with self._lock:
            if self._table is None:
                self._table = self._load()
        return self._table

    def load_checkpoint(self) -> BertCheckpoint:
        """Return the composed BERT matrices, mapping the layout on the first call."""
        if self._checkpoint is not None:
            return self._checkpoint
        table = self.load_table()
        with self._lock:
            if self._checkpoint is None:
                self._checkpoint = map_bert_layout(
                    table, self._prefix, self._head_dim, name=self.name
                )
        return self._checkpoint

    def close(self) -> None:
        """Drop cached tensors and matrices."""
        self._table = None
        self._checkpoint = None


class SafetensorsFileSource(_LazySource):
    """Weight source for a local ``.safetensors`` file.

    The file is read lazily so ``--help`` and argument validation never
    touch the disk.
    """

    def __init__(
        self,
        path: str | Path,
        prefix: str = DEFAULT_TENSOR_PREFIX,
        head_dim: int = DEFAULT_HEAD_DIM,
    ) -> None:
        super().__init__(prefix, head_dim)
        self.path = Path(path)

    @property
    def name(self) -> str:
        return self.path.stem

    def _load(self) -> TensorTable:
        try:
            return load_tensor_file(self.path)
        except OSError as e:
            logger.error(f"Failed to open checkpoint {self.path}: {e}")
            raise

    def provenance(self) -> Mapping[str, Any]:
        """File name and SHA-256 of the file contents."""
        return {
            "source": "safetensors",
            "file": self.path.name,
            "sha256": file_digest(self.path),
        }


class SyntheticSpecSource(_LazySource):
    """Weight source generated from a ``SynthSpec``.

    The spec's own prefix and head dimension override the settings.
    """

    def __init__(self, spec: SynthSpec, spec_path: str | Path | None = None) -> None:
        super().__init__(spec.prefix, spec.head_dim)
        self.spec = spec
        self.spec_path = Path(spec_path) if spec_path is not None else None

    @classmethod
    def from_file(cls, path: str | Path) -> "SyntheticSpecSource":
        return cls(load_synth_spec(path), path)

    @property
    def name(self) -> str:
        if self.spec.name:
            return self.spec.name
        if self.spec_path is not None:
            return self.spec_path.stem
        return f"synth-L{self.spec.depth}-N{self.spec.width}"

    def _load(self) -> TensorTable:
        return synth_checkpoint(self.spec)

    def provenance(self) -> Mapping[str, Any]:
        """The spec itself plus the file hash when it came from disk."""
        record: dict[str, Any] = {
            "source": "synthetic",
            "spec": self.spec.model_dump(mode="json"),
        }
        if self.spec_path is not None:
            record["file"] = self.spec_path.name
            record["sha256"] = file_digest(self.spec_path)
        return record


def open_source(
    path: str | Path,
    prefix: str = DEFAULT_TENSOR_PREFIX,
    head_dim: int = DEFAULT_HEAD_DIM,
) -> WeightSource:
    """Pick a source by file extension: ``.json`` specs, anything else safetensors."""
    path = Path(path)
    if path.suffix == ".json":
        return SyntheticSpecSource.from_file(path)
    return SafetensorsFileSource(path, prefix, head_dim)
