"""
Contracts implemented by every weight source.

A *weight source* is where a checkpoint comes from: a safetensors file on
disk or a synthetic spec generated in memory. Analyses and reports are
written against the ``WeightSource`` shape so the rest of the machinery
does not care which one is in use.
"""

from collections.abc import Mapping
from typing import TYPE_CHECKING, Any, Protocol, runtime_checkable

if TYPE_CHECKING:
    from ..analysis.bertproxy import BertCheckpoint
    from ..ingest.tensorfile import TensorTable


@runtime_checkable
class WeightSource(Protocol):
    """Resolves the tensors and composed matrices of one checkpoint.

    Implementations decide how tensors are obtained and cache them after
    the first load.
    """

    @property
    def name(self) -> str:
        """Label used in reports and charts."""
        ...

    def load_table(self) -> "TensorTable":
        """Return the raw tensor table, loading it on the first call."""
        ...

    def load_checkpoint(self) -> "BertCheckpoint":
        """Return the composed BERT matrices of this source."""
        ...

    def provenance(self) -> Mapping[str, Any]:
        """Where the weights came from, suitable for report provenance.

        Must be deterministic for identical inputs; no timestamps.
        """
        ...

    def close(self) -> None:
        """Drop cached tensors."""
        ...
