"""
Synthetic BERT-layout checkpoints with prescribed spectra.

Each composed attention matrix (per head ``Q^T K`` and ``V O``) and each
feedforward matrix is built as ``U diag(sigma) V^T`` with orthonormal
factors from the QR decomposition of a seeded Gaussian matrix. Attention
factors split ``sqrt(sigma)`` between the two slices so the composed
product has exactly the requested spectrum. Tensors are emitted in the
stored ``(out, in)`` orientation that ``map_bert_layout`` inverts.
"""

import logging
from pathlib import Path
from typing import Annotated, Literal

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    model_validator,
)

from ..core.errors import InputError
from ..utils.constants import (
    DEFAULT_FFN_RATIO,
    DEFAULT_HEAD_DIM,
    DEFAULT_SEED,
    DEFAULT_TENSOR_PREFIX,
    PACKAGE_LOGGER_NAME,
)
from .tensorfile import DTYPES, TensorTable

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.ingest.synth")


class ExactRank(BaseModel):
    """``rank`` equal singular values ``sigma``; full rank when ``rank`` is None."""

    model_config = ConfigDict(extra="forbid")

    law: Literal["exact_rank"] = "exact_rank"
    rank: int | None = Field(default=None, ge=0)
    sigma: float = Field(default=1.0, ge=0.0)

    def spectrum(self, k: int) -> np.ndarray:
        rank = k if self.rank is None else self.rank
        if rank > k:
            raise InputError(f"Requested rank {rank} exceeds the maximum {k}")
        values = np.zeros(k)
        values[:rank] = self.sigma
        return values


class PowerLaw(BaseModel):
    """sigma_i = sigma1 * i^(-beta)."""

    model_config = ConfigDict(extra="forbid")

    law: Literal["power_law"] = "power_law"
    sigma1: float = Field(default=1.0, gt=0.0)
    beta: float = Field(default=0.7, ge=0.0)

    def spectrum(self, k: int) -> np.ndarray:
        return self.sigma1 * np.arange(1, k + 1, dtype=np.float64) ** (-self.beta)


class Gaussian(BaseModel):
    """I.i.d. normal entries; no spectrum is prescribed."""

    model_config = ConfigDict(extra="forbid")

    law: Literal["gaussian"] = "gaussian"
    scale: float = Field(default=0.02, gt=0.0)


SpectrumLaw = Annotated[ExactRank | PowerLaw | Gaussian, Field(discriminator="law")]


class SynthSpec(BaseModel):
    """Shape, spectrum laws and seed of a synthetic checkpoint.

    ``qk`` and ``vo`` describe the composed per-head attention matrices;
    ``ffn_in`` and ``ffn_out`` the feedforward matrices.
    """

    model_config = ConfigDict(extra="forbid")

    depth: int = Field(ge=1, title="Layers", description="Number of encoder layers L")
    width: int = Field(ge=1, title="Hidden dimension", description="Model width N")
    head_dim: int = Field(
        default=DEFAULT_HEAD_DIM, ge=1, title="Head dimension", description="d_h"
    )
    intermediate: int | None = Field(
        default=None,
        ge=1,
        title="Feedforward width",
        description="Intermediate dimension I; defaults to 4N",
    )
    qk: SpectrumLaw = Field(default_factory=ExactRank)
    vo: SpectrumLaw = Field(default_factory=ExactRank)
    ffn_in: SpectrumLaw = Field(default_factory=lambda: PowerLaw(sigma1=20.0))
    ffn_out: SpectrumLaw = Field(default_factory=lambda: PowerLaw(sigma1=20.0))
    seed: int = DEFAULT_SEED
    dtype: str = "F32"
    prefix: str = DEFAULT_TENSOR_PREFIX
    name: str = ""

    @model_validator(mode="after")
    def _check_dims(self) -> "SynthSpec":
        if self.width % self.head_dim:
            raise ValueError(
                f"head_dim {self.head_dim} does not divide width {self.width}"
            )
        if self.dtype not in DTYPES:
            raise ValueError(f"Unknown dtype '{self.dtype}'")
        return self

    @property
    def ffn_width(self) -> int:
        return self.intermediate or DEFAULT_FFN_RATIO * self.width

    @property
    def heads(self) -> int:
        return self.width // self.head_dim


def _orthonormal(rng: np.random.Generator, rows: int, k: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((rows, k)))
    return q


def _factor_pair(
    rng: np.random.Generator, law: ExactRank | PowerLaw | Gaussian, width: int, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Two ``width x k`` factors A, B with A B^T following ``law``."""
    if isinstance(law, Gaussian):
        return (
            law.scale * rng.standard_normal((width, k)),
            law.scale * rng.standard_normal((width, k)),
        )
    root = np.sqrt(law.spectrum(k))
    return _orthonormal(rng, width, k) * root, _orthonormal(rng, width, k) * root


def _dense(
    rng: np.random.Generator, law: ExactRank | PowerLaw | Gaussian, rows: int, cols: int
) -> np.ndarray:
    """A ``rows x cols`` matrix following ``law``."""
    if isinstance(law, Gaussian):
        return law.scale * rng.standard_normal((rows, cols))
    k = min(rows, cols)
    u = _orthonormal(rng, rows, k)
    v = _orthonormal(rng, cols, k)
    return (u * law.spectrum(k)) @ v.T


def synth_checkpoint(spec: SynthSpec) -> TensorTable:
    """Generate a deterministic BERT-layout tensor table from ``spec``."""
    rng = np.random.default_rng(spec.seed)
    n, d_h, inter = spec.width, spec.head_dim, spec.ffn_width
    arrays: dict[str, np.ndarray] = {}
    for ell in range(spec.depth):
        query, key, value, out = (np.zeros((n, n)) for _ in range(4))
        for h in range(spec.heads):
            cols = slice(h * d_h, (h + 1) * d_h)
            # composed Q^T K = a b^T with query rows a^T, key rows b^T
            a, b = _factor_pair(rng, spec.qk, n, d_h)
            query[cols, :] = a.T
            key[cols, :] = b.T
            # composed V O = c e^T with value slice c and output slice e^T
            c, e = _factor_pair(rng, spec.vo, n, d_h)
            value[cols, :] = c.T
            out[:, cols] = e
        m_in = _dense(rng, spec.ffn_in, n, inter)
        m_out = _dense(rng, spec.ffn_out, inter, n)
        base = f"{spec.prefix}.{ell}"
        arrays[f"{base}.attention.self.query.weight"] = query
        arrays[f"{base}.attention.self.key.weight"] = key
        arrays[f"{base}.attention.self.value.weight"] = value
        arrays[f"{base}.attention.output.dense.weight"] = out
        arrays[f"{base}.intermediate.dense.weight"] = m_in.T
        arrays[f"{base}.output.dense.weight"] = m_out.T
    logger.info(
        f"Synthesized checkpoint L={spec.depth}, N={n}, heads={spec.heads}, "
        f"seed={spec.seed}, dtype={spec.dtype}"
    )
    return TensorTable.from_arrays(
        arrays,
        dtype=spec.dtype,
        metadata={
            "generator": "schatten-bounds synth",
            "seed": str(spec.seed),
            "head_dim": str(d_h),
        },
    )


def load_synth_spec(path: str | Path) -> SynthSpec:
    """Read a JSON synthetic spec."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Failed to read synthetic spec {path}: {e}")
        raise
    try:
        return SynthSpec.model_validate_json(text)
    except ValidationError as e:
        raise InputError(f"Invalid synthetic spec {path}: {e}") from e
