"""
Reference forward pass of the simplified single-head Transformer.

Used only as a numerical oracle for the Lipschitz and perturbation
inequalities that the covering bounds rely on. Nothing here trains.

Conventions:
- Inputs are ``T x N`` matrices whose rows are tokens.
- Weights act on row vectors (``X @ W``); attention is unscaled.
- ``project_rows`` is the rowwise projection onto the unit ball.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import erf

from ..core.errors import InputError
from ..utils.constants import (
    GELU_LIPSCHITZ,
    PACKAGE_LOGGER_NAME,
    RELU_LIPSCHITZ,
)
from .bounds import KINDS, LayerRadii
from .spectral import as_matrix, schatten_power, singular_values, two_to_inf_norm

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.analysis.model")


@dataclass(frozen=True)
class Activation:
    """Rowwise activation with its Lipschitz constant."""

    kind: str
    lipschitz: float

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "relu":
            return np.maximum(z, 0.0)
        if self.kind == "gelu":
            return 0.5 * z * (1.0 + erf(z / np.sqrt(2.0)))
        raise InputError(f"Unknown activation kind: {self.kind}")


ACTIVATIONS = {
    "relu": Activation("relu", RELU_LIPSCHITZ),
    "gelu": Activation("gelu", GELU_LIPSCHITZ),
}


def get_activation(kind: str) -> Activation:
    """Look up an activation by name."""
    try:
        return ACTIVATIONS[kind]
    except KeyError:
        raise InputError(
            f"Unknown activation '{kind}'. Expected one of {sorted(ACTIVATIONS)}"
        ) from None


@dataclass(frozen=True)
class LayerWeights:
    qk: np.ndarray
    v: np.ndarray
    m: np.ndarray


@dataclass
class TheoryWeights:
    """Weights of an L-layer simplified Transformer plus its readout.

    Attributes:
        layers: Per-layer ``(W_qk, W_v, W_m)`` triples, all ``N x N``.
        readout: Readout vector ``w`` of length N.
        cls_index: Token row fed to the readout.
        spectral_radii: Per-layer ``(C2_qk, C2_v, C2_m)``. Each entry must
            dominate the measured spectral norm of its matrix.
    """

    layers: list[LayerWeights]
    readout: np.ndarray
    cls_index: int = 0
    spectral_radii: list[tuple[float, float, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.layers:
            raise InputError("TheoryWeights needs at least one layer")
        n = self.layers[0].qk.shape[0]
        for ell, layer in enumerate(self.layers, start=1):
            for name in ("qk", "v", "m"):
                mat = getattr(layer, name)
                if mat.shape != (n, n):
                    raise InputError(
                        f"Layer {ell} {name} has shape {mat.shape}, expected ({n}, {n})"
                    )
        if self.readout.shape != (n,):
            raise InputError(
                f"Readout must have length {n}, got {self.readout.shape}"
            )
        if not self.spectral_radii:
            self.spectral_radii = [
                tuple(
                    singular_values(getattr(layer, k)).sigma_max
                    for k in ("qk", "v", "m")
                )
                for layer in self.layers
            ]
        if len(self.spectral_radii) != len(self.layers):
            raise InputError("spectral_radii must have one triple per layer")
        for ell, (layer, radii) in enumerate(
            zip(self.layers, self.spectral_radii, strict=True), start=1
        ):
            for name, radius in zip(("qk", "v", "m"), radii, strict=True):
                measured = singular_values(getattr(layer, name)).sigma_max
                if measured > radius * (1.0 + 1e-9) + 1e-12:
                    raise InputError(
                        f"Layer {ell} {name}: spectral norm {measured:.6g} exceeds "
                        f"radius {radius:.6g}"
                    )

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def hidden_dim(self) -> int:
        return self.layers[0].qk.shape[0]

    @classmethod
    def from_matrices(
        cls,
        layers: list[tuple[ArrayLike, ArrayLike, ArrayLike]],
        readout: ArrayLike,
        cls_index: int = 0,
        spectral_radii: list[tuple[float, float, float]] | None = None,
    ) -> "TheoryWeights":
        """Build weights from raw arrays; radii default to measured norms."""
        return cls(
            layers=[
                LayerWeights(as_matrix(qk), as_matrix(v), as_matrix(m))
                for qk, v, m in layers
            ],
            readout=np.asarray(readout, dtype=np.float64),
            cls_index=cls_index,
            spectral_radii=list(spectral_radii or []),
        )

    def matrices(self) -> list[tuple[int, str, np.ndarray]]:
        """Return ``(layer, kind, matrix)`` in layer-major QK, V, M order."""
        out = []
        for ell, layer in enumerate(self.layers, start=1):
            out.extend(
                [(ell, "QK", layer.qk), (ell, "V", layer.v), (ell, "M", layer.m)]
            )
        return out

    def layer_radii(
        self,
        p: float | ArrayLike,
        schatten: ArrayLike | None = None,
        rank_tol: float | None = None,
    ) -> LayerRadii:
        """Build ``LayerRadii`` from the spectral radii.

        ``p`` is a scalar or an ``(L, 3)`` array. Schatten radii default to
        the measured Schatten powers at those indices, with p = 0 ranks
        counted at ``rank_tol``.
        """
        shape = (self.depth, 3)
        index = np.broadcast_to(np.asarray(p, dtype=np.float64), shape).copy()
        if schatten is None:
            measured = [
                schatten_power(
                    singular_values(mat, rank_tol), index[ell - 1, KINDS.index(kind)]
                )
                for ell, kind, mat in self.matrices()
            ]
            schatten = np.asarray(measured).reshape(shape)
        return LayerRadii(
            spectral=np.asarray(self.spectral_radii, dtype=np.float64),
            schatten=np.broadcast_to(np.asarray(schatten, dtype=np.float64), shape),
            index=index,
        )


def softmax_rows(z: ArrayLike) -> np.ndarray:
    """Rowwise softmax, stabilized by subtracting the row maximum."""
    arr = as_matrix(z)
    shifted = arr - np.max(arr, axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / np.sum(expd, axis=1, keepdims=True)


def project_rows(z: ArrayLike) -> np.ndarray:
    """Replace each row r by r / max(1, ||r||_2)."""
    arr = as_matrix(z)
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    return arr / np.maximum(1.0, norms)


def _check_conforming(x: np.ndarray, *weights: np.ndarray) -> None:
    n = x.shape[1]
    for w in weights:
        if w.shape != (n, n):
            raise InputError(
                f"Weight shape {w.shape} does not conform to input width {n}"
            )


def head_forward(x: ArrayLike, w_qk: ArrayLike, w_v: ArrayLike) -> np.ndarray:
    """softmax_rows(X W_qk X^T) X W_v."""
    x, w_qk, w_v = as_matrix(x), as_matrix(w_qk), as_matrix(w_v)
    _check_conforming(x, w_qk, w_v)
    scores = softmax_rows(x @ w_qk @ x.T)
    return scores @ x @ w_v


def block_forward(
    x: ArrayLike,
    w_qk: ArrayLike,
    w_v: ArrayLike,
    w_m: ArrayLike,
    act: Activation,
) -> np.ndarray:
    """Normalized block: project(act(project(head(X))) W_m)."""
    w_m = as_matrix(w_m)
    x = as_matrix(x)
    _check_conforming(x, w_m)
    hidden = act(project_rows(head_forward(x, w_qk, w_v)))
    return project_rows(hidden @ w_m)


def transformer_forward(
    x: ArrayLike, weights: TheoryWeights, act: Activation
) -> np.ndarray:
    """Compose ``weights.depth`` blocks."""
    out = as_matrix(x)
    for layer in weights.layers:
        out = block_forward(out, layer.qk, layer.v, layer.m, act)
    return out


def scalar_output(x: ArrayLike, weights: TheoryWeights, act: Activation) -> float:
    """w^T (row ``cls_index`` of the final layer output)."""
    x = as_matrix(x)
    if not 0 <= weights.cls_index < x.shape[0]:
        raise InputError(
            f"cls_index {weights.cls_index} out of range for T = {x.shape[0]}"
        )
    final = transformer_forward(x, weights, act)
    return float(weights.readout @ final[weights.cls_index])


def head_perturbation_bound(
    x: ArrayLike,
    w_qk: ArrayLike,
    w_qk_alt: ArrayLike,
    w_v: ArrayLike,
    w_v_alt: ArrayLike,
) -> float:
    """Right-hand side of the head perturbation inequality.

    ||X(V - V')||_{2->inf} + 2 ||X(W - W')||_{2->inf} B^2 ||V'||_2,
    with B = ||X||_{2->inf}.
    """
    x = as_matrix(x)
    row_bound = two_to_inf_norm(x)
    dv = two_to_inf_norm(x @ (as_matrix(w_v) - as_matrix(w_v_alt)))
    dqk = two_to_inf_norm(x @ (as_matrix(w_qk) - as_matrix(w_qk_alt)))
    v_norm = singular_values(w_v_alt).sigma_max
    return dv + 2.0 * dqk * row_bound**2 * v_norm


def block_lipschitz_constant(
    c2_qk: float, c2_v: float, c2_m: float, act_lipschitz: float, row_bound: float
) -> float:
    """L_phi C2^M C2^V (1 + 4 C2^QK B^2) for inputs with rows bounded by B."""
    return act_lipschitz * c2_m * c2_v * (1.0 + 4.0 * c2_qk * row_bound**2)


def random_rows(
    rng: np.random.Generator, t: int, n: int, row_bound: float = 1.0
) -> np.ndarray:
    """Random ``t x n`` matrix whose rows have norm at most ``row_bound``."""
    x = rng.standard_normal((t, n))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * row_bound * rng.uniform(0.0, 1.0, size=(t, 1))


def random_matrix_with_norm(
    rng: np.random.Generator, n: int, spectral: float
) -> np.ndarray:
    """Random ``n x n`` Gaussian matrix rescaled to a given spectral norm."""
    w = rng.standard_normal((n, n))
    return w * (spectral / np.linalg.norm(w, ord=2))


def random_theory_weights(
    rng: np.random.Generator, n: int, depth: int, radius: float = 1.0
) -> TheoryWeights:
    """Seeded instance with every matrix at spectral norm ``radius``."""
    layers = [
        tuple(random_matrix_with_norm(rng, n, radius) for _ in range(3))
        for _ in range(depth)
    ]
    readout = rng.standard_normal(n)
    readout /= np.linalg.norm(readout)
    return TheoryWeights.from_matrices(
        layers,  # type: ignore[arg-type]
        readout,
        spectral_radii=[(radius, radius, radius)] * depth,
    )
