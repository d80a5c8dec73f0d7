"""
Tensor file properties: write/parse round trips, half precision
exactness and mutation fuzzing of serialized files.
"""

import numpy as np

from ..core.errors import ParseError
from ..ingest.tensorfile import (
    DTYPES,
    TensorTable,
    parse_safetensors,
    write_safetensors,
)
from .properties import SuiteResult, trial_rng

MAX_TENSORS = 4
MAX_DIM = 6
# mutated files generated per trial
FUZZ_PER_TRIAL = 100


def _random_table(rng: np.random.Generator) -> TensorTable:
    dtype = str(rng.choice(sorted(DTYPES)))
    arrays = {}
    for i in range(int(rng.integers(1, MAX_TENSORS + 1))):
        dims = rng.integers(0, MAX_DIM + 1, size=rng.integers(0, 3))
        shape = tuple(int(d) for d in dims)
        arrays[f"t{i}.{rng.integers(1000)}"] = rng.standard_normal(shape)
    metadata = {"format": "pt"} if rng.random() < 0.5 else None
    return TensorTable.from_arrays(arrays, dtype=dtype, metadata=metadata)


def _mutate(rng: np.random.Generator, data: bytes) -> bytes:
    buf = bytearray(data)
    action = int(rng.integers(4))
    if action == 0 and buf:
        for _ in range(int(rng.integers(1, 4))):
            buf[int(rng.integers(len(buf)))] = int(rng.integers(256))
    elif action == 1:
        del buf[int(rng.integers(len(buf) + 1)) :]
    elif action == 2:
        at = int(rng.integers(len(buf) + 1))
        buf[at:at] = rng.bytes(int(rng.integers(1, 9)))
    else:
        # corrupt the header length
        buf[: min(8, len(buf))] = rng.bytes(min(8, len(buf)))
    return bytes(buf)


def _half_exact(rng: np.random.Generator, dtype: str, size: int) -> np.ndarray:
    """Values exactly representable in ``dtype``."""
    if dtype == "F16":
        return rng.integers(-2048, 2049, size=size) * 2.0 ** float(rng.integers(-8, 4))
    bits = rng.standard_normal(size).astype(np.float32).view(np.uint32) & 0xFFFF0000
    return bits.astype(np.uint32).view(np.float32).astype(np.float64)


def run_parser_suite(trials: int, seed: int) -> SuiteResult:
    result = SuiteResult("parser", trials, seed)
    for t in range(trials):
        rng = trial_rng(seed, t)
        table = _random_table(rng)
        instance = {"trial": t, "tensors": table.keys()}
        data = write_safetensors(table)
        parsed = parse_safetensors(data)

        round_trip = result.prop("round_trip")
        round_trip.require(parsed.keys() == table.keys(), instance)
        for name in table.keys():
            round_trip.require(
                parsed.raw_bytes(name) == table.raw_bytes(name), instance
            )
            round_trip.require(
                np.array_equal(parsed.get_tensor(name), table.get_tensor(name)),
                {**instance, "tensor": name},
            )
        round_trip.require(write_safetensors(parsed) == data, instance)

        half = result.prop("half_precision_exact")
        for dtype in ("F16", "BF16"):
            values = _half_exact(rng, dtype, int(rng.integers(1, 33)))
            decoded = parse_safetensors(
                write_safetensors(TensorTable.from_arrays({"x": values}, dtype=dtype))
            ).get_tensor("x")
            half.require(np.array_equal(decoded, values), {**instance, "dtype": dtype})

        fuzz = result.prop("mutation_fuzz")
        for k in range(FUZZ_PER_TRIAL):
            mutated = _mutate(rng, data)
            try:
                survivor = parse_safetensors(mutated)
                for name in survivor.keys():
                    survivor.get_tensor(name)
            except ParseError:
                fuzz.require(True, instance)
            except Exception as e:
                fuzz.require(
                    False, {**instance, "mutation": k, "error": type(e).__name__}
                )
            else:
                fuzz.require(True, instance)
    return result
