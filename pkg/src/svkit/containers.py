"""Binary file containers.

Two formats, both little-endian with 32-bit float payloads:

Feature file ("SVF1"):
    magic "SVF1" | u32 n_rows | u32 n_cols | n_rows * n_cols float32,
    row-major (time-major for feature maps). Also reused as the embedding
    cache format with n_rows = number of crops and n_cols = 512.

Weight file ("SVW1"):
    magic "SVW1" | u32 tensor_count | per tensor:
    u16 name_len | UTF-8 name | u8 rank | rank * u32 dims | float32 data
    in C order. Round-trips are bit-exact for float32 tensors.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

FEATURE_MAGIC = b"SVF1"
WEIGHT_MAGIC = b"SVW1"


class FormatError(ValueError):
    """Raised when a container file is malformed."""


def save_features(path: str | Path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise ValueError(f"feature container stores 2-D arrays, got shape {values.shape}")
    with open(path, "wb") as f:
        f.write(FEATURE_MAGIC)
        f.write(struct.pack("<II", values.shape[0], values.shape[1]))
        f.write(values.tobytes())


def load_features(path: str | Path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {FEATURE_MAGIC!r}")
    if len(data) < 12:
        raise FormatError(f"{path}: truncated header")
    n_rows, n_cols = struct.unpack_from("<II", data, 4)
    expected = 12 + 4 * n_rows * n_cols
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, got {len(data)}")
    values = np.frombuffer(data, dtype="<f4", count=n_rows * n_cols, offset=12)
    return values.reshape(n_rows, n_cols).copy()


def save_tensors(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as f:
        f.write(WEIGHT_MAGIC)
        f.write(struct.pack("<I", len(tensors)))
        for name, tensor in tensors.items():
            arr = np.asarray(tensor, dtype="<f4")
            shape = arr.shape  # kept before ascontiguousarray, which promotes 0-d to 1-d
            arr = np.ascontiguousarray(arr)
            encoded = name.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise ValueError(f"tensor name too long: {name!r}")
            if len(shape) > 0xFF:
                raise ValueError(f"tensor rank too large: {len(shape)}")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", len(shape)))
            f.write(struct.pack(f"<{len(shape)}I", *shape))
            f.write(arr.tobytes())


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != WEIGHT_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {WEIGHT_MAGIC!r}")
    (count,) = struct.unpack_from("<I", data, 4)
    offset = 8
    tensors: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            if offset + name_len > len(data):
                raise FormatError(f"{path}: truncated tensor name")
            name = data[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", data, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}I", data, offset)
            offset += 4 * rank
            n = int(np.prod(dims, dtype=np.int64)) if rank else 1
            if offset + 4 * n > len(data):
                raise FormatError(f"{path}: truncated data for tensor {name!r}")
            arr = np.frombuffer(data, dtype="<f4", count=n, offset=offset)
            offset += 4 * n
            if name in tensors:
                raise FormatError(f"{path}: duplicate tensor name {name!r}")
            tensors[name] = arr.reshape(dims).copy()
    except (struct.error, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: truncated or corrupt tensor record") from exc
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    return tensors
