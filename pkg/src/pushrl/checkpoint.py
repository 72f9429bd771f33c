"""Checkpoint container: magic, JSON header, little-endian float64 blob.

The byte format is pinned so checkpoints round-trip bit-exactly and stay
readable across platforms: 8-byte magic, uint64-LE header length, UTF-8 JSON
header, then each array's raw '<f8' C-order bytes concatenated in header
order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"PUSHRL\x00\x01"
SCHEMA_VERSION = 1


def save_checkpoint(path, meta: dict, arrays) -> None:
    arrays = [np.asarray(a, dtype="<f8") for a in arrays]
    header = {
        "schema_version": SCHEMA_VERSION,
        "meta": meta,
        # shape recorded before ascontiguousarray, which promotes 0-d to 1-d
        "arrays": [{"shape": list(a.shape)} for a in arrays],
    }
    arrays = [np.ascontiguousarray(a) for a in arrays]
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for a in arrays:
            f.write(a.tobytes())


def load_checkpoint(path) -> tuple[dict, list[np.ndarray]]:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 8 or not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    n = struct.unpack_from("<Q", data, len(MAGIC))[0]
    off = len(MAGIC) + 8
    try:
        header = json.loads(data[off : off + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: corrupt checkpoint header: {exc}") from exc
    if header.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"{path}: unsupported checkpoint schema {header.get('schema_version')!r}"
        )
    off += n
    arrays = []
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        a = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape)
        arrays.append(a.astype(np.float64))  # writable copy in native order
        off += count * 8
    if off != len(data):
        raise ValueError(f"{path}: checkpoint has {len(data) - off} trailing bytes")
    return header["meta"], arrays
