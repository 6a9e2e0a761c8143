"""Binary checkpoint format.

Layout: the magic ``SRECNK1\\0`` followed by records until EOF. Each record is
``u64 name_len | utf-8 name | u64 rank | rank x u64 extents | float32 values``,
all little-endian. Metadata rides along as zero-sized records whose name is
``meta:`` followed by a JSON document.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

MAGIC = b"SRECNK1\0"
_META = "meta:"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    chunks = [MAGIC]
    if meta is not None:
        chunks.append(_record(_META + json.dumps(meta, sort_keys=True), np.zeros(0, np.float32)))
    for name, value in tensors.items():
        if name.startswith(_META):
            raise CheckpointError(f"reserved tensor name {name!r}")
        chunks.append(_record(name, np.asarray(value)))
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(chunks))
    os.replace(tmp, path)


def _record(name: str, value: np.ndarray) -> bytes:
    raw = name.encode("utf-8")
    head = struct.pack("<Q", len(raw)) + raw + struct.pack("<Q", value.ndim)
    head += struct.pack(f"<{value.ndim}Q", *value.shape)
    return head + np.ascontiguousarray(value, dtype="<f4").tobytes()


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path}: bad magic")
    pos = len(MAGIC)
    tensors: dict[str, np.ndarray] = {}
    meta: dict = {}
    try:
        while pos < len(blob):
            (n,) = struct.unpack_from("<Q", blob, pos)
            pos += 8
            name = blob[pos:pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<Q", blob, pos)
            pos += 8
            shape = struct.unpack_from(f"<{rank}Q", blob, pos)
            pos += 8 * rank
            count = int(np.prod(shape))
            if name.startswith(_META):
                meta.update(json.loads(name[len(_META):]))
            values = np.frombuffer(blob, dtype="<f4", count=count, offset=pos)
            pos += 4 * count
            if not name.startswith(_META):
                tensors[name] = values.astype(np.float32).reshape(shape)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"{path}: truncated or corrupt checkpoint") from exc
    return tensors, meta
