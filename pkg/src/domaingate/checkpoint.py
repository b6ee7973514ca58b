"""Parameter checkpoint container.

Layout (version 1):

    bytes 0-5   magic ``DGCKPT``
    byte  6     format version (currently 1)
    byte  7     reserved, zero
    bytes 8-11  uint32 little-endian header length H
    bytes 12-(12+H)  UTF-8 JSON header
    remainder   concatenated little-endian float64 payloads, C order

The header maps each parameter name to its shape and byte offset into the
payload region, plus an arbitrary ``meta`` object (model family, k,
lambda, vocab hash, ...). Writing is canonical (sorted names, sorted JSON
keys) so identical states serialize to identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

__all__ = ["save_checkpoint", "load_checkpoint", "CheckpointError"]

_MAGIC = b"DGCKPT"
_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: dict[str, np.ndarray], meta: dict) -> None:
    entries = {}
    offset = 0
    names = sorted(params)
    for name in names:
        arr = np.ascontiguousarray(params[name], dtype=np.float64)
        entries[name] = {"shape": list(arr.shape), "offset": offset}
        offset += arr.nbytes
    header = json.dumps({"params": entries, "meta": meta},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(bytes([_VERSION, 0]))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for name in names:
            arr = np.ascontiguousarray(params[name], dtype=np.float64)
            fh.write(arr.astype("<f8", copy=False).tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:6] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version = raw[6]
    if version != _VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (header_len,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12:12 + header_len].decode("utf-8"))
    payload = raw[12 + header_len:]
    params = {}
    for name, entry in header["params"].items():
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=start)
        params[name] = arr.astype(np.float64).reshape(shape).copy()
    return params, header["meta"]
