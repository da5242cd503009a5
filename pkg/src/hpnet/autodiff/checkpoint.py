"""Self-describing parameter checkpoint container.

Layout:

    bytes 0..9    magic b"HPNETCKPT\\n"
    bytes 10..17  little-endian uint64 header length in bytes
    header        UTF-8 JSON:
                    {"format_version": 1,
                     "dtype": "<f8",
                     "params": [{"name": str, "shape": [...], "offset": int}],
                     "meta": {...}}
    payload       concatenated little-endian float64 buffers, row-major,
                  in header order (names sorted, so files are reproducible)

``meta`` carries anything JSON-serializable (model config echo, optimizer
state bookkeeping, epoch counters).
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"HPNETCKPT\n"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Malformed or incompatible checkpoint file."""


def save_checkpoint(path, arrays, meta=None):
    entries = []
    offset = 0
    names = sorted(arrays)
    for name in names:
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
    header = {
        "format_version": FORMAT_VERSION,
        "dtype": "<f8",
        "params": entries,
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(
                f"{path}: unsupported format_version {header.get('format_version')}"
            )
        payload = fh.read()
    arrays = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=start)
        arrays[entry["name"]] = arr.reshape(shape).astype(np.float64)
    return arrays, header.get("meta", {})
