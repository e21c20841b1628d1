"""Versioned binary container: magic, version, JSON header, raw little-endian arrays."""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"EDSB"


class BlobError(ValueError):
    pass


def pack(meta: dict, arrays: dict[str, np.ndarray], version: int) -> bytes:
    names = sorted(arrays)
    header = dict(meta)
    header["arrays"] = [
        {"name": k, "dtype": np.asarray(arrays[k]).dtype.newbyteorder("<").str, "shape": list(np.shape(arrays[k]))}
        for k in names
    ]
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<HI", version, len(head)), head]
    for k in names:
        a = np.asarray(arrays[k])
        parts.append(np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<")).tobytes())
    return b"".join(parts)


def unpack(blob: bytes, version: int) -> tuple[dict, dict[str, np.ndarray]]:
    if blob[:4] != MAGIC:
        raise BlobError("bad magic")
    got, hlen = struct.unpack_from("<HI", blob, 4)
    if got != version:
        raise BlobError(f"blob version {got}, expected {version}")
    off = 10
    meta = json.loads(blob[off : off + hlen].decode())
    off += hlen
    arrays = {}
    for entry in meta.pop("arrays"):
        dt = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        size = count * dt.itemsize
        if off + size > len(blob):
            raise BlobError("truncated blob")
        arrays[entry["name"]] = np.frombuffer(blob, dtype=dt, count=count, offset=off).reshape(entry["shape"]).copy()
        off += size
    if off != len(blob):
        raise BlobError("trailing bytes in blob")
    return meta, arrays
