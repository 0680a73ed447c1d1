"""Deterministic named-array container.

Layout: 8-byte magic, little-endian u32 header length, JSON header, then the
raw little-endian array bytes in header order. Same arrays in, same bytes out.
"""
from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"PATHCF\x00\x01"


def write_arrays(path, arrays: dict, meta: dict | None = None) -> None:
    entries, chunks = [], []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype.byteorder != "|":
            arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        entries.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)})
        chunks.append(arr.tobytes())
    header = json.dumps({"arrays": entries, "meta": meta or {}}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for c in chunks:
            fh.write(c)


def read_arrays(path) -> tuple[dict, dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path}: not a pathcf array file")
    (hlen,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12:12 + hlen])
    pos = 12 + hlen
    out = {}
    for e in header["arrays"]:
        dt = np.dtype(e["dtype"])
        n = int(np.prod(e["shape"], dtype=np.int64)) * dt.itemsize
        out[e["name"]] = np.frombuffer(raw[pos:pos + n], dtype=dt).reshape(e["shape"]).copy()
        pos += n
    return out, header["meta"]
