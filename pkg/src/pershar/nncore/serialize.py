"""Flat binary container: magic, version, JSON manifest, then raw tensor bytes.

Layout::

    b"PSHR" | uint16 version | uint64 manifest length | manifest (UTF-8 JSON) | data

The manifest lists every tensor's name, dtype, shape, byte offset into the
data section and byte length, plus a free-form ``meta`` dictionary.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError

MAGIC = b"PSHR"
VERSION = 1
_HEADER = struct.Struct("<4sHQ")


def encode_container(tensors: dict[str, np.ndarray], meta: dict) -> bytes:
    entries = []
    blobs = []
    offset = 0
    for name in tensors:
        arr = np.ascontiguousarray(tensors[name])
        if arr.dtype == object:
            raise DataError(f"tensor {name!r} has object dtype")
        raw = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        entries.append({"name": name, "dtype": arr.dtype.newbyteorder("<").str,
                        "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    manifest = json.dumps({"meta": meta, "tensors": entries}, sort_keys=True).encode("utf-8")
    return _HEADER.pack(MAGIC, VERSION, len(manifest)) + manifest + b"".join(blobs)


def decode_container(buf: bytes, source: str = "<bytes>") -> tuple[dict[str, np.ndarray], dict]:
    if len(buf) < _HEADER.size:
        raise DataError(f"{source}: truncated container")
    magic, version, mlen = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise DataError(f"{source}: not a model/reference container (bad magic {magic!r})")
    if version != VERSION:
        raise DataError(f"{source}: unsupported container version {version}")
    start = _HEADER.size
    try:
        manifest = json.loads(buf[start:start + mlen].decode("utf-8"))
    except ValueError as exc:
        raise DataError(f"{source}: corrupt manifest ({exc})") from None
    data = memoryview(buf)[start + mlen:]
    tensors = {}
    for e in manifest["tensors"]:
        lo, n = e["offset"], e["nbytes"]
        if lo + n > len(data):
            raise DataError(f"{source}: tensor {e['name']!r} runs past end of file")
        arr = np.frombuffer(data[lo:lo + n], dtype=np.dtype(e["dtype"])).reshape(e["shape"])
        tensors[e["name"]] = arr.astype(arr.dtype.newbyteorder("="), copy=True)
    return tensors, manifest["meta"]


def save_container(path, tensors: dict[str, np.ndarray], meta: dict) -> int:
    buf = encode_container(tensors, meta)
    Path(path).write_bytes(buf)
    return len(buf)


def load_container(path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing file: {path}")
    return decode_container(path.read_bytes(), str(path))


def digest(tensors: dict[str, np.ndarray], meta: dict) -> str:
    return hashlib.sha256(encode_container(tensors, meta)).hexdigest()[:16]
