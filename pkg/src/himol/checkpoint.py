"""Versioned binary container for model and embedding checkpoints.

Layout: 8-byte magic, little-endian u32 version, u64 header length, JSON
header (metadata plus a tensor manifest of name/dtype/shape), raw tensor
bytes in manifest order (little-endian, C order), and a trailing sha256
checksum over everything before it.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

VERSION = 1
MODEL_MAGIC = b"HIMOLMD1"
EMBED_MAGIC = b"HIMOLEM1"

_DTYPES = {"f8": "<f8", "i8": "<i8"}


class BadCheckpoint(ValueError):
    pass


def save_container(
    path: str | Path, magic: bytes, meta: dict, tensors: dict[str, np.ndarray]
) -> None:
    assert len(magic) == 8
    manifest = []
    blobs = []
    for name, arr in tensors.items():
        if arr.dtype.kind == "f":
            code, arr = "f8", arr.astype("<f8")
        elif arr.dtype.kind in "iu":
            code, arr = "i8", arr.astype("<i8")
        else:
            raise ValueError(f"unsupported dtype for tensor {name}: {arr.dtype}")
        manifest.append({"name": name, "dtype": code, "shape": list(arr.shape)})
        blobs.append(np.ascontiguousarray(arr).tobytes())
    header = json.dumps({"meta": meta, "tensors": manifest}, sort_keys=True).encode("utf-8")
    body = magic + struct.pack("<IQ", VERSION, len(header)) + header + b"".join(blobs)
    digest = hashlib.sha256(body).digest()
    Path(path).write_bytes(body + digest)


def load_container(path: str | Path, magic: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < 8 + 12 + 32:
        raise BadCheckpoint(f"{path}: file too short to be a checkpoint")
    if raw[:8] != magic:
        raise BadCheckpoint(
            f"{path}: bad magic {raw[:8]!r}, expected {magic!r}"
        )
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise BadCheckpoint(f"{path}: checksum mismatch, file is corrupt")
    version, header_len = struct.unpack("<IQ", raw[8:20])
    if version != VERSION:
        raise BadCheckpoint(f"{path}: unsupported version {version}, expected {VERSION}")
    header = json.loads(raw[20 : 20 + header_len].decode("utf-8"))
    tensors: dict[str, np.ndarray] = {}
    offset = 20 + header_len
    for entry in header["tensors"]:
        dtype = np.dtype(_DTYPES[entry["dtype"]])
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        nbytes = count * dtype.itemsize
        chunk = body[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise BadCheckpoint(f"{path}: truncated tensor {entry['name']}")
        tensors[entry["name"]] = np.frombuffer(chunk, dtype=dtype).reshape(entry["shape"]).copy()
        offset += nbytes
    if offset != len(body):
        raise BadCheckpoint(f"{path}: trailing bytes after tensor data")
    return header["meta"], tensors


def save_model(path: str | Path, model) -> None:
    from .backbone import backbone_meta

    save_container(
        path, MODEL_MAGIC, backbone_meta(model), {k: t.data for k, t in model.params.items()}
    )


def load_model(path: str | Path):
    from .backbone import backbone_from_parts

    meta, tensors = load_container(path, MODEL_MAGIC)
    return backbone_from_parts(meta, tensors)
