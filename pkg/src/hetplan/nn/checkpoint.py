"""Byte-stable checkpoint container.

Layout: magic, format version, 4-byte big-endian header length, canonical
JSON header, then the raw little-endian float64 bytes of every parameter in
header order. Identical parameters always serialize to identical bytes.

The header records the layer stack and hyperparameters of the model that
wrote it, so loaders can validate compatibility.
"""

import json
import struct

import numpy as np

from ..exceptions import CheckpointError

MAGIC = b"HETPLANCKPT"
FORMAT_VERSION = 1


def _canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(path, kind, params, hyper=None, extra=None):
    """Write named parameter arrays with a descriptive header.

    params: dict name -> ndarray (any shape, stored as float64).
    """
    names = sorted(params)
    header = {
        "format": FORMAT_VERSION,
        "kind": kind,
        "hyper": hyper or {},
        "extra": extra or {},
        "params": [{"name": n, "shape": list(np.asarray(params[n]).shape)} for n in names],
    }
    blob = _canonical_json(header)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(">I", FORMAT_VERSION))
        fh.write(struct.pack(">I", len(blob)))
        fh.write(blob)
        for n in names:
            arr = np.ascontiguousarray(np.asarray(params[n], dtype=np.float64))
            fh.write(arr.tobytes())


def load_checkpoint(path, expect_kind=None):
    """Read a checkpoint; returns (header, dict name -> float64 ndarray)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file")
    off = len(MAGIC)
    version, hlen = struct.unpack(">II", raw[off:off + 8])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    off += 8
    try:
        header = json.loads(raw[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from exc
    off += hlen
    if expect_kind is not None and header.get("kind") != expect_kind:
        raise CheckpointError(
            f"{path}: checkpoint kind {header.get('kind')!r}, expected {expect_kind!r}")
    params = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if off + nbytes > len(raw):
            raise CheckpointError(f"{path}: truncated parameter data for {entry['name']!r}")
        params[entry["name"]] = np.frombuffer(
            raw[off:off + nbytes], dtype="<f8").reshape(shape).copy()
        off += nbytes
    if off != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - off} trailing bytes")
    return header, params
