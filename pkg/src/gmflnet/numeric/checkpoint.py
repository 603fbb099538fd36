"""Versioned binary checkpoint format.

Layout (all integers little-endian)::

    8 bytes   magic  b"GMFLCKPT"
    4 bytes   uint32 format version
    8 bytes   uint64 header length H
    H bytes   UTF-8 JSON header:
              {"config": {...}, "config_hash": "<sha256 hex>",
               "meta": {...},
               "arrays": [{"name": str, "shape": [r, c], "offset": int}, ...]}
    ...       float64 little-endian payload, arrays concatenated in header order

Offsets are relative to the start of the payload.  The file contains no
timestamps, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"GMFLCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def dumps(arrays: dict[str, np.ndarray], config: dict, meta: dict | None = None) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        raw = a.tobytes()
        chunks.append(raw)
        offset += len(raw)
    header = {"config": config, "config_hash": config_hash(config),
              "meta": meta or {}, "arrays": entries}
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<IQ", VERSION, len(hb)) + hb + b"".join(chunks)


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict, dict]:
    if len(blob) < 20 or blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, hlen = struct.unpack("<IQ", blob[8:20])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(blob[20:20 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    if config_hash(header["config"]) != header["config_hash"]:
        raise CheckpointError("config hash mismatch; file is corrupt")
    payload = memoryview(blob)[20 + hlen:]
    arrays = {}
    for e in header["arrays"]:
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        start = e["offset"]
        if start + 8 * n > len(payload):
            raise CheckpointError(f"truncated payload for {e['name']}")
        arrays[e["name"]] = np.frombuffer(payload[start:start + 8 * n], dtype="<f8") \
            .reshape(e["shape"]).astype(np.float64)
    return arrays, header["config"], header["meta"]


def save(path: str | Path, arrays: dict[str, np.ndarray], config: dict,
         meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps(arrays, config, meta))


def load(path: str | Path) -> tuple[dict[str, np.ndarray], dict, dict]:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"{path}: cannot read checkpoint: {exc}") from exc
    return loads(blob)
