"""Flat binary parameter checkpoints with a JSON header.

Byte layout::

    bytes 0..7    header length N as little-endian uint64
    bytes 8..8+N  UTF-8 JSON header
    remainder     parameter payload: little-endian float64 values,
                  row-major, concatenated in header order

Header schema::

    {"format_version": "1.0",
     "params": {name: {"shape": [...], "offset": byte offset into payload}},
     "meta": {...}}   # free-form JSON metadata (model config, vocabularies)

Offsets are byte positions relative to the start of the payload section.
"""

import json
import struct

import numpy as np

from .io import FORMAT_VERSION, FormatError


def save_checkpoint(path, arrays, meta=None):
    """Write ``arrays`` (name -> ndarray) plus JSON-serializable ``meta``."""
    params = {}
    chunks = []
    offset = 0
    for name in arrays:
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        params[name] = {"shape": list(arr.shape), "offset": offset}
        raw = arr.tobytes()
        chunks.append(raw)
        offset += len(raw)
    header = {
        "format_version": FORMAT_VERSION,
        "params": params,
        "meta": meta or {},
    }
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for raw in chunks:
            fh.write(raw)


def load_checkpoint(path):
    """Read a checkpoint; returns (arrays dict, meta dict)."""
    with open(path, "rb") as fh:
        prefix = fh.read(8)
        if len(prefix) != 8:
            raise FormatError(f"{path}: truncated checkpoint header length")
        (header_len,) = struct.unpack("<Q", prefix)
        header_bytes = fh.read(header_len)
        if len(header_bytes) != header_len:
            raise FormatError(f"{path}: truncated checkpoint header")
        try:
            header = json.loads(header_bytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: bad checkpoint header: {exc}") from exc
        version = str(header.get("format_version", ""))
        if version.split(".")[0] != FORMAT_VERSION.split(".")[0]:
            raise FormatError(f"{path}: unsupported checkpoint version {version!r}")
        payload = fh.read()
    arrays = {}
    for name, spec in header["params"].items():
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = spec["offset"]
        stop = start + count * 8
        if stop > len(payload):
            raise FormatError(f"{path}: payload truncated for parameter {name!r}")
        arrays[name] = np.frombuffer(
            payload[start:stop], dtype="<f8"
        ).reshape(shape).astype(np.float64)
    return arrays, header.get("meta", {})
