"""Deterministic binary sidecar files for fitted reducers and SVM models.

Layout: magic ``DFSB``, u16 format version, u32 header length, a UTF-8 JSON
header (kind, metadata, array directory), then the raw little-endian array
payloads in directory order. The same content always produces the same bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"DFSB"
FORMAT_VERSION = 1

_PREFIX = struct.Struct("<HI")  # version, header length


def save_sidecar(path, kind: str, meta: dict, arrays: dict) -> None:
    """Write named arrays plus JSON-safe metadata under a kind tag."""
    directory = []
    payloads = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.newbyteorder("<")
        payloads.append(arr.astype(dtype, copy=False).tobytes())
        directory.append({"name": name, "dtype": dtype.str, "shape": list(arr.shape)})
    header = json.dumps(
        {"kind": kind, "meta": meta, "arrays": directory},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_PREFIX.pack(FORMAT_VERSION, len(header)))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)
    tmp.replace(path)


def load_sidecar(path, expected_kind: str):
    """Return (meta, arrays) from a sidecar, checking magic/version/kind."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + _PREFIX.size or raw[:4] != MAGIC:
        raise FormatError(f"{path}: not a sidecar file")
    version, header_len = _PREFIX.unpack_from(raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported sidecar version {version}")
    offset = len(MAGIC) + _PREFIX.size
    header = json.loads(raw[offset : offset + header_len].decode("utf-8"))
    if header["kind"] != expected_kind:
        raise FormatError(
            f"{path}: sidecar holds {header['kind']!r}, expected {expected_kind!r}"
        )
    arrays = {}
    cursor = offset + header_len
    for entry in header["arrays"]:
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        nbytes = dtype.itemsize * count
        if cursor + nbytes > len(raw):
            raise FormatError(f"{path}: truncated array payload for {entry['name']!r}")
        arr = np.frombuffer(raw, dtype=dtype, count=count, offset=cursor)
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
        cursor += nbytes
    return header["meta"], arrays
