"""Binary container shared by coefficient, weight, and dataset files.

Layout::

    b"INFN"                 4-byte magic
    uint32 (little-endian)  length of the JSON manifest in bytes
    manifest                UTF-8 JSON, keys sorted
    blobs                   little-endian arrays, back to back

The manifest's ``arrays`` list gives each blob's name, dtype, shape, and
byte offset relative to the end of the manifest.  Writes are deterministic:
same inputs give byte-identical files.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"INFN"
_DTYPES = {"<f4": np.dtype("<f4"), "<i4": np.dtype("<i4")}


class FormatError(ValueError):
    pass


def write_container(path, manifest: dict, arrays: dict[str, np.ndarray]) -> None:
    entries, blobs, offset = [], [], 0
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        dt = "<i4" if np.issubdtype(arr.dtype, np.integer) else "<f4"
        data = np.ascontiguousarray(arr, dtype=_DTYPES[dt]).tobytes()
        entries.append({"name": name, "dtype": dt, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = dict(manifest)
    header["arrays"] = entries
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        for data in blobs:
            fh.write(data)


def read_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: not an infonet container (bad magic)")
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated header")
    (hlen,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + hlen:
        raise FormatError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(raw[8:8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable manifest ({exc})") from None
    body = memoryview(raw)[8 + hlen:]
    arrays = {}
    for e in manifest.get("arrays", []):
        dt = _DTYPES.get(e["dtype"])
        if dt is None:
            raise FormatError(f"{path}: unsupported dtype {e['dtype']!r}")
        shape = tuple(e["shape"])
        expect = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        if e["nbytes"] != expect:
            raise FormatError(f"{path}: blob {e['name']!r} size does not match its shape")
        end = e["offset"] + e["nbytes"]
        if end > len(body):
            raise FormatError(f"{path}: blob {e['name']!r} is truncated")
        arr = np.frombuffer(body[e["offset"]:end], dtype=dt).reshape(shape)
        arrays[e["name"]] = arr.astype(dt.newbyteorder("="))
    return manifest, arrays
