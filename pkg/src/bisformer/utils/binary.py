"""Length-prefixed container shared by the model and dataset files.

    magic (4 bytes) | version (1 byte) | header length (uint32 LE) | header JSON (UTF-8)
    | array count (uint32 LE) | per array: byte length (uint64 LE) + raw little-endian data

The header's "arrays" list gives name, dtype and shape of each array in order.
"""
import json
import struct
from collections import OrderedDict
from typing import Any, Dict, Mapping, Tuple, Type

import numpy as np

FORMAT_VERSION = 1
ALLOWED_DTYPES = ("<f8", "<i8")


def pack_container(magic: bytes, header: Dict[str, Any], arrays: Mapping[str, np.ndarray]) -> bytes:
    manifest = []
    blobs = []
    for name, array in arrays.items():
        array = np.ascontiguousarray(array)
        dtype = "<i8" if np.issubdtype(array.dtype, np.integer) else "<f8"
        array = array.astype(dtype)
        manifest.append({"name": name, "dtype": dtype, "shape": list(array.shape)})
        blobs.append(array.tobytes())
    header = dict(header, arrays=manifest)
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [magic, struct.pack("<B", FORMAT_VERSION), struct.pack("<I", len(header_bytes)), header_bytes]
    parts.append(struct.pack("<I", len(blobs)))
    for blob in blobs:
        parts.append(struct.pack("<Q", len(blob)))
        parts.append(blob)
    return b"".join(parts)


def unpack_container(
    payload: bytes, magic: bytes, error_cls: Type[Exception]
) -> Tuple[Dict[str, Any], "OrderedDict[str, np.ndarray]"]:
    def fail(message: str) -> Exception:
        return error_cls(message)

    if payload[:4] != magic:
        raise fail(f"bad magic {payload[:4]!r}, expected {magic!r}")
    offset = 4

    def read(fmt: str):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(payload):
            raise fail("file truncated")
        (value,) = struct.unpack_from(fmt, payload, offset)
        offset += size
        return value

    version = read("<B")
    if version != FORMAT_VERSION:
        raise fail(f"unsupported format version {version}")
    header_len = read("<I")
    if offset + header_len > len(payload):
        raise fail("file truncated in header")
    try:
        header = json.loads(payload[offset:offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise fail(f"corrupt header: {e}")
    offset += header_len

    manifest = header.get("arrays", [])
    count = read("<I")
    if count != len(manifest):
        raise fail(f"header lists {len(manifest)} arrays, file holds {count}")
    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for entry in manifest:
        length = read("<Q")
        if entry["dtype"] not in ALLOWED_DTYPES:
            raise fail(f"unsupported dtype {entry['dtype']}")
        shape = tuple(entry["shape"])
        expected = int(np.prod(shape)) * 8
        if length != expected or offset + length > len(payload):
            raise fail(f"array {entry['name']} has {length} bytes, expected {expected}")
        arrays[entry["name"]] = np.frombuffer(
            payload, dtype=entry["dtype"], count=expected // 8, offset=offset
        ).reshape(shape).copy()
        offset += length
    if offset != len(payload):
        raise fail(f"{len(payload) - offset} trailing bytes")
    return header, arrays
