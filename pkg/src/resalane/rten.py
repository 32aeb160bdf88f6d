"""Binary tensor container used by all save/load paths (checkpoints, dumps).

Wire layout of one tensor:

    magic   4 bytes  b"RTEN"
    version u8       currently 1
    dtype   u8       0 = float32, 1 = float64
    ndim    u8
    dims    ndim x u64, little endian
    payload row-major element bytes, little endian

A bare tensor file is exactly this layout.  A named archive (checkpoint)
is a concatenation of records, each:

    name_len u16 little endian
    name     name_len bytes of UTF-8
    tensor   the wire layout above

The two file kinds are distinguished by the leading 4 bytes: a bare file
starts with the magic itself.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"RTEN"
VERSION = 1

_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}

_MAX_NAME = 4096


class RtenFormatError(ValueError):
    """Raised when a buffer does not parse as RTEN data."""


def tensor_to_bytes(array: np.ndarray) -> bytes:
    dt = np.dtype(array.dtype)
    if dt not in _DTYPE_CODES:
        raise RtenFormatError(f"unsupported dtype {array.dtype}, expected float32 or float64")
    header = MAGIC + struct.pack("<BBB", VERSION, _DTYPE_CODES[dt], array.ndim)
    dims = struct.pack(f"<{array.ndim}Q", *array.shape) if array.ndim else b""
    payload = np.ascontiguousarray(array, dtype=dt.newbyteorder("<")).tobytes()
    return header + dims + payload


def tensor_from_bytes(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Parse one tensor record starting at offset; return (array, next offset)."""
    if buf[offset : offset + 4] != MAGIC:
        raise RtenFormatError(f"bad magic at offset {offset}, expected {MAGIC!r}")
    offset += 4
    if offset + 3 > len(buf):
        raise RtenFormatError("truncated header")
    version, dtype_code, ndim = struct.unpack_from("<BBB", buf, offset)
    offset += 3
    if version != VERSION:
        raise RtenFormatError(f"unsupported version {version}")
    if dtype_code not in _CODE_DTYPES:
        raise RtenFormatError(f"unknown dtype code {dtype_code}")
    if offset + 8 * ndim > len(buf):
        raise RtenFormatError("truncated dims")
    shape = struct.unpack_from(f"<{ndim}Q", buf, offset) if ndim else ()
    offset += 8 * ndim
    dtype = _CODE_DTYPES[dtype_code]
    count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
    nbytes = count * dtype.itemsize
    if offset + nbytes > len(buf):
        raise RtenFormatError("truncated payload")
    arr = np.frombuffer(buf, dtype=dtype, count=count, offset=offset).reshape(shape)
    # native-endian writable copy
    return arr.astype(dtype.newbyteorder("="), copy=True), offset + nbytes


def save_tensor(path, array: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(tensor_to_bytes(array))


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    arr, end = tensor_from_bytes(buf, 0)
    if end != len(buf):
        raise RtenFormatError(f"{end - len(buf)} trailing bytes after tensor")
    return arr


def save_archive(path, tensors: dict[str, np.ndarray]) -> None:
    """Write named tensors as an archive, preserving insertion order."""
    parts = []
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        if not 0 < len(raw) <= _MAX_NAME:
            raise RtenFormatError(f"invalid entry name {name!r}")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(tensor_to_bytes(arr))
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def load_archive(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] == MAGIC:
        raise RtenFormatError("file is a bare tensor, not a named archive")
    out: dict[str, np.ndarray] = {}
    offset = 0
    while offset < len(buf):
        if offset + 2 > len(buf):
            raise RtenFormatError("truncated record header")
        (name_len,) = struct.unpack_from("<H", buf, offset)
        offset += 2
        if name_len == 0 or name_len > _MAX_NAME or offset + name_len > len(buf):
            raise RtenFormatError(f"invalid name length {name_len} at offset {offset - 2}")
        name = buf[offset : offset + name_len].decode("utf-8")
        offset += name_len
        arr, offset = tensor_from_bytes(buf, offset)
        if name in out:
            raise RtenFormatError(f"duplicate entry {name!r}")
        out[name] = arr
    return out
