"""IDX (MNIST-style) unsigned-byte archive reading and writing.

Layout: two zero bytes, a dtype code (0x08 = unsigned byte), the number
of dimensions, then each dimension as a big-endian uint32, then the raw
data in row-major order.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FileFormatError

_UBYTE = 0x08


def read_idx(path) -> np.ndarray:
    """Read an unsigned-byte IDX file into a uint8 array."""
    with open(path, "rb") as fh:
        head = fh.read(4)
        if len(head) != 4 or head[0] != 0 or head[1] != 0:
            raise FileFormatError(f"{path}: bad IDX magic")
        dtype_code, ndim = head[2], head[3]
        if dtype_code != _UBYTE:
            raise FileFormatError(
                f"{path}: unsupported IDX dtype 0x{dtype_code:02x} (only unsigned byte)"
            )
        raw_dims = fh.read(4 * ndim)
        if len(raw_dims) != 4 * ndim:
            raise FileFormatError(f"{path}: truncated IDX dimension header")
        dims = struct.unpack(f">{ndim}I", raw_dims)
        count = int(np.prod(dims)) if dims else 0
        data = fh.read(count)
    if len(data) != count:
        raise FileFormatError(f"{path}: IDX data truncated")
    return np.frombuffer(data, dtype=np.uint8).reshape(dims)


def write_idx(path, array) -> None:
    """Write a uint8 array as an unsigned-byte IDX file."""
    arr = np.ascontiguousarray(array, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(bytes([0, 0, _UBYTE, arr.ndim]))
        fh.write(struct.pack(f">{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())
