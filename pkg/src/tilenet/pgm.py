"""Binary PGM (P5) reading and writing, 8-bit grayscale only."""

from __future__ import annotations

import numpy as np

from .errors import FileFormatError


def _tokens(data: bytes):
    """Yield whitespace-separated header tokens, skipping # comments."""
    pos = 0
    while pos < len(data):
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            yield data[pos:end], end
            pos = end


def read_pgm(path) -> np.ndarray:
    """Read a P5 file with maxval 255; returns a (rows, cols) uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    raster_at = None
    for token, end in _tokens(data):
        fields.append(token)
        if len(fields) == 4:
            raster_at = end + 1  # exactly one whitespace byte before the raster
            break
    if len(fields) < 4:
        raise FileFormatError(f"{path}: truncated PGM header")
    if fields[0] != b"P5":
        raise FileFormatError(f"{path}: not a binary PGM (P5) file")
    try:
        width, height, maxval = (int(f) for f in fields[1:4])
    except ValueError:
        raise FileFormatError(f"{path}: non-numeric PGM header field") from None
    if width < 1 or height < 1:
        raise FileFormatError(f"{path}: bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise FileFormatError(f"{path}: only 8-bit PGM (maxval 255) is supported")
    raster = data[raster_at : raster_at + width * height]
    if len(raster) != width * height:
        raise FileFormatError(f"{path}: PGM raster truncated")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def write_pgm(path, pixels) -> None:
    """Write a (rows, cols) array of 0..255 values as binary P5."""
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise ValueError(f"PGM pixels must be 2-D, got shape {arr.shape}")
    arr = arr.astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())
