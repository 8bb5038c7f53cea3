"""On-disk formats: raw float64 matrices and 8-bit binary PGM images.

Matrix format ("OAMPMAT1"): an 8-byte magic, two little-endian uint64 dims
(rows, cols), then rows*cols little-endian IEEE-754 float64 values in
row-major order.  Big-endian is never used.
"""

import struct

import numpy as np

from .errors import InvalidParameterError

MAT_MAGIC = b"OAMPMAT1"

__all__ = ["MAT_MAGIC", "write_matrix", "read_matrix", "read_pgm", "write_pgm"]


def write_matrix(path, arr):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise InvalidParameterError("matrix export expects a 1-D or 2-D array")
    with open(path, "wb") as fh:
        fh.write(MAT_MAGIC)
        fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def read_matrix(path):
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAT_MAGIC:
            raise InvalidParameterError(f"bad matrix magic {magic!r}")
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
        if data.size != rows * cols:
            raise InvalidParameterError("truncated matrix payload")
    return data.reshape(rows, cols).copy()


def _next_token(fh):
    # PGM tokens are separated by whitespace; '#' starts a comment to EOL
    token = b""
    while True:
        ch = fh.read(1)
        if not ch:
            if token:
                return token
            raise InvalidParameterError("unexpected end of PGM header")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = fh.read(1)
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def read_pgm(path):
    """Parse a binary (P5) 8-bit PGM; returns (uint8 image, maxval)."""
    with open(path, "rb") as fh:
        if _next_token(fh) != b"P5":
            raise InvalidParameterError("not a binary PGM (P5) file")
        width = int(_next_token(fh))
        height = int(_next_token(fh))
        maxval = int(_next_token(fh))
        if not 0 < maxval < 256:
            raise InvalidParameterError(
                f"only 8-bit PGM supported, got maxval={maxval}")
        data = fh.read(width * height)
    if len(data) != width * height:
        raise InvalidParameterError("truncated PGM pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width).copy(), maxval


def write_pgm(path, img, maxval=255):
    """Write a uint8 (or [0,1] float, scaled) image as binary PGM."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise InvalidParameterError("PGM output expects a 2-D image")
    if img.dtype != np.uint8:
        img = np.clip(np.round(img * maxval), 0, maxval).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (img.shape[1], img.shape[0], maxval))
        fh.write(img.tobytes())
