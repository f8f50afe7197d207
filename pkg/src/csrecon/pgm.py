"""Binary portable graymap (P5) reading and writing.

Reads 8-bit and 16-bit graymaps, mapping samples to [0, 1] by dividing by
the declared maxval.  Writing clamps to [0, 1], scales by 255 and rounds
half away from zero, so a read-back differs from the clamped original by
at most 1/510 per pixel.
"""

from __future__ import annotations

import numpy as np

from .errors import FileFormatError
from .tensor import Tensor


def _next_token(buf: bytes, pos: int):
    """Skip PGM whitespace and # comments; returns (token, new position)."""
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise FileFormatError(f"unexpected end of header at byte {pos}")
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace():
        pos += 1
    return buf[start:pos], pos


def read_pgm(path) -> Tensor:
    """Read a binary graymap into a 1 x H x W tensor with values in [0, 1]."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:2] != b"P5":
        raise FileFormatError(f"{path}: not a binary graymap (bad magic at byte 0)")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _next_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise FileFormatError(f"{path}: non-numeric header field at byte {pos - len(tok)}")
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise FileFormatError(f"{path}: invalid dimensions {width} x {height}")
    if not 0 < maxval < 65536:
        raise FileFormatError(f"{path}: maxval {maxval} out of range")
    if width * height > 10 ** 8:
        raise FileFormatError(f"{path}: dimensions {width} x {height} overflow the supported size")
    # exactly one whitespace byte separates the header from the payload
    pos += 1
    bytes_per = 1 if maxval < 256 else 2
    need = width * height * bytes_per
    payload = buf[pos:pos + need]
    if len(payload) < need:
        raise FileFormatError(
            f"{path}: payload truncated at byte {pos + len(payload)}, expected {pos + need} bytes"
        )
    dtype = np.uint8 if bytes_per == 1 else ">u2"
    raw = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    data = raw.astype(np.float64) / float(maxval)
    return Tensor(data[None, :, :])


def quantize_bytes(image: Tensor) -> np.ndarray:
    """Clamp to [0, 1], scale by 255 and round half away from zero."""
    if image.data.ndim != 3 or image.data.shape[0] != 1:
        raise ValueError(f"expected a 1 x H x W image, got shape {image.shape}")
    clamped = np.clip(image.data[0], 0.0, 1.0)
    # values are non-negative after the clamp, so floor(x + 0.5) rounds
    # half away from zero
    return np.floor(clamped * 255.0 + 0.5).astype(np.uint8)


def quantize(image: Tensor) -> Tensor:
    """The image exactly as a write/read round trip would return it."""
    return Tensor(quantize_bytes(image)[None, :, :] / 255.0)


def write_pgm(path, image: Tensor) -> None:
    """Write a 1 x H x W tensor as an 8-bit binary graymap."""
    quantized = quantize_bytes(image)
    _, h, w = image.data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quantized.tobytes())
