"""Shared binary container plumbing for measurements and checkpoints.

Layout: an 8-byte magic tag, a little-endian uint64 header length, a UTF-8
header of key=value lines, then little-endian float64 array payloads in a
fixed, documented order.  Writes go to a temp file and are renamed into
place so a crash never leaves a partial container behind.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import FileFormatError


def format_header(fields: dict) -> bytes:
    lines = [f"{k}={v}" for k, v in fields.items()]
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_header(raw: bytes, path) -> dict:
    fields = {}
    for line in raw.decode("utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise FileFormatError(f"{path}: malformed header line {line!r}")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    return fields


def write_container(path, magic: bytes, fields: dict, arrays) -> None:
    """Atomically write magic + header + float64 payloads."""
    assert len(magic) == 8
    header = format_header(fields)
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(magic)
            fh.write(struct.pack("<Q", len(header)))
            fh.write(header)
            for arr in arrays:
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class ContainerReader:
    """Sequential reader that reports the byte offset of any failure."""

    def __init__(self, path, magic: bytes):
        self.path = path
        with open(path, "rb") as fh:
            self._buf = fh.read()
        if len(self._buf) < 8:
            raise FileFormatError(f"{path}: truncated before magic (byte {len(self._buf)})")
        if self._buf[:8] != magic:
            raise FileFormatError(
                f"{path}: bad magic {self._buf[:8]!r} at byte 0, expected {magic!r}"
            )
        if len(self._buf) < 16:
            raise FileFormatError(f"{path}: truncated header length at byte {len(self._buf)}")
        (header_len,) = struct.unpack("<Q", self._buf[8:16])
        if 16 + header_len > len(self._buf):
            raise FileFormatError(
                f"{path}: header truncated at byte {len(self._buf)}, expected {16 + header_len} bytes"
            )
        self.fields = parse_header(self._buf[16:16 + header_len], path)
        self._pos = 16 + header_len

    def take_array(self, shape) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if self._pos + nbytes > len(self._buf):
            raise FileFormatError(
                f"{self.path}: payload truncated at byte {len(self._buf)}, "
                f"expected {self._pos + nbytes} bytes"
            )
        arr = np.frombuffer(self._buf, dtype="<f8", count=count, offset=self._pos)
        self._pos += nbytes
        return np.ascontiguousarray(arr.reshape(shape))

    def finish(self) -> None:
        if self._pos != len(self._buf):
            raise FileFormatError(
                f"{self.path}: {len(self._buf) - self._pos} unexpected trailing bytes at byte {self._pos}"
            )

    def int_field(self, key: str) -> int:
        try:
            return int(self.fields[key])
        except KeyError:
            raise FileFormatError(f"{self.path}: missing header field {key!r}")
        except ValueError:
            raise FileFormatError(f"{self.path}: header field {key!r} is not an integer")

    def float_field(self, key: str) -> float:
        try:
            return float(self.fields[key])
        except KeyError:
            raise FileFormatError(f"{self.path}: missing header field {key!r}")
        except ValueError:
            raise FileFormatError(f"{self.path}: header field {key!r} is not a number")
