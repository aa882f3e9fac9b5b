"""Canonical byte encodings.

Every field is written as ``u32 little-endian length || payload``. Scalars are
fixed-width (32 byte) little-endian, signed big integers are minimal two's
complement little-endian. Composite artifacts start with a one-byte version.
"""

from __future__ import annotations

import struct

from .errors import InvalidEncoding

FORMAT_VERSION = 1
SCALAR_BYTES = 32


def put(payload: bytes) -> bytes:
    return struct.pack("<I", len(payload)) + payload


def scalar_bytes(x: int) -> bytes:
    return int(x).to_bytes(SCALAR_BYTES, "little")


def signed_bytes(x: int) -> bytes:
    x = int(x)
    n = (x + (x < 0)).bit_length() // 8 + 1
    return x.to_bytes(n, "little", signed=True)


def put_scalar(x: int) -> bytes:
    return put(scalar_bytes(x))


def put_int(x: int) -> bytes:
    return put(signed_bytes(x))


def put_str(s: str) -> bytes:
    return put(s.encode("utf-8"))


class Reader:
    """Sequential reader over a length-prefixed byte string."""

    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self) -> bytes:
        if self.pos + 4 > len(self.data):
            raise InvalidEncoding("truncated length prefix")
        (n,) = struct.unpack_from("<I", self.data, self.pos)
        start = self.pos + 4
        end = start + n
        if end > len(self.data):
            raise InvalidEncoding("truncated field")
        self.pos = end
        return bytes(self.data[start:end])

    def scalar(self) -> int:
        raw = self.take()
        if len(raw) != SCALAR_BYTES:
            raise InvalidEncoding("scalar has wrong width")
        return int.from_bytes(raw, "little")

    def int(self) -> int:
        raw = self.take()
        if not raw:
            raise InvalidEncoding("empty integer field")
        return int.from_bytes(raw, "little", signed=True)

    def str(self) -> str:
        return self.take().decode("utf-8")

    def version(self) -> None:
        if self.pos >= len(self.data) or self.data[self.pos] != FORMAT_VERSION:
            raise InvalidEncoding("unsupported format version")
        self.pos += 1

    def done(self) -> None:
        if self.pos != len(self.data):
            raise InvalidEncoding("trailing bytes")
