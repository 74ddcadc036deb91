"""Length-prefixed binary encoding shared by all protocol messages.

Integers are big-endian and fixed width; variable-length fields carry a
u32 length prefix.  Readers raise ``WireError`` on truncated or trailing
input so malformed messages are rejected rather than half-parsed.
"""

from __future__ import annotations

import struct


class WireError(ValueError):
    pass


class Writer:
    __slots__ = ("_parts",)

    def __init__(self):
        self._parts: list[bytes] = []

    def u8(self, x: int) -> "Writer":
        self._parts.append(struct.pack(">B", x))
        return self

    def u32(self, x: int) -> "Writer":
        self._parts.append(struct.pack(">I", x))
        return self

    def u64(self, x: int) -> "Writer":
        self._parts.append(struct.pack(">Q", x))
        return self

    def raw(self, data: bytes) -> "Writer":
        self._parts.append(bytes(data))
        return self

    def blob(self, data: bytes) -> "Writer":
        self.u32(len(data))
        self._parts.append(bytes(data))
        return self

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    __slots__ = ("_buf", "_pos")

    def __init__(self, data: bytes):
        self._buf = memoryview(bytes(data))
        self._pos = 0

    def _take(self, n: int) -> bytes:
        end = self._pos + n
        if n < 0 or end > len(self._buf):
            raise WireError("truncated message")
        out = self._buf[self._pos : end].tobytes()
        self._pos = end
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self._take(8))[0]

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def blob(self) -> bytes:
        return self._take(self.u32())

    def done(self) -> None:
        if self._pos != len(self._buf):
            raise WireError("trailing bytes")
