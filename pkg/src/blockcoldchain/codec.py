"""Canonical byte encoding.

Integers are big-endian fixed width, variable-length byte and string fields
carry an unsigned 32-bit big-endian length prefix. Decoding is strict: a
reader that is not fully consumed, or a field that violates its bounds, is an
error, so every accepted byte string has exactly one decoded value.
"""

from __future__ import annotations

import struct

from .errors import EncodingError, OversizeField

_U8 = struct.Struct(">B")
_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")
_I32 = struct.Struct(">i")


class Writer:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, value: int) -> "Writer":
        return self._pack(_U8, value)

    def u32(self, value: int) -> "Writer":
        return self._pack(_U32, value)

    def u64(self, value: int) -> "Writer":
        return self._pack(_U64, value)

    def i32(self, value: int) -> "Writer":
        return self._pack(_I32, value)

    def fixed(self, value: bytes, size: int) -> "Writer":
        if len(value) != size:
            raise EncodingError(f"expected {size} bytes, got {len(value)}")
        self._parts.append(bytes(value))
        return self

    def blob(self, value: bytes, max_len: int | None = None) -> "Writer":
        if max_len is not None and len(value) > max_len:
            raise OversizeField(f"field of {len(value)} bytes exceeds maximum {max_len}")
        self.u32(len(value))
        self._parts.append(bytes(value))
        return self

    def text(self, value: str, max_len: int | None = None) -> "Writer":
        return self.blob(value.encode("utf-8"), max_len)

    def raw(self, value: bytes) -> "Writer":
        self._parts.append(bytes(value))
        return self

    def getvalue(self) -> bytes:
        return b"".join(self._parts)

    def _pack(self, fmt: struct.Struct, value: int) -> "Writer":
        try:
            self._parts.append(fmt.pack(value))
        except struct.error as exc:
            raise EncodingError(f"{value!r} does not fit {fmt.format}") from exc
        return self


class Reader:
    def __init__(self, data: bytes) -> None:
        self._data = memoryview(data)
        self._pos = 0

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def take(self, size: int) -> bytes:
        if size < 0 or self._pos + size > len(self._data):
            raise EncodingError("truncated input")
        chunk = bytes(self._data[self._pos : self._pos + size])
        self._pos += size
        return chunk

    def u8(self) -> int:
        return _U8.unpack(self.take(1))[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def i32(self) -> int:
        return _I32.unpack(self.take(4))[0]

    def fixed(self, size: int) -> bytes:
        return self.take(size)

    def blob(self, max_len: int | None = None) -> bytes:
        size = self.u32()
        if max_len is not None and size > max_len:
            raise OversizeField(f"field of {size} bytes exceeds maximum {max_len}")
        return self.take(size)

    def text(self, max_len: int | None = None) -> str:
        raw = self.blob(max_len)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError("invalid utf-8 in text field") from exc

    def done(self) -> None:
        if self.remaining:
            raise EncodingError(f"{self.remaining} trailing bytes")
