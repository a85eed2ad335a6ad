"""Minimal protobuf wire-format reader.

Decodes just enough of the wire format to walk ONNX model files: varints,
length-delimited fields, and the two fixed widths. Field semantics (which
field number means what) live in model.py; this module is format-only.
"""

from __future__ import annotations

import struct
from typing import Iterator


class WireError(ValueError):
    """The byte stream is not valid protobuf wire data."""


def read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise WireError("truncated varint")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise WireError("varint too long")


def iter_fields(buf: bytes) -> Iterator[tuple[int, int, object]]:
    """Yield (field_number, wire_type, value) triples.

    Values: int for varint fields, bytes for length-delimited, and the raw
    4/8-byte slices for the fixed widths. Group wire types are rejected
    (ONNX never uses them).
    """
    pos = 0
    n = len(buf)
    while pos < n:
        tag, pos = read_varint(buf, pos)
        field, wire_type = tag >> 3, tag & 7
        if field == 0:
            raise WireError("field number 0")
        if wire_type == 0:
            value, pos = read_varint(buf, pos)
        elif wire_type == 2:
            length, pos = read_varint(buf, pos)
            if pos + length > n:
                raise WireError(f"length-delimited field {field} overruns the buffer")
            value = buf[pos:pos + length]
            pos += length
        elif wire_type == 5:
            value = buf[pos:pos + 4]
            pos += 4
        elif wire_type == 1:
            value = buf[pos:pos + 8]
            pos += 8
        else:
            raise WireError(f"unsupported wire type {wire_type} for field {field}")
        if pos > n:
            raise WireError("truncated field payload")
        yield field, wire_type, value


def group_fields(buf: bytes) -> dict[int, list]:
    """Collect all values per field number (order preserved within a field)."""
    out: dict[int, list] = {}
    for field, _, value in iter_fields(buf):
        out.setdefault(field, []).append(value)
    return out


def to_signed64(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def repeated_int64(values: list, buf_wire_types_packed_ok=True) -> list[int]:
    """Repeated int64 field given mixed packed/unpacked encodings."""
    out: list[int] = []
    for v in values:
        if isinstance(v, int):
            out.append(to_signed64(v))
        elif isinstance(v, (bytes, bytearray)):
            pos = 0
            while pos < len(v):
                raw, pos = read_varint(v, pos)
                out.append(to_signed64(raw))
        else:
            raise WireError(f"unexpected value {v!r} in repeated int64 field")
    return out


def scalar_string(values: list) -> str:
    if not values:
        return ""
    v = values[-1]
    if not isinstance(v, (bytes, bytearray)):
        raise WireError("expected a length-delimited string field")
    return v.decode("utf-8")


def scalar_int(values: list, default: int = 0) -> int:
    if not values:
        return default
    v = values[-1]
    if not isinstance(v, int):
        raise WireError("expected a varint field")
    return to_signed64(v)


def scalar_float(values: list, default: float = 0.0) -> float:
    if not values:
        return default
    v = values[-1]
    if isinstance(v, (bytes, bytearray)) and len(v) == 4:
        return struct.unpack("<f", v)[0]
    if isinstance(v, (bytes, bytearray)) and len(v) == 8:
        return struct.unpack("<d", v)[0]
    raise WireError("expected a fixed-width float field")
