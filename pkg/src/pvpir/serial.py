"""Binary encoding primitives shared by the wire protocol and file formats.

Big integers are encoded as a 2-byte big-endian magnitude length, the
magnitude bytes big-endian, and one sign byte (0x00 positive or zero,
0x01 negative). Decoding is strict: magnitudes must be minimal (no leading
zero byte) unless the caller explicitly opts into padded form, and a sign
byte of 0x01 with a zero magnitude is rejected.
"""

from __future__ import annotations


class DecodeError(ValueError):
    """Raised when a buffer does not parse as the expected structure."""


def encode_bigint(value: int) -> bytes:
    mag = abs(value)
    mag_bytes = mag.to_bytes((mag.bit_length() + 7) // 8, "big") if mag else b""
    if len(mag_bytes) > 0xFFFF:
        raise ValueError("integer magnitude exceeds 65535 bytes")
    sign = b"\x01" if value < 0 else b"\x00"
    return len(mag_bytes).to_bytes(2, "big") + mag_bytes + sign


def encode_bigint_padded(value: int, width: int) -> bytes:
    """Fixed-width variant: magnitude padded with leading zeros to `width` bytes.

    Used where serialized size must not depend on the value (DPF output
    correction words).
    """
    mag = abs(value)
    if (mag.bit_length() + 7) // 8 > width:
        raise ValueError("value does not fit the requested width")
    if width > 0xFFFF:
        raise ValueError("width exceeds 65535 bytes")
    sign = b"\x01" if value < 0 else b"\x00"
    return width.to_bytes(2, "big") + mag.to_bytes(width, "big") + sign


def decode_bigint(buf: bytes, off: int, *, allow_padded: bool = False,
                  expected_width: int | None = None) -> tuple[int, int]:
    """Returns (value, new offset).

    `expected_width` demands an exact padded magnitude width; without it,
    magnitudes must be minimal unless `allow_padded` is set.
    """
    if off + 2 > len(buf):
        raise DecodeError("bigint length truncated")
    n = int.from_bytes(buf[off : off + 2], "big")
    off += 2
    if expected_width is not None and n != expected_width:
        raise DecodeError("bigint width mismatch")
    if off + n + 1 > len(buf):
        raise DecodeError("bigint body truncated")
    mag_bytes = buf[off : off + n]
    sign = buf[off + n]
    off += n + 1
    if expected_width is None and not allow_padded and n > 0 and mag_bytes[0] == 0:
        raise DecodeError("bigint magnitude not minimal")
    if sign not in (0, 1):
        raise DecodeError("bad sign byte")
    mag = int.from_bytes(mag_bytes, "big")
    if sign == 1 and mag == 0:
        raise DecodeError("negative zero")
    return (-mag if sign else mag), off


def read_u8(buf: bytes, off: int) -> tuple[int, int]:
    if off + 1 > len(buf):
        raise DecodeError("u8 truncated")
    return buf[off], off + 1


def read_u16(buf: bytes, off: int) -> tuple[int, int]:
    if off + 2 > len(buf):
        raise DecodeError("u16 truncated")
    return int.from_bytes(buf[off : off + 2], "big"), off + 2


def read_u32(buf: bytes, off: int) -> tuple[int, int]:
    if off + 4 > len(buf):
        raise DecodeError("u32 truncated")
    return int.from_bytes(buf[off : off + 4], "big"), off + 4


def read_bytes(buf: bytes, off: int, n: int) -> tuple[bytes, int]:
    if n < 0 or off + n > len(buf):
        raise DecodeError("bytes truncated")
    return bytes(buf[off : off + n]), off + n


def write_u8(out: bytearray, x: int) -> None:
    out.append(x & 0xFF)


def write_u16(out: bytearray, x: int) -> None:
    out += int(x).to_bytes(2, "big")


def write_u32(out: bytearray, x: int) -> None:
    out += int(x).to_bytes(4, "big")


def expect_consumed(buf: bytes, off: int) -> None:
    if off != len(buf):
        raise DecodeError("trailing bytes after structure")
