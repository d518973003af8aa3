"""Integer and primitive codecs: strictness, canonicality, cross-checks."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import struct_pack_bigint, struct_pack_bigint_padded
from pvpir.serial import (
    DecodeError,
    decode_bigint,
    encode_bigint,
    encode_bigint_padded,
    expect_consumed,
    read_bytes,
    read_u8,
    read_u16,
    read_u32,
    write_u8,
    write_u16,
    write_u32,
)

INTERESTING = [0, 1, -1, 255, 256, -256, 2**15, 2**16 - 1, 2**64, -(2**64),
               2**255, -(2**1024), 10**100]


@pytest.mark.parametrize("value", INTERESTING)
def test_bigint_roundtrip(value):
    buf = encode_bigint(value)
    got, off = decode_bigint(buf, 0)
    assert got == value
    assert off == len(buf)


@pytest.mark.parametrize("value", INTERESTING)
def test_bigint_matches_independent_encoder(value):
    assert encode_bigint(value) == struct_pack_bigint(value)


@given(st.integers(min_value=-(2**4096), max_value=2**4096))
def test_bigint_roundtrip_property(value):
    buf = encode_bigint(value)
    assert buf == struct_pack_bigint(value)
    got, off = decode_bigint(buf, 0)
    assert (got, off) == (value, len(buf))


def test_bigint_offset_advances_through_sequence():
    values = [7, -9, 0, 2**70]
    buf = b"".join(encode_bigint(v) for v in values)
    off = 0
    for want in values:
        got, off = decode_bigint(buf, off)
        assert got == want
    expect_consumed(buf, off)


def test_bigint_magnitude_cap():
    with pytest.raises(ValueError):
        encode_bigint(1 << (8 * 0x10000))


def test_bigint_rejects_nonminimal_magnitude():
    # hand-built: length 2, magnitude 0x0005, positive
    buf = b"\x00\x02\x00\x05\x00"
    with pytest.raises(DecodeError):
        decode_bigint(buf, 0)
    got, _ = decode_bigint(buf, 0, allow_padded=True)
    assert got == 5


def test_bigint_rejects_negative_zero():
    buf = b"\x00\x00\x01"
    with pytest.raises(DecodeError):
        decode_bigint(buf, 0)


def test_bigint_rejects_bad_sign_byte():
    buf = b"\x00\x01\x05\x07"
    with pytest.raises(DecodeError):
        decode_bigint(buf, 0)


def test_bigint_rejects_truncation():
    buf = encode_bigint(2**64)
    for cut in range(len(buf)):
        with pytest.raises(DecodeError):
            decode_bigint(buf[:cut], 0)


@pytest.mark.parametrize("value,width", [(0, 1), (5, 4), (-5, 4), (2**31 - 1, 4),
                                         (123, 16), (-(2**100), 20)])
def test_bigint_padded_roundtrip(value, width):
    buf = encode_bigint_padded(value, width)
    assert buf == struct_pack_bigint_padded(value, width)
    assert len(buf) == 2 + width + 1
    got, off = decode_bigint(buf, 0, expected_width=width)
    assert (got, off) == (value, len(buf))


def test_bigint_padded_fixed_size_leaks_nothing():
    sizes = {len(encode_bigint_padded(v, 8)) for v in (0, 1, 2**63 - 1, -(2**40))}
    assert sizes == {11}


def test_bigint_padded_rejects_overflow():
    with pytest.raises(ValueError):
        encode_bigint_padded(1 << 32, 4)
    with pytest.raises(ValueError):
        encode_bigint_padded(1, 0x10000)


def test_bigint_expected_width_mismatch():
    buf = encode_bigint_padded(5, 4)
    with pytest.raises(DecodeError):
        decode_bigint(buf, 0, expected_width=5)
    # minimal form also fails an expected-width read
    with pytest.raises(DecodeError):
        decode_bigint(encode_bigint(5), 0, expected_width=4)


@given(st.binary(max_size=64))
def test_bigint_decode_never_crashes(buf):
    try:
        value, off = decode_bigint(buf, 0)
    except DecodeError:
        return
    assert 0 <= off <= len(buf)
    assert encode_bigint(value) == buf[:off]


def test_fixed_width_readers():
    out = bytearray()
    write_u8(out, 0xAB)
    write_u16(out, 0x1234)
    write_u32(out, 0xDEADBEEF)
    buf = bytes(out)
    a, off = read_u8(buf, 0)
    b, off = read_u16(buf, off)
    c, off = read_u32(buf, off)
    assert (a, b, c) == (0xAB, 0x1234, 0xDEADBEEF)
    expect_consumed(buf, off)


def test_fixed_width_truncation():
    with pytest.raises(DecodeError):
        read_u8(b"", 0)
    with pytest.raises(DecodeError):
        read_u16(b"\x00", 0)
    with pytest.raises(DecodeError):
        read_u32(b"\x00\x00\x00", 0)


def test_read_bytes_bounds():
    data, off = read_bytes(b"abcdef", 1, 3)
    assert (data, off) == (b"bcd", 4)
    with pytest.raises(DecodeError):
        read_bytes(b"abc", 0, 4)
    with pytest.raises(DecodeError):
        read_bytes(b"abc", 0, -1)


def test_expect_consumed_trailing():
    with pytest.raises(DecodeError):
        expect_consumed(b"ab", 1)
    expect_consumed(b"ab", 2)
