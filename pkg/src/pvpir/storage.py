"""File formats for databases, weights, keys, and answer transcripts.

Databases and weights share one layout: a fixed header (magic, version,
item count, item bit width, lane count) followed by raw little-endian item
bytes. The lane count is redundant with the item width and the active
profile's lane width; it is stored so a reader can detect a profile
mismatch instead of silently mis-chunking.

Key and transcript files reuse the strict bigint codec from the wire
layer. The verification-key and answers files together with the public-key
file are exactly what a third-party verifier needs; no secret material
appears in any of them.
"""

from __future__ import annotations

import random

from .groups import DlGroup, pow_mod
from .protocol import (
    AnswerPair,
    DatabaseView,
    PublicKeys,
    SchemeId,
    SecretKeys,
    WeightVector,
)
from .serial import (
    DecodeError,
    decode_bigint,
    encode_bigint,
    expect_consumed,
    read_bytes,
    read_u8,
    read_u16,
    read_u32,
    write_u8,
    write_u16,
    write_u32,
)
from .wire import WireContext, decode_answer_pair, encode_answer_pair

MAGIC_DATABASE = b"PVDB"
MAGIC_WEIGHTS = b"PVWT"
MAGIC_PUBLIC = b"PVPK"
MAGIC_SECRET = b"PVSK"
MAGIC_VERIFY_KEY = b"PVVK"
MAGIC_ANSWERS = b"PVAN"
FILE_VERSION = 1

MAX_ITEMS = 1 << 28
MAX_ITEM_BITS = 1 << 15


def make_random_items(n: int, ell_bits: int, rng: random.Random) -> list[int]:
    top = 1 << ell_bits
    return [rng.randrange(top) for _ in range(n)]


def lane_count_for(ell_bits: int, lane_width_bits: int) -> int:
    return (ell_bits + lane_width_bits - 1) // lane_width_bits


# ---------------------------------------------------------------------------
# Item files (databases and weights share the layout)


def _write_items(path: str, magic: bytes, items, ell_bits: int, lane_width_bits: int) -> None:
    if not (1 <= ell_bits <= MAX_ITEM_BITS):
        raise ValueError("item bit width out of range")
    if not (1 <= len(items) <= MAX_ITEMS):
        raise ValueError("item count out of range")
    item_bytes = (ell_bits + 7) // 8
    out = bytearray()
    out += magic
    write_u8(out, FILE_VERSION)
    write_u32(out, len(items))
    write_u16(out, ell_bits)
    write_u16(out, lane_count_for(ell_bits, lane_width_bits))
    top = 1 << ell_bits
    for x in items:
        if not (0 <= x < top):
            raise ValueError("item out of declared bit range")
        out += x.to_bytes(item_bytes, "little")
    with open(path, "wb") as fh:
        fh.write(out)


def _read_items(path: str, magic: bytes, lane_width_bits: int):
    with open(path, "rb") as fh:
        buf = fh.read()
    got, off = read_bytes(buf, 0, 4)
    if got != magic:
        raise DecodeError(f"bad magic, expected {magic!r}")
    version, off = read_u8(buf, off)
    if version != FILE_VERSION:
        raise DecodeError("unsupported file version")
    n, off = read_u32(buf, off)
    ell_bits, off = read_u16(buf, off)
    lane_count, off = read_u16(buf, off)
    if not (1 <= n <= MAX_ITEMS) or not (1 <= ell_bits <= MAX_ITEM_BITS):
        raise DecodeError("header out of range")
    if lane_count != lane_count_for(ell_bits, lane_width_bits):
        raise DecodeError("lane count does not match the active lane width")
    item_bytes = (ell_bits + 7) // 8
    body, off = read_bytes(buf, off, n * item_bytes)
    expect_consumed(buf, off)
    top = 1 << ell_bits
    items = []
    for i in range(n):
        x = int.from_bytes(body[i * item_bytes : (i + 1) * item_bytes], "little")
        if x >= top:
            raise DecodeError("item exceeds declared bit range")
        items.append(x)
    return items, ell_bits


def write_database(path: str, items, ell_bits: int, lane_width_bits: int) -> None:
    _write_items(path, MAGIC_DATABASE, items, ell_bits, lane_width_bits)


def write_weights(path: str, values, ell_bits: int, lane_width_bits: int) -> None:
    _write_items(path, MAGIC_WEIGHTS, values, ell_bits, lane_width_bits)


def load_database_view(db_path: str, lane_width_bits: int,
                       weights_path: str | None = None) -> DatabaseView:
    """Load items (and optionally a separate weights file) into a server view."""
    items, ell_bits = _read_items(db_path, MAGIC_DATABASE, lane_width_bits)
    if weights_path is None:
        omega = WeightVector.from_items(items, ell_bits, lane_width_bits)
    else:
        w_items, w_ell = _read_items(weights_path, MAGIC_WEIGHTS, lane_width_bits)
        if len(w_items) != len(items):
            raise DecodeError("database and weights lengths disagree")
        omega = WeightVector.from_items(w_items, w_ell, lane_width_bits)
    return DatabaseView(items=tuple(items), ell_bits=ell_bits, omega=omega)


# ---------------------------------------------------------------------------
# Key files


def _header(magic: bytes, scheme: SchemeId) -> bytearray:
    out = bytearray()
    out += magic
    write_u8(out, FILE_VERSION)
    write_u8(out, int(scheme))
    return out


def _read_header(buf: bytes, magic: bytes):
    got, off = read_bytes(buf, 0, 4)
    if got != magic:
        raise DecodeError(f"bad magic, expected {magic!r}")
    version, off = read_u8(buf, off)
    if version != FILE_VERSION:
        raise DecodeError("unsupported file version")
    tag, off = read_u8(buf, off)
    try:
        scheme = SchemeId(tag)
    except ValueError:
        raise DecodeError("unknown scheme tag") from None
    return scheme, off


def write_public_keys(path: str, pk: PublicKeys) -> None:
    out = _header(MAGIC_PUBLIC, pk.scheme)
    if pk.scheme == SchemeId.PI2_RSA_PREDICATE:
        out += encode_bigint(pk.rsa_n)
        out += encode_bigint(pk.rsa_e)
        out += encode_bigint(pk.rsa_xi)
        write_u16(out, pk.mask_bits)
    else:
        out += encode_bigint(pk.dl.p_safe)
        out += encode_bigint(pk.dl.q_g)
        out += encode_bigint(pk.dl.xi)
    with open(path, "wb") as fh:
        fh.write(out)


def load_public_keys(path: str) -> PublicKeys:
    with open(path, "rb") as fh:
        buf = fh.read()
    scheme, off = _read_header(buf, MAGIC_PUBLIC)
    if scheme == SchemeId.PI2_RSA_PREDICATE:
        n, off = decode_bigint(buf, off)
        e, off = decode_bigint(buf, off)
        xi, off = decode_bigint(buf, off)
        mask_bits, off = read_u16(buf, off)
        expect_consumed(buf, off)
        if n < 15 or n % 2 == 0:
            raise DecodeError("implausible modulus")
        if not (1 <= e < n) or not (1 < xi < n):
            raise DecodeError("exponent or base out of range")
        if mask_bits < n.bit_length():
            raise DecodeError("mask width below modulus width")
        return PublicKeys(scheme=scheme, rsa_n=n, rsa_e=e, rsa_xi=xi, mask_bits=mask_bits)
    p, off = decode_bigint(buf, off)
    q, off = decode_bigint(buf, off)
    xi, off = decode_bigint(buf, off)
    expect_consumed(buf, off)
    if p != 2 * q + 1 or q < 2:
        raise DecodeError("modulus is not a safe-prime shape")
    if not (1 < xi < p) or pow_mod(xi, q, p) != 1:
        raise DecodeError("base not in the order-q subgroup")
    return PublicKeys(scheme=scheme, dl=DlGroup(p_safe=p, q_g=q, xi=xi))


def write_secret_keys(path: str, sk: SecretKeys) -> None:
    out = _header(MAGIC_SECRET, sk.scheme)
    if sk.scheme == SchemeId.PI2_RSA_PREDICATE:
        out += encode_bigint(sk.rsa_d)
    with open(path, "wb") as fh:
        fh.write(out)


def load_secret_keys(path: str) -> SecretKeys:
    with open(path, "rb") as fh:
        buf = fh.read()
    scheme, off = _read_header(buf, MAGIC_SECRET)
    if scheme == SchemeId.PI2_RSA_PREDICATE:
        d, off = decode_bigint(buf, off)
        expect_consumed(buf, off)
        if d < 1:
            raise DecodeError("secret exponent out of range")
        return SecretKeys(scheme=scheme, rsa_d=d)
    expect_consumed(buf, off)
    return SecretKeys(scheme=scheme)


def write_verification_key(path: str, scheme: SchemeId, vk: int) -> None:
    if vk is None:
        raise ValueError("scheme has no verification key")
    out = _header(MAGIC_VERIFY_KEY, scheme)
    out += encode_bigint(vk)
    with open(path, "wb") as fh:
        fh.write(out)


def load_verification_key(path: str) -> tuple[SchemeId, int]:
    with open(path, "rb") as fh:
        buf = fh.read()
    scheme, off = _read_header(buf, MAGIC_VERIFY_KEY)
    vk, off = decode_bigint(buf, off)
    expect_consumed(buf, off)
    if vk < 1:
        raise DecodeError("verification key out of range")
    return scheme, vk


def write_answers(path: str, pk: PublicKeys, answers) -> None:
    ctx = WireContext(pk)
    out = _header(MAGIC_ANSWERS, pk.scheme)
    write_u8(out, len(answers))
    for ans in answers:
        body = encode_answer_pair(ans, ctx)
        write_u32(out, len(body))
        out += body
    with open(path, "wb") as fh:
        fh.write(out)


def load_answers(path: str, pk: PublicKeys) -> list[AnswerPair]:
    with open(path, "rb") as fh:
        buf = fh.read()
    scheme, off = _read_header(buf, MAGIC_ANSWERS)
    if scheme != pk.scheme:
        raise DecodeError("answers file scheme does not match the public keys")
    ctx = WireContext(pk)
    k, off = read_u8(buf, off)
    if k < 1:
        raise DecodeError("no answers in file")
    answers = []
    for _ in range(k):
        size, off = read_u32(buf, off)
        body, off = read_bytes(buf, off, size)
        answers.append(decode_answer_pair(ctx, body))
    expect_consumed(buf, off)
    return answers
