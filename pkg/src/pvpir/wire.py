"""Frame and message codecs for the query protocol.

All integers are big-endian. Layouts:

Frame:       [length u32][version u8][scheme u8][msg_type u8][payload]
             length = len(payload) + 3
QueryShare:  [party u8][domain u32][payload key][has_verify u8][verify key?]
FssKey:      [variant u8] then
  vector:    [count u32][elem_width u16][signed u8][count*width raw bytes]
  dpf:       [seed 16B][levels u8][levels x (seed_cw 16B + bits u8)][out_cw]
AnswerPair:  [party u8][lane_count u16][payload values][has_verify u8][verify values?]
Error:       [code u16][utf-8 message]

Answer values and DPF output corrections are fixed-width bigints so message
sizes carry no information about the values. Decoding is strict: every
field is validated, buffers must be fully consumed, and failures raise
DecodeError (FrameError with a numeric code for header-level problems).
"""

from __future__ import annotations

from dataclasses import dataclass

from .fss import DpfFssKey, FssKey, IntVector, VectorFssKey, _levels_for
from .protocol import AnswerPair, PublicKeys, QueryShare, SchemeId, VERIFIED_SCHEMES
from .serial import (
    DecodeError,
    decode_bigint,
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

WIRE_VERSION = 1
MSG_QUERY = 0x01
MSG_ANSWER = 0x02
MSG_ERROR = 0xFF

ERR_BAD_VERSION = 0x01
ERR_BAD_MSG_TYPE = 0x02
ERR_DECODE = 0x03
ERR_SCHEME = 0x04
ERR_DOMAIN = 0x05
ERR_OVERSIZE = 0x06
ERR_INTERNAL = 0x07

MAX_FRAME_BYTES = 1 << 30
MAX_DOMAIN = 1 << 28
MAX_LANES = 4096

_VARIANT_VECTOR = 1
_VARIANT_DPF = 2


class FrameError(DecodeError):
    """Frame-header problem carrying the error code a server should reply with."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True, slots=True)
class WireFrame:
    version: int
    scheme_tag: int
    msg_type: int
    payload: bytes


class WireContext:
    """Decode-side widths and bounds implied by a scheme's public keys."""

    __slots__ = ("pk", "group", "elem_width", "elem_signed", "out_cw_width")

    def __init__(self, pk: PublicKeys):
        self.pk = pk
        self.group = pk.payload_group
        self.elem_width = self.group.element_width
        self.elem_signed = self.group.signed
        self.out_cw_width = None if pk.dl is None else pk.dl.exponent_bytes


# ---------------------------------------------------------------------------
# Frames


def encode_frame(scheme_tag: int, msg_type: int, payload: bytes) -> bytes:
    return encode_frame_from_chunks(scheme_tag, msg_type, [payload])


def encode_frame_from_chunks(scheme_tag: int, msg_type: int, chunks) -> bytes:
    """Single-copy frame assembly for multi-hundred-megabyte key shares."""
    payload_len = sum(len(c) for c in chunks)
    if payload_len + 3 > MAX_FRAME_BYTES:
        raise ValueError("frame too large")
    head = bytearray()
    write_u32(head, payload_len + 3)
    write_u8(head, WIRE_VERSION)
    write_u8(head, scheme_tag)
    write_u8(head, msg_type)
    return b"".join([bytes(head), *chunks])


def decode_frame(data: bytes) -> WireFrame:
    length, off = read_u32(data, 0)
    if length < 3:
        raise FrameError(ERR_DECODE, "frame length too small")
    if length > MAX_FRAME_BYTES:
        raise FrameError(ERR_OVERSIZE, "frame exceeds size limit")
    if len(data) != 4 + length:
        raise FrameError(ERR_DECODE, "frame length mismatch")
    version, off = read_u8(data, off)
    scheme_tag, off = read_u8(data, off)
    msg_type, off = read_u8(data, off)
    if version != WIRE_VERSION:
        raise FrameError(ERR_BAD_VERSION, "unsupported version")
    if msg_type not in (MSG_QUERY, MSG_ANSWER, MSG_ERROR):
        raise FrameError(ERR_BAD_MSG_TYPE, "unknown message type")
    try:
        SchemeId(scheme_tag)
    except ValueError:
        raise FrameError(ERR_SCHEME, "unknown scheme tag") from None
    return WireFrame(version=version, scheme_tag=scheme_tag, msg_type=msg_type,
                     payload=data[off:])


def encode_error(code: int, message: str) -> bytes:
    out = bytearray()
    write_u16(out, code)
    out += message.encode("utf-8")
    return bytes(out)


def decode_error(payload: bytes) -> tuple[int, str]:
    code, off = read_u16(payload, 0)
    try:
        text = payload[off:].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError("error message not utf-8") from exc
    return code, text


# ---------------------------------------------------------------------------
# FSS keys


def fss_key_chunks(key: FssKey, ctx: WireContext) -> list:
    """Encoded key as buffer chunks; the caller joins them exactly once."""
    if key.variant == "vector":
        vec = key.values
        if vec.width != ctx.elem_width or vec.signed != ctx.elem_signed:
            raise ValueError("key storage width does not match the scheme")
        head = bytearray()
        write_u8(head, _VARIANT_VECTOR)
        write_u32(head, len(vec))
        write_u16(head, vec.width)  # wide-group elements exceed one byte
        write_u8(head, 1 if vec.signed else 0)
        return [bytes(head), memoryview(vec.buf)]
    if ctx.out_cw_width is None:
        raise ValueError("tree keys need a modular output group")
    out = bytearray()
    write_u8(out, _VARIANT_DPF)
    out += key.seed
    write_u8(out, key.levels)
    for scw, tlcw, trcw in key.correction_words:
        out += scw
        write_u8(out, tlcw | (trcw << 1))
    out += encode_bigint_padded(key.output_correction, ctx.out_cw_width)
    return [bytes(out)]


def encode_fss_key(key: FssKey, ctx: WireContext) -> bytes:
    return b"".join(fss_key_chunks(key, ctx))


def decode_fss_key(ctx: WireContext, buf: bytes, off: int, party: int,
                   domain: int) -> tuple[FssKey, int]:
    variant, off = read_u8(buf, off)
    if variant == _VARIANT_VECTOR:
        count, off = read_u32(buf, off)
        width, off = read_u16(buf, off)
        signed, off = read_u8(buf, off)
        if count != domain:
            raise DecodeError("vector key length does not match the domain")
        if width != ctx.elem_width or signed not in (0, 1) or bool(signed) != ctx.elem_signed:
            raise DecodeError("vector key storage width mismatch")
        raw, off = read_bytes(buf, off, count * width)
        vec = IntVector(width, bool(signed), raw, count)
        return VectorFssKey(party_index=party, values=vec, output_group=ctx.group), off
    if variant == _VARIANT_DPF:
        if ctx.out_cw_width is None:
            raise DecodeError("tree key under a non-modular scheme")
        seed, off = read_bytes(buf, off, 16)
        levels, off = read_u8(buf, off)
        if levels != _levels_for(domain):
            raise DecodeError("tree depth does not match the domain")
        cws = []
        for _ in range(levels):
            scw, off = read_bytes(buf, off, 16)
            bits, off = read_u8(buf, off)
            if bits > 3:
                raise DecodeError("bad correction bits")
            cws.append((scw, bits & 1, bits >> 1))
        out_cw, off = decode_bigint(buf, off, expected_width=ctx.out_cw_width)
        q = ctx.group.modulus
        if not (0 <= out_cw < q):
            raise DecodeError("output correction out of range")
        return (
            DpfFssKey(party_index=party, seed=seed, levels=levels,
                      correction_words=tuple(cws), output_correction=out_cw,
                      output_group=ctx.group),
            off,
        )
    raise DecodeError("unknown key variant")


# ---------------------------------------------------------------------------
# Query shares


def query_share_chunks(share: QueryShare, ctx: WireContext) -> list:
    if not (1 <= share.party_index <= 0xFF):
        raise ValueError("party index out of range")
    if not (1 <= share.domain_size <= MAX_DOMAIN):
        raise ValueError("domain size out of range")
    head = bytearray()
    write_u8(head, share.party_index)
    write_u32(head, share.domain_size)
    chunks = [bytes(head), *fss_key_chunks(share.payload_key, ctx)]
    if share.verify_key is None:
        chunks.append(b"\x00")
    else:
        chunks.append(b"\x01")
        chunks.extend(fss_key_chunks(share.verify_key, ctx))
    return chunks


def encode_query_share(share: QueryShare, ctx: WireContext) -> bytes:
    return b"".join(query_share_chunks(share, ctx))


def decode_query_share(ctx: WireContext, payload: bytes) -> QueryShare:
    party, off = read_u8(payload, 0)
    if party < 1:
        raise DecodeError("party index must be positive")
    domain, off = read_u32(payload, off)
    if not (1 <= domain <= MAX_DOMAIN):
        raise DecodeError("domain size out of range")
    payload_key, off = decode_fss_key(ctx, payload, off, party, domain)
    has_verify, off = read_u8(payload, off)
    if has_verify not in (0, 1):
        raise DecodeError("bad verify flag")
    verified = ctx.pk.scheme in VERIFIED_SCHEMES
    if bool(has_verify) != verified:
        raise DecodeError("verify key presence does not match the scheme")
    verify_key = None
    if has_verify:
        verify_key, off = decode_fss_key(ctx, payload, off, party, domain)
    expect_consumed(payload, off)
    try:
        return QueryShare(scheme=ctx.pk.scheme, party_index=party, domain_size=domain,
                          payload_key=payload_key, verify_key=verify_key)
    except ValueError as exc:
        raise DecodeError(str(exc)) from None


# ---------------------------------------------------------------------------
# Answers


def _answer_widths(pk: PublicKeys) -> tuple[int, int]:
    return pk.payload_answer_width, pk.verify_answer_width


def encode_answer_pair(ans: AnswerPair, ctx: WireContext) -> bytes:
    pk = ctx.pk
    if not (1 <= ans.lane_count <= MAX_LANES):
        raise ValueError("lane count out of range")
    pay_w, ver_w = _answer_widths(pk)
    out = bytearray()
    write_u8(out, ans.party_index)
    write_u16(out, ans.lane_count)
    for v in ans.payload:
        out += encode_bigint_padded(v, pay_w)
    if ans.verify is None:
        write_u8(out, 0)
    else:
        write_u8(out, 1)
        for v in ans.verify:
            out += encode_bigint_padded(v, ver_w)
    return bytes(out)


def decode_answer_pair(ctx: WireContext, payload: bytes) -> AnswerPair:
    pk = ctx.pk
    pay_w, ver_w = _answer_widths(pk)
    party, off = read_u8(payload, 0)
    if party < 1:
        raise DecodeError("party index must be positive")
    lanes, off = read_u16(payload, off)
    if not (1 <= lanes <= MAX_LANES):
        raise DecodeError("lane count out of range")
    rsa = pk.scheme == SchemeId.PI2_RSA_PREDICATE
    pay = []
    for _ in range(lanes):
        v, off = decode_bigint(payload, off, expected_width=pay_w)
        if not rsa and not (0 <= v < pk.dl.q_g):
            raise DecodeError("payload aggregate out of range")
        pay.append(v)
    has_verify, off = read_u8(payload, off)
    if has_verify not in (0, 1):
        raise DecodeError("bad verify flag")
    if bool(has_verify) != (pk.scheme in VERIFIED_SCHEMES):
        raise DecodeError("verify presence does not match the scheme")
    verify = None
    if has_verify:
        ver = []
        for _ in range(lanes):
            v, off = decode_bigint(payload, off, expected_width=ver_w)
            if rsa:
                if not (1 <= v < pk.rsa_n):
                    raise DecodeError("verification aggregate out of range")
            elif not (0 <= v < pk.dl.q_g):
                raise DecodeError("verification aggregate out of range")
            ver.append(v)
        verify = tuple(ver)
    expect_consumed(payload, off)
    return AnswerPair(scheme=pk.scheme, party_index=party, payload=tuple(pay), verify=verify)
