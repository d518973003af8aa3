"""Additive k-party function secret sharing.

Two concrete sharings of a function over [N]:

- Vector sharing: works for any function and any k >= 2. The first k-1 keys
  are uniform length-N vectors over the output group; the last is the
  pointwise difference. Perfectly private against any k-1 keys, O(N) key
  size, and doubles as the brute-force reference for the DPF.

- Tree DPF: two-party sharing of point functions with key size proportional
  to lambda*log2(N). A GGM-style seed tree is expanded with a fixed-key
  AES-based PRG; one correction word per level plus a single output
  correction in the output group.

Output groups are either Z_q (DL schemes) or bounded signed integers over Z
(RSA scheme; masks uniform in [0, 2^mask_bits), so the complement share can
go negative and servers aggregate without any modular reduction).

Heavy imports (numpy, cryptography) are deferred until a PRG or batched
operation actually runs, keeping process startup light for tools that only
verify transcripts.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Iterator, Sequence, Union

PRG_LAMBDA = 128
_SEED_BYTES = PRG_LAMBDA // 8

# Fixed public AES key for the DPF PRG; security rests on seed secrecy, not
# on this constant.
_PRG_AES_KEY = b"PVPIR-DPF-PRG-v1"

_np = None
_new_encryptor = None


def _lazy_crypto():
    global _np, _new_encryptor
    if _new_encryptor is None:
        import numpy
        from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

        _np = numpy
        cipher = Cipher(algorithms.AES(_PRG_AES_KEY), modes.ECB())

        def new_encryptor():
            return cipher.encryptor()

        _new_encryptor = new_encryptor
    return _np, _new_encryptor


# ---------------------------------------------------------------------------
# Output groups and packed element storage


@dataclass(frozen=True, slots=True)
class OutputGroup:
    """Where share values live: Z_q ("modq") or bounded integers ("int")."""

    kind: str
    modulus: int | None = None
    mask_bits: int | None = None

    def __post_init__(self):
        if self.kind == "modq":
            if not self.modulus or self.modulus < 2 or self.mask_bits is not None:
                raise ValueError("modq group needs a modulus >= 2 and no mask_bits")
        elif self.kind == "int":
            if not self.mask_bits or self.mask_bits < 8 or self.modulus is not None:
                raise ValueError("int group needs mask_bits >= 8 and no modulus")
        else:
            raise ValueError(f"unknown output group kind {self.kind!r}")

    @classmethod
    def mod_q(cls, q: int) -> "OutputGroup":
        return cls(kind="modq", modulus=q)

    @classmethod
    def bounded_int(cls, mask_bits: int) -> "OutputGroup":
        return cls(kind="int", mask_bits=mask_bits)

    @property
    def signed(self) -> bool:
        return self.kind == "int"

    @property
    def element_width(self) -> int:
        """Fixed byte width for packed storage of one element."""
        if self.kind == "modq":
            return (self.modulus.bit_length() + 7) // 8
        # magnitude can exceed the mask by the shared value itself; one spare
        # byte covers that plus the sign bit of two's complement
        return self.mask_bits // 8 + 2

    def reduce(self, x: int) -> int:
        return x % self.modulus if self.kind == "modq" else x

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.modulus if self.kind == "modq" else a + b

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.modulus if self.kind == "modq" else a - b

    def neg(self, a: int) -> int:
        return (-a) % self.modulus if self.kind == "modq" else -a

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.modulus if self.kind == "modq" else a * b

    def sample_mask(self, rng: random.Random) -> int:
        if self.kind == "modq":
            return rng.randrange(self.modulus)
        return rng.randrange(1 << self.mask_bits)

    def in_range(self, x: int) -> bool:
        if self.kind == "modq":
            return 0 <= x < self.modulus
        # shares stay within one mask width plus the shared value's headroom
        bound = 1 << (self.mask_bits + 8)
        return -bound < x < bound


class IntVector:
    """Length-N sequence of fixed-width integers packed into one buffer.

    Big-endian per element; two's complement when signed. Avoids per-object
    overhead for multi-million-element share vectors.
    """

    __slots__ = ("width", "signed", "buf", "n")

    def __init__(self, width: int, signed: bool, buf: bytearray | bytes, n: int):
        if len(buf) != n * width:
            raise ValueError("buffer size mismatch")
        self.width = width
        self.signed = signed
        self.buf = buf
        self.n = n

    @classmethod
    def zeros(cls, n: int, width: int, signed: bool) -> "IntVector":
        return cls(width, signed, bytearray(n * width), n)

    @classmethod
    def from_ints(cls, values: Sequence[int], width: int, signed: bool) -> "IntVector":
        out = cls.zeros(len(values), width, signed)
        for i, v in enumerate(values):
            out.set(i, v)
        return out

    def get(self, i: int) -> int:
        w = self.width
        return int.from_bytes(self.buf[i * w : (i + 1) * w], "big", signed=self.signed)

    def set(self, i: int, v: int) -> None:
        w = self.width
        self.buf[i * w : (i + 1) * w] = v.to_bytes(w, "big", signed=self.signed)

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[int]:
        w, s, buf = self.width, self.signed, self.buf
        for i in range(self.n):
            yield int.from_bytes(buf[i * w : (i + 1) * w], "big", signed=s)

    def as_numpy_u64(self):
        """Zero-copy unsigned view for widths 1/2/4/8; None otherwise."""
        if self.signed or self.width not in (1, 2, 4, 8):
            return None
        np, _ = _lazy_crypto()
        dtype = {1: "u1", 2: ">u2", 4: ">u4", 8: ">u8"}[self.width]
        return np.frombuffer(self.buf, dtype=dtype, count=self.n)


# ---------------------------------------------------------------------------
# Function descriptions


@dataclass(frozen=True, slots=True)
class FunctionDescription:
    """A function over [1..N]: a point function or an explicit vector.

    `scale` is a group scalar applied at evaluation time, so scaled copies
    of huge vector functions do not rematerialize N scaled values.
    """

    domain_size: int
    kind: str  # "point" | "vector"
    output_group: OutputGroup
    index: int | None = None
    payload: int | None = None
    values: Sequence[int] | None = None
    scale: int = 1

    def __post_init__(self):
        if self.domain_size < 1:
            raise ValueError("domain_size must be >= 1")
        if self.kind == "point":
            if self.index is None or not (1 <= self.index <= self.domain_size):
                raise ValueError("point index out of domain")
            if self.payload is None:
                raise ValueError("point function needs a payload")
        elif self.kind == "vector":
            if self.values is None or len(self.values) != self.domain_size:
                raise ValueError("vector length must equal domain_size")
        else:
            raise ValueError(f"unknown function kind {self.kind!r}")

    @classmethod
    def point(cls, domain_size: int, index: int, payload: int, group: OutputGroup) -> "FunctionDescription":
        return cls(domain_size=domain_size, kind="point", output_group=group,
                   index=index, payload=group.reduce(payload))

    @classmethod
    def vector(cls, values: Sequence[int], group: OutputGroup) -> "FunctionDescription":
        return cls(domain_size=len(values), kind="vector", output_group=group, values=values)

    def evaluate(self, x: int) -> int:
        if not (1 <= x <= self.domain_size):
            raise ValueError("evaluation point out of domain")
        g = self.output_group
        if self.kind == "point":
            base = self.payload if x == self.index else 0
        else:
            base = self.values[x - 1]
        return g.reduce(base * self.scale)

    def materialized_values(self) -> list[int]:
        return [self.evaluate(x) for x in range(1, self.domain_size + 1)]


def scalar_mul_function(alpha: int, f: FunctionDescription) -> FunctionDescription:
    """g with g(x) = alpha * f(x) in f's output group."""
    g = f.output_group
    if f.kind == "point":
        return replace(f, payload=g.reduce(f.payload * alpha))
    return replace(f, scale=g.reduce(f.scale * alpha) if g.kind == "modq" else f.scale * alpha)


# ---------------------------------------------------------------------------
# Share values


@dataclass(frozen=True, slots=True)
class ShareValue:
    value: int
    group: OutputGroup


def dec_plus(shares: Sequence[ShareValue]) -> ShareValue:
    """Group sum of share values; all inputs must share one output group."""
    if not shares:
        raise ValueError("dec_plus needs at least one share")
    group = shares[0].group
    total = 0
    for s in shares:
        if s.group != group:
            raise ValueError("mixed output groups")
        total = group.add(total, s.value)
    return ShareValue(value=total, group=group)


# ---------------------------------------------------------------------------
# PRG


def _xor16(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(16, "big")


_EXPAND_CONSTS = tuple(j.to_bytes(16, "big") for j in range(3))


def _aes_dm(seed: bytes, consts: tuple[bytes, ...]) -> bytes:
    """Davies-Meyer compression per block: E(seed^c) ^ (seed^c)."""
    _, new_encryptor = _lazy_crypto()
    x = b"".join(_xor16(seed, c) for c in consts)
    y = new_encryptor().update(x)
    return (int.from_bytes(y, "big") ^ int.from_bytes(x, "big")).to_bytes(len(x), "big")


def prg_expand(seed: bytes) -> tuple[bytes, int, bytes, int]:
    """Length-doubling expansion: (left seed, left bit, right seed, right bit)."""
    if len(seed) != _SEED_BYTES:
        raise ValueError(f"seed must be {_SEED_BYTES} bytes")
    out = _aes_dm(seed, _EXPAND_CONSTS)
    return out[0:16], out[32] & 1, out[16:32], out[33] & 1


def _convert_width(q: int) -> int:
    # 64 bits of slack over |q| keeps the mod-q reduction bias negligible
    return (q.bit_length() + 7) // 8 + 8


def _dpf_convert(seed: bytes, q: int) -> int:
    w = _convert_width(q)
    n_blocks = (w + 15) // 16
    consts = tuple((16 + m).to_bytes(16, "big") for m in range(n_blocks))
    return int.from_bytes(_aes_dm(seed, consts)[:w], "big") % q


# ---------------------------------------------------------------------------
# Keys


@dataclass(frozen=True, slots=True)
class VectorFssKey:
    party_index: int
    values: IntVector
    output_group: OutputGroup | None

    @property
    def variant(self) -> str:
        return "vector"

    @property
    def domain_size(self) -> int:
        return len(self.values)


@dataclass(frozen=True, slots=True)
class DpfFssKey:
    party_index: int
    seed: bytes
    levels: int
    # one (seed correction, left bit, right bit) per level
    correction_words: tuple[tuple[bytes, int, int], ...]
    output_correction: int
    output_group: OutputGroup | None

    @property
    def variant(self) -> str:
        return "dpf"

    @property
    def domain_size(self) -> int:
        return 1 << self.levels


FssKey = Union[VectorFssKey, DpfFssKey]


def attach_group(key: FssKey, group: OutputGroup) -> FssKey:
    """Bind a decoded key to the output group implied by the scheme keys."""
    return replace(key, output_group=group)


# ---------------------------------------------------------------------------
# Gen


def _levels_for(n: int) -> int:
    return max(1, (n - 1).bit_length())


def _vector_gen(f: FunctionDescription, k: int, rng: random.Random) -> list[VectorFssKey]:
    group = f.output_group
    n = f.domain_size
    width, signed = group.element_width, group.signed
    masks = [IntVector.zeros(n, width, signed) for _ in range(k - 1)]
    last = IntVector.zeros(n, width, signed)
    for i in range(n):
        acc = f.evaluate(i + 1)
        for m in masks:
            r = group.sample_mask(rng)
            m.set(i, r)
            acc = group.sub(acc, r)
        last.set(i, acc)
    vecs = masks + [last]
    return [VectorFssKey(party_index=j + 1, values=vecs[j], output_group=group) for j in range(k)]


def _dpf_gen(f: FunctionDescription, rng: random.Random) -> list[DpfFssKey]:
    group = f.output_group
    q = group.modulus
    levels = _levels_for(f.domain_size)
    idx = f.index - 1
    s0, s1 = rng.randbytes(_SEED_BYTES), rng.randbytes(_SEED_BYTES)
    root0, root1 = s0, s1
    t0, t1 = 0, 1
    cws = []
    for lvl in range(levels):
        bit = (idx >> (levels - 1 - lvl)) & 1
        l0, tl0, r0, tr0 = prg_expand(s0)
        l1, tl1, r1, tr1 = prg_expand(s1)
        # correct the losing branch so both parties land on equal seeds there
        lose0, lose1 = (r0, r1) if bit == 0 else (l0, l1)
        scw = _xor16(lose0, lose1)
        tlcw = tl0 ^ tl1 ^ bit ^ 1
        trcw = tr0 ^ tr1 ^ bit
        cws.append((scw, tlcw, trcw))
        if bit == 0:
            ns0, nt0, ns1, nt1, keep_cw = l0, tl0, l1, tl1, tlcw
        else:
            ns0, nt0, ns1, nt1, keep_cw = r0, tr0, r1, tr1, trcw
        if t0:
            ns0, nt0 = _xor16(ns0, scw), nt0 ^ keep_cw
        if t1:
            ns1, nt1 = _xor16(ns1, scw), nt1 ^ keep_cw
        s0, t0, s1, t1 = ns0, nt0, ns1, nt1
    out_cw = (f.evaluate(f.index) - _dpf_convert(s0, q) + _dpf_convert(s1, q)) % q
    if t1:
        out_cw = (-out_cw) % q
    common = dict(levels=levels, correction_words=tuple(cws),
                  output_correction=out_cw, output_group=group)
    return [DpfFssKey(party_index=1, seed=root0, **common),
            DpfFssKey(party_index=2, seed=root1, **common)]


def fss_gen(security: int, f: FunctionDescription, k: int, rng: random.Random,
            variant: str = "auto") -> list[FssKey]:
    """Split f into k additive keys.

    variant "vector" works for any f and k; "dpf" needs a point function
    over Z_q and exactly two parties. "auto" picks the DPF whenever it
    applies.
    """
    if security != PRG_LAMBDA:
        raise ValueError(f"only lambda={PRG_LAMBDA} is supported")
    if k < 2:
        raise ValueError("need at least two parties")
    dpf_ok = f.kind == "point" and k == 2 and f.output_group.kind == "modq"
    if variant == "auto":
        variant = "dpf" if dpf_ok else "vector"
    if variant == "dpf":
        if not dpf_ok:
            raise ValueError("dpf variant needs a point function over Z_q and k=2")
        return list(_dpf_gen(f, rng))
    if variant != "vector":
        raise ValueError(f"unknown variant {variant!r}")
    return list(_vector_gen(f, k, rng))


# ---------------------------------------------------------------------------
# Eval


def _dpf_eval_one(key: DpfFssKey, x: int) -> int:
    q = key.output_group.modulus
    s, t = key.seed, key.party_index - 1
    pos = x - 1
    for lvl, (scw, tlcw, trcw) in enumerate(key.correction_words):
        sl, tl, sr, tr = prg_expand(s)
        if t:
            sl, tl = _xor16(sl, scw), tl ^ tlcw
            sr, tr = _xor16(sr, scw), tr ^ trcw
        if (pos >> (key.levels - 1 - lvl)) & 1:
            s, t = sr, tr
        else:
            s, t = sl, tl
    val = (_dpf_convert(s, q) + t * key.output_correction) % q
    return val if key.party_index == 1 else (-val) % q


def fss_eval(j: int, key: FssKey, x: int) -> int:
    """Evaluate party j's key at domain point x (1-based)."""
    if j != key.party_index:
        raise ValueError("party index mismatch")
    if key.output_group is None:
        raise ValueError("key has no output group attached")
    if not (1 <= x <= key.domain_size):
        raise ValueError("evaluation point out of domain")
    if key.variant == "vector":
        return key.values.get(x - 1)
    return _dpf_eval_one(key, x)


def _prg_expand_level(S, encryptor):
    """Batched expansion of an (n,16) uint8 seed array."""
    np, _ = _lazy_crypto()
    n = S.shape[0]
    X = np.empty((3 * n, 16), dtype=np.uint8)
    for j, c in enumerate(_EXPAND_CONSTS):
        X[j * n : (j + 1) * n] = S ^ np.frombuffer(c, dtype=np.uint8)
    Y = np.frombuffer(encryptor.update(X.tobytes()), dtype=np.uint8).reshape(3 * n, 16)
    Y = Y ^ X
    return Y[:n], Y[2 * n :, 0] & 1, Y[n : 2 * n], Y[2 * n :, 1] & 1


def _dpf_convert_level(S, q, encryptor):
    """Convert an (n,16) array of leaf seeds into mod-q values.

    Returns a numpy uint64 array when q fits 16 bits, else a list of ints.
    """
    np, _ = _lazy_crypto()
    n = S.shape[0]
    w = _convert_width(q)
    n_blocks = (w + 15) // 16
    X = np.empty((n_blocks * n, 16), dtype=np.uint8)
    for m in range(n_blocks):
        c = (16 + m).to_bytes(16, "big")
        X[m * n : (m + 1) * n] = S ^ np.frombuffer(c, dtype=np.uint8)
    Y = np.frombuffer(encryptor.update(X.tobytes()), dtype=np.uint8).reshape(n_blocks * n, 16)
    Y = Y ^ X
    CV = np.empty((n, n_blocks * 16), dtype=np.uint8)
    for m in range(n_blocks):
        CV[:, m * 16 : (m + 1) * 16] = Y[m * n : (m + 1) * n]
    CV = CV[:, :w]
    if q.bit_length() <= 16 and w <= 10:
        hi_width = w - 8
        hi = np.zeros(n, dtype=np.uint64)
        for col in range(hi_width):
            hi = hi * np.uint64(256) + CV[:, col].astype(np.uint64)
        lo = np.ascontiguousarray(CV[:, hi_width:]).view(">u8").reshape(n).astype(np.uint64)
        qq = np.uint64(q)
        shift = np.uint64((1 << 64) % q)
        return ((hi % qq) * shift + lo % qq) % qq
    buf = CV.tobytes()
    return [int.from_bytes(buf[i * w : (i + 1) * w], "big") % q for i in range(n)]


def _dpf_eval_full(key: DpfFssKey) -> IntVector:
    np, new_encryptor = _lazy_crypto()
    q = key.output_group.modulus
    encryptor = new_encryptor()
    S = np.frombuffer(key.seed, dtype=np.uint8).reshape(1, 16).copy()
    T = np.array([key.party_index - 1], dtype=np.uint8)
    for scw, tlcw, trcw in key.correction_words:
        SL, TL, SR, TR = _prg_expand_level(S, encryptor)
        live = T == 1
        cw = np.frombuffer(scw, dtype=np.uint8)
        SL[live] ^= cw
        SR[live] ^= cw
        TL = TL ^ (T & tlcw)
        TR = TR ^ (T & trcw)
        n = S.shape[0]
        S = np.empty((2 * n, 16), dtype=np.uint8)
        S[0::2], S[1::2] = SL, SR
        T = np.empty(2 * n, dtype=np.uint8)
        T[0::2], T[1::2] = TL, TR
    conv = _dpf_convert_level(S, q, encryptor)
    n = S.shape[0]
    group = key.output_group
    width = group.element_width
    if isinstance(conv, list):
        oc = key.output_correction
        sign = 1 if key.party_index == 1 else -1
        vals = [(sign * (conv[i] + (oc if T[i] else 0))) % q for i in range(n)]
        return IntVector.from_ints(vals, width, False)
    qq = np.uint64(q)
    vals = (conv + T.astype(np.uint64) * np.uint64(key.output_correction % q)) % qq
    if key.party_index == 2:
        vals = (qq - vals) % qq
    out = IntVector.zeros(n, width, False)
    dtype = {1: "u1", 2: ">u2", 4: ">u4", 8: ">u8"}.get(width)
    if dtype is not None:
        out.buf[:] = vals.astype(dtype).tobytes()
    else:
        for i, v in enumerate(vals.tolist()):
            out.set(i, int(v))
    return out


def fss_eval_full(j: int, key: FssKey) -> IntVector:
    """All domain evaluations at once; DPF keys cost O(N) PRG calls total."""
    if j != key.party_index:
        raise ValueError("party index mismatch")
    if key.output_group is None:
        raise ValueError("key has no output group attached")
    if key.variant == "vector":
        return key.values
    return _dpf_eval_full(key)
