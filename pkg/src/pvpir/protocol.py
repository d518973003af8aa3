"""Multi-server PIR with publicly verifiable answers.

Four schemes share one query/answer/reconstruct shape:

- PLAIN_FSS_PIR: FSS-based PIR without verification (baseline).
- PI1_DL_PREDICATE: predicate aggregates, verified in a prime-order
  subgroup of Z_p* (p a safe prime). The client samples a fresh scalar
  alpha, publishes vk = xi^alpha, and shares g = alpha*f next to f.
  Acceptance: vk^m == xi^tau (mod p).
- PI2_RSA_PREDICATE: predicate aggregates, verified under an RSA modulus
  with safe-prime factors. The static verification key is e = d^-1 mod
  phi(n); the client shares g = d*f over the integers. Servers aggregate
  the g-share exponent over Z and publish one power of xi each.
  Acceptance: xi^m == tau^e (mod n).
- PI3_DL_POINT: point queries (single item retrieval); verification as in
  PI1 with f a point function.

Items wider than one group element are chunked into lanes; each lane runs
the same aggregation under the same alpha, and acceptance requires every
lane to pass. Weights are public, held by the servers next to the
database; answers are weighted sums of FSS evaluations, so a server never
learns which function it is aggregating.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Sequence

from .fss import (
    FssKey,
    FunctionDescription,
    IntVector,
    OutputGroup,
    PRG_LAMBDA,
    fss_eval_full,
    fss_gen,
    scalar_mul_function,
)
from .groups import DlGroup, RsaKeyPair, gen_dl_group, gen_rsa_keypair, pow_mod
from .profiles import PAPER, TOY, Profile


class SchemeId(IntEnum):
    PLAIN_FSS_PIR = 0
    PI1_DL_PREDICATE = 1
    PI2_RSA_PREDICATE = 2
    PI3_DL_POINT = 3


SCHEME_NAMES = {
    SchemeId.PLAIN_FSS_PIR: "plain",
    SchemeId.PI1_DL_PREDICATE: "pi1",
    SchemeId.PI2_RSA_PREDICATE: "pi2",
    SchemeId.PI3_DL_POINT: "pi3",
}
SCHEMES_BY_NAME = {v: k for k, v in SCHEME_NAMES.items()}

DL_SCHEMES = (SchemeId.PLAIN_FSS_PIR, SchemeId.PI1_DL_PREDICATE, SchemeId.PI3_DL_POINT)
VERIFIED_SCHEMES = (SchemeId.PI1_DL_PREDICATE, SchemeId.PI2_RSA_PREDICATE, SchemeId.PI3_DL_POINT)

# extra hiding bits for integer shares on top of the shared value width
INT_SHARE_SLACK_BITS = PRG_LAMBDA


class _Reject:
    __slots__ = ()

    def __repr__(self) -> str:
        return "REJECT"


REJECT = _Reject()


# ---------------------------------------------------------------------------
# Keys


@dataclass(frozen=True, slots=True)
class PublicKeys:
    scheme: SchemeId
    dl: DlGroup | None = None
    rsa_n: int | None = None
    rsa_e: int | None = None
    rsa_xi: int | None = None
    mask_bits: int | None = None

    def __post_init__(self):
        if self.scheme == SchemeId.PI2_RSA_PREDICATE:
            if not (self.rsa_n and self.rsa_e and self.rsa_xi and self.mask_bits):
                raise ValueError("RSA scheme needs n, e, xi, mask_bits")
        else:
            if self.dl is None:
                raise ValueError("DL schemes need a group")

    @property
    def payload_group(self) -> OutputGroup:
        if self.scheme == SchemeId.PI2_RSA_PREDICATE:
            return OutputGroup.bounded_int(self.mask_bits)
        return OutputGroup.mod_q(self.dl.q_g)

    @property
    def verify_group(self) -> OutputGroup:
        return self.payload_group

    @property
    def payload_answer_width(self) -> int:
        """Wire width of one payload aggregate (fixed so sizes leak nothing)."""
        if self.scheme == SchemeId.PI2_RSA_PREDICATE:
            # aggregate of N weighted integer shares: mask width plus slack
            # for weight and domain factors
            return self.mask_bits // 8 + 10
        return self.dl.exponent_bytes

    @property
    def verify_answer_width(self) -> int:
        if self.scheme == SchemeId.PI2_RSA_PREDICATE:
            return (self.rsa_n.bit_length() + 7) // 8
        return self.dl.exponent_bytes


@dataclass(frozen=True, slots=True)
class SecretKeys:
    scheme: SchemeId
    rsa_d: int | None = None


@dataclass(frozen=True, slots=True)
class SchemeKeys:
    pk: PublicKeys
    sk: SecretKeys


def keygen(scheme: SchemeId, security: int, rng: random.Random,
           profile: Profile | None = None) -> SchemeKeys:
    """Generate scheme keys; `security` is the modulus size in bits.

    Sizes up to 64 select the toy profile, larger ones the 3072-bit
    production profile.
    """
    scheme = SchemeId(scheme)
    if profile is None:
        profile = TOY if security <= 64 else PAPER
    if scheme == SchemeId.PI2_RSA_PREDICATE:
        kp = profile.rsa_keypair(rng)
        pk = PublicKeys(scheme=scheme, rsa_n=kp.n, rsa_e=kp.e, rsa_xi=kp.xi,
                        mask_bits=kp.n.bit_length() + INT_SHARE_SLACK_BITS)
        return SchemeKeys(pk=pk, sk=SecretKeys(scheme=scheme, rsa_d=kp.d))
    group = profile.dl_group(rng)
    return SchemeKeys(pk=PublicKeys(scheme=scheme, dl=group),
                      sk=SecretKeys(scheme=scheme))


# ---------------------------------------------------------------------------
# Database view and weights


class WeightVector:
    """Public per-item weights, chunked into lanes of group-sized values."""

    __slots__ = ("n", "lane_count", "lane_width_bits", "lanes", "_u64_cache")

    def __init__(self, lanes: Sequence[Sequence[int]], lane_width_bits: int):
        if not lanes:
            raise ValueError("need at least one lane")
        n = len(lanes[0])
        if any(len(lane) != n for lane in lanes):
            raise ValueError("ragged lanes")
        self.n = n
        self.lane_count = len(lanes)
        self.lane_width_bits = lane_width_bits
        self.lanes = tuple(tuple(lane) for lane in lanes)
        self._u64_cache = {}

    @classmethod
    def from_items(cls, items: Sequence[int], ell_bits: int, lane_width_bits: int) -> "WeightVector":
        """Chunk ell-bit items into ceil(ell/width) lanes, low bits first."""
        if ell_bits < 1 or lane_width_bits < 1:
            raise ValueError("bit widths must be positive")
        w = lane_width_bits
        lane_count = (ell_bits + w - 1) // w
        mask = (1 << w) - 1
        lanes = [[(x >> (c * w)) & mask for x in items] for c in range(lane_count)]
        return cls(lanes, w)

    @classmethod
    def unit(cls, n: int) -> "WeightVector":
        return cls([[1] * n], 8)

    def lane_u64(self, c: int):
        """Numpy view of one lane when values fit, else None."""
        got = self._u64_cache.get(c)
        if got is None and self.lane_width_bits <= 63:
            from .fss import _lazy_crypto

            np, _ = _lazy_crypto()
            got = np.array(self.lanes[c], dtype=np.uint64)
            self._u64_cache[c] = got
        return got

    def recombine(self, lane_values: Sequence[int]) -> int:
        """Reassemble per-lane values into one integer, low lanes first."""
        if len(lane_values) != self.lane_count:
            raise ValueError("lane count mismatch")
        total = 0
        for c, v in enumerate(lane_values):
            total += v << (c * self.lane_width_bits)
        return total


@dataclass(frozen=True, slots=True)
class DatabaseView:
    """What a server holds: the items plus the public aggregation weights."""

    items: tuple
    ell_bits: int
    omega: WeightVector

    def __post_init__(self):
        if len(self.items) != self.omega.n:
            raise ValueError("database and weights lengths disagree")

    @property
    def n(self) -> int:
        return len(self.items)


def make_database(items: Sequence[int], ell_bits: int, lane_width_bits: int,
                  weights: str = "self") -> DatabaseView:
    """In-memory database with item-derived ("self") or all-ones ("unit") weights."""
    items = tuple(int(x) for x in items)
    for x in items:
        if not (0 <= x < (1 << ell_bits)):
            raise ValueError("item out of declared bit range")
    if weights == "self":
        omega = WeightVector.from_items(items, ell_bits, lane_width_bits)
    elif weights == "unit":
        omega = WeightVector.unit(len(items))
    else:
        raise ValueError(f"unknown weights mode {weights!r}")
    return DatabaseView(items=items, ell_bits=ell_bits, omega=omega)


# ---------------------------------------------------------------------------
# Query


@dataclass(frozen=True, slots=True)
class QueryShare:
    scheme: SchemeId
    party_index: int
    domain_size: int
    payload_key: FssKey
    verify_key: FssKey | None

    def __post_init__(self):
        if self.payload_key.party_index != self.party_index:
            raise ValueError("payload key party mismatch")
        if self.verify_key is not None and self.verify_key.party_index != self.party_index:
            raise ValueError("verify key party mismatch")
        for key in (self.payload_key, self.verify_key):
            if key is None:
                continue
            if key.variant == "vector" and key.domain_size != self.domain_size:
                raise ValueError("key domain mismatch")
            if key.variant == "dpf" and key.domain_size < self.domain_size:
                raise ValueError("key domain too small")


@dataclass(frozen=True, slots=True)
class AnswerPair:
    scheme: SchemeId
    party_index: int
    payload: tuple
    verify: tuple | None

    def __post_init__(self):
        if self.verify is not None and len(self.verify) != len(self.payload):
            raise ValueError("lane count mismatch between components")

    @property
    def lane_count(self) -> int:
        return len(self.payload)


def _check_function_group(pk: PublicKeys, f: FunctionDescription) -> None:
    want = pk.payload_group
    if f.output_group != want:
        raise ValueError("function output group does not match the scheme")


def query(keys: SchemeKeys, f: FunctionDescription, k: int, rng: random.Random,
          variant: str = "auto", trace: dict | None = None):
    """Split f (and its scaled verification twin) into k per-server shares.

    Returns (shares, vk); vk is None for the unverified baseline scheme.
    The fresh verification scalar never leaves this function except through
    `trace`, which test harnesses may pass to record it.
    """
    pk, sk = keys.pk, keys.sk
    _check_function_group(pk, f)
    if k < 2:
        raise ValueError("need at least two servers")
    scheme = pk.scheme
    vk = None
    g = None
    if scheme in (SchemeId.PI1_DL_PREDICATE, SchemeId.PI3_DL_POINT):
        alpha = rng.randrange(1, pk.dl.q_g)
        vk = pow_mod(pk.dl.xi, alpha, pk.dl.p_safe)
        g = scalar_mul_function(alpha, f)
        if trace is not None:
            trace["alpha"] = alpha
    elif scheme == SchemeId.PI2_RSA_PREDICATE:
        if sk.rsa_d is None:
            raise ValueError("RSA queries need the secret exponent")
        vk = pk.rsa_e
        g = scalar_mul_function(sk.rsa_d, f)
    payload_keys = fss_gen(PRG_LAMBDA, f, k, rng, variant=variant)
    verify_keys = fss_gen(PRG_LAMBDA, g, k, rng, variant=variant) if g is not None else [None] * k
    shares = [
        QueryShare(scheme=scheme, party_index=j + 1, domain_size=f.domain_size,
                   payload_key=payload_keys[j], verify_key=verify_keys[j])
        for j in range(k)
    ]
    return shares, vk


def point_query_build(pk: PublicKeys, db: DatabaseView, iota: int):
    """Point retrieval: f = unit point function, weights = the items themselves."""
    if not (1 <= iota <= db.n):
        raise ValueError("index out of range")
    f = FunctionDescription.point(db.n, iota, 1, pk.payload_group)
    omega = WeightVector.from_items(db.items, db.ell_bits, db.omega.lane_width_bits)
    return f, omega


def predicate_query_build(pk: PublicKeys, db: DatabaseView,
                          predicate: Callable[[int], int], mode: str):
    """Aggregate query: f_i = predicate(x_i); count uses unit weights, sum item weights."""
    group = pk.payload_group
    values = [group.reduce(int(predicate(x))) for x in db.items]
    f = FunctionDescription.vector(values, group)
    if mode == "count":
        omega = WeightVector.unit(db.n)
    elif mode == "sum":
        omega = WeightVector.from_items(db.items, db.ell_bits, db.omega.lane_width_bits)
    else:
        raise ValueError(f"unknown predicate mode {mode!r}")
    return f, omega


# ---------------------------------------------------------------------------
# Answer


def _aggregate_lane(values: IntVector, omega: WeightVector, c: int, group: OutputGroup):
    """Sum_i omega[c][i] * values[i] in the output group, over the first n items."""
    n = omega.n
    if group.kind == "modq":
        q = group.modulus
        if q.bit_length() + omega.lane_width_bits <= 62:
            w = omega.lane_u64(c)
            v = values.as_numpy_u64()
            if w is not None and v is not None:
                from .fss import _lazy_crypto

                np, _ = _lazy_crypto()
                prod = (v[:n] % np.uint64(q)) * w
                return int(prod.sum(dtype=np.uint64) % np.uint64(q)) % q
        lane = omega.lanes[c]
        acc = 0
        it = iter(values)
        for i in range(n):
            acc += next(it) * lane[i]
        return acc % q
    lane = omega.lanes[c]
    acc = 0
    it = iter(values)
    for i in range(n):
        acc += next(it) * lane[i]
    return acc


def answer(pk: PublicKeys, db: DatabaseView, share: QueryShare) -> AnswerPair:
    """One server's reply: weighted aggregates of the share's evaluations.

    Pure in (pk, db, share); safe to run concurrently.
    """
    if share.scheme != pk.scheme:
        raise ValueError("scheme mismatch")
    if share.domain_size != db.n:
        raise ValueError("share domain does not match the database")
    group = pk.payload_group
    omega = db.omega
    pay_vals = fss_eval_full(share.party_index, share.payload_key)
    payload = tuple(_aggregate_lane(pay_vals, omega, c, group) for c in range(omega.lane_count))
    if share.verify_key is None:
        if pk.scheme in VERIFIED_SCHEMES:
            raise ValueError("scheme requires a verification key share")
        return AnswerPair(scheme=pk.scheme, party_index=share.party_index,
                          payload=payload, verify=None)
    ver_vals = fss_eval_full(share.party_index, share.verify_key)
    if pk.scheme == SchemeId.PI2_RSA_PREDICATE:
        bound = omega.n << (pk.mask_bits + 8 + omega.lane_width_bits)
        tags = []
        for c in range(omega.lane_count):
            exponent = _aggregate_lane(ver_vals, omega, c, group)
            if abs(exponent) > bound:
                raise ValueError("verification exponent exceeds the share bound")
            tags.append(pow_mod(pk.rsa_xi, exponent, pk.rsa_n))
        verify = tuple(tags)
        pay_bound = omega.n << (pk.mask_bits + 8 + omega.lane_width_bits)
        if any(abs(v) > pay_bound for v in payload):
            raise ValueError("payload aggregate exceeds the share bound")
    else:
        verify = tuple(_aggregate_lane(ver_vals, omega, c, group) for c in range(omega.lane_count))
    return AnswerPair(scheme=pk.scheme, party_index=share.party_index,
                      payload=payload, verify=verify)


# ---------------------------------------------------------------------------
# Reconstruct


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def reconstruct(answers: Sequence[AnswerPair], pk: PublicKeys, vk: int | None):
    """Combine k answers; verified schemes return per-lane values or REJECT.

    REJECT is a value, not an exception; nothing about the cause is exposed.
    """
    if not answers:
        raise ValueError("no answers")
    lane_count = answers[0].lane_count
    for a in answers:
        if a.scheme != pk.scheme:
            raise ValueError("scheme mismatch in answers")
        if a.lane_count != lane_count:
            raise ValueError("lane count mismatch in answers")
    scheme = pk.scheme
    if scheme == SchemeId.PLAIN_FSS_PIR:
        q = pk.dl.q_g
        return tuple(sum(a.payload[c] for a in answers) % q for c in range(lane_count))
    if any(a.verify is None for a in answers):
        raise ValueError("verified scheme needs verification aggregates")
    if vk is None:
        raise ValueError("verified scheme needs a verification key")
    if scheme == SchemeId.PI2_RSA_PREDICATE:
        n = pk.rsa_n
        m = [sum(a.payload[c] for a in answers) for c in range(lane_count)]
        for c in range(lane_count):
            tau = 1
            for a in answers:
                t = a.verify[c]
                if not (1 <= t < n) or _gcd(t, n) != 1:
                    return REJECT
                tau = (tau * t) % n
            if pow_mod(pk.rsa_xi, m[c], n) != pow_mod(tau, vk, n):
                return REJECT
        return tuple(m)
    # DL verification: vk^m == xi^tau in the safe-prime group
    dl = pk.dl
    q, p = dl.q_g, dl.p_safe
    m = [sum(a.payload[c] for a in answers) % q for c in range(lane_count)]
    tau = [sum(a.verify[c] for a in answers) % q for c in range(lane_count)]
    for c in range(lane_count):
        if pow_mod(vk, m[c], p) != pow_mod(dl.xi, tau[c], p):
            return REJECT
    return tuple(m)


def plain_aggregate(f: FunctionDescription, omega: WeightVector, group: OutputGroup) -> tuple:
    """Direct (no-sharing) evaluation of the query aggregate, lane by lane."""
    out = []
    for c in range(omega.lane_count):
        lane = omega.lanes[c]
        acc = 0
        for i in range(omega.n):
            acc = group.add(acc, group.mul(f.evaluate(i + 1), lane[i]))
        out.append(acc)
    return tuple(out)
