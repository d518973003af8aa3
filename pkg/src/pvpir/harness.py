"""Forgery and leakage experiments against in-process tampering servers.

run_exp_ver plays the forgery game: a subset of servers corrupts its
answers and wins a trial when the client accepts a value different from
the direct weighted aggregate over the database. run_selective_failure_probe
compares acceptance frequencies across two queried functions under one
fixed tamper strategy; fss_distinguish_probe looks for key-share bias
between two shared functions. Experiment trials run over the loopback
transport, so captured transcripts contain real frames, and every trial
owns an RNG stream derived from the master seed.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

from .client import run_client
from .fss import PRG_LAMBDA, fss_gen
from .groups import pow_mod
from .profiles import CALIBRATION_GROUP
from .protocol import (
    INT_SHARE_SLACK_BITS,
    SCHEME_NAMES,
    AnswerPair,
    PublicKeys,
    SchemeId,
    SchemeKeys,
    SecretKeys,
    keygen,
    make_database,
    plain_aggregate,
    point_query_build,
    predicate_query_build,
)
from .server import LoopbackServer
from .wire import (
    MSG_ANSWER,
    decode_answer_pair,
    decode_frame,
    encode_answer_pair,
    encode_frame,
)

TAMPER_KINDS = ("honest", "additive_offset", "random_replace", "swap_components")


@dataclass(frozen=True)
class TamperStrategy:
    """What corrupted servers do to their answers.

    targets are 1-based server positions, matching the party index
    carried by each answer. additive_offset shifts the first payload
    lane by payload_delta and folds verify_delta into the verification
    aggregate: added for discrete-log tags, multiplied (so it must be a
    unit) for RSA tags. Deltas left as None are drawn fresh per trial;
    explicit identity deltas (0 additive, 1 multiplicative) make the
    tamper a deliberate no-op. random_replace rewrites every lane of
    both components with uniform values; swap_components exchanges the
    payload and verification components lane by lane.
    """

    kind: str = "honest"
    targets: tuple = ()
    payload_delta: int | None = None
    verify_delta: int | None = None

    def __post_init__(self):
        if self.kind not in TAMPER_KINDS:
            raise ValueError(f"unknown tamper kind {self.kind!r}")
        tgts = tuple(sorted({int(t) for t in self.targets}))
        object.__setattr__(self, "targets", tgts)
        if self.kind == "honest":
            if tgts:
                raise ValueError("honest strategy must target no servers")
        elif not tgts:
            raise ValueError("tampering strategy needs at least one target")
        elif tgts[0] < 1:
            raise ValueError("targets are 1-based server positions")


def calibration_keys(scheme: SchemeId) -> SchemeKeys:
    """Tiny-order keys (q = 11, n = 55) so acceptance rates are measurable."""
    scheme = SchemeId(scheme)
    if scheme == SchemeId.PI2_RSA_PREDICATE:
        n, d, e = 55, 3, 27  # d*e = 81 = 2*phi(55) + 1
        pk = PublicKeys(scheme=scheme, rsa_n=n, rsa_e=e, rsa_xi=2,
                        mask_bits=n.bit_length() + INT_SHARE_SLACK_BITS)
        return SchemeKeys(pk=pk, sk=SecretKeys(scheme=scheme, rsa_d=d))
    return SchemeKeys(pk=PublicKeys(scheme=scheme, dl=CALIBRATION_GROUP),
                      sk=SecretKeys(scheme=scheme))


def _uniform_unit(n: int, rng: random.Random) -> int:
    while True:
        r = rng.randrange(1, n)
        if math.gcd(r, n) == 1:
            return r


def tamper_answer(pk: PublicKeys, ans: AnswerPair, strategy: TamperStrategy,
                  rng: random.Random) -> tuple[AnswerPair, dict]:
    """Apply one strategy to one answer; returns (answer, applied deltas)."""
    kind = strategy.kind
    if kind == "honest":
        return ans, {}
    payload = list(ans.payload)
    verify = None if ans.verify is None else list(ans.verify)
    rsa = pk.scheme == SchemeId.PI2_RSA_PREDICATE
    info: dict = {}
    if kind == "additive_offset":
        if rsa:
            dm = strategy.payload_delta
            if dm is None:
                dm = rng.randrange(1, pk.rsa_n)
            rho = strategy.verify_delta
            if rho is None:
                rho = _uniform_unit(pk.rsa_n, rng)
            elif math.gcd(rho, pk.rsa_n) != 1:
                raise ValueError("RSA verification delta must be a unit")
            payload[0] += dm
            verify[0] = (verify[0] * rho) % pk.rsa_n
            info = {"payload_delta": dm, "verify_delta": rho}
        else:
            q = pk.dl.q_g
            dm = strategy.payload_delta
            if dm is None:
                dm = rng.randrange(1, q)
            payload[0] = (payload[0] + dm) % q
            dt = None
            if verify is not None:
                dt = strategy.verify_delta
                if dt is None:
                    dt = rng.randrange(q)
                verify[0] = (verify[0] + dt) % q
            info = {"payload_delta": dm, "verify_delta": dt}
    elif kind == "random_replace":
        if rsa:
            bound = 1 << pk.mask_bits
            payload = [rng.randrange(-bound, bound) for _ in payload]
            verify = [_uniform_unit(pk.rsa_n, rng) for _ in verify]
        else:
            q = pk.dl.q_g
            payload = [rng.randrange(q) for _ in payload]
            if verify is not None:
                verify = [rng.randrange(q) for _ in verify]
    elif kind == "swap_components":
        if verify is None:
            raise ValueError("swap needs a verification component")
        if rsa:
            # fold the oversized masked integers into the tag range so the
            # swapped answer still has a wire encoding
            n = pk.rsa_n
            payload, verify = list(verify), [max(1, p % n) for p in payload]
        else:
            payload, verify = verify, payload
    tampered = AnswerPair(scheme=ans.scheme, party_index=ans.party_index,
                          payload=tuple(payload),
                          verify=None if verify is None else tuple(verify))
    return tampered, info


class TamperingServer:
    """Loopback transport wrapper that corrupts answers on the way out."""

    def __init__(self, inner: LoopbackServer, strategy: TamperStrategy,
                 rng: random.Random):
        self.inner = inner
        self.strategy = strategy
        self.rng = rng
        self.last_honest: AnswerPair | None = None
        self.last_info: dict = {}

    def exchange(self, raw: bytes) -> tuple[bytes, float | None]:
        resp, seconds = self.inner.exchange(raw)
        frame = decode_frame(resp)
        if frame.msg_type != MSG_ANSWER:
            return resp, seconds
        ctx = self.inner.state.ctx
        honest = decode_answer_pair(ctx, frame.payload)
        self.last_honest = honest
        tampered, self.last_info = tamper_answer(ctx.pk, honest, self.strategy, self.rng)
        out = encode_frame(frame.scheme_tag, MSG_ANSWER, encode_answer_pair(tampered, ctx))
        return out, seconds


@dataclass(frozen=True)
class ExperimentRecord:
    """One forgery-game trial; outcome is 1 iff accepted with a wrong value."""

    scheme: str
    trial: int
    kind: str
    targets: tuple
    accepted: bool
    outcome: int
    value: tuple | None
    expected: tuple
    deltas: tuple
    transcript: tuple = ()

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise ValueError("outcome must be a bit")
        if self.outcome == 1 and not (self.accepted and self.value != self.expected):
            raise ValueError("outcome 1 requires an accepted wrong value")

    def as_dict(self) -> dict:
        d = {
            "scheme": self.scheme,
            "trial": self.trial,
            "kind": self.kind,
            "targets": list(self.targets),
            "accepted": self.accepted,
            "outcome": self.outcome,
            "value": None if self.value is None else list(self.value),
            "expected": list(self.expected),
            "deltas": [dict(x) for x in self.deltas],
        }
        if self.transcript:
            d["transcript"] = [fr.hex() for fr in self.transcript]
        return d


def _build_trial_query(pk: PublicKeys, scheme: SchemeId, n: int, ell_bits: int,
                       lane_width_bits: int, mode: str, rng: random.Random):
    """Adversary-chosen database and function for one trial."""
    items = [rng.getrandbits(ell_bits) for _ in range(n)]
    if scheme in (SchemeId.PI3_DL_POINT, SchemeId.PLAIN_FSS_PIR):
        db = make_database(items, ell_bits, lane_width_bits, weights="self")
        f, _ = point_query_build(pk, db, rng.randrange(1, n + 1))
        return db, f
    weights = "self" if mode == "sum" else "unit"
    db = make_database(items, ell_bits, lane_width_bits, weights=weights)
    threshold = rng.randrange(1 << ell_bits)
    f, _ = predicate_query_build(pk, db, lambda v: 1 if v > threshold else 0, mode)
    return db, f


def _check_dl_acceptance(pk: PublicKeys, alpha: int, answers, honest_answers,
                         accepted: bool, tampered: bool) -> None:
    """Acceptance must coincide with alpha*m == tau lane by lane (mod q)."""
    q = pk.dl.q_g
    lanes = answers[0].lane_count
    holds = True
    for c in range(lanes):
        m = sum(a.payload[c] for a in answers) % q
        tau = sum(a.verify[c] for a in answers) % q
        if (alpha * m - tau) % q:
            holds = False
            break
    if holds != accepted:
        raise RuntimeError("verification disagrees with the exponent identity")
    if accepted and tampered:
        for c in range(lanes):
            dm = (sum(a.payload[c] for a in answers)
                  - sum(a.payload[c] for a in honest_answers)) % q
            dt = (sum(a.verify[c] for a in answers)
                  - sum(a.verify[c] for a in honest_answers)) % q
            if (alpha * dm - dt) % q:
                raise RuntimeError("accepted tamper violates the offset identity")


def _check_rsa_extraction(pk: PublicKeys, answers, honest_answers) -> None:
    """Accepted tampered transcripts must satisfy xi^dm == (tau'/tau)^e."""
    import gmpy2

    n, e, xi = pk.rsa_n, pk.rsa_e, pk.rsa_xi
    for c in range(answers[0].lane_count):
        dm = (sum(a.payload[c] for a in answers)
              - sum(a.payload[c] for a in honest_answers))
        tau_forged = 1
        tau_honest = 1
        for a, h in zip(answers, honest_answers):
            tau_forged = (tau_forged * a.verify[c]) % n
            tau_honest = (tau_honest * h.verify[c]) % n
        dtau = (tau_forged * int(gmpy2.invert(tau_honest, n))) % n
        if pow_mod(xi, dm, n) != pow_mod(dtau, e, n):
            raise RuntimeError("accepted tamper violates the tag-quotient identity")


def run_exp_ver(scheme: SchemeId, n: int, k: int, strategy: TamperStrategy,
                trials: int, rng: random.Random, *, keys: SchemeKeys | None = None,
                security: int = 16, ell_bits: int | None = None,
                lane_width_bits: int = 8, mode: str = "count",
                variant: str = "auto", records_path: str | None = None,
                capture_transcripts: bool = False) -> dict:
    """Forgery game: corrupted servers try to make the client accept a lie.

    Per trial: fresh random database and query, honest answers except at
    strategy.targets, reconstruct, compare against the direct weighted
    aggregate. Returns counts and the empirical rate of accepted-wrong
    outcomes; optionally writes one JSON record per trial.
    """
    scheme = SchemeId(scheme)
    if k < 2:
        raise ValueError("need at least two servers")
    if strategy.targets and (len(strategy.targets) > k - 1 or strategy.targets[-1] > k):
        raise ValueError("targets must leave at least one honest server")
    if keys is None:
        keys = keygen(scheme, security, rng)
    pk = keys.pk
    if ell_bits is None:
        ell_bits = lane_width_bits
    tampered_run = strategy.kind != "honest"

    accepted_count = 0
    forgeries = 0
    out = open(records_path, "w", encoding="utf-8") if records_path else None
    try:
        for trial in range(trials):
            trng = random.Random(rng.getrandbits(64))
            db, f = _build_trial_query(pk, scheme, n, ell_bits, lane_width_bits, mode, trng)
            servers = []
            for j in range(1, k + 1):
                base = LoopbackServer(pk, db)
                if tampered_run and j in strategy.targets:
                    servers.append(TamperingServer(base, strategy, trng))
                else:
                    servers.append(base)
            trace: dict = {}
            res = run_client(servers, keys, f, trng, variant=variant,
                             capture=capture_transcripts, trace=trace)
            expected = plain_aggregate(f, db.omega, pk.payload_group)
            accepted = res.accepted
            wrong = accepted and res.lanes != expected
            if strategy.kind == "honest" and (not accepted or wrong):
                raise RuntimeError("honest servers must be accepted with the true value")

            honest_answers = None
            if tampered_run:
                honest_answers = [
                    s.last_honest if isinstance(s, TamperingServer) else a
                    for s, a in zip(servers, res.answers)
                ]
            if scheme in (SchemeId.PI1_DL_PREDICATE, SchemeId.PI3_DL_POINT):
                _check_dl_acceptance(pk, trace["alpha"], res.answers,
                                     honest_answers or res.answers,
                                     accepted, tampered_run)
            elif scheme == SchemeId.PI2_RSA_PREDICATE and accepted and tampered_run:
                _check_rsa_extraction(pk, res.answers, honest_answers)

            accepted_count += accepted
            forgeries += wrong
            if out is not None:
                deltas = tuple(s.last_info for s in servers
                               if isinstance(s, TamperingServer))
                rec = ExperimentRecord(
                    scheme=SCHEME_NAMES[scheme], trial=trial, kind=strategy.kind,
                    targets=strategy.targets, accepted=accepted, outcome=int(wrong),
                    value=res.lanes, expected=expected, deltas=deltas,
                    transcript=tuple(res.sent_frames + res.received_frames)
                    if capture_transcripts else (),
                )
                out.write(json.dumps(rec.as_dict(), separators=(",", ":")) + "\n")
    finally:
        if out is not None:
            out.close()
    return {
        "scheme": SCHEME_NAMES[scheme],
        "kind": strategy.kind,
        "targets": list(strategy.targets),
        "trials": trials,
        "accepted": accepted_count,
        "forgeries": forgeries,
        "rate": forgeries / trials if trials else 0.0,
        "records_path": records_path,
    }


def two_proportion_z(x1: int, n1: int, x2: int, n2: int) -> float:
    """Pooled two-proportion z statistic; 0 when the pool is degenerate."""
    if min(n1, n2) < 1:
        raise ValueError("need samples on both sides")
    pool = (x1 + x2) / (n1 + n2)
    if pool in (0.0, 1.0):
        return 0.0
    se = math.sqrt(pool * (1.0 - pool) * (1.0 / n1 + 1.0 / n2))
    return (x1 / n1 - x2 / n2) / se


def run_selective_failure_probe(keys: SchemeKeys, db, f_pair, strategy: TamperStrategy,
                                trials: int, rng: random.Random, *, k: int = 2,
                                variant: str = "auto") -> dict:
    """Accept-bit frequency for each of two functions under one strategy.

    The strategy's acceptance behaviour must not depend on which function
    was queried; the z statistic quantifies the observed gap.
    """
    f0, f1 = f_pair
    if f0.domain_size != f1.domain_size or f0.output_group != f1.output_group:
        raise ValueError("probe functions must share domain and output group")
    pk = keys.pk
    counts = [0, 0]
    for side, f in enumerate((f0, f1)):
        for _ in range(trials):
            trng = random.Random(rng.getrandbits(64))
            servers = []
            for j in range(1, k + 1):
                base = LoopbackServer(pk, db)
                if strategy.kind != "honest" and j in strategy.targets:
                    servers.append(TamperingServer(base, strategy, trng))
                else:
                    servers.append(base)
            res = run_client(servers, keys, f, trng, variant=variant)
            counts[side] += res.accepted
    z = two_proportion_z(counts[0], trials, counts[1], trials)
    return {
        "counts": tuple(counts),
        "trials": trials,
        "frequencies": (counts[0] / trials, counts[1] / trials),
        "z": z,
        "p_value": math.erfc(abs(z) / math.sqrt(2.0)),
    }


def chi2_sf(x: float, dof: int) -> float:
    """Chi-square survival function via the exact half-integer expansions."""
    if dof < 1:
        raise ValueError("dof must be positive")
    if x <= 0:
        return 1.0
    h = x / 2.0
    if dof % 2 == 0:
        term, total = 1.0, 1.0
        for i in range(1, dof // 2):
            term *= h / i
            total += term
        return min(1.0, math.exp(-h) * total)
    total = math.erfc(math.sqrt(h))
    m = (dof - 1) // 2
    if m > 0:
        term = math.sqrt(h) / math.gamma(1.5)
        s = term
        for i in range(2, m + 1):
            term *= h / (i - 0.5)
            s += term
        total += math.exp(-h) * s
    return min(1.0, total)


def chi2_contingency(table) -> tuple[float, int]:
    """Pearson statistic and dof for an r x c count table (zero columns dropped)."""
    rows = len(table)
    cols = len(table[0])
    row_tot = [sum(r) for r in table]
    col_tot = [sum(table[i][j] for i in range(rows)) for j in range(cols)]
    total = sum(row_tot)
    if total == 0 or min(row_tot) == 0:
        raise ValueError("every row needs observations")
    live = [j for j in range(cols) if col_tot[j] > 0]
    stat = 0.0
    for i in range(rows):
        for j in live:
            exp = row_tot[i] * col_tot[j] / total
            diff = table[i][j] - exp
            stat += diff * diff / exp
    return stat, (rows - 1) * (len(live) - 1)


def fss_distinguish_probe(f_pair, trials: int, rng: random.Random, *,
                          party: int = 0, component: int = 1, k: int = 2,
                          buckets: int | None = None) -> dict:
    """Marginal distribution of one share component across two functions.

    Generates vector keys for each function, buckets one party's share
    value at a fixed position, and tests the two empirical distributions
    for contingency. Under a secure sharing the p-value is uniform-ish;
    tiny values flag a distinguisher.
    """
    f0, f1 = f_pair
    if f0.domain_size != f1.domain_size or f0.output_group != f1.output_group:
        raise ValueError("probe functions must share domain and output group")
    if not (1 <= component <= f0.domain_size):
        raise ValueError("component out of domain")
    group = f0.output_group
    if buckets is None:
        buckets = min(16, group.modulus) if group.kind == "modq" else 16
    table = [[0] * buckets for _ in range(2)]
    for side, f in enumerate((f0, f1)):
        for _ in range(trials):
            keys = fss_gen(PRG_LAMBDA, f, k, rng, variant="vector")
            val = int(keys[party].values.get(component - 1))
            table[side][val % buckets] += 1
    stat, dof = chi2_contingency(table)
    return {
        "stat": stat,
        "dof": dof,
        "p_value": chi2_sf(stat, dof) if dof > 0 else 1.0,
        "table": table,
        "buckets": buckets,
        "party": party,
        "component": component,
        "trials": trials,
    }
