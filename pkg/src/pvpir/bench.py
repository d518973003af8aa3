"""Benchmark suite: relative verified/plain overhead, bandwidth, point-query time.

All measurements come from real client rounds over the loopback transport;
byte columns are the transport counters, never estimates. Structure is
deterministic under a fixed seed (databases, queried indices, predicates);
only the timing columns vary between machines. CSV files share one header
derived from BenchRecord; the bandwidth table appends an analytic
merkle_bytes column (32-byte hashes, sqrt(N)*log2(N) proof nodes) as the
classic authenticated-PIR yardstick.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass

from .client import run_client
from .profiles import Profile, get_profile
from .protocol import (
    PublicKeys,
    SchemeId,
    SchemeKeys,
    SecretKeys,
    SCHEME_NAMES,
    keygen,
    make_database,
    point_query_build,
    predicate_query_build,
)
from .server import LoopbackServer

BENCH_HEADER = ("scheme", "N", "k", "user_time_query", "user_time_reconstruct",
                "server_time", "upload_bytes", "download_bytes", "trial")


@dataclass(frozen=True)
class BenchRecord:
    """One timed query round."""

    scheme: str
    n: int
    k: int
    user_time_query: float
    user_time_reconstruct: float
    server_time: float
    upload_bytes: int
    download_bytes: int
    trial: int

    def __post_init__(self):
        if min(self.user_time_query, self.user_time_reconstruct, self.server_time) < 0:
            raise ValueError("times must be nonnegative")

    def row(self) -> tuple:
        return (self.scheme, self.n, self.k, self.user_time_query,
                self.user_time_reconstruct, self.server_time,
                self.upload_bytes, self.download_bytes, self.trial)


def write_bench_csv(path: str, records, extra_header=(), extra_rows=None) -> None:
    """records to CSV; extra columns are zipped in when provided."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_HEADER + tuple(extra_header))
        for i, rec in enumerate(records):
            row = rec.row()
            if extra_rows is not None:
                row = row + tuple(extra_rows[i])
            w.writerow(row)


def _plain_twin(pk: PublicKeys) -> SchemeKeys:
    """Unverified baseline over the same group, for like-for-like timing."""
    plain = SchemeId.PLAIN_FSS_PIR
    return SchemeKeys(pk=PublicKeys(scheme=plain, dl=pk.dl),
                      sk=SecretKeys(scheme=plain))


def _measured_round(keys: SchemeKeys, db, f, omega, rng: random.Random,
                    trial: int, k: int, variant: str = "auto") -> BenchRecord:
    servers = [LoopbackServer(keys.pk, db) for _ in range(k)]
    res = run_client(servers, keys, f, rng, variant=variant, recombine_with=omega)
    if res.rejected:
        raise RuntimeError("benchmark round was rejected; servers are honest here")
    return BenchRecord(
        scheme=SCHEME_NAMES[keys.pk.scheme], n=db.n, k=k,
        user_time_query=res.query_build_seconds,
        user_time_reconstruct=res.reconstruct_seconds,
        server_time=res.server_seconds or 0.0,
        upload_bytes=res.upload_bytes, download_bytes=res.download_bytes,
        trial=trial,
    )


def _warm_up(all_keys, rng: random.Random, k: int) -> None:
    """One discarded round per key set, so lazy imports don't skew trial 0."""
    for ks in all_keys:
        ell = 8
        db = make_database([1] * 8, ell, ell, weights="unit")
        if ks.pk.scheme in (SchemeId.PI3_DL_POINT, SchemeId.PLAIN_FSS_PIR):
            f, omega = point_query_build(ks.pk, db, 1)
        else:
            f, omega = predicate_query_build(ks.pk, db, lambda v: 1, "count")
        _measured_round(ks, db, f, omega, rng, 0, k)


def bench_relative_overhead(scheme: SchemeId, n_range, rng: random.Random, *,
                            trials: int = 50, k: int = 2, mode: str = "count",
                            profile: Profile | None = None,
                            out_path: str | None = None,
                            ratios_path: str | None = None) -> tuple[list, list]:
    """Verified predicate queries vs the unverified baseline on one database.

    Returns (records, ratios); ratios holds per-N mean user-time and
    server-time quotients. The baseline shares the verified scheme's
    group wherever it has one, so the quotient isolates verification work.
    """
    scheme = SchemeId(scheme)
    if scheme not in (SchemeId.PI1_DL_PREDICATE, SchemeId.PI2_RSA_PREDICATE):
        raise ValueError("relative overhead is defined for the predicate schemes")
    profile = profile or get_profile()
    keys = keygen(scheme, profile.dl_bits, rng, profile)
    if scheme == SchemeId.PI1_DL_PREDICATE:
        plain_keys = _plain_twin(keys.pk)
    else:
        plain_keys = keygen(SchemeId.PLAIN_FSS_PIR, profile.dl_bits, rng, profile)
    ell = profile.lane_width_bits
    weights = "self" if mode == "sum" else "unit"
    _warm_up((keys, plain_keys), rng, k)

    records: list[BenchRecord] = []
    ratios: list[dict] = []
    for n in n_range:
        items = [rng.getrandbits(ell) for _ in range(n)]
        db = make_database(items, ell, profile.lane_width_bits, weights=weights)
        sums = {True: [0.0, 0.0], False: [0.0, 0.0]}  # verified -> [user, server]
        for trial in range(trials):
            threshold = rng.randrange(1 << ell)
            pred = lambda v, t=threshold: 1 if v > t else 0
            for verified, ks in ((True, keys), (False, plain_keys)):
                f, omega = predicate_query_build(ks.pk, db, pred, mode)
                rec = _measured_round(ks, db, f, omega, rng, trial, k)
                records.append(rec)
                sums[verified][0] += rec.user_time_query + rec.user_time_reconstruct
                sums[verified][1] += rec.server_time
        ratios.append({
            "N": n,
            "user_ratio": sums[True][0] / sums[False][0],
            "server_ratio": sums[True][1] / sums[False][1],
        })
    if out_path:
        write_bench_csv(out_path, records)
    if ratios_path:
        with open(ratios_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(("N", "user_ratio", "server_ratio"))
            for r in ratios:
                w.writerow((r["N"], r["user_ratio"], r["server_ratio"]))
    return records, ratios


def estimate_database_bytes(n: int, item_bytes: int, lane_width_bits: int) -> int:
    """Rough resident size of an in-memory database plus its weight lanes."""
    lanes = (item_bytes * 8 + lane_width_bits - 1) // lane_width_bits
    return n * (item_bytes + 8 * lanes + 64)


def merkle_proof_bytes(n: int) -> int:
    """Analytic authenticated-PIR baseline: 32-byte hashes, sqrt(N)*log2(N) nodes."""
    return int(32 * math.sqrt(n) * math.log2(n))


def bench_bandwidth(n_range, rng: random.Random, *, item_bytes: int = 256,
                    trials: int = 1, k: int = 2,
                    profile: Profile | None = None,
                    max_bytes: int = 1 << 28,
                    out_path: str | None = None) -> tuple[list, list, list]:
    """Exact wire bytes per point query across database sizes.

    Returns (records, merkle columns, skipped sizes). Sizes whose estimated
    database memory exceeds max_bytes are skipped rather than thrashing the
    machine. Raises if the measured download bytes vary with N or the upload
    bytes stray from an affine function of log2(N): both are structural
    properties of tree-based point-function keys, and a violation means a
    size regression.
    """
    profile = profile or get_profile()
    keys = keygen(SchemeId.PI3_DL_POINT, profile.dl_bits, rng, profile)
    ell = item_bytes * 8

    records: list[BenchRecord] = []
    merkle: list[tuple] = []
    skipped: list[int] = []
    per_n: list[tuple] = []  # (n, upload, download) from trial 0
    for n in n_range:
        if estimate_database_bytes(n, item_bytes, profile.lane_width_bits) > max_bytes:
            skipped.append(n)
            continue
        items = [rng.getrandbits(ell) for _ in range(n)]
        db = make_database(items, ell, profile.lane_width_bits, weights="self")
        for trial in range(trials):
            iota = rng.randrange(1, n + 1)
            f, omega = point_query_build(keys.pk, db, iota)
            rec = _measured_round(keys, db, f, omega, rng, trial, k)
            records.append(rec)
            merkle.append((merkle_proof_bytes(n),))
            if trial == 0:
                per_n.append((n, rec.upload_bytes, rec.download_bytes))

    if len(per_n) >= 2:
        downloads = {d for _, _, d in per_n}
        if len(downloads) != 1:
            raise RuntimeError(f"download bytes vary with N: {sorted(downloads)}")
        if k == 2:
            # two-server point keys are trees: upload must be affine in depth
            slopes = set()
            for (n0, u0, _), (n1, u1, _) in zip(per_n, per_n[1:]):
                dlev = max(1, (n1 - 1).bit_length()) - max(1, (n0 - 1).bit_length())
                if dlev > 0:
                    slopes.add((u1 - u0) // dlev if (u1 - u0) % dlev == 0 else (u1 - u0) / dlev)
            if len(slopes) > 1:
                raise RuntimeError(f"upload bytes are not affine in key depth: slopes {sorted(slopes)}")
    if out_path:
        write_bench_csv(out_path, records, extra_header=("merkle_bytes",), extra_rows=merkle)
    return records, merkle, skipped


def bench_point_time(n_range, rng: random.Random, *, trials: int = 3, k: int = 2,
                     profile: Profile | None = None,
                     out_path: str | None = None) -> tuple[list, list]:
    """Verified point queries vs the unverified twin across database sizes.

    Returns (records, overheads); overheads holds per-N total-time quotients
    (query + reconstruct + server) and the plain server time for slope checks.
    """
    profile = profile or get_profile()
    keys = keygen(SchemeId.PI3_DL_POINT, profile.dl_bits, rng, profile)
    plain_keys = _plain_twin(keys.pk)
    ell = profile.lane_width_bits
    _warm_up((keys, plain_keys), rng, k)

    records: list[BenchRecord] = []
    overheads: list[dict] = []
    for n in n_range:
        items = [rng.getrandbits(ell) for _ in range(n)]
        db = make_database(items, ell, profile.lane_width_bits, weights="self")
        totals = {True: 0.0, False: 0.0}
        plain_server = 0.0
        for trial in range(trials):
            iota = rng.randrange(1, n + 1)
            for verified, ks in ((True, keys), (False, plain_keys)):
                f, omega = point_query_build(ks.pk, db, iota)
                rec = _measured_round(ks, db, f, omega, rng, trial, k)
                records.append(rec)
                totals[verified] += (rec.user_time_query + rec.user_time_reconstruct
                                     + rec.server_time)
                if not verified:
                    plain_server += rec.server_time
        overheads.append({
            "N": n,
            "verified_total": totals[True] / trials,
            "plain_total": totals[False] / trials,
            "overhead_ratio": totals[True] / totals[False] if totals[False] else float("inf"),
            "plain_server_time": plain_server / trials,
        })
    if out_path:
        write_bench_csv(out_path, records)
    return records, overheads
