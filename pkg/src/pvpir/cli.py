"""Command line front end.

Subcommands: keygen, mkdb, serve, query, verify, exp-ver, probe-sf, bench.
Exit codes: 0 success, 1 protocol REJECT (query and verify), 2 usage
errors, 3 transport failures. The --profile flag (or the PVPIR_PROFILE
environment variable) selects parameter sizes; --seed pins all randomness.
"""

from __future__ import annotations

import argparse
import json
import random
import sys

from . import bench as bench_mod
from .client import TcpEndpoint, TransportError, run_client
from .harness import (
    TamperStrategy,
    calibration_keys,
    run_exp_ver,
    run_selective_failure_probe,
)
from .profiles import get_profile
from .protocol import (
    SCHEME_NAMES,
    SCHEMES_BY_NAME,
    SchemeId,
    SchemeKeys,
    SecretKeys,
    keygen,
    make_database,
    point_query_build,
    predicate_query_build,
)
from .serial import DecodeError
from .server import ServerConfig, serve
from .storage import (
    load_database_view,
    load_public_keys,
    load_secret_keys,
    make_random_items,
    write_answers,
    write_database,
    write_public_keys,
    write_secret_keys,
    write_verification_key,
    write_weights,
)
from .verifier import NotVerifiableError, verify_files

SCHEME_CHOICES = ("plain", "pi1", "pi2", "pi3")
PREDICATE_SCHEMES = ("pi1", "pi2", "plain")
POINT_SCHEMES = ("pi3", "plain")


def parse_predicate(text: str):
    """Predicate DSL: nonzero | eq:V | gt:V | lt:V (V a decimal item value)."""
    if text == "nonzero":
        return lambda v: 1 if v else 0
    op, sep, raw = text.partition(":")
    if sep and op in ("eq", "gt", "lt"):
        try:
            bound = int(raw)
        except ValueError:
            raise ValueError(f"predicate bound must be an integer: {raw!r}") from None
        if op == "eq":
            return lambda v: 1 if v == bound else 0
        if op == "gt":
            return lambda v: 1 if v > bound else 0
        return lambda v: 1 if v < bound else 0
    raise ValueError(f"unknown predicate {text!r} (expected nonzero, eq:V, gt:V, lt:V)")


def _parse_n_range(text: str) -> tuple:
    try:
        out = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ValueError(f"bad size list {text!r}") from None
    if not out or min(out) < 1:
        raise ValueError("sizes must be positive")
    return out


def _rng(args) -> random.Random:
    return random.Random(args.seed)


def _add_common(p, *, seed=True, profile=True):
    if seed:
        p.add_argument("--seed", type=int, default=None, help="RNG seed")
    if profile:
        p.add_argument("--profile", choices=("toy", "paper"), default=None,
                       help="parameter profile (default: PVPIR_PROFILE or toy)")


def _strategy_from_args(args) -> TamperStrategy:
    targets = ()
    if args.kind != "honest":
        targets = tuple(int(t) for t in args.targets.split(",")) if args.targets else (1,)
    return TamperStrategy(kind=args.kind, targets=targets,
                          payload_delta=args.payload_delta,
                          verify_delta=args.verify_delta)


def _add_strategy_flags(p):
    p.add_argument("--kind", choices=("honest", "additive_offset", "random_replace",
                                      "swap_components"), default="additive_offset")
    p.add_argument("--targets", default="1",
                   help="comma list of 1-based server positions to corrupt")
    p.add_argument("--payload-delta", type=int, default=None)
    p.add_argument("--verify-delta", type=int, default=None)


def cmd_keygen(args) -> int:
    profile = get_profile(args.profile)
    scheme = SCHEMES_BY_NAME[args.scheme]
    keys = keygen(scheme, profile.dl_bits, _rng(args), profile)
    write_public_keys(args.pk, keys.pk)
    write_secret_keys(args.sk, keys.sk)
    print(f"wrote {args.pk} and {args.sk} ({args.scheme}, {profile.name})")
    return 0


def cmd_mkdb(args) -> int:
    profile = get_profile(args.profile)
    rng = _rng(args)
    items = make_random_items(args.n, args.item_bits, rng)
    write_database(args.out, items, args.item_bits, profile.lane_width_bits)
    msg = f"wrote {args.out}: N={args.n}, {args.item_bits}-bit items"
    if args.weights_out:
        if args.weights_mode == "unit":
            write_weights(args.weights_out, [1] * args.n, 1, profile.lane_width_bits)
        else:
            write_weights(args.weights_out, items, args.item_bits, profile.lane_width_bits)
        msg += f", weights ({args.weights_mode}) in {args.weights_out}"
    print(msg)
    return 0


def cmd_serve(args) -> int:
    profile = get_profile(args.profile)
    allowed = None
    if args.allow:
        allowed = tuple(SCHEMES_BY_NAME[s] for s in args.allow.split(","))
    host, sep, port = args.endpoint.rpartition(":")
    if not sep or not host:
        print(f"endpoint must be host:port, got {args.endpoint!r}", file=sys.stderr)
        return 2
    config = ServerConfig(endpoint=(host, int(port)), pk_path=args.pk,
                          db_path=args.db, weights_path=args.weights,
                          allowed_schemes=allowed, max_concurrent=args.max_concurrent)
    serve(config, profile.lane_width_bits)
    return 0


def cmd_query(args) -> int:
    profile = get_profile(args.profile)
    pk = load_public_keys(args.pk)
    if args.scheme and SCHEMES_BY_NAME[args.scheme] != pk.scheme:
        print(f"public key file is for scheme {pk.scheme.name}", file=sys.stderr)
        return 2
    db = load_database_view(args.db, profile.lane_width_bits, args.weights)
    rng = _rng(args)

    name = args.scheme or SCHEME_NAMES[pk.scheme]
    if args.index is not None:
        if name not in POINT_SCHEMES:
            print("point queries need scheme pi3 or plain", file=sys.stderr)
            return 2
        f, omega = point_query_build(pk, db, args.index)
        recombine = omega
    else:
        if args.predicate is None:
            print("need --index or --predicate", file=sys.stderr)
            return 2
        if name not in PREDICATE_SCHEMES:
            print("predicate queries need scheme pi1, pi2, or plain", file=sys.stderr)
            return 2
        try:
            pred = parse_predicate(args.predicate)
        except ValueError as exc:
            print(str(exc), file=sys.stderr)
            return 2
        f, omega = predicate_query_build(pk, db, pred, args.mode)
        recombine = omega if (args.mode == "sum" and pk.scheme == SchemeId.PI2_RSA_PREDICATE) else None

    if pk.scheme == SchemeId.PI2_RSA_PREDICATE:
        if not args.sk:
            print("RSA queries need --sk (the scaling exponent lives there)",
                  file=sys.stderr)
            return 2
        sk = load_secret_keys(args.sk)
    else:
        sk = SecretKeys(scheme=pk.scheme)
    keys = SchemeKeys(pk=pk, sk=sk)
    endpoints = [TcpEndpoint.parse(e, timeout=args.timeout)
                 for e in args.servers.split(",")]
    try:
        res = run_client(endpoints, keys, f, rng, variant=args.variant,
                         recombine_with=recombine)
    except TransportError as exc:
        print(f"transport failure: {exc}", file=sys.stderr)
        return 3
    if args.vk_out and res.vk is not None:
        write_verification_key(args.vk_out, pk.scheme, res.vk)
    if args.answers_out:
        write_answers(args.answers_out, pk, res.answers)
    if res.rejected:
        print("REJECT")
        return 1
    if res.value is not None:
        print(res.value)
    else:
        print(" ".join(str(v) for v in res.lanes))
    return 0


def cmd_verify(args) -> int:
    try:
        ok, lanes = verify_files(args.pk, args.vk, args.answers)
    except NotVerifiableError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except DecodeError as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return 2
    if ok:
        print("ACCEPT " + " ".join(str(v) for v in lanes))
        return 0
    print("REJECT")
    return 1


def cmd_exp_ver(args) -> int:
    profile = get_profile(args.profile)
    scheme = SCHEMES_BY_NAME[args.scheme]
    rng = _rng(args)
    try:
        strategy = _strategy_from_args(args)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    keys = calibration_keys(scheme) if args.calibration else \
        keygen(scheme, profile.dl_bits, rng, profile)
    summary = run_exp_ver(scheme, args.n, args.k, strategy, args.trials, rng,
                          keys=keys, lane_width_bits=profile.lane_width_bits,
                          mode=args.mode, variant=args.variant,
                          records_path=args.records,
                          capture_transcripts=args.capture_transcripts)
    print(json.dumps(summary))
    return 0


def cmd_probe_sf(args) -> int:
    profile = get_profile(args.profile)
    scheme = SCHEMES_BY_NAME[args.scheme]
    rng = _rng(args)
    try:
        strategy = _strategy_from_args(args)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    keys = calibration_keys(scheme) if args.calibration else \
        keygen(scheme, profile.dl_bits, rng, profile)
    ell = profile.lane_width_bits
    items = make_random_items(args.n, ell, rng)
    if args.scheme in POINT_SCHEMES:
        db = make_database(items, ell, profile.lane_width_bits, weights="self")
        f0, _ = point_query_build(keys.pk, db, args.index0)
        f1, _ = point_query_build(keys.pk, db, args.index1)
    else:
        weights = "self" if args.mode == "sum" else "unit"
        db = make_database(items, ell, profile.lane_width_bits, weights=weights)
        f0, _ = predicate_query_build(keys.pk, db,
                                      lambda v: 1 if v > args.threshold0 else 0, args.mode)
        f1, _ = predicate_query_build(keys.pk, db,
                                      lambda v: 1 if v > args.threshold1 else 0, args.mode)
    out = run_selective_failure_probe(keys, db, (f0, f1), strategy, args.trials, rng,
                                      k=args.k, variant=args.variant)
    print(json.dumps(out))
    return 0


def cmd_bench(args) -> int:
    profile = get_profile(args.profile)
    rng = _rng(args)
    n_range = _parse_n_range(args.n_range)
    if args.which == "overhead":
        scheme = SCHEMES_BY_NAME[args.scheme or "pi1"]
        _, ratios = bench_mod.bench_relative_overhead(
            scheme, n_range, rng, trials=args.trials, k=args.k, mode=args.mode,
            profile=profile, out_path=args.out, ratios_path=args.ratios_out)
        for r in ratios:
            print(f"N={r['N']} user_ratio={r['user_ratio']:.4f} "
                  f"server_ratio={r['server_ratio']:.4f}")
    elif args.which == "bandwidth":
        records, merkle, skipped = bench_mod.bench_bandwidth(
            n_range, rng, item_bytes=args.item_bytes, trials=args.trials, k=args.k,
            profile=profile, max_bytes=args.max_bytes, out_path=args.out)
        seen = set()
        for rec, (mk,) in zip(records, merkle):
            if rec.n in seen:
                continue
            seen.add(rec.n)
            print(f"N={rec.n} upload={rec.upload_bytes} download={rec.download_bytes} "
                  f"merkle={mk}")
        for n in skipped:
            print(f"N={n} skipped: estimated memory above --max-bytes")
    else:
        _, overheads = bench_mod.bench_point_time(
            n_range, rng, trials=args.trials, k=args.k, profile=profile,
            out_path=args.out)
        for o in overheads:
            print(f"N={o['N']} verified_total={o['verified_total']:.6f} "
                  f"plain_total={o['plain_total']:.6f} "
                  f"overhead_ratio={o['overhead_ratio']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="pvpir",
                                  description="verifiable multi-server PIR toolkit")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate scheme keys into files")
    p.add_argument("--scheme", choices=SCHEME_CHOICES, required=True)
    p.add_argument("--pk", default="pk.bin")
    p.add_argument("--sk", default="sk.bin")
    _add_common(p)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("mkdb", help="synthesize a random database file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--item-bits", type=int, default=8)
    p.add_argument("--out", default="db.bin")
    p.add_argument("--weights-out", default=None)
    p.add_argument("--weights-mode", choices=("self", "unit"), default="self")
    _add_common(p)
    p.set_defaults(func=cmd_mkdb)

    p = sub.add_parser("serve", help="run one answer server")
    p.add_argument("--endpoint", default="127.0.0.1:0")
    p.add_argument("--pk", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--weights", default=None)
    p.add_argument("--allow", default=None, help="comma list of allowed schemes")
    p.add_argument("--max-concurrent", type=int, default=8)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("query", help="query k servers and reconstruct")
    p.add_argument("--scheme", choices=SCHEME_CHOICES, default=None)
    p.add_argument("--pk", required=True)
    p.add_argument("--sk", default=None, help="secret key file (RSA scheme only)")
    p.add_argument("--db", required=True)
    p.add_argument("--weights", default=None)
    p.add_argument("--servers", required=True, help="comma list of host:port")
    p.add_argument("--index", type=int, default=None, help="1-based point query index")
    p.add_argument("--predicate", default=None, help="nonzero | eq:V | gt:V | lt:V")
    p.add_argument("--mode", choices=("count", "sum"), default="count")
    p.add_argument("--variant", choices=("auto", "vector", "dpf"), default="auto")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--vk-out", default=None)
    p.add_argument("--answers-out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("verify", help="standalone accept/reject check from files")
    p.add_argument("--pk", required=True)
    p.add_argument("--vk", required=True)
    p.add_argument("--answers", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("exp-ver", help="forgery experiment with tampering servers")
    p.add_argument("--scheme", choices=SCHEME_CHOICES, required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--mode", choices=("count", "sum"), default="count")
    p.add_argument("--variant", choices=("auto", "vector", "dpf"), default="auto")
    p.add_argument("--calibration", action="store_true",
                   help="tiny-order keys (q=11, n=55) for rate calibration")
    p.add_argument("--records", default=None, help="JSON-lines output path")
    p.add_argument("--capture-transcripts", action="store_true")
    _add_strategy_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_exp_ver)

    p = sub.add_parser("probe-sf", help="selective-failure acceptance probe")
    p.add_argument("--scheme", choices=SCHEME_CHOICES, required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--mode", choices=("count", "sum"), default="count")
    p.add_argument("--variant", choices=("auto", "vector", "dpf"), default="auto")
    p.add_argument("--calibration", action="store_true")
    p.add_argument("--index0", type=int, default=1)
    p.add_argument("--index1", type=int, default=2)
    p.add_argument("--threshold0", type=int, default=0)
    p.add_argument("--threshold1", type=int, default=1)
    _add_strategy_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_probe_sf)

    p = sub.add_parser("bench", help="benchmark suite, CSV output")
    p.add_argument("--which", choices=("overhead", "bandwidth", "point-time"),
                   required=True)
    p.add_argument("--scheme", choices=("pi1", "pi2"), default=None,
                   help="verified scheme for --which overhead")
    p.add_argument("--n-range", default="1024,4096,16384")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--mode", choices=("count", "sum"), default="count")
    p.add_argument("--item-bytes", type=int, default=256)
    p.add_argument("--max-bytes", type=int, default=1 << 28)
    p.add_argument("--out", default=None, help="CSV path")
    p.add_argument("--ratios-out", default=None, help="ratio CSV path (overhead)")
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except DecodeError as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
