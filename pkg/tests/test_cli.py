"""Command line tests: full file-based flows, exit codes, one real daemon."""

import json
import shutil
import subprocess
import sys

import pytest

import oracles
from pvpir.cli import main, parse_predicate, _parse_n_range
from pvpir.protocol import SchemeId
from pvpir.server import ServerConfig, ServerState, start_server
from pvpir.storage import load_database_view, load_public_keys


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _keygen(capsys, tmp_path, scheme, seed=1):
    pk = str(tmp_path / f"{scheme}.pk")
    sk = str(tmp_path / f"{scheme}.sk")
    code, _, _ = _run(capsys, "keygen", "--scheme", scheme, "--pk", pk, "--sk", sk,
                      "--seed", str(seed), "--profile", "toy")
    assert code == 0
    return pk, sk


def _mkdb(capsys, tmp_path, n=16, seed=2, name="db.bin", unit_weights=False):
    db = str(tmp_path / name)
    argv = ["mkdb", "--n", str(n), "--item-bits", "8", "--out", db,
            "--seed", str(seed), "--profile", "toy"]
    weights = None
    if unit_weights:
        weights = str(tmp_path / (name + ".w"))
        argv += ["--weights-out", weights, "--weights-mode", "unit"]
    code, _, _ = _run(capsys, *argv)
    assert code == 0
    return (db, weights) if unit_weights else db


def _serve_tcp(pk_path, db_path, weights_path=None):
    config = ServerConfig(endpoint=("127.0.0.1", 0), pk_path=pk_path, db_path=db_path,
                          weights_path=weights_path)
    server = start_server(ServerState.from_config(config, 8))
    return server, "%s:%d" % server.bound_endpoint


# ---------------------------------------------------------------------------
# Parsers


def test_parse_predicate():
    assert parse_predicate("nonzero")(0) == 0
    assert parse_predicate("nonzero")(7) == 1
    assert parse_predicate("eq:5")(5) == 1
    assert parse_predicate("eq:5")(6) == 0
    assert parse_predicate("gt:10")(11) == 1
    assert parse_predicate("lt:10")(9) == 1
    with pytest.raises(ValueError):
        parse_predicate("gt:ten")
    with pytest.raises(ValueError):
        parse_predicate("between:1:2")


def test_parse_n_range():
    assert _parse_n_range("1024,4096") == (1024, 4096)
    assert _parse_n_range("7") == (7,)
    with pytest.raises(ValueError):
        _parse_n_range("a,b")
    with pytest.raises(ValueError):
        _parse_n_range("0,4")


# ---------------------------------------------------------------------------
# keygen / mkdb


def test_keygen_writes_loadable_deterministic_keys(capsys, tmp_path):
    pk1, _ = _keygen(capsys, tmp_path, "pi1", seed=5)
    loaded = load_public_keys(pk1)
    assert loaded.scheme == SchemeId.PI1_DL_PREDICATE
    pk2 = str(tmp_path / "again.pk")
    sk2 = str(tmp_path / "again.sk")
    code, _, _ = _run(capsys, "keygen", "--scheme", "pi1", "--pk", pk2, "--sk", sk2,
                      "--seed", "5", "--profile", "toy")
    assert code == 0
    assert open(pk1, "rb").read() == open(pk2, "rb").read()


def test_mkdb_writes_loadable_database(capsys, tmp_path):
    db = _mkdb(capsys, tmp_path, n=24, seed=3)
    view = load_database_view(db, 8)
    assert view.n == 24 and view.ell_bits == 8
    weights = str(tmp_path / "w.bin")
    code, out, _ = _run(capsys, "mkdb", "--n", "8", "--out", str(tmp_path / "d2.bin"),
                        "--weights-out", weights, "--weights-mode", "unit",
                        "--seed", "4", "--profile", "toy")
    assert code == 0 and "weights (unit)" in out
    view = load_database_view(str(tmp_path / "d2.bin"), 8, weights)
    assert set(view.omega.lanes[0]) == {1}


# ---------------------------------------------------------------------------
# query / verify flows


def test_point_query_flow(capsys, tmp_path):
    pk_path, _ = _keygen(capsys, tmp_path, "pi3")
    db_path = _mkdb(capsys, tmp_path)
    items = list(load_database_view(db_path, 8).items)
    servers = []
    try:
        s1, ep1 = _serve_tcp(pk_path, db_path)
        s2, ep2 = _serve_tcp(pk_path, db_path)
        servers = [s1, s2]
        code, out, _ = _run(capsys, "query", "--pk", pk_path, "--db", db_path,
                            "--servers", f"{ep1},{ep2}", "--index", "7",
                            "--seed", "9", "--profile", "toy")
    finally:
        for s in servers:
            s.shutdown()
            s.server_close()
    assert code == 0
    assert int(out.strip()) == items[6]


def test_predicate_query_flow_writes_verifier_inputs(capsys, tmp_path):
    # counting needs unit weights on the servers; mkdb provides them
    pk_path, _ = _keygen(capsys, tmp_path, "pi1")
    db_path, w_path = _mkdb(capsys, tmp_path, unit_weights=True)
    items = list(load_database_view(db_path, 8).items)
    vk_path = str(tmp_path / "query.vk")
    ans_path = str(tmp_path / "query.ans")
    servers = []
    try:
        s1, ep1 = _serve_tcp(pk_path, db_path, w_path)
        s2, ep2 = _serve_tcp(pk_path, db_path, w_path)
        servers = [s1, s2]
        code, out, _ = _run(capsys, "query", "--pk", pk_path, "--db", db_path,
                            "--weights", w_path,
                            "--servers", f"{ep1},{ep2}", "--predicate", "gt:100",
                            "--seed", "10", "--profile", "toy",
                            "--vk-out", vk_path, "--answers-out", ans_path)
    finally:
        for s in servers:
            s.shutdown()
            s.server_close()
    assert code == 0
    q = load_public_keys(pk_path).dl.q_g
    want = oracles.weighted_aggregate([1 if v > 100 else 0 for v in items],
                                      [1] * len(items), q)
    assert int(out.strip()) == want

    code, out, _ = _run(capsys, "verify", "--pk", pk_path, "--vk", vk_path,
                        "--answers", ans_path)
    assert code == 0 and out.startswith("ACCEPT")

    # corrupting the transcript flips the verifier to REJECT, exit 1
    from pvpir.storage import load_answers, write_answers
    from pvpir.protocol import AnswerPair

    pk = load_public_keys(pk_path)
    answers = load_answers(ans_path, pk)
    a0 = answers[0]
    forged = AnswerPair(scheme=a0.scheme, party_index=a0.party_index,
                        payload=((a0.payload[0] + 1) % pk.dl.q_g,) + a0.payload[1:],
                        verify=a0.verify)
    write_answers(ans_path, pk, [forged] + answers[1:])
    code, out, _ = _run(capsys, "verify", "--pk", pk_path, "--vk", vk_path,
                        "--answers", ans_path)
    assert code == 1 and out.strip() == "REJECT"


def test_rsa_sum_query_flow(capsys, tmp_path):
    pk_path, sk_path = _keygen(capsys, tmp_path, "pi2")
    db_path = _mkdb(capsys, tmp_path, seed=6)
    items = list(load_database_view(db_path, 8).items)
    servers = []
    try:
        s1, ep1 = _serve_tcp(pk_path, db_path)
        s2, ep2 = _serve_tcp(pk_path, db_path)
        servers = [s1, s2]
        code, out, _ = _run(capsys, "query", "--pk", pk_path, "--sk", sk_path,
                            "--db", db_path, "--servers", f"{ep1},{ep2}",
                            "--predicate", "lt:128", "--mode", "sum",
                            "--seed", "11", "--profile", "toy")
    finally:
        for s in servers:
            s.shutdown()
            s.server_close()
    assert code == 0
    assert int(out.strip()) == sum(v for v in items if v < 128)


def test_query_rejects_on_diverging_replicas(capsys, tmp_path):
    pk_path, _ = _keygen(capsys, tmp_path, "pi1")
    db_a = _mkdb(capsys, tmp_path, seed=7, name="a.bin")
    db_b = _mkdb(capsys, tmp_path, seed=8, name="b.bin")
    servers = []
    try:
        s1, ep1 = _serve_tcp(pk_path, db_a)
        s2, ep2 = _serve_tcp(pk_path, db_b)
        servers = [s1, s2]
        code, out, _ = _run(capsys, "query", "--pk", pk_path, "--db", db_a,
                            "--servers", f"{ep1},{ep2}", "--predicate", "nonzero",
                            "--seed", "12", "--profile", "toy")
    finally:
        for s in servers:
            s.shutdown()
            s.server_close()
    assert code == 1
    assert out.strip() == "REJECT"


def test_query_transport_failure_exit_code(capsys, tmp_path):
    import socket

    pk_path, _ = _keygen(capsys, tmp_path, "pi3")
    db_path = _mkdb(capsys, tmp_path)
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    _, dead_port = probe.getsockname()
    probe.close()
    code, _, err = _run(capsys, "query", "--pk", pk_path, "--db", db_path,
                        "--servers", f"127.0.0.1:{dead_port},127.0.0.1:{dead_port}",
                        "--index", "1", "--timeout", "2", "--profile", "toy")
    assert code == 3
    assert "transport failure" in err


def test_query_usage_errors(capsys, tmp_path):
    pk1, _ = _keygen(capsys, tmp_path, "pi1")
    pk2, sk2 = _keygen(capsys, tmp_path, "pi2")
    pk3, _ = _keygen(capsys, tmp_path, "pi3")
    db = _mkdb(capsys, tmp_path)
    base = ["query", "--db", db, "--servers", "127.0.0.1:1"]
    code, _, err = _run(capsys, *base, "--pk", pk1, "--index", "1")
    assert code == 2 and "pi3 or plain" in err
    code, _, err = _run(capsys, *base, "--pk", pk3, "--predicate", "nonzero")
    assert code == 2 and "pi1, pi2, or plain" in err
    code, _, err = _run(capsys, *base, "--pk", pk1)
    assert code == 2 and "--index or --predicate" in err
    code, _, err = _run(capsys, *base, "--pk", pk1, "--predicate", "weird:1")
    assert code == 2 and "unknown predicate" in err
    code, _, err = _run(capsys, *base, "--pk", pk2, "--predicate", "nonzero")
    assert code == 2 and "--sk" in err
    code, _, err = _run(capsys, *base, "--pk", pk1, "--scheme", "pi3", "--index", "1")
    assert code == 2 and "scheme" in err


def test_verify_malformed_input_exit_code(capsys, tmp_path):
    db = _mkdb(capsys, tmp_path)
    code, _, err = _run(capsys, "verify", "--pk", db, "--vk", db, "--answers", db)
    assert code == 2 and "malformed input" in err


def test_serve_bad_endpoint(capsys, tmp_path):
    pk, _ = _keygen(capsys, tmp_path, "pi1")
    db = _mkdb(capsys, tmp_path)
    code, _, err = _run(capsys, "serve", "--endpoint", "nocolon",
                        "--pk", pk, "--db", db)
    assert code == 2 and "host:port" in err


# ---------------------------------------------------------------------------
# harness and bench subcommands


def test_exp_ver_cli(capsys, tmp_path):
    records = str(tmp_path / "rec.jsonl")
    code, out, _ = _run(capsys, "exp-ver", "--scheme", "pi1", "--calibration",
                        "--n", "16", "--trials", "60", "--seed", "13",
                        "--records", records)
    assert code == 0
    summary = json.loads(out)
    assert summary["trials"] == 60 and summary["scheme"] == "pi1"
    assert 0.0 <= summary["rate"] <= 0.35
    assert len(open(records).read().splitlines()) == 60


def test_exp_ver_cli_honest(capsys):
    code, out, _ = _run(capsys, "exp-ver", "--scheme", "pi2", "--calibration",
                        "--kind", "honest", "--n", "8", "--trials", "10",
                        "--seed", "14")
    assert code == 0
    summary = json.loads(out)
    assert summary["accepted"] == 10 and summary["forgeries"] == 0


def test_exp_ver_cli_bad_targets(capsys):
    code, _, err = _run(capsys, "exp-ver", "--scheme", "pi1", "--calibration",
                        "--targets", "1,2", "--k", "2", "--trials", "1",
                        "--seed", "0")
    assert code == 2 and "honest server" in err


def test_probe_sf_cli(capsys):
    code, out, _ = _run(capsys, "probe-sf", "--scheme", "pi3", "--calibration",
                        "--n", "8", "--trials", "40", "--seed", "15",
                        "--index0", "1", "--index1", "2")
    assert code == 0
    probe = json.loads(out)
    assert probe["trials"] == 40
    assert len(probe["frequencies"]) == 2
    assert "z" in probe and "p_value" in probe


def test_bench_bandwidth_cli(capsys):
    code, out, _ = _run(capsys, "bench", "--which", "bandwidth",
                        "--n-range", "64,256", "--item-bytes", "2",
                        "--trials", "1", "--seed", "16", "--profile", "toy")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 2
    assert all("upload=" in ln and "download=" in ln and "merkle=" in ln
               for ln in lines)


def test_bench_overhead_cli(capsys):
    code, out, _ = _run(capsys, "bench", "--which", "overhead", "--scheme", "pi1",
                        "--n-range", "32", "--trials", "2", "--seed", "17",
                        "--profile", "toy")
    assert code == 0
    assert "user_ratio=" in out and "server_ratio=" in out


def test_bench_point_time_cli(capsys):
    code, out, _ = _run(capsys, "bench", "--which", "point-time",
                        "--n-range", "32,64", "--trials", "1", "--seed", "18",
                        "--profile", "toy")
    assert code == 0
    assert out.count("overhead_ratio=") == 2


def test_bench_bad_n_range_exit(capsys):
    code, _, err = _run(capsys, "bench", "--which", "bandwidth",
                        "--n-range", "zero", "--seed", "0", "--profile", "toy")
    assert code == 2 and "bad size list" in err


# ---------------------------------------------------------------------------
# real daemon subprocess


def _cli_command():
    exe = shutil.which("pvpir")
    if exe:
        return [exe]
    return [sys.executable, "-m", "pvpir.cli"]


def test_serve_daemon_subprocess(capsys, tmp_path):
    pk_path, _ = _keygen(capsys, tmp_path, "pi3")
    db_path = _mkdb(capsys, tmp_path, seed=20)
    items = list(load_database_view(db_path, 8).items)
    proc = subprocess.Popen(
        _cli_command() + ["serve", "--endpoint", "127.0.0.1:0",
                          "--pk", pk_path, "--db", db_path, "--profile", "toy"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    try:
        banner = proc.stdout.readline()
        assert "serving scheme=PI3_DL_POINT" in banner
        endpoint = banner.strip().rsplit(" on ", 1)[1]
        code, out, _ = _run(capsys, "query", "--pk", pk_path, "--db", db_path,
                            "--servers", f"{endpoint},{endpoint}", "--index", "5",
                            "--seed", "21", "--profile", "toy")
        assert code == 0
        assert int(out.strip()) == items[4]
    finally:
        proc.terminate()
        proc.wait(timeout=10)
