"""Server side of the query protocol: frame handling, TCP daemon, loopback.

A server holds (public keys, database, weights) and exposes exactly one
operation: answer a framed query share. The frame handler is a pure
function of that state and the raw request bytes, so the TCP daemon and
the in-process loopback transport share it and produce byte-identical
responses for identical requests. Error replies carry a numeric code and
a generic message, never internals.
"""

from __future__ import annotations

import socketserver
import threading
import time
from dataclasses import dataclass, field

from .protocol import DatabaseView, PublicKeys, SchemeId, answer
from .serial import DecodeError
from .storage import load_database_view, load_public_keys
from .wire import (
    ERR_BAD_MSG_TYPE,
    ERR_DECODE,
    ERR_DOMAIN,
    ERR_INTERNAL,
    ERR_OVERSIZE,
    ERR_SCHEME,
    FrameError,
    MAX_FRAME_BYTES,
    MSG_ANSWER,
    MSG_ERROR,
    MSG_QUERY,
    WireContext,
    decode_frame,
    decode_query_share,
    encode_answer_pair,
    encode_error,
    encode_frame,
)

_RECV_CHUNK = 1 << 20


@dataclass(frozen=True, slots=True)
class ServerConfig:
    endpoint: tuple  # (host, port)
    pk_path: str
    db_path: str
    weights_path: str | None = None
    allowed_schemes: tuple | None = None  # None: only the key file's scheme
    max_concurrent: int = 8


class ServerState:
    """Immutable-after-load request context shared by all connections."""

    __slots__ = ("pk", "ctx", "db", "allowed", "gate")

    def __init__(self, pk: PublicKeys, db: DatabaseView,
                 allowed: tuple | None = None, max_concurrent: int = 8):
        self.pk = pk
        self.ctx = WireContext(pk)
        self.db = db
        self.allowed = tuple(allowed) if allowed is not None else (pk.scheme,)
        self.gate = threading.BoundedSemaphore(max_concurrent)

    @classmethod
    def from_config(cls, config: ServerConfig, lane_width_bits: int) -> "ServerState":
        pk = load_public_keys(config.pk_path)
        db = load_database_view(config.db_path, lane_width_bits, config.weights_path)
        return cls(pk, db, config.allowed_schemes, config.max_concurrent)


def _error_frame(state: ServerState, code: int, message: str) -> bytes:
    return encode_frame(int(state.pk.scheme), MSG_ERROR, encode_error(code, message))


def handle_frame(state: ServerState, raw: bytes) -> tuple[bytes, float]:
    """Process one raw frame; returns (response frame, answer compute seconds)."""
    try:
        frame = decode_frame(raw)
    except FrameError as exc:
        return _error_frame(state, exc.code, str(exc)), 0.0
    except DecodeError:
        return _error_frame(state, ERR_DECODE, "malformed frame"), 0.0
    if frame.msg_type != MSG_QUERY:
        return _error_frame(state, ERR_BAD_MSG_TYPE, "expected a query"), 0.0
    scheme = SchemeId(frame.scheme_tag)
    if scheme != state.pk.scheme or scheme not in state.allowed:
        return _error_frame(state, ERR_SCHEME, "scheme not served here"), 0.0
    try:
        share = decode_query_share(state.ctx, frame.payload)
    except DecodeError:
        return _error_frame(state, ERR_DECODE, "malformed query share"), 0.0
    if share.domain_size != state.db.n:
        return _error_frame(state, ERR_DOMAIN, "domain does not match the database"), 0.0
    try:
        started = time.perf_counter()
        ans = answer(state.pk, state.db, share)
        elapsed = time.perf_counter() - started
        body = encode_answer_pair(ans, state.ctx)
    except Exception:
        return _error_frame(state, ERR_INTERNAL, "internal error"), 0.0
    return encode_frame(int(state.pk.scheme), MSG_ANSWER, body), elapsed


class LoopbackServer:
    """In-process transport end with the exact wire semantics of the daemon."""

    def __init__(self, pk: PublicKeys, db: DatabaseView,
                 allowed: tuple | None = None):
        self.state = ServerState(pk, db, allowed)
        self.last_server_seconds = 0.0

    def exchange(self, raw: bytes) -> tuple[bytes, float | None]:
        resp, seconds = handle_frame(self.state, raw)
        self.last_server_seconds = seconds
        return resp, seconds


def _recv_exact(sock, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(_RECV_CHUNK, n - len(buf)))
        if not chunk:
            return None
        buf += chunk
    return bytes(buf)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        state: ServerState = self.server.state
        with state.gate:
            header = _recv_exact(self.request, 4)
            if header is None:
                return
            length = int.from_bytes(header, "big")
            if length < 3 or length > MAX_FRAME_BYTES:
                self.request.sendall(_error_frame(state, ERR_OVERSIZE, "bad frame length"))
                return
            body = _recv_exact(self.request, length)
            if body is None:
                return
            resp, _ = handle_frame(state, header + body)
            self.request.sendall(resp)


class PvpirTCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, endpoint, state: ServerState):
        self.state = state
        super().__init__(tuple(endpoint), _Handler)

    @property
    def bound_endpoint(self) -> tuple:
        return self.server_address[:2]


def start_server(state: ServerState, endpoint=("127.0.0.1", 0)) -> PvpirTCPServer:
    """Bind and serve in a daemon thread; caller owns shutdown()."""
    server = PvpirTCPServer(endpoint, state)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


def serve(config: ServerConfig, lane_width_bits: int) -> None:
    """Blocking daemon entry point used by the command line."""
    state = ServerState.from_config(config, lane_width_bits)
    server = PvpirTCPServer(config.endpoint, state)
    host, port = server.bound_endpoint
    print(f"serving scheme={state.pk.scheme.name} n={state.db.n} on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
