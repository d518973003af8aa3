"""Client session: fan out query shares, gather answers, reconstruct.

Each server gets exactly one share over its own connection; requests run
concurrently and the client joins before reconstructing. Transport
problems (connection refused, timeouts, server error frames) raise
TransportError and never masquerade as protocol rejection; REJECT can only
come out of verification. Byte counters are exact frame sizes in each
direction, which is what the benchmark suite reports.
"""

from __future__ import annotations

import random
import socket
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .fss import FunctionDescription
from .protocol import (
    AnswerPair,
    REJECT,
    SchemeKeys,
    WeightVector,
    query,
    reconstruct,
)
from .serial import DecodeError
from .server import LoopbackServer, _recv_exact
from .wire import (
    MAX_FRAME_BYTES,
    MSG_ANSWER,
    MSG_ERROR,
    MSG_QUERY,
    WireContext,
    decode_answer_pair,
    decode_error,
    decode_frame,
    encode_frame_from_chunks,
    query_share_chunks,
)


class TransportError(Exception):
    """Any failure to obtain a well-formed answer from a server."""


class TcpEndpoint:
    """One server address; opens a fresh connection per exchange."""

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.host = host
        self.port = int(port)
        self.timeout = timeout

    @classmethod
    def parse(cls, text: str, timeout: float = 30.0) -> "TcpEndpoint":
        host, sep, port = text.rpartition(":")
        if not sep or not host:
            raise ValueError(f"endpoint must be host:port, got {text!r}")
        return cls(host, int(port), timeout)

    def exchange(self, raw: bytes) -> tuple[bytes, float | None]:
        try:
            with socket.create_connection((self.host, self.port), timeout=self.timeout) as sock:
                sock.sendall(raw)
                header = _recv_exact(sock, 4)
                if header is None:
                    raise TransportError("connection closed before reply")
                length = int.from_bytes(header, "big")
                if length < 3 or length > MAX_FRAME_BYTES:
                    raise TransportError("implausible reply length")
                body = _recv_exact(sock, length)
                if body is None:
                    raise TransportError("reply truncated")
                return header + body, None
        except OSError as exc:
            raise TransportError(f"{self.host}:{self.port}: {exc}") from exc


@dataclass(slots=True)
class ClientResult:
    lanes: tuple | None
    value: int | None
    rejected: bool
    upload_bytes: int
    download_bytes: int
    query_build_seconds: float
    transport_seconds: float
    reconstruct_seconds: float
    server_seconds: float | None
    answers: list = field(default_factory=list)
    vk: int | None = None
    sent_frames: list = field(default_factory=list)
    received_frames: list = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return not self.rejected


def _exchange_one(transport, raw: bytes):
    got = transport.exchange(raw)
    if not (isinstance(got, tuple) and len(got) == 2):
        raise TransportError("transport returned an unexpected shape")
    return got


def run_client(transports, keys: SchemeKeys, f: FunctionDescription,
               rng: random.Random, *, variant: str = "auto",
               recombine_with: WeightVector | None = None,
               capture: bool = False, trace: dict | None = None) -> ClientResult:
    """Full query round: build shares, one per transport, reconstruct.

    `transports` entries expose exchange(bytes) -> (bytes, seconds|None);
    use TcpEndpoint for network servers or LoopbackServer for in-process
    ones. k is len(transports).
    """
    k = len(transports)
    pk = keys.pk
    ctx = WireContext(pk)
    scheme_tag = int(pk.scheme)
    t0 = time.perf_counter()
    shares, vk = query(keys, f, k, rng, variant=variant, trace=trace)
    build_seconds = time.perf_counter() - t0

    sent_frames = []
    upload = 0
    encode_seconds = 0.0
    transport_seconds = 0.0
    if all(isinstance(t, LoopbackServer) for t in transports):
        # Sequential, one frame alive at a time: multi-hundred-megabyte
        # vector shares must not all be materialized at once.
        shares = list(shares)
        replies = []
        for j, transport in enumerate(transports):
            t_enc = time.perf_counter()
            frame = encode_frame_from_chunks(
                scheme_tag, MSG_QUERY, query_share_chunks(shares[j], ctx))
            encode_seconds += time.perf_counter() - t_enc
            shares[j] = None
            upload += len(frame)
            if capture:
                sent_frames.append(frame)
            t_x = time.perf_counter()
            replies.append(_exchange_one(transport, frame))
            transport_seconds += time.perf_counter() - t_x
            del frame
    else:
        t_enc = time.perf_counter()
        frames = [encode_frame_from_chunks(scheme_tag, MSG_QUERY, query_share_chunks(s, ctx))
                  for s in shares]
        encode_seconds = time.perf_counter() - t_enc
        upload = sum(len(fr) for fr in frames)
        if capture:
            sent_frames = list(frames)
        t_x = time.perf_counter()
        with ThreadPoolExecutor(max_workers=k) as pool:
            futures = [pool.submit(_exchange_one, t, fr)
                       for t, fr in zip(transports, frames)]
            replies = [fut.result() for fut in futures]
        transport_seconds = time.perf_counter() - t_x
    build_seconds += encode_seconds

    download = sum(len(r[0]) for r in replies)
    server_times = [r[1] for r in replies]
    server_seconds = (sum(server_times) / k) if all(s is not None for s in server_times) else None

    t2 = time.perf_counter()
    answers: list[AnswerPair] = []
    for raw, _ in replies:
        try:
            frame = decode_frame(raw)
        except DecodeError as exc:
            raise TransportError(f"bad reply frame: {exc}") from exc
        if frame.msg_type == MSG_ERROR:
            code, text = decode_error(frame.payload)
            raise TransportError(f"server error 0x{code:02x}: {text}")
        if frame.msg_type != MSG_ANSWER or frame.scheme_tag != int(pk.scheme):
            raise TransportError("unexpected reply type")
        try:
            answers.append(decode_answer_pair(ctx, frame.payload))
        except DecodeError as exc:
            raise TransportError(f"bad answer encoding: {exc}") from exc
    outcome = reconstruct(answers, pk, vk)
    reconstruct_seconds = time.perf_counter() - t2

    rejected = outcome is REJECT
    lanes = None if rejected else tuple(outcome)
    value = None
    if lanes is not None:
        if recombine_with is not None:
            value = recombine_with.recombine(lanes)
        elif len(lanes) == 1:
            value = lanes[0]
    return ClientResult(
        lanes=lanes, value=value, rejected=rejected,
        upload_bytes=upload, download_bytes=download,
        query_build_seconds=build_seconds, transport_seconds=transport_seconds,
        reconstruct_seconds=reconstruct_seconds, server_seconds=server_seconds,
        answers=answers, vk=vk,
        sent_frames=sent_frames,
        received_frames=[r[0] for r in replies] if capture else [],
    )
