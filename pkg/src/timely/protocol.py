"""Newline-delimited JSON wire protocol for external policies.

One message per line. Observations flow harness -> policy; policy_output
lines flow back and must echo the seq of the observation they answer.
Subprocess mode uses the policy's standard streams; server mode uses the
same framing over TCP with a "timely/1" handshake.
"""

from __future__ import annotations

import json
import socket
import subprocess
from dataclasses import dataclass, field
from typing import IO, Iterator, Optional

from .session import Observation, PolicyOutput, TOOL_SURFACES

PROTOCOL_VERSION = "timely/1"

RESERVED_FIELDS = ("kind", "session_id", "seq", "payload")
MESSAGE_KINDS = ("handshake", "observation", "policy_output", "tool_response", "session_end")


class ProtocolError(Exception):
    pass


@dataclass(frozen=True)
class WireMessage:
    kind: str
    session_id: str
    seq: int
    payload: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)  # unknown fields, preserved opaquely

    def __post_init__(self) -> None:
        if self.kind not in MESSAGE_KINDS:
            raise ProtocolError(f"unknown message kind: {self.kind!r}")


def encode_message(msg: WireMessage) -> bytes:
    obj = {
        "kind": msg.kind,
        "session_id": msg.session_id,
        "seq": msg.seq,
        "payload": msg.payload,
    }
    obj.update(msg.extra)
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"


def decode_message(line: bytes | str) -> WireMessage:
    if isinstance(line, bytes):
        line = line.decode("utf-8")
    stripped = line.strip()
    try:
        obj = json.loads(stripped)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed message at byte offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("message must be a JSON object")
    try:
        return WireMessage(
            kind=obj["kind"],
            session_id=obj["session_id"],
            seq=int(obj["seq"]),
            payload=obj.get("payload", {}),
            extra={k: v for k, v in obj.items() if k not in RESERVED_FIELDS},
        )
    except KeyError as exc:
        raise ProtocolError(f"message missing required field {exc.args[0]!r}") from exc


class LineDecoder:
    """Incremental framing: feed arbitrary byte chunks, get whole messages.

    The decoded message list is invariant under chunking boundaries.
    """

    def __init__(self) -> None:
        self._buffer = b""

    def feed(self, chunk: bytes) -> Iterator[WireMessage]:
        self._buffer += chunk
        while b"\n" in self._buffer:
            line, self._buffer = self._buffer.split(b"\n", 1)
            if line.strip():
                yield decode_message(line)


class RemotePolicy:
    """Adapts a line-oriented peer (subprocess or socket) into a Policy.

    Affordance fields never cross the wire; external policies see only the
    tool-surface observation.
    """

    def __init__(self, reader: IO[bytes], writer: IO[bytes], session_id: str):
        self.reader = reader
        self.writer = writer
        self.session_id = session_id
        self._last_seq = 0

    def _send(self, msg: WireMessage) -> None:
        self.writer.write(encode_message(msg))
        self.writer.flush()

    def _recv(self) -> WireMessage:
        line = self.reader.readline()
        if not line:
            raise ProtocolError("peer closed the stream")
        msg = decode_message(line)
        if msg.seq <= self._last_seq:
            raise ProtocolError(f"non-monotone seq {msg.seq} (last {self._last_seq})")
        self._last_seq = msg.seq
        return msg

    def handshake(self, env_kind: str) -> None:
        self._send(
            WireMessage(
                kind="handshake",
                session_id=self.session_id,
                seq=0,
                payload={
                    "protocol": PROTOCOL_VERSION,
                    "env_kind": env_kind,
                    "tools": TOOL_SURFACES[env_kind],
                },
            )
        )
        reply = decode_message(self.reader.readline() or b"")
        if reply.kind != "handshake" or reply.payload.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"handshake mismatch: expected {PROTOCOL_VERSION}, "
                f"got {reply.payload.get('protocol')!r}"
            )
        self._last_seq = 0

    def step(self, obs: Observation) -> PolicyOutput:
        self._send(
            WireMessage(
                kind="observation",
                session_id=self.session_id,
                seq=obs.seq,
                payload=obs.to_wire_json(),
            )
        )
        reply = self._recv()
        if reply.kind != "policy_output":
            raise ProtocolError(f"expected policy_output, got {reply.kind!r}")
        if reply.payload.get("observation_seq") != obs.seq:
            raise ProtocolError(
                f"policy_output answers seq {reply.payload.get('observation_seq')}, "
                f"expected {obs.seq}"
            )
        return PolicyOutput.from_json(reply.payload)

    def finish(self, summary: dict) -> None:
        try:
            self._send(
                WireMessage(
                    kind="session_end",
                    session_id=self.session_id,
                    seq=self._last_seq + 1,
                    payload=summary,
                )
            )
        except (BrokenPipeError, OSError):
            pass  # peer may already be gone at session end


class SubprocessPolicy(RemotePolicy):
    """Spawns a policy command and speaks the wire protocol over its stdio."""

    def __init__(self, command: list[str], session_id: str, env_kind: str):
        self.proc = subprocess.Popen(
            command, stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )
        super().__init__(self.proc.stdout, self.proc.stdin, session_id)
        self.handshake(env_kind)

    def close(self) -> None:
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        self.proc.wait(timeout=10)


class SocketPolicy(RemotePolicy):
    """Wire protocol over an accepted TCP connection (server side)."""

    def __init__(self, conn: socket.socket, session_id: str, env_kind: str):
        self.conn = conn
        reader = conn.makefile("rb")
        writer = conn.makefile("wb")
        super().__init__(reader, writer, session_id)
        self._accept_handshake(env_kind)

    def _accept_handshake(self, env_kind: str) -> None:
        line = self.reader.readline()
        if not line:
            raise ProtocolError("client disconnected before handshake")
        msg = decode_message(line)
        if msg.kind != "handshake" or msg.payload.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"handshake mismatch: got {msg.payload.get('protocol')!r}"
            )
        self._send(
            WireMessage(
                kind="handshake",
                session_id=self.session_id,
                seq=0,
                payload={
                    "protocol": PROTOCOL_VERSION,
                    "env_kind": env_kind,
                    "tools": TOOL_SURFACES[env_kind],
                },
            )
        )

    def close(self) -> None:
        try:
            self.conn.close()
        except OSError:
            pass
