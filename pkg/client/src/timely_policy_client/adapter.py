"""The adapter: speaks "timely/1" on one side, chat completions on the other.

One adapter serves one session and keeps no state beyond the conversation
transcript. Endpoint failures are reported to the harness as a final
policy_output with an error body, then the stream is closed so the harness
records the episode as a policy error.
"""

from __future__ import annotations

import json
import socket
import sys
from typing import IO, Optional

from .config import EndpointConfig
from .llm import ChatClient, EndpointError
from .prompts import default_prompt

PROTOCOL_VERSION = "timely/1"


class ProtocolMismatch(Exception):
    pass


def to_chat_tools(wire_tools: dict) -> list[dict]:
    """Translate the harness tool surface into chat tool schemas, one-to-one."""
    tools = []
    for name in sorted(wire_tools):
        arguments = wire_tools[name]
        tools.append(
            {
                "type": "function",
                "function": {
                    "name": name,
                    "parameters": {
                        "type": "object",
                        "properties": {
                            arg: {"type": arg_type} for arg, arg_type in arguments.items()
                        },
                        "required": sorted(arguments),
                    },
                },
            }
        )
    return tools


def from_chat_tool_call(tool_call: dict) -> dict:
    """Translate one chat tool call back into the wire tool-call shape."""
    function = tool_call.get("function", {})
    raw_arguments = function.get("arguments", "{}")
    if isinstance(raw_arguments, str):
        try:
            arguments = json.loads(raw_arguments) if raw_arguments else {}
        except json.JSONDecodeError:
            arguments = {}
    else:
        arguments = dict(raw_arguments)
    return {"name": function.get("name", ""), "arguments": arguments}


def _observation_text(payload: dict) -> str:
    parts = [payload.get("text") or ""]
    actions = payload.get("valid_actions") or []
    if actions:
        parts.append(f"Valid actions: {actions}.")
    return " ".join(part for part in parts if part)


def _send(writer: IO[bytes], obj: dict) -> None:
    writer.write(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode() + b"\n")
    writer.flush()


def _read(reader: IO[bytes]) -> Optional[dict]:
    line = reader.readline()
    if not line:
        return None
    return json.loads(line)


class Adapter:
    """Runs one session against an already-connected harness stream."""

    def __init__(self, endpoint: EndpointConfig, client: Optional[ChatClient] = None):
        self.endpoint = endpoint
        self.client = client or ChatClient(endpoint)
        self.env_kind: Optional[str] = None
        self.wire_tools: dict = {}
        self.declared_gen_times_us: list[int] = []
        self.summary: Optional[dict] = None

    def _handshake(self, reader: IO[bytes], writer: IO[bytes], initiate: bool) -> None:
        ours = {
            "kind": "handshake",
            "session_id": "adapter",
            "seq": 0,
            "payload": {"protocol": PROTOCOL_VERSION},
        }
        if initiate:
            _send(writer, ours)
            theirs = _read(reader)
        else:
            theirs = _read(reader)
        if theirs is None or theirs.get("kind") != "handshake":
            raise ProtocolMismatch(f"expected a handshake, got {theirs!r}")
        payload = theirs.get("payload", {})
        if payload.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolMismatch(
                f"protocol mismatch: harness speaks {payload.get('protocol')!r}, "
                f"this client speaks {PROTOCOL_VERSION!r}"
            )
        if not initiate:
            _send(writer, ours)
        self.env_kind = payload.get("env_kind", "reasoning")
        self.wire_tools = payload.get("tools", {})

    def run(self, reader: IO[bytes], writer: IO[bytes], initiate_handshake: bool) -> Optional[dict]:
        """Serve one session; returns the harness summary, or None on abort."""
        self._handshake(reader, writer, initiate_handshake)
        chat_tools = to_chat_tools(self.wire_tools)
        prompt = self.endpoint.system_prompt or default_prompt(self.env_kind)
        transcript = [{"role": "system", "content": prompt}]

        while True:
            message = _read(reader)
            if message is None:
                return None
            if message.get("kind") == "session_end":
                self.summary = message.get("payload", {})
                return self.summary
            if message.get("kind") != "observation":
                continue
            observation = message.get("payload", {})
            transcript.append({"role": "user", "content": _observation_text(observation)})

            try:
                reply, elapsed_us = self.client.complete(transcript, chat_tools)
            except EndpointError as exc:
                _send(
                    writer,
                    {
                        "kind": "policy_output",
                        "session_id": message.get("session_id", "adapter"),
                        "seq": message["seq"],
                        "payload": {
                            "observation_seq": observation.get("seq", message["seq"]),
                            "declared_gen_time_us": exc.elapsed_us,
                            "body": f"Endpoint error: {exc}",
                            "tool_call": None,
                        },
                    },
                )
                return None  # closing the stream makes the harness record policy_error

            transcript.append(reply)
            tool_calls = reply.get("tool_calls") or []
            tool_call = from_chat_tool_call(tool_calls[0]) if tool_calls else None
            self.declared_gen_times_us.append(elapsed_us)
            _send(
                writer,
                {
                    "kind": "policy_output",
                    "session_id": message.get("session_id", "adapter"),
                    "seq": message["seq"],
                    "payload": {
                        "observation_seq": observation.get("seq", message["seq"]),
                        "declared_gen_time_us": elapsed_us,
                        "body": reply.get("content") or "",
                        "tool_call": tool_call,
                    },
                },
            )


def attach(endpoint: EndpointConfig, transport: str) -> Adapter:
    """Connect to the harness and serve one session.

    transport: "tcp:HOST:PORT" (client initiates the handshake) or "stdio"
    (the harness spawned us and initiates).
    """
    adapter = Adapter(endpoint)
    if transport == "stdio":
        adapter.run(sys.stdin.buffer, sys.stdout.buffer, initiate_handshake=False)
        return adapter
    if transport.startswith("tcp:"):
        _, host, port = transport.split(":", 2)
        with socket.create_connection((host, int(port))) as conn:
            reader = conn.makefile("rb")
            writer = conn.makefile("wb")
            adapter.run(reader, writer, initiate_handshake=True)
        return adapter
    raise ValueError(f"unknown transport {transport!r} (use 'stdio' or 'tcp:HOST:PORT')")
