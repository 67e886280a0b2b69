"""Bundled mock LLM server for integration tests.

Serves a fixed script of assistant messages from a chat-completions-shaped
endpoint and records every request body it receives, so tests can assert on
the advertised tool schemas and the conversation transcript.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class _QuietServer(ThreadingHTTPServer):
    def handle_error(self, request, client_address):
        pass  # clients may hang up mid-response (timeout tests)


class MockLLMServer:
    """Scripted chat-completions endpoint on an ephemeral local port.

    script: assistant message dicts, e.g.
      {"role": "assistant", "content": "...", "tool_calls": [...]}
    Messages are served in order; the last one repeats if the script runs
    out. latency_s adds a real delay so measured generation times are
    clearly nonzero.
    """

    def __init__(self, script: list[dict], latency_s: float = 0.0):
        if not script:
            raise ValueError("script must not be empty")
        self.script = [dict(m, role=m.get("role", "assistant")) for m in script]
        self.latency_s = latency_s
        self.requests: list[dict] = []
        self._index = 0
        self._lock = threading.Lock()

        mock = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802 (http.server API)
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                with mock._lock:
                    mock.requests.append(body)
                    message = mock.script[min(mock._index, len(mock.script) - 1)]
                    mock._index += 1
                if mock.latency_s:
                    time.sleep(mock.latency_s)
                if not self.path.endswith("/chat/completions"):
                    self.send_error(404)
                    return
                payload = json.dumps({"choices": [{"message": message}]}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):  # quiet
                pass

        self._server = _QuietServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def start(self) -> "MockLLMServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "MockLLMServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
