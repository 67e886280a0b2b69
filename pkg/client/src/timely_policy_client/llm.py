"""Minimal chat-completions client with wall-clock latency measurement."""

from __future__ import annotations

import os
import time

import httpx

from .config import EndpointConfig


class EndpointError(Exception):
    """Endpoint failure; carries the wall time already spent on the attempt."""

    def __init__(self, message: str, elapsed_us: int):
        super().__init__(message)
        self.elapsed_us = elapsed_us


class ChatClient:
    """POSTs to {base_url}/chat/completions and measures each call's latency.

    No retries: a silent retry would inflate the measured generation time
    the adapter reports to the harness.
    """

    def __init__(self, endpoint: EndpointConfig):
        self.endpoint = endpoint
        headers = {}
        api_key = os.environ.get(endpoint.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._http = httpx.Client(
            base_url=endpoint.base_url,
            timeout=endpoint.request_timeout_s,
            headers=headers,
        )

    def complete(self, messages: list[dict], tools: list[dict]) -> tuple[dict, int]:
        """One completion request. Returns (assistant message, elapsed microseconds).

        elapsed is the measured wall time of the HTTP round trip and is
        always at least 1 microsecond.
        """
        payload = {"model": self.endpoint.model_name, "messages": messages}
        if tools:
            payload["tools"] = tools
        start = time.perf_counter_ns()

        def elapsed_us() -> int:
            return max(1, (time.perf_counter_ns() - start) // 1000)

        try:
            response = self._http.post("/chat/completions", json=payload)
            response.raise_for_status()
            body = response.json()
            message = body["choices"][0]["message"]
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise EndpointError(f"endpoint failure: {exc}", elapsed_us()) from exc
        return message, elapsed_us()

    def close(self) -> None:
        self._http.close()
