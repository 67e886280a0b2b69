"""Endpoint configuration for the chat-completions client."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional
from urllib.parse import urlparse


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to reach the LLM endpoint.

    The API key is read from the environment variable named by
    ``api_key_env`` and never stored in the config itself.
    """

    base_url: str
    model_name: str
    api_key_env: str = "TIMELY_API_KEY"
    request_timeout_s: float = 60.0
    system_prompt: Optional[str] = None  # None: pick a default per task family

    def __post_init__(self) -> None:
        parsed = urlparse(self.base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValueError(f"base_url must be an http(s) URL, got {self.base_url!r}")
        if self.request_timeout_s <= 0:
            raise ValueError("request_timeout_s must be positive")
        if not self.model_name:
            raise ValueError("model_name must be non-empty")
