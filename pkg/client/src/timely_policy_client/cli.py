"""Console entry point: bridge an LLM endpoint to a running harness."""

from __future__ import annotations

import argparse
import json
import sys

from .adapter import attach
from .config import EndpointConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timely-policy",
        description="Adapt a chat-completions endpoint into a timely harness policy",
    )
    parser.add_argument("--endpoint", required=True, help="endpoint base URL")
    parser.add_argument("--model", required=True, help="model name to request")
    parser.add_argument(
        "--connect",
        default="stdio",
        help="harness address as HOST:PORT, or 'stdio' (default) when spawned by the harness",
    )
    parser.add_argument(
        "--api-key-env",
        default="TIMELY_API_KEY",
        help="environment variable holding the API key (never passed on the command line)",
    )
    parser.add_argument("--timeout", type=float, default=60.0, help="request timeout, seconds")
    parser.add_argument("--system-prompt", default=None, help="override the default prompt")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    endpoint = EndpointConfig(
        base_url=args.endpoint,
        model_name=args.model,
        api_key_env=args.api_key_env,
        request_timeout_s=args.timeout,
        system_prompt=args.system_prompt,
    )
    transport = args.connect if args.connect == "stdio" else f"tcp:{args.connect}"
    adapter = attach(endpoint, transport)
    if adapter.summary is not None and transport != "stdio":
        print(json.dumps(adapter.summary, sort_keys=True))
    return 0 if adapter.summary is not None else 1


if __name__ == "__main__":
    sys.exit(main())
