"""Policy-client SDK for the timely harness.

Adapts a chat-completions LLM endpoint into a harness policy: it speaks the
"timely/1" newline-delimited JSON protocol (TCP or stdio), forwards
observations to the endpoint with the harness tool surface translated into
chat tool schemas, and stamps each reply's measured wall-clock latency into
declared_gen_time_us.
"""

from .adapter import Adapter, attach, from_chat_tool_call, to_chat_tools
from .config import EndpointConfig
from .llm import ChatClient, EndpointError
from .mockserver import MockLLMServer

__all__ = [
    "Adapter",
    "ChatClient",
    "EndpointConfig",
    "EndpointError",
    "MockLLMServer",
    "attach",
    "from_chat_tool_call",
    "to_chat_tools",
]

__version__ = "0.1.0"
