"""Model backend interfaces: deterministic mock, HTTP client, tracing."""
from .base import (
    AUDIO_KINDS,
    ENDPOINTS,
    PROTOCOL_VERSION,
    AlignmentResult,
    Backend,
    JudgeExchange,
    LocalSpan,
    SynthesisRequest,
)
from .client import HTTPBackendClient
from .mock import MockBackend
from .trace import TraceRecorder, TraceReplayBackend

__all__ = [
    "AUDIO_KINDS",
    "ENDPOINTS",
    "PROTOCOL_VERSION",
    "AlignmentResult",
    "Backend",
    "HTTPBackendClient",
    "JudgeExchange",
    "LocalSpan",
    "MockBackend",
    "SynthesisRequest",
    "TraceRecorder",
    "TraceReplayBackend",
]
