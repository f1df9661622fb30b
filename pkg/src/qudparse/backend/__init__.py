"""Wire contract between the parser and model backends, plus a
deterministic in-process mock and an HTTP client/server pair."""

from qudparse.backend.client import (
    BackendError,
    BackendTimeoutError,
    HttpBackend,
    MalformedResponseError,
    ProtocolViolationError,
    TransportError,
)
from qudparse.backend.mock import MockBackend
from qudparse.backend.protocol import (
    AnchorRequest,
    AnchorResponse,
    Backend,
    GenerateRequest,
    GenerateResponse,
    HealthResponse,
    NerRequest,
    NerResponse,
    RerankRequest,
    RerankResponse,
    WireSpan,
)
from qudparse.backend.server import create_app

__all__ = [
    "AnchorRequest",
    "AnchorResponse",
    "Backend",
    "BackendError",
    "BackendTimeoutError",
    "GenerateRequest",
    "GenerateResponse",
    "HealthResponse",
    "HttpBackend",
    "MalformedResponseError",
    "MockBackend",
    "NerRequest",
    "NerResponse",
    "ProtocolViolationError",
    "RerankRequest",
    "RerankResponse",
    "TransportError",
    "WireSpan",
    "create_app",
]
