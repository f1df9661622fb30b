"""HTTP client for remote backends.

Each call posts one JSON body and decodes one JSON reply; failures are
categorized (transport, timeout, malformed body, protocol violation) and
carry the endpoint plus a per-call request id.  Retries, when configured,
resend byte-identical bodies.  The underlying connection pool supports
concurrent in-flight requests from multiple threads.
"""

from __future__ import annotations

import uuid
from typing import Type, TypeVar

import httpx
from pydantic import BaseModel, ValidationError

from qudparse.backend.protocol import (
    AnchorRequest,
    AnchorResponse,
    GenerateRequest,
    GenerateResponse,
    HealthResponse,
    NerRequest,
    NerResponse,
    ProtocolViolation,
    RerankRequest,
    RerankResponse,
    check_anchor_response,
    check_generate_response,
    check_ner_response,
    check_rerank_response,
)
from qudparse.core import QudParseError

R = TypeVar("R", bound=BaseModel)

DEFAULT_TIMEOUT_S = 60.0


class BackendError(QudParseError):
    """Base for backend-call failures; knows where and which call."""

    def __init__(self, message: str, *, endpoint: "str | None" = None,
                 request_id: "str | None" = None):
        self.endpoint = endpoint
        self.request_id = request_id
        where = f" [{endpoint}" + (f", request {request_id}" if request_id else "") + "]" \
            if endpoint else ""
        super().__init__(message + where)


class TransportError(BackendError):
    pass


class BackendTimeoutError(BackendError):
    pass


class MalformedResponseError(BackendError):
    pass


class ProtocolViolationError(BackendError):
    pass


class HttpBackend:
    """Synchronous client for a backend served over HTTP.

    ``http_client`` may be injected (e.g. an ASGI test client); otherwise
    a pooled client with the given timeout is created.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float = DEFAULT_TIMEOUT_S,
        retries: int = 0,
        http_client: "httpx.Client | None" = None,
    ):
        if retries < 0:
            raise ValueError("retries must be >= 0")
        self.base_url = base_url.rstrip("/")
        self.retries = retries
        self._client = http_client or httpx.Client(timeout=timeout)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "HttpBackend":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _roundtrip(
        self, endpoint: str, body: "bytes | None", response_model: Type[R],
        request_id: "str | None" = None,
    ) -> R:
        request_id = request_id or uuid.uuid4().hex
        url = f"{self.base_url}{endpoint}"
        last_error: "BackendError | None" = None
        for _ in range(self.retries + 1):
            try:
                if body is None:
                    reply = self._client.get(url, headers={"x-request-id": request_id})
                else:
                    reply = self._client.post(
                        url,
                        content=body,
                        headers={
                            "content-type": "application/json",
                            "x-request-id": request_id,
                        },
                    )
            except httpx.TimeoutException as exc:
                last_error = BackendTimeoutError(
                    f"timed out: {exc}", endpoint=endpoint, request_id=request_id
                )
                continue
            except httpx.HTTPError as exc:
                last_error = TransportError(
                    f"transport failure: {exc}", endpoint=endpoint, request_id=request_id
                )
                continue
            if reply.status_code != 200:
                raise TransportError(
                    f"HTTP {reply.status_code}: {reply.text[:200]}",
                    endpoint=endpoint, request_id=request_id,
                )
            try:
                return response_model.model_validate_json(reply.content)
            except ValidationError as exc:
                raise MalformedResponseError(
                    f"undecodable body: {exc.errors()[:3]}",
                    endpoint=endpoint, request_id=request_id,
                )
        assert last_error is not None
        raise last_error

    def _call(self, endpoint, request, response_model, check):
        body = request.model_dump_json().encode("utf-8")
        request_id = uuid.uuid4().hex
        response = self._roundtrip(endpoint, body, response_model, request_id)
        try:
            return check(response, request)
        except ProtocolViolation as exc:
            raise ProtocolViolationError(str(exc), endpoint=endpoint,
                                         request_id=request_id)

    def anchor(self, request: AnchorRequest) -> AnchorResponse:
        return self._call("/anchor", request, AnchorResponse, check_anchor_response)

    def generate(self, request: GenerateRequest) -> GenerateResponse:
        return self._call("/generate", request, GenerateResponse, check_generate_response)

    def rerank(self, request: RerankRequest) -> RerankResponse:
        return self._call("/rerank", request, RerankResponse, check_rerank_response)

    def ner(self, request: NerRequest) -> NerResponse:
        return self._call("/ner", request, NerResponse, check_ner_response)

    def health(self) -> HealthResponse:
        return self._roundtrip("/health", None, HealthResponse)
