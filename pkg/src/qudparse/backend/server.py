"""HTTP surface exposing any in-process backend on the wire contract.

Used to serve the deterministic mock for hermetic multi-client setups;
model-hosting services implement the same routes.
"""

from __future__ import annotations

from fastapi import FastAPI

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
)


def create_app(backend: Backend) -> FastAPI:
    app = FastAPI(title="qudparse backend", version="0.1.0")

    @app.post("/anchor", response_model=AnchorResponse)
    def anchor(request: AnchorRequest) -> AnchorResponse:
        return backend.anchor(request)

    @app.post("/generate", response_model=GenerateResponse)
    def generate(request: GenerateRequest) -> GenerateResponse:
        return backend.generate(request)

    @app.post("/rerank", response_model=RerankResponse)
    def rerank(request: RerankRequest) -> RerankResponse:
        return backend.rerank(request)

    @app.post("/ner", response_model=NerResponse)
    def ner(request: NerRequest) -> NerResponse:
        return backend.ner(request)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return backend.health()

    return app
