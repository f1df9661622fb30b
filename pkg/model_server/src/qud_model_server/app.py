"""FastAPI application implementing the backend wire contract.

Responses carry the contract fields plus optional ``notes``; clients that
only know the base contract ignore the extras.  Error mapping: 422 for
malformed requests or inputs, 503 when the endpoint's model is not
loaded, 413 when an input exceeds the model window.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from qud_model_server import __version__
from qud_model_server.bundle import ENDPOINTS, LoadedModels, ModelBundle, load_models
from qud_model_server.modeling import ContextTooLong, MalformedInput


class AnchorRequest(BaseModel):
    encoding: str
    n: int = Field(ge=1)
    answer_index: int = Field(ge=2)


class AnchorResponse(BaseModel):
    anchor_index: int
    scores: "list[float] | None" = None
    notes: "list[str] | None" = None


class GenerateRequest(BaseModel):
    prompt: str
    num_samples: int = Field(default=10, ge=1)
    top_p: float = Field(default=0.9, gt=0.0, le=1.0)
    seed: "int | None" = None


class GenerateResponse(BaseModel):
    questions: list[str]
    notes: "list[str] | None" = None


class RerankRequest(BaseModel):
    question: str
    anchor_text: str
    answer_text: str


class RerankResponse(BaseModel):
    score: float


class NerRequest(BaseModel):
    tokens: list[str]


class WireSpan(BaseModel):
    token_start: int
    token_end: int
    entity_type: str


class NerResponse(BaseModel):
    spans: list[WireSpan]


class HealthResponse(BaseModel):
    status: str
    model_ids: dict[str, str]
    special_tokens: "dict[str, dict[str, int]] | None" = None
    problems: "dict[str, str] | None" = None
    quality_banner: "str | None" = None
    version: str = __version__


def _require(models: LoadedModels, endpoint: str):
    handle = models.handle_for(endpoint)
    if handle is None:
        raise HTTPException(
            status_code=503,
            detail={
                "type": "model_unavailable",
                "endpoint": endpoint,
                "reason": models.problems.get(endpoint, "not loaded"),
            },
        )
    return handle


def create_app(models: "LoadedModels | None" = None,
               bundle: "ModelBundle | None" = None) -> FastAPI:
    if models is None:
        models = load_models(bundle or ModelBundle.from_env())
    app = FastAPI(title="qud model server", version=__version__)

    @app.exception_handler(ContextTooLong)
    def context_too_long(request, exc: ContextTooLong):
        from fastapi.responses import JSONResponse

        return JSONResponse(
            status_code=413,
            content={"detail": {
                "type": "context_too_long",
                "measured_tokens": exc.measured,
                "window": exc.window,
                "message": str(exc),
            }},
        )

    @app.exception_handler(MalformedInput)
    def malformed_input(request, exc: MalformedInput):
        from fastapi.responses import JSONResponse

        return JSONResponse(
            status_code=422,
            content={"detail": {"type": "malformed_input", "message": str(exc)}},
        )

    @app.post("/anchor", response_model=AnchorResponse, response_model_exclude_none=True)
    def anchor(request: AnchorRequest) -> AnchorResponse:
        predictor = _require(models, "anchor")
        prediction = predictor.predict(request.encoding, request.n, request.answer_index)
        return AnchorResponse(
            anchor_index=prediction.anchor_index,
            scores=prediction.scores,
            notes=prediction.notes or None,
        )

    @app.post("/generate", response_model=GenerateResponse,
              response_model_exclude_none=True)
    def generate(request: GenerateRequest) -> GenerateResponse:
        sampler = _require(models, "generate")
        if request.num_samples > models.bundle.max_samples:
            raise HTTPException(
                status_code=422,
                detail={
                    "type": "num_samples_too_large",
                    "limit": models.bundle.max_samples,
                },
            )
        seed = request.seed if request.seed is not None else models.bundle.seed
        sampled = sampler.sample(request.prompt, request.num_samples,
                                 request.top_p, seed)
        return GenerateResponse(questions=sampled.questions, notes=sampled.notes or None)

    @app.post("/rerank", response_model=RerankResponse)
    def rerank(request: RerankRequest) -> RerankResponse:
        reranker = _require(models, "rerank")
        return RerankResponse(
            score=reranker.score(request.question, request.anchor_text,
                                 request.answer_text)
        )

    @app.post("/ner", response_model=NerResponse)
    def ner(request: NerRequest) -> NerResponse:
        tagger = _require(models, "ner")
        return NerResponse(spans=[WireSpan(**span) for span in tagger.tag(request.tokens)])

    @app.get("/health", response_model=HealthResponse, response_model_exclude_none=True)
    def health() -> HealthResponse:
        banner = None
        if models.bundle.quality_unverified:
            banner = ("quality unverified: serving base or fallback checkpoints, "
                      "not fine-tuned ones")
        return HealthResponse(
            status="degraded" if models.degraded else "ok",
            model_ids={name: models.model_ids.get(name, "unavailable")
                       for name in ENDPOINTS},
            special_tokens=models.special_tokens or None,
            problems=models.problems or None,
            quality_banner=banner,
        )

    return app
