"""FastAPI service wrapping the engine.

Endpoints: POST /v1/query, GET /v1/sessions/{id}, GET /v1/health.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .engine import Engine
from .errors import GenerationFailed, PoolEmpty, SessionNotFound, SourceUnavailable, TransportError
from .schemas import CitationOut, HealthResponse, QueryRequest, QueryResponse

logger = logging.getLogger(__name__)


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="litsynth", version="0.1.0")
    app.state.engine = engine

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.exception_handler(PoolEmpty)
    async def pool_empty(request: Request, exc: PoolEmpty):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(TransportError)
    async def backend_down(request: Request, exc: TransportError):
        return JSONResponse(status_code=503, content={"detail": str(exc)})

    @app.exception_handler(SourceUnavailable)
    async def source_down(request: Request, exc: SourceUnavailable):
        return JSONResponse(status_code=503, content={"detail": str(exc)})

    @app.exception_handler(GenerationFailed)
    async def generation_failed(request: Request, exc: GenerationFailed):
        return JSONResponse(status_code=502, content={"detail": str(exc)})

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(
            status="ok",
            papers=engine.store.paper_count,
            passages=engine.store.passage_count,
            indexed=len(engine.index) if engine.index is not None else 0,
        )

    @app.post("/v1/query", response_model=QueryResponse)
    def query(body: QueryRequest) -> QueryResponse:
        if not body.question.strip():
            return JSONResponse(status_code=400, content={"detail": "question must be non-empty"})
        overrides = (
            body.overrides.model_dump(exclude_none=True) if body.overrides is not None else {}
        )
        session = engine.run_query(body.question, overrides)
        return QueryResponse(
            session_id=session.session_id,
            answer=session.final.text,
            citations=[CitationOut(**c) for c in session.citations],
        )

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str) -> Response:
        try:
            raw = engine.sessions.load_bytes(session_id)
        except SessionNotFound as exc:
            return JSONResponse(status_code=404, content={"detail": str(exc)})
        # stored bytes returned untouched: records are immutable audit artifacts
        return Response(content=raw, media_type="application/json")

    return app
