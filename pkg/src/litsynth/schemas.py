"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class QueryOverrides(BaseModel):
    top_n: int | None = Field(default=None, ge=1)
    temperature: float | None = Field(default=None, ge=0.0, le=2.0)
    max_answer_tokens: int | None = Field(default=None, ge=1)
    max_feedback_tokens: int | None = Field(default=None, ge=1)
    max_feedback_items: int | None = Field(default=None, ge=0, le=3)


class QueryRequest(BaseModel):
    question: str
    overrides: QueryOverrides | None = None


class CitationOut(BaseModel):
    marker: int
    passage_id: str
    paper_id: str
    title: str
    passage_text: str
    url: str | None = None
    provenance: str


class QueryResponse(BaseModel):
    session_id: str
    answer: str
    citations: list[CitationOut]


class HealthResponse(BaseModel):
    status: str
    papers: int
    passages: int
    indexed: int
