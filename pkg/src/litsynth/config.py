"""Engine configuration, loaded from a JSON file.

Secrets never live in the file itself: provider entries name an environment
variable (``api_key_env``) and the key is read from the process environment.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, model_validator


class ProviderConfig(BaseModel):
    kind: Literal["http", "hashed", "overlap", "scripted"] = "http"
    endpoint: str | None = None
    model: str | None = None
    dim: int = Field(default=64, ge=1)  # hashed embedder only
    fixture: str | None = None  # scripted chat only
    api_key_env: str | None = None

    @model_validator(mode="after")
    def _check_kind_args(self):
        if self.kind == "http" and not self.endpoint:
            raise ValueError("http providers need an endpoint")
        if self.kind == "scripted" and not self.fixture:
            raise ValueError("scripted providers need a fixture file")
        return self

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env) if self.api_key_env else None


class SourcesConfig(BaseModel):
    dense: bool = True
    scholarly: bool = False
    web: bool = False


class SearchEndpointConfig(BaseModel):
    endpoint: str
    limit: int = Field(default=10, ge=0)
    domains: list[str] = Field(default_factory=list)
    api_key_env: str | None = None

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_env) if self.api_key_env else None


class EngineConfig(BaseModel):
    corpus_dir: str | None = None
    index_path: str | None = None
    sessions_dir: str = "sessions"

    embed: ProviderConfig = ProviderConfig(kind="hashed")
    rerank: ProviderConfig = ProviderConfig(kind="overlap")
    lm: ProviderConfig = ProviderConfig(kind="http", endpoint="http://localhost:8001/v1/chat/completions")
    judge: ProviderConfig | None = None

    top_n: int = Field(default=10, ge=1)
    per_paper_cap: int = Field(default=3, ge=1)
    citation_blend_lambda: float = Field(default=0.1, ge=0.0)
    temperature: float = Field(default=0.7, ge=0.0, le=2.0)
    max_answer_tokens: int = Field(default=3000, ge=1)
    max_feedback_tokens: int = Field(default=1000, ge=1)
    max_feedback_items: int = Field(default=3, ge=0, le=3)
    k_dense: int = Field(default=100, ge=0)
    max_keywords: int = Field(default=3, ge=0)

    sources: SourcesConfig = SourcesConfig()
    scholarly: SearchEndpointConfig | None = None
    web: SearchEndpointConfig | None = None

    retries: int = Field(default=2, ge=0)
    backoff_s: float = Field(default=0.5, ge=0.0)
    timeout_s: float = Field(default=30.0, gt=0.0)
    max_in_flight: int = Field(default=8, ge=1)

    def snapshot(self) -> dict:
        """Config as recorded in session transcripts (no secrets involved)."""
        return self.model_dump(exclude_none=True)


def load_config(path: str | Path) -> EngineConfig:
    return EngineConfig.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))
