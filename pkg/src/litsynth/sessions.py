"""Append-only on-disk store for session transcripts.

One JSON file per session id. Records are immutable: a second write to the
same id fails, and reads hand back the stored bytes untouched.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .errors import SessionNotFound


class SessionStore:
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise SessionNotFound(f"invalid session id {session_id!r}")
        return self.directory / f"{session_id}.json"

    def save(self, session_id: str, record: dict) -> Path:
        path = self._path(session_id)
        payload = json.dumps(record, indent=2, ensure_ascii=False).encode("utf-8")
        # O_EXCL guarantees per-key exclusivity under concurrent writers
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o644)
        try:
            os.write(fd, payload)
        finally:
            os.close(fd)
        return path

    def load_bytes(self, session_id: str) -> bytes:
        path = self._path(session_id)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise SessionNotFound(f"unknown session id {session_id!r}") from None

    def load(self, session_id: str) -> dict:
        return json.loads(self.load_bytes(session_id))

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()
