"""HTTP face of the consultation engine.

One process serves many sessions from an in-memory store; each session
wraps a Consultation and is touched under its own lock, so a slow
client never blocks another session.  The KB and the symptom index are
loaded once and shared read-only.
"""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .dialogue import Consultation
from .engine import EngineConfig, build_symptom_index
from .errors import (
    CapacityExceeded,
    EmptyEvidence,
    NonFiniteValue,
    StaleQuestion,
    UnknownSession,
    WrongPhase,
)
from .kb import KnowledgeBase, load_knowledge_base

DEFAULT_TTL_SECONDS = 30 * 60
DEFAULT_CAPACITY = 10_000

# localhost dev origins of the bundled web UI; override via create_app.
DEFAULT_CORS_ORIGINS = [
    "http://localhost:5173",
    "http://127.0.0.1:5173",
]


@dataclass
class Session:
    id: str
    consultation: Consultation
    created_at: float
    last_active: float
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def state(self):
        return self.consultation.state

    @property
    def config(self) -> EngineConfig:
        return self.consultation.state.config


class SessionStore:
    """Session map with lazy TTL expiry and a hard capacity.

    The store lock only guards the map itself; consultation work happens
    under the per-session lock.  Expiry is lazy: expired entries are
    dropped on the next create or lookup, and an expired id behaves
    exactly like one that never existed.
    """

    def __init__(self, ttl_seconds: float = DEFAULT_TTL_SECONDS,
                 capacity: int = DEFAULT_CAPACITY,
                 clock: Callable[[], float] = time.monotonic):
        if ttl_seconds <= 0:
            raise ValueError("ttl_seconds must be positive")
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.ttl_seconds = ttl_seconds
        self.capacity = capacity
        self._clock = clock
        self._lock = threading.RLock()
        self._sessions: dict[str, Session] = {}

    def _purge(self, now: float) -> None:
        # caller holds self._lock
        dead = [sid for sid, s in self._sessions.items()
                if now - s.last_active > self.ttl_seconds]
        for sid in dead:
            del self._sessions[sid]

    def create(self, consultation: Consultation) -> Session:
        with self._lock:
            now = self._clock()
            self._purge(now)
            if len(self._sessions) >= self.capacity:
                raise CapacityExceeded(
                    f"session store is full ({self.capacity} active sessions)")
            sid = secrets.token_hex(16)
            while sid in self._sessions:
                sid = secrets.token_hex(16)
            session = Session(id=sid, consultation=consultation,
                              created_at=now, last_active=now)
            self._sessions[sid] = session
            return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            now = self._clock()
            session = self._sessions.get(session_id)
            if session is None or now - session.last_active > self.ttl_seconds:
                self._sessions.pop(session_id, None)
                raise UnknownSession(f"no active session {session_id!r}")
            session.last_active = now
            return session

    def active_count(self) -> int:
        with self._lock:
            self._purge(self._clock())
            return len(self._sessions)


# -- request bodies ----------------------------------------------------------

class CreateSessionBody(BaseModel):
    text: Optional[str] = None


class MessageBody(BaseModel):
    text: str


class AnswerBody(BaseModel):
    question_id: str
    answer: str


class TestResultBody(BaseModel):
    test_id: str
    value: Optional[Union[float, str]] = None


# -- error mapping -----------------------------------------------------------

_STATUS = [
    (UnknownSession, 404, "unknown_session"),
    (WrongPhase, 409, "wrong_phase"),
    (StaleQuestion, 409, "stale_question"),
    (NonFiniteValue, 422, "non_finite_value"),
    (EmptyEvidence, 422, "empty_evidence"),
    (CapacityExceeded, 503, "capacity_exceeded"),
    (ValueError, 422, "invalid_value"),
]


def _error_body(exc: Exception) -> Optional[JSONResponse]:
    for cls, status, code in _STATUS:
        if isinstance(exc, cls):
            return JSONResponse(status_code=status,
                                content={"error": code, "detail": str(exc)})
    return None


def create_app(kb: Optional[KnowledgeBase] = None,
               config: Optional[EngineConfig] = None,
               store: Optional[SessionStore] = None,
               cors_origins: Optional[list[str]] = None) -> FastAPI:
    """Build the service with its KB, index, and store wired in."""
    kb = kb or load_knowledge_base()
    config = config or EngineConfig()
    store = store or SessionStore()
    index = build_symptom_index(kb)

    app = FastAPI(title="diagnosys", docs_url=None, redoc_url=None)
    app.state.kb = kb
    app.state.store = store
    app.state.engine_config = config
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins if cors_origins is not None else DEFAULT_CORS_ORIGINS,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    known = tuple(cls for cls, _, _ in _STATUS)

    @app.exception_handler(Exception)
    async def _domain_errors(request, exc):  # noqa: ARG001 - FastAPI signature
        body = _error_body(exc)
        if body is not None:
            return body
        raise exc

    for cls in known:
        app.add_exception_handler(cls, _domain_errors)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "kb_diseases": len(kb.diseases)}

    @app.get("/api/v1/kb/diseases")
    def kb_diseases():
        return {"diseases": [{"name": d.name, "category": d.category}
                             for d in kb.diseases]}

    @app.post("/api/v1/sessions", status_code=201)
    def create_session(body: Optional[CreateSessionBody] = None):
        consultation = Consultation(kb, index=index, config=config)
        session = store.create(consultation)
        with session.lock:
            out = consultation.open(body.text if body else None)
        return {"session_id": session.id,
                "phase": consultation.state.phase,
                **out}

    @app.post("/api/v1/sessions/{session_id}/message")
    def post_message(session_id: str, body: MessageBody):
        session = store.get(session_id)
        with session.lock:
            return session.consultation.message(body.text)

    @app.post("/api/v1/sessions/{session_id}/answer")
    def post_answer(session_id: str, body: AnswerBody):
        session = store.get(session_id)
        with session.lock:
            return session.consultation.answer(body.question_id, body.answer)

    @app.post("/api/v1/sessions/{session_id}/test-result")
    def post_test_result(session_id: str, body: TestResultBody):
        session = store.get(session_id)
        with session.lock:
            return session.consultation.submit_test(body.test_id, body.value)

    @app.get("/api/v1/sessions/{session_id}/state")
    def get_state(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return session.consultation.current()

    @app.get("/api/v1/sessions/{session_id}/attribution")
    def get_attribution(session_id: str):
        session = store.get(session_id)
        with session.lock:
            return session.consultation.attribution().to_dict()

    @app.get("/api/v1/sessions/{session_id}/report")
    def get_report(session_id: str):
        session = store.get(session_id)
        with session.lock:
            report = session.consultation.report()
            return {"report": report.to_dict(), "text": report.to_text()}

    return app
