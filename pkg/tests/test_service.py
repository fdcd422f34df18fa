from __future__ import annotations

import re

import pytest
from fastapi.testclient import TestClient

from diagnosys.engine import EngineConfig
from diagnosys.service import SessionStore, create_app

FAST = EngineConfig(min_questions=2, min_symptoms=2, max_questions=5)


@pytest.fixture(scope="module")
def client(kb):
    app = create_app(kb=kb, config=FAST)
    with TestClient(app) as c:
        yield c


def _fresh_client(kb, **kwargs):
    return TestClient(create_app(kb=kb, **kwargs))


# -- plumbing ----------------------------------------------------------------

def test_healthz(client):
    resp = client.get("/healthz")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "kb_diseases": 14}


def test_disease_listing(client, kb):
    resp = client.get("/api/v1/kb/diseases")
    assert resp.status_code == 200
    listing = resp.json()["diseases"]
    assert [d["name"] for d in listing] == kb.names()
    assert all(d["category"] for d in listing)


def test_session_ids_are_opaque_hex(client):
    resp = client.post("/api/v1/sessions", json={})
    assert resp.status_code == 201
    assert re.fullmatch(r"[0-9a-f]{32}", resp.json()["session_id"])


def test_cors_reflects_configured_origin(kb):
    client = _fresh_client(kb, cors_origins=["http://ui.example"])
    resp = client.get("/healthz", headers={"Origin": "http://ui.example"})
    assert resp.headers["access-control-allow-origin"] == "http://ui.example"
    other = client.get("/healthz", headers={"Origin": "http://evil.example"})
    assert "access-control-allow-origin" not in other.headers


# -- session lifecycle -------------------------------------------------------

def test_create_without_text_greets(client):
    body = client.post("/api/v1/sessions", json={}).json()
    assert body["phase"] == "symptom_elicitation"
    assert body["extraction"] is None
    assert body["next"]["kind"] == "open"


def test_create_with_text_extracts_and_asks(client):
    body = client.post("/api/v1/sessions",
                       json={"text": "I have a fever and a headache"}).json()
    confirmed = {c["canonical"] for c in body["extraction"]["confirmed"]}
    assert confirmed == {"fever", "headache"}
    assert body["snapshot"]["symptoms_confirmed"] == 2
    assert body["next"]["kind"] == "question"


def test_message_with_no_matches_keeps_session_live(client):
    sid = client.post("/api/v1/sessions", json={}).json()["session_id"]
    body = client.post(f"/api/v1/sessions/{sid}/message",
                       json={"text": "honestly no idea how to describe it"}).json()
    assert body["extraction"]["confirmed"] == []
    # the engine still drives: a concrete question comes back
    assert body["next"]["kind"] == "question"


def test_state_is_idempotent_read(client):
    sid = client.post("/api/v1/sessions",
                      json={"text": "fever"}).json()["session_id"]
    first = client.get(f"/api/v1/sessions/{sid}/state")
    second = client.get(f"/api/v1/sessions/{sid}/state")
    assert first.status_code == 200
    assert first.json() == second.json()


def test_answer_advances_question_flow(client):
    created = client.post("/api/v1/sessions", json={"text": "fever"}).json()
    sid = created["session_id"]
    question = created["next"]["question"]
    body = client.post(f"/api/v1/sessions/{sid}/answer",
                       json={"question_id": question["question_id"],
                             "answer": "yes"}).json()
    assert body["snapshot"]["symptoms_confirmed"] == 2
    assert body["next"]["kind"] in ("question", "test", "risk", "report_ready")


# -- error contract ----------------------------------------------------------

def _assert_error(resp, status, code):
    assert resp.status_code == status
    body = resp.json()
    assert body["error"] == code
    assert isinstance(body["detail"], str) and body["detail"]


def test_unknown_session_is_404(client):
    _assert_error(client.get("/api/v1/sessions/deadbeef/state"),
                  404, "unknown_session")
    _assert_error(client.post("/api/v1/sessions/deadbeef/message",
                              json={"text": "hi"}),
                  404, "unknown_session")


def test_stale_question_is_409(client):
    created = client.post("/api/v1/sessions", json={"text": "fever"}).json()
    sid = created["session_id"]
    question = created["next"]["question"]
    client.post(f"/api/v1/sessions/{sid}/answer",
                json={"question_id": question["question_id"], "answer": "no"})
    _assert_error(client.post(f"/api/v1/sessions/{sid}/answer",
                              json={"question_id": question["question_id"],
                                    "answer": "no"}),
                  409, "stale_question")


def test_wrong_phase_is_409(client):
    sid = client.post("/api/v1/sessions", json={"text": "fever"}).json()["session_id"]
    _assert_error(client.post(f"/api/v1/sessions/{sid}/test-result",
                              json={"test_id": "anything", "value": 1.0}),
                  409, "wrong_phase")
    _assert_error(client.get(f"/api/v1/sessions/{sid}/report"),
                  409, "wrong_phase")


def test_bad_answer_word_is_422(client):
    created = client.post("/api/v1/sessions", json={"text": "fever"}).json()
    sid = created["session_id"]
    question = created["next"]["question"]
    _assert_error(client.post(f"/api/v1/sessions/{sid}/answer",
                              json={"question_id": question["question_id"],
                                    "answer": "maybe"}),
                  422, "invalid_value")


def test_non_numeric_test_values_are_422(client, kb):
    def drive_to_tests():
        created = client.post("/api/v1/sessions",
                              json={"text": "fever and headache"}).json()
        sid = created["session_id"]
        nxt = created["next"]
        while nxt["kind"] == "question":
            nxt = client.post(
                f"/api/v1/sessions/{sid}/answer",
                json={"question_id": nxt["question"]["question_id"],
                      "answer": "no"}).json()["next"]
        return sid, nxt

    sid, nxt = drive_to_tests()
    assert nxt["kind"] == "test"
    test_id = nxt["test"]["test_id"]
    for bad in ("abc", "nan", "inf"):
        _assert_error(client.post(f"/api/v1/sessions/{sid}/test-result",
                                  json={"test_id": test_id, "value": bad}),
                      422, "non_finite_value")
    # the test is still outstanding after the rejects
    assert client.get(f"/api/v1/sessions/{sid}/state").json()["next"]["test"][
        "test_id"] == test_id


def test_attribution_before_any_evidence_is_422(client):
    sid = client.post("/api/v1/sessions", json={}).json()["session_id"]
    _assert_error(client.get(f"/api/v1/sessions/{sid}/attribution"),
                  422, "empty_evidence")


def test_attribution_columns_sum_to_scores(client):
    sid = client.post("/api/v1/sessions",
                      json={"text": "fever and chills"}).json()["session_id"]
    body = client.get(f"/api/v1/sessions/{sid}/attribution").json()
    state = client.get(f"/api/v1/sessions/{sid}/state").json()
    scores = {h["disease"]: h["score"] for h in state["snapshot"]["hypotheses"]}
    for j, disease in enumerate(body["columns"]):
        total = sum(row[j] for row in body["cells"])
        assert total == pytest.approx(scores[disease], abs=1e-9)


def test_capacity_limit_is_503(kb):
    client = _fresh_client(kb, store=SessionStore(capacity=1))
    assert client.post("/api/v1/sessions", json={}).status_code == 201
    _assert_error(client.post("/api/v1/sessions", json={}),
                  503, "capacity_exceeded")


# -- expiry ------------------------------------------------------------------

def test_idle_sessions_expire_but_activity_refreshes(kb):
    now = [0.0]
    store = SessionStore(ttl_seconds=60.0, clock=lambda: now[0])
    client = _fresh_client(kb, store=store)

    kept = client.post("/api/v1/sessions", json={}).json()["session_id"]
    idle = client.post("/api/v1/sessions", json={}).json()["session_id"]

    now[0] = 50.0  # touch one session before the deadline
    assert client.get(f"/api/v1/sessions/{kept}/state").status_code == 200

    now[0] = 105.0  # idle is long dead; kept is only 55s idle
    _assert_error(client.get(f"/api/v1/sessions/{idle}/state"),
                  404, "unknown_session")
    assert client.get(f"/api/v1/sessions/{kept}/state").status_code == 200

    now[0] = 170.0  # now kept has idled past its refreshed deadline too
    _assert_error(client.get(f"/api/v1/sessions/{kept}/state"),
                  404, "unknown_session")
    assert store.active_count() == 0
