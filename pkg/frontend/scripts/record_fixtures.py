#!/usr/bin/env python3
"""Record wire fixtures for the frontend test suite.

Drives a real in-process service instance through one full consultation,
in exactly the request order the browser controller produces (every
mutating call is followed by an attribution refresh), and snapshots each
request/response pair into tests/fixtures/recorded.json.  The test suite
replays the file through a strict sequential mock, so regenerating it is
the only way the frontend contract ever changes.

Run from the repository root with the package installed:

    python3 frontend/scripts/record_fixtures.py
"""

import json
import pathlib
import sys

from fastapi.testclient import TestClient

from diagnosys.engine import EngineConfig
from diagnosys.service import create_app

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "recorded.json"

# Short flow so the fixture stays readable; the wire shapes are identical
# to the default configuration.
CONFIG = {"min_questions": 2, "min_symptoms": 2, "max_questions": 4}

OPENING = "I have a fever and a bad headache, and my joints ache"


class Recorder:
    def __init__(self, client):
        self.client = client
        self.exchanges = []

    def go(self, method, path, body=None):
        if method == "GET":
            resp = self.client.get(path)
        else:
            resp = self.client.post(path, json=body)
        self.exchanges.append({
            "request": {"method": method, "path": path, "body": body},
            "response": {"status": resp.status_code, "body": resp.json()},
        })
        return resp.status_code, resp.json()


def record_flow(rec):
    """The happy path, with one stale answer and one unparseable value."""
    rec.go("GET", "/healthz")
    _, created = rec.go("POST", "/api/v1/sessions", {})
    sid = created["session_id"]
    base = f"/api/v1/sessions/{sid}"

    def attribution():
        rec.go("GET", f"{base}/attribution")

    attribution()  # brand-new session: 422 empty_evidence, rendered as a placeholder

    _, out = rec.go("POST", f"{base}/message", {"text": OPENING})
    attribution()

    first_qid = out["next"]["question"]["question_id"]
    _, out = rec.go("POST", f"{base}/answer",
                    {"question_id": first_qid, "answer": "yes"})
    attribution()

    # double-click race: the first question is no longer outstanding
    rec.go("POST", f"{base}/answer", {"question_id": first_qid, "answer": "yes"})
    rec.go("GET", f"{base}/state")  # the client resyncs after a stale answer

    _, out = rec.go("POST", f"{base}/answer",
                    {"question_id": out["next"]["question"]["question_id"],
                     "answer": "no"})
    attribution()

    sent_number = False
    fumbled = False
    while out["next"]["kind"] != "report_ready":
        nxt = out["next"]
        if nxt["kind"] == "test":
            tid = nxt["test"]["test_id"]
            if not sent_number:
                value = "120"
                sent_number = True
            elif not fumbled:
                # a typo gets a 422 and leaves the same test outstanding
                rec.go("POST", f"{base}/test-result",
                       {"test_id": tid, "value": "abc"})
                fumbled = True
                value = "unknown"
            else:
                value = "unknown"
            _, out = rec.go("POST", f"{base}/test-result",
                            {"test_id": tid, "value": value})
        elif nxt["kind"] == "risk":
            answer = "yes" if nxt["risk"]["question_id"] == "r1" else "no"
            _, out = rec.go("POST", f"{base}/answer",
                            {"question_id": nxt["risk"]["question_id"],
                             "answer": answer})
        else:
            raise SystemExit(f"unexpected next kind {nxt['kind']!r}")
        attribution()

    rec.go("GET", f"{base}/report")


def record_errors(rec):
    """One short session covering the error table the UI must render."""
    rec.go("GET", "/api/v1/sessions/00000000000000000000000000000000/state")

    _, created = rec.go("POST", "/api/v1/sessions", {})
    sid = created["session_id"]
    base = f"/api/v1/sessions/{sid}"

    _, out = rec.go("POST", f"{base}/message",
                    {"text": "fever and a headache"})
    qid = out["next"]["question"]["question_id"]
    rec.go("POST", f"{base}/answer", {"question_id": qid, "answer": "maybe"})
    _, out = rec.go("POST", f"{base}/answer", {"question_id": qid, "answer": "yes"})
    rec.go("POST", f"{base}/answer",
           {"question_id": out["next"]["question"]["question_id"], "answer": "no"})
    # now in the test phase: free text is no longer accepted
    rec.go("POST", f"{base}/message", {"text": "also chills"})


def main():
    app = create_app(config=EngineConfig(**CONFIG))
    client = TestClient(app, raise_server_exceptions=False)

    flow = Recorder(client)
    record_flow(flow)
    errors = Recorder(client)
    record_errors(errors)

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({
        "engine_config": CONFIG,
        "flow": flow.exchanges,
        "errors": errors.exchanges,
    }, indent=1) + "\n")
    statuses = [e["response"]["status"] for e in flow.exchanges]
    print(f"wrote {OUT} ({len(flow.exchanges)} flow + "
          f"{len(errors.exchanges)} error exchanges; statuses {sorted(set(statuses))})")


if __name__ == "__main__":
    sys.exit(main())
