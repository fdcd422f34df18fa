from __future__ import annotations

import pytest

from diagnosys.errors import LlmError, MissingSlot, ProviderUnavailable
from diagnosys.llm import (
    HttpChatProvider,
    LiveExtractor,
    LlmConfig,
    OfflineExtractor,
    TEMPLATE_IDS,
    extract_symptoms,
    normalize_terms,
    render_prompt,
)

FULL_SLOTS = {"context": "ref", "patient_text": "I ache", "state_summary": "empty"}


# -- templates ---------------------------------------------------------------

def test_every_template_renders_with_full_slots():
    for template_id in TEMPLATE_IDS:
        text = render_prompt(template_id, FULL_SLOTS)
        assert "{" not in text
        assert text == render_prompt(template_id, FULL_SLOTS)  # deterministic


def test_render_substitutes_values():
    out = render_prompt("symptom_extraction",
                        {"context": "C1", "patient_text": "P2", "state_summary": "S3"})
    assert "C1" in out and "P2" in out and "S3" in out


def test_missing_slot_is_named():
    with pytest.raises(MissingSlot) as err:
        render_prompt("symptom_extraction", {"context": "x", "state_summary": "y"})
    assert err.value.slot == "patient_text"
    assert "symptom_extraction" in str(err.value)


def test_unknown_template_rejected():
    with pytest.raises(LlmError):
        render_prompt("weather_report", FULL_SLOTS)


# -- offline extraction ------------------------------------------------------

def test_offline_worked_example(kb, index):
    result = OfflineExtractor(kb, index).extract("I have a headache and a fever")
    assert result.raw_phrases == ["headache", "fever"]
    canonicals = {m.canonical for _, m in result.validated}
    assert canonicals == {"headache", "fever"}
    assert all(m.kind == "exact" for _, m in result.validated)
    assert result.rejected == []


def test_offline_prefers_longest_span(kb, index):
    # find a lexicon phrase with a shorter lexicon phrase nested inside it,
    # so greedy matching has something real to get wrong
    def subspans(key):
        toks = key.split()
        for i in range(len(toks)):
            for j in range(i + 1, len(toks) + 1):
                if (i, j) != (0, len(toks)):
                    yield " ".join(toks[i:j])

    multi = next(k for k in sorted(kb.synonym_map, key=lambda k: -len(k.split()))
                 if any(s in kb.synonym_map for s in subspans(k)))
    result = OfflineExtractor(kb, index).extract(multi)
    assert result.raw_phrases == [multi]


def test_offline_resumes_after_consumed_span(kb, index):
    result = OfflineExtractor(kb, index).extract("dry cough then later a headache")
    assert result.raw_phrases == ["dry cough", "headache"]


def test_offline_ignores_unknown_tokens(kb, index):
    result = OfflineExtractor(kb, index).extract("zxqv woozle framble")
    assert result.raw_phrases == []
    assert result.validated == []


# -- response splitting ------------------------------------------------------

def test_split_phrases_handles_list_markup():
    response = (
        "- Headache\n"
        "* Fever\n"
        "1. sore throat\n"
        "2) fatigue\n"
        "chills; night sweats, HEADACHE\n"
        "\n"
    )
    assert LiveExtractor.split_phrases(response) == [
        "headache", "fever", "sore throat", "fatigue", "chills", "night sweats"]


def test_split_phrases_empty_response():
    assert LiveExtractor.split_phrases("") == []
    assert LiveExtractor.split_phrases("\n\n  \n") == []


# -- live extraction ---------------------------------------------------------

class ScriptedProvider:
    def __init__(self, response: str):
        self.response = response
        self.prompts: list[str] = []

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        return self.response


def test_live_route_validates_model_output(kb, index):
    provider = ScriptedProvider("- fever\n- warp core misalignment\n- headache")
    result = LiveExtractor(kb, index, provider).extract(
        "feeling awful", context="ctx", state_summary="none yet")
    assert {m.canonical for _, m in result.validated} == {"fever", "headache"}
    assert result.rejected == ["warp core misalignment"]
    [prompt] = provider.prompts
    assert "feeling awful" in prompt
    assert "none yet" in prompt


def test_extract_symptoms_dispatches_on_provider(kb, index):
    offline = extract_symptoms("a headache", kb, index)
    assert [m.canonical for _, m in offline.validated] == ["headache"]

    provider = ScriptedProvider("fever")
    live = extract_symptoms("whatever", kb, index, provider=provider)
    assert provider.prompts  # the provider was actually consulted
    assert [m.canonical for _, m in live.validated] == ["fever"]


def test_normalize_terms_order_and_dedup(kb, index):
    out = normalize_terms(["pyrexia", "fever", "headache", "framblewort"],
                          kb, index)
    assert out == ["fever", "headache"]


# -- config ------------------------------------------------------------------

def test_offline_config_defaults():
    cfg = LlmConfig()
    assert cfg.mode == "offline"
    assert cfg.retries == 3


@pytest.mark.parametrize("kwargs", [
    {"mode": "psychic"},
    {"retries": 0},
    {"mode": "live"},  # no base_url
])
def test_config_rejections(kwargs):
    with pytest.raises(ValueError):
        LlmConfig(**kwargs)


# -- http provider -----------------------------------------------------------

class FakeResponse:
    def __init__(self, status: int, payload: dict):
        self.status = status
        self.payload = payload

    def raise_for_status(self):
        if self.status >= 400:
            raise RuntimeError(f"http {self.status}")

    def json(self):
        return self.payload


class FakeClient:
    def __init__(self, responses):
        self.responses = list(responses)
        self.calls: list[dict] = []

    def post(self, url, json=None, headers=None):
        self.calls.append({"url": url, "json": json, "headers": headers})
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def test_provider_retries_then_succeeds(monkeypatch):
    monkeypatch.delenv("DIAGNOSYS_LLM_TOKEN", raising=False)
    client = FakeClient([
        ConnectionError("refused"),
        FakeResponse(500, {}),
        FakeResponse(200, {"content": "fever"}),
    ])
    naps: list[float] = []
    provider = HttpChatProvider(
        LlmConfig(mode="live", base_url="http://llm.example/"),
        client=client, sleeper=naps.append)
    assert provider.complete("hello") == "fever"
    assert naps == [0.25, 0.5]  # exponential backoff between attempts
    assert len(client.calls) == 3
    assert client.calls[0]["url"] == "http://llm.example/chat"
    assert client.calls[0]["headers"] == {}
    assert client.calls[0]["json"]["messages"] == [
        {"role": "user", "content": "hello"}]


def test_provider_gives_up_after_retries(monkeypatch):
    monkeypatch.delenv("DIAGNOSYS_LLM_TOKEN", raising=False)
    client = FakeClient([ConnectionError("down")] * 3)
    naps: list[float] = []
    provider = HttpChatProvider(
        LlmConfig(mode="live", base_url="http://llm.example"),
        client=client, sleeper=naps.append)
    with pytest.raises(ProviderUnavailable):
        provider.complete("hello")
    assert len(client.calls) == 3
    assert naps == [0.25, 0.5]  # no sleep after the final failure


def test_provider_sends_bearer_token_from_env(monkeypatch):
    monkeypatch.setenv("DIAGNOSYS_LLM_TOKEN", "sekrit")
    client = FakeClient([FakeResponse(200, {"content": "ok"})])
    provider = HttpChatProvider(
        LlmConfig(mode="live", base_url="http://llm.example"),
        client=client, sleeper=lambda s: None)
    provider.complete("x")
    assert client.calls[0]["headers"] == {"Authorization": "Bearer sekrit"}


def test_malformed_payload_counts_as_failure(monkeypatch):
    monkeypatch.delenv("DIAGNOSYS_LLM_TOKEN", raising=False)
    client = FakeClient([
        FakeResponse(200, {"unexpected": "shape"}),
        FakeResponse(200, {"content": "recovered"}),
    ])
    provider = HttpChatProvider(
        LlmConfig(mode="live", base_url="http://llm.example"),
        client=client, sleeper=lambda s: None)
    assert provider.complete("x") == "recovered"
