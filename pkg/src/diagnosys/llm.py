"""Language-model plumbing: prompt templates, extraction, KB validation.

Two extraction routes share one contract.  The offline route (default,
and the only one exercised in tests) scans normalized input against the
KB synonym lexicon with a greedy longest-match sweep.  The live route
sends a rendered prompt to an HTTP chat endpoint and splits the reply
into candidate phrases.  Both routes then pass every candidate through
KB validation, so nothing a model hallucinates can reach the scoring
engine: a phrase either resolves to a KB symptom (exactly, or
semantically at the configured threshold) or it is rejected.
"""

from __future__ import annotations

import logging
import os
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

from .embed import VectorIndex
from .engine import MatchResult, match_symptom
from .errors import LlmError, MissingSlot, ProviderUnavailable
from .kb import KnowledgeBase
from .text import normalize_input

logger = logging.getLogger(__name__)

SLOTS = ("context", "patient_text", "state_summary")

TEMPLATE_IDS = (
    "symptom_extraction",
    "followup_extraction",
    "normalization",
    "question_generation",
    "test_question",
    "test_interpretation",
    "risk_factor",
    "final_synthesis",
)


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str


def _t(template_id: str, body: str) -> PromptTemplate:
    return PromptTemplate(template_id=template_id, body=body.strip() + "\n")


TEMPLATES: dict[str, PromptTemplate] = {t.template_id: t for t in (
    _t("symptom_extraction", """
Relevant reference material:
{context}

The patient said:
{patient_text}

Current consultation state:
{state_summary}

List every distinct symptom the patient mentioned, one per line, using
short clinical phrases. Output only the list."""),
    _t("followup_extraction", """
Reference material:
{context}

Earlier findings:
{state_summary}

The patient's follow-up message:
{patient_text}

List any new symptoms mentioned in the follow-up, one per line. Ignore
symptoms already recorded. Output only the list."""),
    _t("normalization", """
Reference vocabulary:
{context}

Consultation state:
{state_summary}

Map each of these patient phrases to its standard clinical term:
{patient_text}

Output one standard term per line, in the same order."""),
    _t("question_generation", """
Reference material:
{context}

Consultation state:
{state_summary}

Patient context:
{patient_text}

Write one short, plain-language yes/no question asking whether the
patient has the target symptom. Output only the question."""),
    _t("test_question", """
Reference material:
{context}

Consultation state:
{state_summary}

Patient context:
{patient_text}

Write one short question asking the patient for the numeric result of
the target medical test, naming its unit. Output only the question."""),
    _t("test_interpretation", """
Reference material:
{context}

Consultation state:
{state_summary}

Reported result:
{patient_text}

State in one short sentence whether this result supports or argues
against the candidate condition, and why."""),
    _t("risk_factor", """
Reference material:
{context}

Consultation state:
{state_summary}

Patient context:
{patient_text}

Write one short, non-judgmental yes/no question about the target risk
factor. Output only the question."""),
    _t("final_synthesis", """
Reference material:
{context}

Full consultation state:
{state_summary}

Patient context:
{patient_text}

Write a short, calm summary for the patient: the most likely condition,
why, which conditions were ruled out, and sensible next steps. Do not
state a definitive diagnosis."""),
)}

_SLOT_RE = re.compile(r"\{([a-z_]+)\}")


def render_prompt(template_id: str, slots: dict[str, str]) -> str:
    """Fill a template; every slot named in the body must be bound.

    Rendering is deterministic: same template and slots, same bytes.
    """
    if template_id not in TEMPLATES:
        raise LlmError(f"unknown template {template_id!r}")
    body = TEMPLATES[template_id].body
    needed = set(_SLOT_RE.findall(body))
    for name in needed:
        if name not in slots:
            raise MissingSlot(name, template_id)
    return body.format(**{k: slots[k] for k in needed})


# -- providers --------------------------------------------------------------

class ChatProvider(Protocol):
    def complete(self, prompt: str) -> str: ...


@dataclass
class LlmConfig:
    mode: str = "offline"  # "offline" | "live"
    base_url: str = ""
    model: str = "default"
    temperature: float = 0.3
    max_tokens: int = 50
    timeout: float = 10.0
    retries: int = 3
    token_env: str = "DIAGNOSYS_LLM_TOKEN"

    def __post_init__(self) -> None:
        if self.mode not in ("offline", "live"):
            raise ValueError(f"mode must be 'offline' or 'live', got {self.mode!r}")
        if self.retries < 1:
            raise ValueError("retries must be at least 1")
        if self.mode == "live" and not self.base_url:
            raise ValueError("live mode requires base_url")


BACKOFF_BASE_S = 0.25
BACKOFF_FACTOR = 2.0


class HttpChatProvider:
    """POSTs {base_url}/chat with retry and exponential backoff.

    The bearer token, if any, comes from the environment variable named
    by config.token_env and is never logged.
    """

    def __init__(self, config: LlmConfig, client: Optional[object] = None,
                 sleeper: Callable[[float], None] = time.sleep):
        import httpx

        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleeper

    def complete(self, prompt: str) -> str:
        cfg = self.config
        headers = {}
        token = os.environ.get(cfg.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {
            "model": cfg.model,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
            "messages": [{"role": "user", "content": prompt}],
        }
        last_error: Exception | None = None
        for attempt in range(cfg.retries):
            try:
                resp = self._client.post(f"{cfg.base_url.rstrip('/')}/chat",
                                         json=body, headers=headers)
                resp.raise_for_status()
                return str(resp.json()["content"])
            except Exception as exc:  # transport, HTTP status, or shape
                last_error = exc
                if attempt < cfg.retries - 1:
                    self._sleep(BACKOFF_BASE_S * (BACKOFF_FACTOR ** attempt))
        raise ProviderUnavailable(
            f"chat endpoint failed after {cfg.retries} attempts: {last_error}")


# -- validation -------------------------------------------------------------

@dataclass
class ExtractionResult:
    raw_phrases: list[str] = field(default_factory=list)
    validated: list[tuple[str, MatchResult]] = field(default_factory=list)
    rejected: list[str] = field(default_factory=list)


def best_match(phrase: str, kb: KnowledgeBase, index: VectorIndex,
               threshold: float) -> Optional[MatchResult]:
    results = match_symptom(phrase, kb, index, threshold)
    top = results[0]
    return top if top.kind != "none" else None


def validate_against_kb(phrases: list[str], kb: KnowledgeBase, index: VectorIndex,
                        threshold: float) -> ExtractionResult:
    """Keep phrases that resolve to a KB symptom; everything else is rejected."""
    result = ExtractionResult(raw_phrases=list(phrases))
    for phrase in phrases:
        match = best_match(phrase, kb, index, threshold)
        if match is None:
            result.rejected.append(phrase)
            logger.debug("rejected phrase with no KB resolution: %r", phrase)
        else:
            result.validated.append((phrase, match))
    return result


def normalize_terms(phrases: list[str], kb: KnowledgeBase, index: VectorIndex,
                    threshold: float = 0.55) -> list[str]:
    """Map free phrases to canonical symptom names, dropping what cannot map.

    Output order follows input order with duplicates removed.
    """
    out: list[str] = []
    for phrase in phrases:
        match = best_match(phrase, kb, index, threshold)
        if match is None:
            logger.debug("cannot normalize %r, dropped", phrase)
            continue
        if match.canonical not in out:
            out.append(match.canonical)
    return out


# -- extraction routes ------------------------------------------------------

class OfflineExtractor:
    """Greedy longest-match scan of normalized input against the KB lexicon.

    Deterministic and dependency-free; each consumed token span yields at
    most one phrase, and scanning resumes after the consumed span.
    """

    mode = "offline"

    def __init__(self, kb: KnowledgeBase, index: VectorIndex, threshold: float = 0.55):
        self.kb = kb
        self.index = index
        self.threshold = threshold
        self._token_map: dict[tuple[str, ...], str] = {
            tuple(key.split()): key for key in kb.synonym_map}
        self._max_len = max((len(t) for t in self._token_map), default=1)

    def extract(self, text: str, context: str = "",
                state_summary: str = "") -> ExtractionResult:
        tokens = normalize_input(text)
        phrases: list[str] = []
        i = 0
        while i < len(tokens):
            hit = None
            limit = min(self._max_len, len(tokens) - i)
            for length in range(limit, 0, -1):
                candidate = tuple(tokens[i : i + length])
                if candidate in self._token_map:
                    hit = (length, self._token_map[candidate])
                    break
            if hit is None:
                i += 1
            else:
                phrases.append(hit[1])
                i += hit[0]
        return validate_against_kb(phrases, self.kb, self.index, self.threshold)


_LIST_LINE = re.compile(r"^\s*(?:[-*•]|\d+[.)])?\s*(.+?)\s*$")


class LiveExtractor:
    """Prompt a chat provider, then KB-validate whatever comes back."""

    mode = "live"

    def __init__(self, kb: KnowledgeBase, index: VectorIndex, provider: ChatProvider,
                 threshold: float = 0.55, template_id: str = "symptom_extraction"):
        self.kb = kb
        self.index = index
        self.provider = provider
        self.threshold = threshold
        self.template_id = template_id

    @staticmethod
    def split_phrases(response: str) -> list[str]:
        phrases: list[str] = []
        for line in response.splitlines():
            for part in re.split(r"[,;]", line):
                m = _LIST_LINE.match(part)
                if m and m.group(1):
                    phrase = m.group(1).strip().lower()
                    if phrase and phrase not in phrases:
                        phrases.append(phrase)
        return phrases

    def extract(self, text: str, context: str = "",
                state_summary: str = "") -> ExtractionResult:
        prompt = render_prompt(self.template_id, {
            "context": context, "patient_text": text, "state_summary": state_summary})
        response = self.provider.complete(prompt)
        phrases = self.split_phrases(response)
        return validate_against_kb(phrases, self.kb, self.index, self.threshold)


def extract_symptoms(text: str, kb: KnowledgeBase, index: VectorIndex,
                     provider: Optional[ChatProvider] = None, threshold: float = 0.55,
                     context: str = "", state_summary: str = "",
                     template_id: str = "symptom_extraction") -> ExtractionResult:
    """One-shot extraction: offline lexicon scan, or live when a provider is given."""
    if provider is None:
        return OfflineExtractor(kb, index, threshold).extract(text, context, state_summary)
    return LiveExtractor(kb, index, provider, threshold, template_id).extract(
        text, context, state_summary)
