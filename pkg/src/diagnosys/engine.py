"""Scoring engine: symptom matching, evidence bookkeeping, confidence, ranking.

Evidence model
--------------
Confirming a symptom adds strength * weight to the score of every disease
listing it (strength 1.0 for an exact phrase hit, 0.6 for a semantic hit)
and bumps that disease's matched count.  Denying a symptom moves 0.8 *
weight from the score into the penalty accumulator of every listing
disease.  A supportive test outcome adds a flat 0.5; a confirmed risk
factor adds its own weight.  Every mutation is appended to a transcript
with explicit per-disease deltas, so final scores are exactly the sum of
the logged deltas in order.

Ranking blends two views: a local score normalized against the current
best, and a global lexical similarity between the centroid of confirmed
symptom embeddings and each disease's full profile centroid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .embed import VectorIndex, build_index, cosine_similarity, embed_text
from .errors import NoHypotheses, NonFiniteValue
from .kb import KnowledgeBase
from .text import normalize_input, phrase_key  # re-exported: part of the engine surface

__all__ = [
    "PHASE_ELICITATION", "PHASE_TESTS", "PHASE_CONCLUDED",
    "EXACT_STRENGTH", "SEMANTIC_STRENGTH", "DENIAL_FACTOR", "TEST_SUPPORT_BOOST",
    "EngineConfig", "MatchResult", "ConfirmedSymptom", "DeniedSymptom", "Hypothesis",
    "ConsultationState", "build_symptom_index", "match_symptom",
    "disease_confidence", "overall_confidence", "hybrid_rank",
    "normalize_input", "phrase_key",
]

PHASE_ELICITATION = "symptom_elicitation"
PHASE_TESTS = "test_evaluation"
PHASE_CONCLUDED = "concluded"

EXACT_STRENGTH = 1.0
SEMANTIC_STRENGTH = 0.6
DENIAL_FACTOR = 0.8
TEST_SUPPORT_BOOST = 0.5


@dataclass
class EngineConfig:
    """Tunable thresholds and ranking weights for one consultation."""

    min_questions: int = 10
    min_symptoms: int = 8
    max_questions: int = 20
    sim_threshold: float = 0.55
    confidence_early_stop: Optional[float] = None
    global_weight: float = 0.7
    local_weight: float = 0.3
    top_k_focus: int = 3

    def __post_init__(self) -> None:
        if not (0 <= self.min_questions <= self.max_questions):
            raise ValueError("need 0 <= min_questions <= max_questions")
        if self.min_symptoms < 1:
            raise ValueError("min_symptoms must be positive")
        if not (0.0 < self.sim_threshold < 1.0):
            raise ValueError("sim_threshold must lie in (0, 1)")
        if self.confidence_early_stop is not None and not (
                0.0 < self.confidence_early_stop < 1.0):
            raise ValueError("confidence_early_stop must lie in (0, 1) or be None")
        if not (0.0 <= self.global_weight <= 1.0 and 0.0 <= self.local_weight <= 1.0):
            raise ValueError("ranking weights must lie in [0, 1]")
        if abs(self.global_weight + self.local_weight - 1.0) > 1e-9:
            raise ValueError("ranking weights must sum to 1")
        if self.top_k_focus < 1:
            raise ValueError("top_k_focus must be positive")


@dataclass(frozen=True)
class MatchResult:
    phrase: str
    kind: str  # "exact" | "semantic" | "none"
    disease: Optional[str]
    canonical: Optional[str]
    strength: float
    similarity: float


@dataclass(frozen=True)
class ConfirmedSymptom:
    canonical: str
    strength: float
    weight: float  # largest declaring weight, for display
    source: str


@dataclass(frozen=True)
class DeniedSymptom:
    canonical: str
    penalty: float  # largest applied penalty, for display


@dataclass
class Hypothesis:
    disease: str
    score: float = 0.0
    matched: int = 0
    penalty: float = 0.0
    confidence: float = 0.0
    rank_score: float = 0.0
    eliminated: bool = False
    elimination_reason: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "disease": self.disease,
            "score": self.score,
            "matched": self.matched,
            "penalty": self.penalty,
            "confidence": self.confidence,
            "rank_score": self.rank_score,
            "eliminated": self.eliminated,
            "elimination_reason": self.elimination_reason,
        }


# -- matching ---------------------------------------------------------------

def build_symptom_index(kb: KnowledgeBase) -> VectorIndex:
    """Index every canonical and synonym phrase key for semantic lookup."""
    return build_index([(key, key) for key in sorted(kb.synonym_map)])


def match_symptom(phrase: str, kb: KnowledgeBase, index: VectorIndex,
                  threshold: float = 0.55) -> list[MatchResult]:
    """Resolve a user phrase against the KB.

    Exact key equality wins outright at strength 1.0.  Otherwise every
    indexed phrase with cosine similarity >= threshold contributes a
    semantic match at strength 0.6 for each disease declaring it, deduped
    per (disease, canonical) keeping the best similarity.  No hit at all
    yields a single kind="none" result so callers always get a list.
    """
    key = phrase_key(phrase)
    pairs = kb.synonym_map.get(key)
    if pairs:
        return [MatchResult(phrase=phrase, kind="exact", disease=d, canonical=c,
                            strength=EXACT_STRENGTH, similarity=1.0)
                for d, c in pairs]
    if key and len(index):
        best: dict[tuple[str, str], float] = {}
        for entry_key, sim in index.scan(embed_text(key), threshold):
            for d, c in kb.synonym_map[entry_key]:
                prev = best.get((d, c))
                if prev is None or sim > prev:
                    best[(d, c)] = sim
        if best:
            results = [MatchResult(phrase=phrase, kind="semantic", disease=d,
                                   canonical=c, strength=SEMANTIC_STRENGTH,
                                   similarity=sim)
                       for (d, c), sim in best.items()]
            results.sort(key=lambda r: (-r.similarity, r.disease, r.canonical))
            return results
    return [MatchResult(phrase=phrase, kind="none", disease=None, canonical=None,
                        strength=0.0, similarity=0.0)]


# -- confidence calculus ----------------------------------------------------

def disease_confidence(score: float, matched: int, penalty: float) -> float:
    """Per-disease confidence in [0, 0.95].

    A saturating transform of the raw score, lifted by how many distinct
    symptoms matched and dragged down by accumulated denial penalty:

        base    = 1 - exp(-0.15 * score)
        support = min(ln(1 + matched) / 4.0, 0.5)
        doubt   = min(0.15 * penalty, 0.6)
        result  = clamp(0.9 * (base + support - doubt), 0, 0.95)
    """
    if not (math.isfinite(score) and math.isfinite(penalty)):
        raise NonFiniteValue("score and penalty must be finite")
    if matched < 0:
        raise ValueError("matched count cannot be negative")
    base = 1.0 - math.exp(-0.15 * score)
    support = min(math.log(1.0 + matched) / 4.0, 0.5)
    doubt = min(0.15 * penalty, 0.6)
    raw = base + support - doubt
    return max(0.0, min(0.9 * raw, 0.95))


def overall_confidence(hypotheses: list[Hypothesis]) -> float:
    """Session-level confidence in [0, 0.9), from the score leader's margin.

    margin is the leader's relative lead over the runner-up: 0 when the
    leader has no positive score, 1 when there is no positive runner-up.
    """
    if not hypotheses:
        raise NoHypotheses("no hypotheses to assess")
    live = [h for h in hypotheses if not h.eliminated]
    if not live:
        # every candidate ruled out: zero confidence, not an error, so the
        # inconclusive report path stays reachable
        return 0.0
    ordered = sorted(live, key=lambda h: (-h.score, h.disease))
    lead = ordered[0]
    second_score = ordered[1].score if len(ordered) > 1 else 0.0
    if lead.score <= 0.0:
        margin = 0.0
    elif second_score > 0.0:
        margin = (lead.score - second_score) / lead.score
    else:
        margin = 1.0
    raw = (0.10 * lead.matched + 0.25 * margin + 0.12 * lead.score
           - min(0.05 * lead.penalty, 0.5))
    return max(0.0, math.tanh(raw) * 0.9)


# -- ranking ----------------------------------------------------------------

def hybrid_rank(state: "ConsultationState",
                config: Optional[EngineConfig] = None) -> list[Hypothesis]:
    """Order hypotheses by blended global/local rank score.

    Eliminated hypotheses always sink below every live one regardless of
    rank score; ties break by confidence descending, then name ascending.
    Each hypothesis's rank_score field is updated in place.
    """
    cfg = config or state.config
    hyps = list(state.hypotheses.values())
    if not hyps:
        raise NoHypotheses("state has no hypotheses")
    best_positive = max((h.score for h in hyps if h.score > 0.0), default=0.0)
    for h in hyps:
        local = (max(h.score, 0.0) / best_positive) if best_positive > 0.0 else 0.0
        h.rank_score = (cfg.global_weight * state.global_similarity(h.disease)
                        + cfg.local_weight * local)
    hyps.sort(key=lambda h: (h.eliminated, -h.rank_score, -h.confidence, h.disease))
    return hyps


# -- consultation state -----------------------------------------------------

class ConsultationState:
    """All mutable facts for one consultation.

    Single-owner: nothing here is thread-safe.  The service serializes
    access per session; library callers drive one state from one thread.
    """

    def __init__(self, kb: KnowledgeBase, index: Optional[VectorIndex] = None,
                 config: Optional[EngineConfig] = None):
        self.kb = kb
        self.index = index if index is not None else build_symptom_index(kb)
        self.config = config or EngineConfig()
        self.phase = PHASE_ELICITATION
        self.hypotheses: dict[str, Hypothesis] = {
            name: Hypothesis(disease=name) for name in kb.names()}
        self.confirmed: dict[str, ConfirmedSymptom] = {}
        self.denied: dict[str, DeniedSymptom] = {}
        self.asked: list[dict] = []
        self.asked_canonicals: set[str] = set()
        self.test_outcomes: list = []
        self.risk_answers: list[dict] = []
        self.asked_risks: set[tuple[str, str]] = set()
        self.overall_confidence = 0.0
        self.transcript: list[dict] = []
        self._seq = 0
        self._profile_centroids = {
            d.name: self._centroid([s.canonical for s in d.symptoms])
            for d in kb.diseases}
        self._ranking: list[Hypothesis] = []
        self._refresh()

    # -- transcript ---------------------------------------------------------

    def log(self, event: str, **payload) -> dict:
        record = {"seq": self._seq, "event": event, **payload}
        self._seq += 1
        self.transcript.append(record)
        return record

    # -- geometry -----------------------------------------------------------

    @staticmethod
    def _centroid(canonicals: list[str]) -> np.ndarray:
        vecs = [embed_text(phrase_key(c)) for c in canonicals]
        return np.mean(vecs, axis=0) if vecs else np.zeros(256)

    def global_similarity(self, disease: str) -> float:
        """Cosine between confirmed-symptom centroid and the disease profile
        centroid; 0.0 before anything is confirmed."""
        if not self.confirmed:
            return 0.0
        confirmed_centroid = self._centroid(list(self.confirmed))
        return cosine_similarity(confirmed_centroid, self._profile_centroids[disease])

    # -- evidence application ----------------------------------------------

    def confirm_symptom(self, canonical: str, strength: float,
                        source: str = "reported") -> dict:
        """Apply a confirmation.  Re-confirming is a no-op; confirming a
        previously denied symptom reverses the denial first (latest answer
        wins) and flags the contradiction on the returned event."""
        listing = self.kb.diseases_listing(canonical)
        if not listing:
            raise ValueError(f"unknown canonical symptom {canonical!r}")
        if strength <= 0.0:
            raise ValueError("confirmation strength must be positive")
        if canonical in self.confirmed:
            return self.log("note", detail=f"repeat confirmation of {canonical!r} ignored")
        contradicted = canonical in self.denied
        if contradicted:
            self.log("contradiction", canonical=canonical,
                     detail="previously denied, latest answer wins")
            self._undo_deny(canonical)
        deltas: dict[str, float] = {}
        for d in listing:
            w = d.symptom(canonical).weight
            delta = strength * w
            h = self.hypotheses[d.name]
            h.score += delta
            h.matched += 1
            deltas[d.name] = delta
        self.confirmed[canonical] = ConfirmedSymptom(
            canonical=canonical, strength=strength,
            weight=max(d.symptom(canonical).weight for d in listing), source=source)
        event = self.log("confirm", canonical=canonical, strength=strength,
                         source=source, deltas=deltas, contradicted=contradicted)
        self._refresh()
        return event

    def deny_symptom(self, canonical: str) -> dict:
        """Apply a denial.  Re-denying is a no-op; denying a previously
        confirmed symptom reverses the confirmation first."""
        listing = self.kb.diseases_listing(canonical)
        if not listing:
            raise ValueError(f"unknown canonical symptom {canonical!r}")
        if canonical in self.denied:
            return self.log("note", detail=f"repeat denial of {canonical!r} ignored")
        contradicted = canonical in self.confirmed
        if contradicted:
            self.log("contradiction", canonical=canonical,
                     detail="previously confirmed, latest answer wins")
            self._undo_confirm(canonical)
        deltas: dict[str, float] = {}
        for d in listing:
            pen = DENIAL_FACTOR * d.symptom(canonical).weight
            h = self.hypotheses[d.name]
            h.score -= pen
            h.penalty += pen
            deltas[d.name] = -pen
        self.denied[canonical] = DeniedSymptom(
            canonical=canonical,
            penalty=max(DENIAL_FACTOR * d.symptom(canonical).weight for d in listing))
        event = self.log("deny", canonical=canonical, deltas=deltas,
                         contradicted=contradicted)
        self._refresh()
        return event

    def _undo_confirm(self, canonical: str) -> None:
        record = self.confirmed.pop(canonical)
        deltas: dict[str, float] = {}
        for d in self.kb.diseases_listing(canonical):
            delta = record.strength * d.symptom(canonical).weight
            h = self.hypotheses[d.name]
            h.score -= delta
            h.matched -= 1
            deltas[d.name] = -delta
        self.log("undo_confirm", canonical=canonical, strength=record.strength,
                 deltas=deltas)

    def _undo_deny(self, canonical: str) -> None:
        self.denied.pop(canonical)
        deltas: dict[str, float] = {}
        for d in self.kb.diseases_listing(canonical):
            pen = DENIAL_FACTOR * d.symptom(canonical).weight
            h = self.hypotheses[d.name]
            h.score += pen
            h.penalty -= pen
            deltas[d.name] = pen
        self.log("undo_deny", canonical=canonical, deltas=deltas)

    def apply_test_boost(self, disease: str, test_id: str) -> dict:
        """Flat score boost for a supportive test outcome."""
        h = self.hypotheses[disease]
        h.score += TEST_SUPPORT_BOOST
        event = self.log("test_boost", disease=disease, test_id=test_id,
                         deltas={disease: TEST_SUPPORT_BOOST})
        self._refresh()
        return event

    def eliminate(self, disease: str, reason: str) -> dict:
        h = self.hypotheses[disease]
        h.eliminated = True
        h.elimination_reason = reason
        event = self.log("elimination", disease=disease, reason=reason)
        self._refresh()
        return event

    def apply_risk_answer(self, disease: str, description: str, weight: float,
                          answer: str) -> dict:
        """Record a risk factor answer; only a yes moves the score."""
        deltas: dict[str, float] = {}
        if answer == "yes":
            h = self.hypotheses[disease]
            h.score += weight
            deltas[disease] = weight
        self.risk_answers.append({"disease": disease, "description": description,
                                  "weight": weight, "answer": answer})
        event = self.log("risk_answer", disease=disease, description=description,
                         weight=weight, answer=answer, deltas=deltas)
        self._refresh()
        return event

    # -- derived views ------------------------------------------------------

    def _refresh(self) -> None:
        for h in self.hypotheses.values():
            h.confidence = disease_confidence(h.score, h.matched, h.penalty)
        self._ranking = hybrid_rank(self, self.config)
        self.overall_confidence = overall_confidence(list(self.hypotheses.values()))

    def ranked(self) -> list[Hypothesis]:
        return list(self._ranking)

    def top_hypotheses(self, k: Optional[int] = None,
                       live_only: bool = True) -> list[Hypothesis]:
        k = k if k is not None else self.config.top_k_focus
        pool = [h for h in self._ranking if not (live_only and h.eliminated)]
        return pool[:k]

    def questions_asked(self) -> int:
        return len(self.asked)

    def snapshot(self) -> dict:
        """JSON-ready view of the full session state."""
        return {
            "phase": self.phase,
            "overall_confidence": self.overall_confidence,
            "questions_asked": self.questions_asked(),
            "symptoms_confirmed": len(self.confirmed),
            "symptoms_denied": len(self.denied),
            "hypotheses": [h.to_dict() for h in self._ranking],
            "confirmed": [
                {"canonical": c.canonical, "strength": c.strength,
                 "weight": c.weight, "source": c.source}
                for c in self.confirmed.values()],
            "denied": [
                {"canonical": d.canonical, "penalty": d.penalty}
                for d in self.denied.values()],
        }


def replay_scores(transcript: list[dict]) -> dict[str, float]:
    """Recompute final scores by summing logged per-disease deltas in order.

    This is the bookkeeping identity the transcript guarantees: incremental
    state and a replay of the event log agree exactly, not just closely.
    """
    totals: dict[str, float] = {}
    for event in transcript:
        for disease, delta in event.get("deltas", {}).items():
            totals[disease] = totals.get(disease, 0.0) + delta
    return totals
