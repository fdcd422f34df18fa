"""Dialogue policy: what to ask next, when to change phase, how to finish.

Phase one elicits symptoms with adaptive yes/no questions chosen by an
information heuristic over the current leading hypotheses.  Phase two
works through planned test criteria (decisive first), eliminating
hypotheses whose decisive tests come back against them, then asks about
the leader's risk factors, and finally synthesizes a deterministic
report with a full attribution of every score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .engine import (
    PHASE_CONCLUDED,
    PHASE_ELICITATION,
    PHASE_TESTS,
    ConsultationState,
    EngineConfig,
    build_symptom_index,
)
from .errors import (
    EmptyEvidence,
    NoHypotheses,
    NonFiniteValue,
    StaleQuestion,
    WrongPhase,
)
from .kb import KnowledgeBase, TestCriterion
from .llm import ExtractionResult, OfflineExtractor

UNKNOWN = "unknown"
ANSWERS = ("yes", "no", "unsure")


@dataclass(frozen=True)
class Question:
    question_id: str
    canonical: str
    prompt_text: str
    justification: str
    info_score: float

    def to_dict(self) -> dict:
        return {"question_id": self.question_id, "canonical": self.canonical,
                "prompt_text": self.prompt_text, "justification": self.justification,
                "info_score": self.info_score}


@dataclass(frozen=True)
class RiskQuestion:
    question_id: str
    disease: str
    description: str
    weight: float
    prompt_text: str

    def to_dict(self) -> dict:
        return {"question_id": self.question_id, "disease": self.disease,
                "description": self.description, "prompt_text": self.prompt_text}


@dataclass(frozen=True)
class TestOutcome:
    disease: str
    test_id: str
    value: Optional[float]
    verdict: str  # "supports" | "refutes" | "skipped"
    decisive_elimination: bool

    def to_dict(self) -> dict:
        return {"disease": self.disease, "test_id": self.test_id, "value": self.value,
                "verdict": self.verdict,
                "decisive_elimination": self.decisive_elimination}


# -- question selection -----------------------------------------------------

def select_next_question(state: ConsultationState) -> Optional[Question]:
    """Pick the unasked symptom with the best information score.

    Candidates come from the symptoms of the top-k live hypotheses; if
    those are exhausted the whole KB becomes the pool.  For a candidate
    listed by m of the k focus diseases with summed weight W the score is
    W * (k - m + 1) / k, so rare-but-heavy symptoms separate hypotheses
    better than symptoms every lead shares.  Ties break by the largest
    single-disease weight, then name.
    """
    cfg = state.config
    focus = state.top_hypotheses(cfg.top_k_focus)
    focus_records = [state.kb.by_name[h.disease] for h in focus]
    k = len(focus_records)
    unavailable = (state.asked_canonicals | set(state.confirmed) | set(state.denied))

    pool: list[str] = []
    seen: set[str] = set()
    for record in focus_records:
        for s in record.symptoms:
            if s.canonical not in unavailable and s.canonical not in seen:
                seen.add(s.canonical)
                pool.append(s.canonical)
    if not pool:
        pool = [c for c in state.kb.all_canonicals if c not in unavailable]
    if not pool:
        return None

    def _score(canonical: str) -> tuple[float, float]:
        weights = [r.symptom(canonical).weight for r in focus_records
                   if r.symptom(canonical) is not None]
        if weights and k > 0:
            info = sum(weights) * (k - len(weights) + 1) / k
            strongest = max(weights)
        else:
            info = 0.0
            strongest = max((d.symptom(canonical).weight
                             for d in state.kb.diseases_listing(canonical)), default=0.0)
        return info, strongest

    scored = [(canonical, *_score(canonical)) for canonical in pool]
    scored.sort(key=lambda t: (-t[1], -t[2], t[0]))
    canonical, info, _ = scored[0]

    present = [r.name for r in focus_records if r.symptom(canonical) is not None]
    absent = [r.name for r in focus_records if r.symptom(canonical) is None]
    if present and absent:
        justification = (f"Reported in {', '.join(present)} but not "
                         f"{', '.join(absent)} among the current leads.")
    elif present:
        justification = f"Shared by the current leads: {', '.join(present)}."
    else:
        justification = "Broadening the search beyond the current leads."

    return Question(
        question_id=f"q{len(state.asked) + 1}",
        canonical=canonical,
        prompt_text=f"Are you experiencing {canonical}?",
        justification=justification,
        info_score=info,
    )


def ask_question(state: ConsultationState, question: Question) -> None:
    state.asked.append({"question_id": question.question_id,
                        "canonical": question.canonical,
                        "info_score": question.info_score, "answer": None})
    state.asked_canonicals.add(question.canonical)
    state.log("question_asked", question_id=question.question_id,
              canonical=question.canonical)


def record_answer(state: ConsultationState, question: Question, answer: str) -> None:
    """Apply a yes/no/unsure answer to an asked question."""
    if answer not in ANSWERS:
        raise ValueError(f"answer must be one of {ANSWERS}, got {answer!r}")
    for rec in reversed(state.asked):
        if rec["question_id"] == question.question_id:
            rec["answer"] = answer
            break
    state.log("answer", question_id=question.question_id,
              canonical=question.canonical, answer=answer)
    if answer == "yes":
        state.confirm_symptom(question.canonical, 1.0, source="answered-yes")
    elif answer == "no":
        state.deny_symptom(question.canonical)
    # "unsure" leaves the scores alone; the question still counts as asked.


def should_transition(state: ConsultationState) -> bool:
    """Phase one ends on enough evidence, enough questions, or confident early stop."""
    cfg = state.config
    asked = state.questions_asked()
    if asked >= cfg.max_questions:
        return True
    if len(state.confirmed) >= cfg.min_symptoms and asked >= cfg.min_questions:
        return True
    if (cfg.confidence_early_stop is not None
            and state.overall_confidence >= cfg.confidence_early_stop
            and asked >= cfg.min_questions):
        return True
    return False


# -- test evaluation --------------------------------------------------------

def plan_tests(state: ConsultationState) -> list[tuple[str, TestCriterion]]:
    """Planned (disease, criterion) pairs for the top-k live hypotheses.

    Hypothesis rank order first, decisive tests before supportive within
    each disease.  A test id shared by several planned diseases appears
    once per disease here; the session driver asks it once and applies
    the answer to every pair.
    """
    plan: list[tuple[str, TestCriterion]] = []
    for h in state.top_hypotheses(state.config.top_k_focus):
        record = state.kb.by_name[h.disease]
        for crit in sorted(record.tests, key=lambda t: not t.decisive):
            plan.append((h.disease, crit))
    return plan


_COMPARE = {
    ">": lambda v, t: v > t,
    ">=": lambda v, t: v >= t,
    "<": lambda v, t: v < t,
    "<=": lambda v, t: v <= t,
}


def interpret_test_result(disease: str, criterion: TestCriterion,
                          value: Union[float, str, None]) -> TestOutcome:
    """Judge a reported value against one criterion.

    "unknown" (or None) skips the test.  A value satisfying the
    comparator supports the disease; anything else refutes it, and a
    refuted decisive criterion eliminates the hypothesis.
    """
    if value is None or (isinstance(value, str) and value.strip().lower() == UNKNOWN):
        return TestOutcome(disease=disease, test_id=criterion.test_id, value=None,
                           verdict="skipped", decisive_elimination=False)
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise NonFiniteValue(f"test value {value!r} is not a number") from None
    if not math.isfinite(number):
        raise NonFiniteValue(f"test value {number!r} must be finite")
    supports = _COMPARE[criterion.comparator](number, criterion.threshold)
    return TestOutcome(disease=disease, test_id=criterion.test_id, value=number,
                       verdict="supports" if supports else "refutes",
                       decisive_elimination=criterion.decisive and not supports)


def apply_test_outcome(state: ConsultationState, outcome: TestOutcome) -> None:
    state.test_outcomes.append(outcome)
    state.log("test_result", disease=outcome.disease, test_id=outcome.test_id,
              value=outcome.value, verdict=outcome.verdict)
    if outcome.verdict == "supports":
        state.apply_test_boost(outcome.disease, outcome.test_id)
    elif outcome.decisive_elimination:
        state.eliminate(outcome.disease,
                        reason=f"decisive test {outcome.test_id} came back against it")


# -- risk factors ------------------------------------------------------------

def evaluate_risk_factors(state: ConsultationState) -> list[RiskQuestion]:
    """Unasked risk factors of the current lead hypothesis, in profile order.

    Pure query: nothing is marked asked until an answer is applied."""
    leaders = state.top_hypotheses(1)
    if not leaders:
        return []
    record = state.kb.by_name[leaders[0].disease]
    out = []
    for rf in record.risk_factors:
        if (record.name, rf.description) in state.asked_risks:
            continue
        out.append(RiskQuestion(
            question_id=f"r{len(out) + 1}",
            disease=record.name,
            description=rf.description,
            weight=rf.weight,
            prompt_text=f"Does this apply to you: {rf.description}?",
        ))
    return out


def apply_risk_answer(state: ConsultationState, risk: RiskQuestion,
                      answer: str) -> None:
    """A yes adds the factor's weight to its disease; a no changes nothing."""
    state.asked_risks.add((risk.disease, risk.description))
    state.apply_risk_answer(risk.disease, risk.description, risk.weight, answer)


# -- attribution ------------------------------------------------------------

@dataclass
class AttributionMatrix:
    rows: list[str]
    columns: list[str]
    cells: np.ndarray  # shape (len(rows), len(columns))

    def to_dict(self) -> dict:
        return {"rows": self.rows, "columns": self.columns,
                "cells": [[float(v) for v in row] for row in self.cells]}


def attribution_matrix(state: ConsultationState) -> AttributionMatrix:
    """Per-evidence, per-disease score contributions.

    Rows cover confirmed symptoms, denied symptoms, supportive test
    outcomes, and confirmed risk factors; columns are all candidate
    diseases in current rank order.  Each column sums to that disease's
    score, so the matrix is a complete explanation of the ranking's
    local component.
    """
    if not state.confirmed and not state.denied:
        raise EmptyEvidence("no reported symptoms to attribute")
    columns = [h.disease for h in state.ranked()]
    col_of = {name: i for i, name in enumerate(columns)}
    rows: list[str] = []
    cells: list[np.ndarray] = []

    def _row(label: str) -> np.ndarray:
        rows.append(label)
        row = np.zeros(len(columns))
        cells.append(row)
        return row

    for canonical, record in state.confirmed.items():
        row = _row(canonical)
        for d in state.kb.diseases_listing(canonical):
            row[col_of[d.name]] = record.strength * d.symptom(canonical).weight
    for canonical in state.denied:
        row = _row(canonical)
        for d in state.kb.diseases_listing(canonical):
            row[col_of[d.name]] = -(0.8 * d.symptom(canonical).weight)

    by_test: dict[str, list[TestOutcome]] = {}
    for outcome in state.test_outcomes:
        by_test.setdefault(outcome.test_id, []).append(outcome)
    for test_id, outcomes in by_test.items():
        if not any(o.verdict == "supports" for o in outcomes):
            continue
        row = _row(f"test:{test_id}")
        for o in outcomes:
            if o.verdict == "supports":
                row[col_of[o.disease]] += 0.5

    by_risk: dict[str, list[dict]] = {}
    for answer in state.risk_answers:
        if answer["answer"] == "yes":
            by_risk.setdefault(answer["description"], []).append(answer)
    for description, answers in by_risk.items():
        row = _row(f"risk:{description}")
        for a in answers:
            row[col_of[a["disease"]]] += a["weight"]

    matrix = np.vstack(cells) if cells else np.zeros((0, len(columns)))
    return AttributionMatrix(rows=rows, columns=columns, cells=matrix)


# -- report -----------------------------------------------------------------

@dataclass
class DiagnosisReport:
    most_likely: Optional[str]
    confidence: float
    overall_confidence: float
    runners_up: list[dict]
    supporting_symptoms: list[dict]
    denied_exclusions: list[dict]
    test_evidence: list[TestOutcome]
    risk_evidence: list[dict]
    eliminated: list[dict]
    inconclusive: bool
    recommended_specialist: str
    next_steps: list[str]
    transcript_digest: list[str]
    ranking: list[dict]

    def to_dict(self) -> dict:
        return {
            "most_likely": self.most_likely,
            "confidence": self.confidence,
            "overall_confidence": self.overall_confidence,
            "runners_up": self.runners_up,
            "supporting_symptoms": self.supporting_symptoms,
            "denied_exclusions": self.denied_exclusions,
            "test_evidence": [o.to_dict() for o in self.test_evidence],
            "risk_evidence": self.risk_evidence,
            "eliminated": self.eliminated,
            "inconclusive": self.inconclusive,
            "recommended_specialist": self.recommended_specialist,
            "next_steps": self.next_steps,
            "transcript_digest": self.transcript_digest,
            "ranking": self.ranking,
        }

    def to_text(self) -> str:
        lines = []
        if self.inconclusive:
            lines.append("Assessment inconclusive: every candidate was ruled out.")
            lines.append(f"Recommended next contact: {self.recommended_specialist}.")
        else:
            lines.append(f"Most likely: {self.most_likely} "
                         f"(confidence {self.confidence:.2f}, "
                         f"overall {self.overall_confidence:.2f})")
            if self.supporting_symptoms:
                names = ", ".join(s["canonical"] for s in self.supporting_symptoms)
                lines.append(f"Supported by: {names}")
            for t in self.test_evidence:
                if t.verdict == "supports" and t.disease == self.most_likely:
                    lines.append(f"Test in favor: {t.test_id} = {t.value}")
            for r in self.risk_evidence:
                lines.append(f"Risk factor present: {r['description']}")
            for r in self.runners_up:
                lines.append(f"Also considered: {r['disease']} "
                             f"(confidence {r['confidence']:.2f})")
            for e in self.eliminated:
                lines.append(f"Ruled out: {e['disease']} ({e['reason']})")
            lines.append(f"Recommended specialist: {self.recommended_specialist}")
            if self.next_steps:
                lines.append("Suggested next steps:")
                lines.extend(f"  - {step}" for step in self.next_steps)
        return "\n".join(lines)


def _digest(state: ConsultationState) -> list[str]:
    out: list[str] = []
    for event in state.transcript:
        kind = event["event"]
        if kind == "confirm":
            out.append(f"confirmed {event['canonical']} ({event['source']})")
        elif kind == "deny":
            out.append(f"denied {event['canonical']}")
        elif kind == "contradiction":
            out.append(f"contradiction on {event['canonical']}: latest answer kept")
        elif kind == "question_asked":
            out.append(f"asked about {event['canonical']}")
        elif kind == "phase_transition":
            out.append("moved to test evaluation")
        elif kind == "test_result":
            out.append(f"test {event['test_id']}: {event['verdict']} "
                       f"{event['disease']}")
        elif kind == "elimination":
            out.append(f"ruled out {event['disease']}")
        elif kind == "risk_answer" and event["answer"] == "yes":
            out.append(f"risk factor present: {event['description']}")
    return out


def _supporting_symptoms(state: ConsultationState, disease: str) -> list[dict]:
    record = state.kb.by_name[disease]
    out = []
    for canonical, c in state.confirmed.items():
        entry = record.symptom(canonical)
        if entry is None:
            continue
        out.append({"canonical": canonical, "strength": c.strength,
                    "weight": entry.weight,
                    "contribution": c.strength * entry.weight})
    out.sort(key=lambda s: (-s["contribution"], s["canonical"]))
    return out


def _denied_exclusions(state: ConsultationState) -> list[dict]:
    return [{"canonical": canonical,
             "penalized": [d.name for d in state.kb.diseases_listing(canonical)]}
            for canonical in state.denied]


def _risk_evidence(state: ConsultationState) -> list[dict]:
    return [dict(r) for r in state.risk_answers if r["answer"] == "yes"]


def synthesize_report(state: ConsultationState) -> DiagnosisReport:
    """Deterministic final report; marks the session concluded."""
    if not state.hypotheses:
        raise NoHypotheses("cannot report with no candidate diseases")
    ranking = state.ranked()
    live = [h for h in ranking if not h.eliminated]
    eliminated = [{"disease": h.disease, "reason": h.elimination_reason or "eliminated"}
                  for h in ranking if h.eliminated]
    if live:
        lead = live[0]
        record = state.kb.by_name[lead.disease]
        steps = [line.strip() for line in record.management.splitlines()
                 if line.strip() and not line.strip().lower().startswith("specialist:")]
        report = DiagnosisReport(
            most_likely=lead.disease,
            confidence=lead.confidence,
            overall_confidence=state.overall_confidence,
            runners_up=[{"disease": h.disease, "confidence": h.confidence,
                         "rank_score": h.rank_score} for h in live[1:3]],
            supporting_symptoms=_supporting_symptoms(state, lead.disease),
            denied_exclusions=_denied_exclusions(state),
            test_evidence=list(state.test_outcomes),
            risk_evidence=_risk_evidence(state),
            eliminated=eliminated,
            inconclusive=False,
            recommended_specialist=record.specialist,
            next_steps=steps,
            transcript_digest=_digest(state),
            ranking=[h.to_dict() for h in ranking],
        )
    else:
        report = DiagnosisReport(
            most_likely=None,
            confidence=0.0,
            overall_confidence=state.overall_confidence,
            runners_up=[],
            supporting_symptoms=[],
            denied_exclusions=_denied_exclusions(state),
            test_evidence=list(state.test_outcomes),
            risk_evidence=_risk_evidence(state),
            eliminated=eliminated,
            inconclusive=True,
            recommended_specialist="General physician",
            next_steps=["Seek an in-person clinical evaluation; the reported "
                        "pattern did not fit any covered condition."],
            transcript_digest=_digest(state),
            ranking=[h.to_dict() for h in ranking],
        )
    state.phase = PHASE_CONCLUDED
    state.log("report", most_likely=report.most_likely,
              inconclusive=report.inconclusive)
    return report


# -- session driver ---------------------------------------------------------

@dataclass
class _PendingTest:
    test_id: str
    display_name: str
    unit: str
    entries: list[tuple[str, TestCriterion]] = field(default_factory=list)

    def prompt(self) -> str:
        unit = f" in {self.unit}" if self.unit else ""
        return (f"What was your result for {self.display_name}{unit}? "
                f"Reply with a number, or 'unknown'.")

    def to_dict(self) -> dict:
        return {"test_id": self.test_id, "display_name": self.display_name,
                "unit": self.unit, "prompt_text": self.prompt(),
                "diseases": [d for d, _ in self.entries]}


class Consultation:
    """Drives one full session over a shared KB, index, and config.

    The service, the CLI, and the evaluation harness all sit on this one
    driver so dialogue behavior cannot drift between them.  Instances are
    single-owner and not thread-safe.
    """

    def __init__(self, kb: KnowledgeBase, index=None, config: Optional[EngineConfig] = None,
                 extractor=None):
        index = index if index is not None else build_symptom_index(kb)
        self.state = ConsultationState(kb, index, config)
        self.extractor = extractor or OfflineExtractor(
            kb, index, self.state.config.sim_threshold)
        self.outstanding: Optional[Union[Question, RiskQuestion]] = None
        self.pending_tests: list[_PendingTest] = []
        self._risk_counter = 0
        self._report: Optional[DiagnosisReport] = None

    # -- helpers ------------------------------------------------------------

    def _state_summary(self) -> str:
        top = ", ".join(f"{h.disease} ({h.confidence:.2f})"
                        for h in self.state.top_hypotheses(3))
        return (f"phase={self.state.phase}; confirmed={sorted(self.state.confirmed)}; "
                f"denied={sorted(self.state.denied)}; leading: {top}")

    def _apply_extraction(self, extraction: ExtractionResult) -> list[dict]:
        applied = []
        for phrase, match in extraction.validated:
            event = self.state.confirm_symptom(match.canonical, match.strength,
                                               source=f"reported:{match.kind}")
            applied.append({"phrase": phrase, "canonical": match.canonical,
                            "kind": match.kind,
                            "contradicted": bool(event.get("contradicted"))})
        return applied

    def _next_payload(self) -> dict:
        if self.state.phase == PHASE_ELICITATION:
            if isinstance(self.outstanding, Question):
                return {"kind": "question", "question": self.outstanding.to_dict()}
            return {"kind": "open",
                    "prompt_text": "Hello. Tell me about the symptoms that are "
                                   "bothering you."}
        if self.state.phase == PHASE_TESTS:
            self._drop_dead_tests()
            if self.pending_tests:
                return {"kind": "test", "test": self.pending_tests[0].to_dict()}
            if isinstance(self.outstanding, RiskQuestion):
                return {"kind": "risk", "risk": self.outstanding.to_dict()}
            risk = self._next_risk_question()
            if risk is not None:
                self.outstanding = risk
                return {"kind": "risk", "risk": risk.to_dict()}
            return {"kind": "report_ready"}
        return {"kind": "report_ready"}

    def _drop_dead_tests(self) -> None:
        # A planned test whose every target hypothesis has since been
        # eliminated is skipped rather than asked.
        while self.pending_tests:
            head = self.pending_tests[0]
            if any(not self.state.hypotheses[d].eliminated for d, _ in head.entries):
                return
            for disease, crit in head.entries:
                apply_test_outcome(self.state, TestOutcome(
                    disease=disease, test_id=crit.test_id, value=None,
                    verdict="skipped", decisive_elimination=False))
            self.pending_tests.pop(0)

    def _next_risk_question(self) -> Optional[RiskQuestion]:
        pending = evaluate_risk_factors(self.state)
        if not pending:
            return None
        self._risk_counter += 1
        return RiskQuestion(
            question_id=f"r{self._risk_counter}",
            disease=pending[0].disease,
            description=pending[0].description,
            weight=pending[0].weight,
            prompt_text=pending[0].prompt_text,
        )

    def _advance_elicitation(self) -> bool:
        """Ask the next question, or transition.  Returns True on transition."""
        if should_transition(self.state):
            self._transition()
            return True
        question = select_next_question(self.state)
        if question is None:
            # Nothing left to ask; the flow must not stall.
            self._transition()
            return True
        ask_question(self.state, question)
        self.outstanding = question
        return False

    def _transition(self) -> None:
        self.state.phase = PHASE_TESTS
        self.outstanding = None
        self.state.log("phase_transition", to=PHASE_TESTS,
                       questions_asked=self.state.questions_asked(),
                       confirmed=len(self.state.confirmed))
        grouped: dict[str, _PendingTest] = {}
        order: list[str] = []
        for disease, crit in plan_tests(self.state):
            if crit.test_id not in grouped:
                grouped[crit.test_id] = _PendingTest(
                    test_id=crit.test_id, display_name=crit.display_name,
                    unit=crit.unit)
                order.append(crit.test_id)
            grouped[crit.test_id].entries.append((disease, crit))
        self.pending_tests = [grouped[tid] for tid in order]

    # -- public surface -----------------------------------------------------

    def open(self, text: Optional[str] = None) -> dict:
        """Start the session, optionally with an initial symptom description."""
        extraction_view = None
        contradictions: list[dict] = []
        if text and text.strip():
            extraction = self.extractor.extract(text, state_summary=self._state_summary())
            applied = self._apply_extraction(extraction)
            contradictions = [a for a in applied if a["contradicted"]]
            extraction_view = {"raw_phrases": extraction.raw_phrases,
                               "confirmed": applied,
                               "rejected": extraction.rejected}
            self._advance_elicitation()
        return {"extraction": extraction_view,
                "contradictions": contradictions,
                "snapshot": self.state.snapshot(),
                "next": self._next_payload()}

    def message(self, text: str) -> dict:
        """Free-text patient message during symptom elicitation."""
        if self.state.phase != PHASE_ELICITATION:
            raise WrongPhase(PHASE_ELICITATION, self.state.phase)
        extraction = self.extractor.extract(text, state_summary=self._state_summary())
        applied = self._apply_extraction(extraction)
        if should_transition(self.state):
            self._transition()
        elif self.outstanding is None:
            self._advance_elicitation()
        return {"extraction": {"raw_phrases": extraction.raw_phrases,
                               "confirmed": applied,
                               "rejected": extraction.rejected},
                "contradictions": [a for a in applied if a["contradicted"]],
                "snapshot": self.state.snapshot(),
                "next": self._next_payload()}

    def answer(self, question_id: str, answer: str) -> dict:
        """Answer the outstanding yes/no question (symptom or risk factor)."""
        if self.state.phase == PHASE_CONCLUDED:
            raise WrongPhase("an active phase", self.state.phase)
        if self.outstanding is None or self.outstanding.question_id != question_id:
            raise StaleQuestion(f"question {question_id!r} is not outstanding")
        if answer not in ANSWERS:
            raise ValueError(f"answer must be one of {ANSWERS}, got {answer!r}")
        if isinstance(self.outstanding, Question):
            record_answer(self.state, self.outstanding, answer)
            self.outstanding = None
            self._advance_elicitation()
        else:
            apply_risk_answer(self.state, self.outstanding, answer)
            self.outstanding = None
        return {"snapshot": self.state.snapshot(), "next": self._next_payload()}

    def submit_test(self, test_id: str, value: Union[float, str, None]) -> dict:
        """Report a numeric result (or 'unknown') for the outstanding test."""
        if self.state.phase != PHASE_TESTS:
            raise WrongPhase(PHASE_TESTS, self.state.phase)
        self._drop_dead_tests()
        if not self.pending_tests:
            raise StaleQuestion("no test is outstanding")
        head = self.pending_tests[0]
        if head.test_id != test_id:
            raise StaleQuestion(
                f"test {test_id!r} is not outstanding (expected {head.test_id!r})")
        outcomes = []
        for disease, crit in head.entries:
            if self.state.hypotheses[disease].eliminated:
                outcome = TestOutcome(disease=disease, test_id=crit.test_id,
                                      value=None, verdict="skipped",
                                      decisive_elimination=False)
            else:
                outcome = interpret_test_result(disease, crit, value)
            apply_test_outcome(self.state, outcome)
            outcomes.append(outcome.to_dict())
        self.pending_tests.pop(0)
        return {"outcomes": outcomes, "snapshot": self.state.snapshot(),
                "next": self._next_payload()}

    def current(self) -> dict:
        """Read-only view: state snapshot plus whatever prompt is pending.

        The prompt is computed first so a drained dead-test queue is
        already reflected in the snapshot; repeated calls return
        identical bodies."""
        nxt = self._next_payload()
        return {"snapshot": self.state.snapshot(), "next": nxt}

    def attribution(self) -> AttributionMatrix:
        return attribution_matrix(self.state)

    def report(self) -> DiagnosisReport:
        """Finalize once every planned test is answered or skipped."""
        if self._report is not None:
            return self._report
        if self.state.phase == PHASE_ELICITATION:
            raise WrongPhase(PHASE_TESTS, self.state.phase)
        self._drop_dead_tests()
        if self.pending_tests:
            raise WrongPhase("all planned tests answered",
                             f"{len(self.pending_tests)} outstanding")
        self._report = synthesize_report(self.state)
        return self._report
