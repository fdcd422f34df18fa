from __future__ import annotations

import numpy as np
import pytest

from diagnosys.dialogue import (
    ANSWERS,
    Consultation,
    RiskQuestion,
    apply_risk_answer,
    apply_test_outcome,
    attribution_matrix,
    evaluate_risk_factors,
    interpret_test_result,
    plan_tests,
    select_next_question,
    should_transition,
    synthesize_report,
)
from diagnosys.engine import (
    PHASE_CONCLUDED,
    PHASE_ELICITATION,
    PHASE_TESTS,
    ConsultationState,
    EngineConfig,
    build_symptom_index,
)
from diagnosys.errors import (
    EmptyEvidence,
    NoHypotheses,
    NonFiniteValue,
    StaleQuestion,
    WrongPhase,
)
from diagnosys.kb import (
    DiseaseRecord,
    KnowledgeBase,
    RiskFactor,
    SymptomEntry,
    TestCriterion as Criterion,
)


def _record(name, weighted, risks=(), tests=()):
    symptoms = tuple(SymptomEntry(canonical=c, synonyms=(), weight=w,
                                  severity_tier="moderate")
                     for c, w in weighted.items())
    return DiseaseRecord(name=name, category="Other Common Conditions",
                         symptoms=symptoms, risk_factors=tuple(risks),
                         tests=tuple(tests),
                         management="Rest up.\nSpecialist: General physician")


def _crit(test_id, comparator=">", threshold=10.0, decisive=False):
    return Criterion(test_id=test_id, display_name=test_id.replace("_", " "),
                         comparator=comparator, threshold=threshold, unit="U",
                         decisive=decisive, note="")


def _state(*records, config=None):
    kb = KnowledgeBase(list(records))
    return ConsultationState(kb, build_symptom_index(kb), config)


# -- question selection ------------------------------------------------------

def test_discriminating_symptom_beats_shared_on_name_tiebreak():
    # "ankle buzz" (one lead, w=0.5) and "zone ache" (all three leads,
    # w=0.5 each) come out at the same information score; weights tie
    # too, so the alphabetical tiebreak must decide.
    state = _state(
        _record("Aster", {"ankle buzz": 0.5, "zone ache": 0.5, "mellow hum": 0.3}),
        _record("Betel", {"zone ache": 0.5, "mellow hum": 0.3}),
        _record("Cedar", {"zone ache": 0.5, "mellow hum": 0.3}),
    )
    question = select_next_question(state)
    assert question.canonical == "ankle buzz"
    assert question.info_score == 0.5
    assert question.question_id == "q1"
    assert question.justification.startswith("Reported in Aster but not")


def test_pool_widens_when_focus_is_exhausted():
    state = _state(
        _record("Aster", {"ankle buzz": 0.5}),
        _record("Betel", {"soft static": 0.7}),
        config=EngineConfig(top_k_focus=1),
    )
    state.confirm_symptom("ankle buzz", 1.0)  # Aster leads, its pool is spent
    question = select_next_question(state)
    assert question.canonical == "soft static"
    assert question.info_score == 0.0
    assert question.justification == "Broadening the search beyond the current leads."


def test_no_question_when_everything_was_asked():
    state = _state(_record("Aster", {"ankle buzz": 0.5}))
    state.asked_canonicals.add("ankle buzz")
    assert select_next_question(state) is None


def test_questions_skip_reported_symptoms():
    state = _state(_record("Aster", {"ankle buzz": 0.5, "zone ache": 0.5}))
    state.confirm_symptom("zone ache", 1.0)
    question = select_next_question(state)
    assert question.canonical == "ankle buzz"


# -- phase transition --------------------------------------------------------

def _prepped(confirmed: int, asked: int, **cfg):
    weighted = {f"sign {i:02d}": 0.5 for i in range(8)}
    state = _state(_record("Aster", weighted),
                   config=EngineConfig(**cfg))
    for canonical in list(weighted)[:confirmed]:
        state.confirm_symptom(canonical, 1.0)
    for i in range(asked):
        state.asked.append({"question_id": f"q{i+1}", "canonical": f"sign {i:02d}",
                            "info_score": 0.0, "answer": None})
    return state


@pytest.mark.parametrize("confirmed,asked,expected", [
    (4, 10, True),    # floor met on both axes
    (0, 20, True),    # question budget exhausted
    (4, 5, False),    # symptoms fine, too few questions
    (2, 10, False),   # questions fine, too few symptoms
])
def test_transition_table(confirmed, asked, expected):
    state = _prepped(confirmed, asked,
                     min_questions=10, min_symptoms=4, max_questions=20)
    assert should_transition(state) is expected


def test_confident_early_stop():
    relaxed = _prepped(2, 1, min_questions=1, min_symptoms=8, max_questions=20,
                       confidence_early_stop=0.2)
    assert relaxed.overall_confidence >= 0.2
    assert should_transition(relaxed) is True

    strict = _prepped(2, 1, min_questions=1, min_symptoms=8, max_questions=20,
                      confidence_early_stop=0.89)
    assert should_transition(strict) is False


# -- test planning and interpretation ----------------------------------------

def test_plan_orders_decisive_first_per_disease():
    state = _state(
        _record("Aster", {"ankle buzz": 0.5},
                tests=[_crit("a_support"), _crit("a_decide", decisive=True)]),
        _record("Betel", {"soft static": 0.7},
                tests=[_crit("b_only", decisive=True)]),
    )
    state.confirm_symptom("ankle buzz", 1.0)
    plan = plan_tests(state)
    assert [(d, c.test_id) for d, c in plan] == [
        ("Aster", "a_decide"), ("Aster", "a_support"), ("Betel", "b_only")]


def test_plan_covers_only_focus_hypotheses():
    records = [_record(f"D{i}", {f"s{i}": 0.5}, tests=[_crit(f"t{i}")])
               for i in range(4)]
    state = _state(*records, config=EngineConfig(top_k_focus=2))
    assert len(plan_tests(state)) == 2


@pytest.mark.parametrize("comparator,threshold,value,verdict", [
    (">", 38.0, 39.0, "supports"),
    (">", 38.0, 38.0, "refutes"),
    (">=", 100.0, 100.0, "supports"),
    (">", 100.0, 100.0, "refutes"),
    ("<", 4.0, 3.9, "supports"),
    ("<", 4.0, 4.0, "refutes"),
    ("<=", 4.0, 4.0, "supports"),
    ("<=", 4.0, 4.1, "refutes"),
])
def test_interpretation_truth_table(comparator, threshold, value, verdict):
    crit = _crit("probe", comparator=comparator, threshold=threshold)
    outcome = interpret_test_result("Aster", crit, value)
    assert outcome.verdict == verdict
    assert outcome.value == value
    assert outcome.decisive_elimination is False


def test_interpretation_unknown_and_none_skip():
    crit = _crit("probe")
    for raw in (None, "unknown", " Unknown "):
        outcome = interpret_test_result("Aster", crit, raw)
        assert outcome.verdict == "skipped"
        assert outcome.value is None


def test_interpretation_decisive_miss_flags_elimination():
    crit = _crit("probe", comparator=">", threshold=38.0, decisive=True)
    assert interpret_test_result("Aster", crit, 37.0).decisive_elimination is True
    assert interpret_test_result("Aster", crit, 39.0).decisive_elimination is False


@pytest.mark.parametrize("raw", ["abc", float("inf"), float("nan"), "1/2"])
def test_interpretation_rejects_non_numbers(raw):
    with pytest.raises(NonFiniteValue):
        interpret_test_result("Aster", _crit("probe"), raw)


def test_applying_outcomes_moves_scores():
    state = _state(_record("Aster", {"ankle buzz": 0.5},
                           tests=[_crit("probe", decisive=True)]))
    state.confirm_symptom("ankle buzz", 1.0)
    before = state.hypotheses["Aster"].score

    apply_test_outcome(state, interpret_test_result(
        "Aster", _crit("probe"), 11.0))
    assert state.hypotheses["Aster"].score == before + 0.5

    apply_test_outcome(state, interpret_test_result(
        "Aster", _crit("probe", decisive=True), 9.0))
    assert state.hypotheses["Aster"].eliminated
    assert "probe" in state.hypotheses["Aster"].elimination_reason
    assert state.hypotheses["Aster"].score == before + 0.5  # refute moves nothing


# -- risk factors ------------------------------------------------------------

def test_risk_queries_are_pure_and_lead_scoped():
    state = _state(
        _record("Aster", {"ankle buzz": 0.5},
                risks=[RiskFactor("keeps bees", 0.3), RiskFactor("night shifts", 0.2)]),
        _record("Betel", {"soft static": 0.7}, risks=[RiskFactor("sailing", 0.4)]),
    )
    state.confirm_symptom("ankle buzz", 1.0)
    pending = evaluate_risk_factors(state)
    assert [(r.disease, r.description) for r in pending] == [
        ("Aster", "keeps bees"), ("Aster", "night shifts")]
    assert pending == evaluate_risk_factors(state)  # query does not mark asked


def test_risk_yes_scores_and_no_is_neutral():
    state = _state(_record("Aster", {"ankle buzz": 0.5},
                           risks=[RiskFactor("keeps bees", 0.3),
                                  RiskFactor("night shifts", 0.2)]))
    state.confirm_symptom("ankle buzz", 1.0)
    first, second = evaluate_risk_factors(state)
    before = state.hypotheses["Aster"].score

    apply_risk_answer(state, first, "yes")
    assert state.hypotheses["Aster"].score == pytest.approx(before + 0.3)
    apply_risk_answer(state, second, "no")
    assert state.hypotheses["Aster"].score == pytest.approx(before + 0.3)

    assert evaluate_risk_factors(state) == []  # both are now spent


# -- attribution -------------------------------------------------------------

def test_attribution_cells_and_column_identity():
    state = _state(
        _record("Aster", {"fever": 0.6, "chest tightness": 0.5}),
        _record("Betel", {"chest tightness": 0.5, "night chills": 0.7}),
    )
    state.confirm_symptom("fever", 1.0)
    state.deny_symptom("chest tightness")
    matrix = attribution_matrix(state)

    assert matrix.rows == ["fever", "chest tightness"]
    col = {name: i for i, name in enumerate(matrix.columns)}
    assert matrix.cells[0][col["Aster"]] == pytest.approx(0.6)
    assert matrix.cells[0][col["Betel"]] == 0.0
    assert matrix.cells[1][col["Aster"]] == pytest.approx(-0.4)
    assert matrix.cells[1][col["Betel"]] == pytest.approx(-0.4)

    sums = matrix.cells.sum(axis=0)
    for name, i in col.items():
        assert sums[i] == pytest.approx(state.hypotheses[name].score, abs=1e-12)


def test_attribution_includes_tests_and_risks():
    state = _state(_record("Aster", {"ankle buzz": 0.5},
                           risks=[RiskFactor("keeps bees", 0.3)],
                           tests=[_crit("probe")]))
    state.confirm_symptom("ankle buzz", 1.0)
    apply_test_outcome(state, interpret_test_result("Aster", _crit("probe"), 11.0))
    [risk] = evaluate_risk_factors(state)
    apply_risk_answer(state, risk, "yes")

    matrix = attribution_matrix(state)
    assert matrix.rows == ["ankle buzz", "test:probe", "risk:keeps bees"]
    np.testing.assert_allclose(matrix.cells[:, 0], [0.5, 0.5, 0.3])
    assert matrix.cells.sum(axis=0)[0] == pytest.approx(
        state.hypotheses["Aster"].score, abs=1e-12)


def test_attribution_needs_evidence():
    state = _state(_record("Aster", {"ankle buzz": 0.5}))
    with pytest.raises(EmptyEvidence):
        attribution_matrix(state)


# -- report ------------------------------------------------------------------

def test_report_end_to_end(kb, index):
    state = ConsultationState(kb, index)
    for canonical in ("fever", "headache", "pain behind the eyes",
                      "joint pain", "rash"):
        state.confirm_symptom(canonical, 1.0)
    report = synthesize_report(state)

    assert report.most_likely == "Dengue Fever"
    assert report.inconclusive is False
    assert report.confidence == state.hypotheses["Dengue Fever"].confidence
    assert 0.0 < report.overall_confidence < 0.9
    assert [r["disease"] for r in report.runners_up] == \
        [h.disease for h in state.ranked()[1:3]]
    supported = [s["canonical"] for s in report.supporting_symptoms]
    assert "fever" in supported and "rash" in supported
    assert report.recommended_specialist
    assert report.next_steps
    assert not any("specialist" in step.lower() for step in report.next_steps)
    assert len(report.ranking) == len(kb.names())
    assert any(d.startswith("confirmed fever") for d in report.transcript_digest)
    assert state.phase == PHASE_CONCLUDED
    assert "Most likely: Dengue Fever" in report.to_text()


def test_report_inconclusive_when_everything_is_ruled_out():
    state = _state(_record("Aster", {"ankle buzz": 0.5}),
                   _record("Betel", {"soft static": 0.7}))
    state.confirm_symptom("ankle buzz", 1.0)
    state.eliminate("Aster", "decisive test probe came back against it")
    state.eliminate("Betel", "decisive test probe came back against it")
    report = synthesize_report(state)

    assert report.inconclusive is True
    assert report.most_likely is None
    assert report.confidence == 0.0
    assert report.recommended_specialist == "General physician"
    assert len(report.eliminated) == 2
    assert "inconclusive" in report.to_text().lower()


def test_report_requires_candidates():
    state = _state(_record("Aster", {"ankle buzz": 0.5}))
    state.hypotheses.clear()
    with pytest.raises(NoHypotheses):
        synthesize_report(state)


# -- session driver ----------------------------------------------------------

@pytest.fixture()
def driver(kb, index):
    return Consultation(kb, index, EngineConfig(
        min_questions=2, min_symptoms=2, max_questions=6))


def test_open_without_text_greets(driver):
    payload = driver.open()
    assert payload["extraction"] is None
    assert payload["next"]["kind"] == "open"
    assert payload["snapshot"]["phase"] == PHASE_ELICITATION


def test_message_confirms_and_asks(driver):
    driver.open()
    payload = driver.message("I have a fever and a dry cough")
    confirmed = {c["canonical"] for c in payload["extraction"]["confirmed"]}
    assert confirmed == {"fever", "cough"}
    assert payload["next"]["kind"] == "question"


def test_unsure_counts_as_asked_without_scoring(driver):
    driver.open("I have a fever")
    question = driver.current()["next"]["question"]
    snapshot_before = driver.current()["snapshot"]
    payload = driver.answer(question["question_id"], "unsure")
    # the question is consumed but no evidence lands either way
    assert payload["snapshot"]["symptoms_confirmed"] == \
        snapshot_before["symptoms_confirmed"]
    assert payload["snapshot"]["symptoms_denied"] == \
        snapshot_before["symptoms_denied"]
    answered = [q for q in driver.state.asked
                if q["question_id"] == question["question_id"]]
    assert answered[0]["answer"] == "unsure"


def test_stale_question_is_refused(driver):
    driver.open("I have a fever")
    question = driver.current()["next"]["question"]
    driver.answer(question["question_id"], "no")
    with pytest.raises(StaleQuestion):
        driver.answer(question["question_id"], "no")
    with pytest.raises(StaleQuestion):
        driver.answer("q999", "yes")


def test_answer_vocabulary_is_closed(driver):
    driver.open("I have a fever")
    question = driver.current()["next"]["question"]
    with pytest.raises(ValueError):
        driver.answer(question["question_id"], "maybe")
    assert set(ANSWERS) == {"yes", "no", "unsure"}


def test_no_canonical_is_asked_twice(driver):
    driver.open("I have a fever")
    seen: list[str] = []
    while True:
        payload = driver.current()
        if payload["next"]["kind"] != "question":
            break
        question = payload["next"]["question"]
        seen.append(question["canonical"])
        driver.answer(question["question_id"], "no")
    assert len(seen) == len(set(seen))
    assert len(seen) <= driver.state.config.max_questions


def test_phase_is_monotone_and_gated(driver):
    driver.open("I have a fever")
    with pytest.raises(WrongPhase):
        driver.submit_test("anything", 1.0)
    with pytest.raises(WrongPhase):
        driver.report()

    while driver.current()["next"]["kind"] == "question":
        question = driver.current()["next"]["question"]
        driver.answer(question["question_id"], "no")
    assert driver.state.phase == PHASE_TESTS
    with pytest.raises(WrongPhase):
        driver.message("more symptoms")


def test_wrong_test_id_is_stale(driver):
    driver.open("I have a fever")
    while driver.current()["next"]["kind"] == "question":
        question = driver.current()["next"]["question"]
        driver.answer(question["question_id"], "no")
    nxt = driver.current()["next"]
    if nxt["kind"] == "test":
        with pytest.raises(StaleQuestion):
            driver.submit_test("not_the_outstanding_one", 1.0)


def test_full_drive_reaches_report(driver):
    driver.open("I have a fever and a headache")
    while True:
        nxt = driver.current()["next"]
        if nxt["kind"] == "question":
            driver.answer(nxt["question"]["question_id"], "no")
        elif nxt["kind"] == "test":
            driver.submit_test(nxt["test"]["test_id"], "unknown")
        elif nxt["kind"] == "risk":
            driver.answer(nxt["risk"]["question_id"], "no")
        else:
            break
    report = driver.report()
    assert driver.state.phase == PHASE_CONCLUDED
    assert report is driver.report()  # idempotent
    assert report.ranking


def test_current_is_idempotent(driver):
    driver.open("I have a fever")
    assert driver.current() == driver.current()
