"""Synthetic-patient evaluation: simulator, metrics, k-fold, ablations, NB baseline.

The simulator builds scripted patients from the KB itself: each case has
a hidden true disease, a symptom pool drawn from its profile, and a test
value policy that satisfies the true disease's criteria and fails
everyone else's.  The scripted patient answers yes to a question exactly
when the asked symptom is in its pool, reports the policy value for any
test, and answers no to risk questions, so every run is reproducible
from the case seed.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dialogue import Consultation
from .engine import EngineConfig, build_symptom_index
from .errors import DegenerateTrainingSet, EmptyResults, UnknownGrid
from .kb import KnowledgeBase

# Reported test values sit on the interesting side of each threshold; the
# margin scales with the threshold so platelet counts and pH values both
# land in plausible territory.
def _margin(threshold: float) -> float:
    return max(0.5, 0.05 * abs(threshold))


def satisfying_value(comparator: str, threshold: float) -> float:
    if comparator == ">":
        return threshold + _margin(threshold)
    if comparator == "<":
        return threshold - _margin(threshold)
    return threshold  # >= and <= are satisfied at the boundary


def failing_value(comparator: str, threshold: float) -> float:
    if comparator == ">=":
        return threshold - _margin(threshold)
    if comparator == "<=":
        return threshold + _margin(threshold)
    return threshold  # > and < fail at the boundary


@dataclass(frozen=True)
class SimCase:
    true_disease: str
    symptom_pool: tuple[str, ...]
    opening_phrases: tuple[str, ...]
    test_values: dict[str, float]
    seed: int

    def opening_message(self) -> str:
        return "I have " + " and ".join(self.opening_phrases)


@dataclass(frozen=True)
class CaseResult:
    true_disease: str
    predicted_top3: tuple[str, ...]
    questions_asked: int
    latency: float


def _test_value_map(kb: KnowledgeBase, true_disease: str) -> dict[str, float]:
    truth = kb.by_name[true_disease]
    true_crits = {t.test_id: t for t in truth.tests}
    values: dict[str, float] = {}
    for disease in kb.diseases:
        for crit in disease.tests:
            if crit.test_id in true_crits:
                c = true_crits[crit.test_id]
                values[crit.test_id] = satisfying_value(c.comparator, c.threshold)
            elif crit.test_id not in values:
                values[crit.test_id] = failing_value(crit.comparator, crit.threshold)
    return values


def make_case(kb: KnowledgeBase, disease_name: str, seed: int,
              min_symptoms: int = 8) -> SimCase:
    rng = random.Random(seed)
    record = kb.by_name[disease_name]
    profile = [s.canonical for s in record.symptoms]
    low = min(max(4, min_symptoms - 2), len(profile))
    pool_size = rng.randint(low, len(profile))
    pool = tuple(sorted(rng.sample(profile, pool_size)))

    n_opening = rng.randint(2, 3)
    opening: list[str] = []
    for canonical in rng.sample(pool, min(n_opening, len(pool))):
        entry = record.symptom(canonical)
        opening.append(rng.choice([entry.canonical, *entry.synonyms]))

    return SimCase(true_disease=disease_name, symptom_pool=pool,
                   opening_phrases=tuple(opening),
                   test_values=_test_value_map(kb, disease_name), seed=seed)


def full_profile_case(kb: KnowledgeBase, disease_name: str, seed: int = 0) -> SimCase:
    record = kb.by_name[disease_name]
    profile = tuple(s.canonical for s in record.symptoms)
    return SimCase(true_disease=disease_name, symptom_pool=profile,
                   opening_phrases=profile[:3],
                   test_values=_test_value_map(kb, disease_name), seed=seed)


def generate_cases(kb: KnowledgeBase, per_disease: int = 6, seed: int = 0,
                   min_symptoms: int = 8) -> list[SimCase]:
    """Deterministic case list: per_disease cases for every KB disease."""
    if per_disease < 1:
        raise ValueError("per_disease must be >= 1")
    master = random.Random(seed)
    cases = []
    for disease in kb.diseases:
        for _ in range(per_disease):
            cases.append(make_case(kb, disease.name,
                                   seed=master.getrandbits(64),
                                   min_symptoms=min_symptoms))
    return cases


# -- driving one case -------------------------------------------------------

def run_consultation(case: SimCase, kb: KnowledgeBase,
                     config: Optional[EngineConfig] = None,
                     index=None) -> CaseResult:
    """Scripted patient end to end: opening message, Q&A, tests, report."""
    started = time.perf_counter()
    pool = set(case.symptom_pool)
    try:
        consult = Consultation(kb, index, config)
        out = consult.open(case.opening_message())
        guard = 0
        while out["next"]["kind"] != "report_ready":
            guard += 1
            if guard > 500:
                raise RuntimeError("scripted consultation did not terminate")
            nxt = out["next"]
            if nxt["kind"] == "question":
                q = nxt["question"]
                answer = "yes" if q["canonical"] in pool else "no"
                out = consult.answer(q["question_id"], answer)
            elif nxt["kind"] == "test":
                test_id = nxt["test"]["test_id"]
                out = consult.submit_test(test_id, case.test_values[test_id])
            elif nxt["kind"] == "risk":
                out = consult.answer(nxt["risk"]["question_id"], "no")
            else:
                raise RuntimeError(f"unexpected payload kind {nxt['kind']!r}")
        report = consult.report()
        top3 = tuple(h["disease"] for h in report.ranking
                     if not h["eliminated"])[:3]
        asked = consult.state.questions_asked()
    except Exception:
        # A crashed consultation counts as a miss, not a harness failure.
        top3 = ()
        asked = 0
    return CaseResult(true_disease=case.true_disease, predicted_top3=top3,
                      questions_asked=asked,
                      latency=time.perf_counter() - started)


def run_cases(cases: list[SimCase], kb: KnowledgeBase,
              config: Optional[EngineConfig] = None) -> list[CaseResult]:
    index = build_symptom_index(kb)
    return [run_consultation(case, kb, config, index) for case in cases]


def results_digest(results: list[CaseResult]) -> str:
    """Reproducibility fingerprint; latency is wall-clock and excluded."""
    return "\n".join(f"{r.true_disease}|{','.join(r.predicted_top3)}|"
                     f"{r.questions_asked}" for r in results)


# -- metrics ----------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    top1: float
    top3: float
    precision: float
    recall: float
    f1: float
    avg_questions: float
    confusion: dict[str, dict[str, int]]

    def to_dict(self) -> dict:
        return {"top1": self.top1, "top3": self.top3, "precision": self.precision,
                "recall": self.recall, "f1": self.f1,
                "avg_questions": self.avg_questions, "confusion": self.confusion}


def compute_metrics(results: list[CaseResult]) -> Metrics:
    """One-vs-rest multi-class metrics from top-1 predictions.

    Classes are those appearing as a true label or a top-1 prediction.
    Precision and recall macro-average over them, with an undefined
    per-class precision (never predicted) counted as zero.
    """
    if not results:
        raise EmptyResults("compute_metrics needs at least one result")
    predictions = [r.predicted_top3[0] if r.predicted_top3 else None
                   for r in results]
    classes = sorted({r.true_disease for r in results}
                     | {p for p in predictions if p is not None})
    confusion: dict[str, dict[str, int]] = {}
    precisions, recalls = [], []
    for cls in classes:
        tp = sum(1 for r, p in zip(results, predictions)
                 if r.true_disease == cls and p == cls)
        fp = sum(1 for r, p in zip(results, predictions)
                 if r.true_disease != cls and p == cls)
        fn = sum(1 for r, p in zip(results, predictions)
                 if r.true_disease == cls and p != cls)
        tn = len(results) - tp - fp - fn
        confusion[cls] = {"tp": tp, "fp": fp, "fn": fn, "tn": tn}
        precisions.append(tp / (tp + fp) if tp + fp > 0 else 0.0)
        recalls.append(tp / (tp + fn) if tp + fn > 0 else 0.0)
    precision = sum(precisions) / len(classes)
    recall = sum(recalls) / len(classes)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    top1 = sum(1 for r, p in zip(results, predictions)
               if p == r.true_disease) / len(results)
    top3 = sum(1 for r in results
               if r.true_disease in r.predicted_top3) / len(results)
    avg_q = sum(r.questions_asked for r in results) / len(results)
    return Metrics(top1=top1, top3=top3, precision=precision, recall=recall,
                   f1=f1, avg_questions=avg_q, confusion=confusion)


# -- k-fold -----------------------------------------------------------------

def assign_folds(cases: list[SimCase], k: int = 5, seed: int = 0) -> list[int]:
    """Stratified-by-disease fold index per case, deterministic in seed.

    Cases of each disease are shuffled then dealt round-robin starting at
    a fold offset that rotates per disease, so the leftover cases spread
    evenly: 84 cases at k=5 give fold sizes 17/17/17/17/16.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = random.Random(seed)
    by_disease: dict[str, list[int]] = {}
    for i, case in enumerate(cases):
        by_disease.setdefault(case.true_disease, []).append(i)
    folds = [0] * len(cases)
    for offset, disease in enumerate(sorted(by_disease)):
        indices = by_disease[disease][:]
        rng.shuffle(indices)
        for j, case_index in enumerate(indices):
            folds[case_index] = (offset + j) % k
    return folds


@dataclass
class KfoldResult:
    fold_metrics: list[Metrics]
    fold_sizes: list[int]
    fold_results: list[list[CaseResult]]

    def mean_std(self, attr: str) -> tuple[float, float]:
        values = np.array([getattr(m, attr) for m in self.fold_metrics])
        return float(values.mean()), float(values.std())

    def summary_rows(self) -> list[tuple[str, float, float]]:
        return [(name, *self.mean_std(name))
                for name in ("top1", "top3", "precision", "recall", "f1",
                             "avg_questions")]


def run_kfold(cases: list[SimCase], kb: KnowledgeBase, k: int = 5,
              config: Optional[EngineConfig] = None, seed: int = 0) -> KfoldResult:
    folds = assign_folds(cases, k, seed)
    index = build_symptom_index(kb)
    fold_results: list[list[CaseResult]] = [[] for _ in range(k)]
    for case, fold in zip(cases, folds):
        fold_results[fold].append(run_consultation(case, kb, config, index))
    metrics = [compute_metrics(results) for results in fold_results]
    return KfoldResult(fold_metrics=metrics,
                       fold_sizes=[len(r) for r in fold_results],
                       fold_results=fold_results)


def format_kfold_summary(kfold: KfoldResult) -> str:
    lines = ["metric          mean    std"]
    for name, mean, std in kfold.summary_rows():
        lines.append(f"{name:<14} {mean:7.4f} {std:6.4f}")
    return "\n".join(lines)


# -- ablation ---------------------------------------------------------------

@dataclass(frozen=True)
class AblationConfig:
    label: str
    config: EngineConfig


CSV_HEADER = ("config,min_q,min_s,conf,max_q,sim,g_w,l_w,"
              "top1,top3,precision,recall,f1,avg_q,latency_s")


def _cfg(label: str, **overrides) -> AblationConfig:
    return AblationConfig(label=label, config=EngineConfig(**overrides))


def named_grid(name: str) -> list[AblationConfig]:
    """Canned sweeps: question budgets, evidence floors, scoring weights."""
    if name == "table5":
        return [
            _cfg("Baseline", confidence_early_stop=0.70),
            _cfg("MinQ=5", min_questions=5, confidence_early_stop=0.70),
            _cfg("MinQ=15", min_questions=15, confidence_early_stop=0.70),
            _cfg("MaxQ=10", max_questions=10, confidence_early_stop=0.70),
            _cfg("MaxQ=15", max_questions=15, confidence_early_stop=0.70),
            _cfg("MinS=2", min_symptoms=2, confidence_early_stop=0.70),
            _cfg("MinS=4", min_symptoms=4, confidence_early_stop=0.70),
            _cfg("MinS=6", min_symptoms=6, confidence_early_stop=0.70),
            _cfg("Conf=60", confidence_early_stop=0.60),
            _cfg("Conf=80", confidence_early_stop=0.80),
            _cfg("Sim=0.45", sim_threshold=0.45, confidence_early_stop=0.70),
            _cfg("Sim=0.75", sim_threshold=0.75, confidence_early_stop=0.70),
            _cfg("Sim=0.85", sim_threshold=0.85, confidence_early_stop=0.70),
        ]
    if name == "table6":
        return [
            _cfg("Baseline"),
            _cfg("MaxQ=10", max_questions=10),
            _cfg("MaxQ=15", max_questions=15),
            _cfg("MinS=2", min_symptoms=2),
            _cfg("MinS=4", min_symptoms=4),
            _cfg("MinS=6", min_symptoms=6),
            _cfg("Sim=0.45", sim_threshold=0.45),
            _cfg("Sim=0.75", sim_threshold=0.75),
            _cfg("Sim=0.85", sim_threshold=0.85),
        ]
    if name == "table7":
        # Weight rows rank straight from the opening statement (no adaptive
        # questions): once questioning runs, confirms prune the rival pile and
        # decisive tests promote whoever is left, so every strategy saturates
        # and the comparison says nothing.
        return [
            _cfg("Local_Only", min_questions=0, max_questions=0,
                 global_weight=0.0, local_weight=1.0),
            _cfg("Global_Only", min_questions=0, max_questions=0,
                 global_weight=1.0, local_weight=0.0),
            _cfg("Hybrid_70_30", min_questions=0, max_questions=0,
                 global_weight=0.7, local_weight=0.3),
            _cfg("Hybrid_50_50", min_questions=0, max_questions=0,
                 global_weight=0.5, local_weight=0.5),
        ]
    raise UnknownGrid(f"no grid named {name!r} (try table5, table6, table7)")


def ablation_row(label: str, config: EngineConfig, metrics: Metrics,
                 mean_latency: float) -> str:
    conf = config.confidence_early_stop or 0.0
    return (f"{label},{config.min_questions},{config.min_symptoms},"
            f"{conf:.4f},{config.max_questions},{config.sim_threshold:.4f},"
            f"{config.global_weight:.4f},{config.local_weight:.4f},"
            f"{metrics.top1:.4f},{metrics.top3:.4f},{metrics.precision:.4f},"
            f"{metrics.recall:.4f},{metrics.f1:.4f},"
            f"{metrics.avg_questions:.4f},{mean_latency:.4f}")


def run_ablation(grid: list[AblationConfig], cases: Optional[list[SimCase]],
                 kb: KnowledgeBase, per_disease: int = 6, seed: int = 0) -> str:
    """One CSV row per grid entry.

    An explicit case list is replayed unchanged for every row.  When cases
    is None each row generates its own set with the row's min_symptoms, so
    a sparser elicitation floor is measured against correspondingly sparser
    patients rather than against patients it can never transition on.
    """
    if not grid:
        raise ValueError("ablation grid must be nonempty")
    lines = [CSV_HEADER]
    for entry in grid:
        row_cases = cases
        if row_cases is None:
            row_cases = generate_cases(kb, per_disease=per_disease, seed=seed,
                                       min_symptoms=entry.config.min_symptoms)
        results = run_cases(row_cases, kb, entry.config)
        metrics = compute_metrics(results)
        latency = sum(r.latency for r in results) / len(results)
        lines.append(ablation_row(entry.label, entry.config, metrics, latency))
    return "\n".join(lines) + "\n"


def format_kfold_csv(kfold: KfoldResult, config: Optional[EngineConfig] = None) -> str:
    config = config or EngineConfig()
    lines = [CSV_HEADER]
    for i, metrics in enumerate(kfold.fold_metrics):
        results = kfold.fold_results[i]
        latency = sum(r.latency for r in results) / len(results) if results else 0.0
        lines.append(ablation_row(f"Fold_{i + 1}", config, metrics, latency))
    return "\n".join(lines) + "\n"


# -- TF-IDF Naive Bayes baseline --------------------------------------------
# Hand-rolled on purpose: the baseline must be inspectable next to the
# engine, and the formulas are small.  tf is a raw count, idf is the
# smoothed ln((1+D)/(1+df)) + 1, rows are L2-normalized, and the
# multinomial model applies Laplace 1.0 over accumulated TF-IDF mass.

def _case_document(case: SimCase) -> str:
    return " ".join(case.symptom_pool)


def _tokenize(document: str) -> list[str]:
    return document.split()


@dataclass
class TfidfVocabulary:
    terms: list[str]
    index: dict[str, int]
    idf: np.ndarray


def tfidf_fit(documents: list[str]) -> TfidfVocabulary:
    terms = sorted({token for doc in documents for token in _tokenize(doc)})
    index = {term: i for i, term in enumerate(terms)}
    df = np.zeros(len(terms))
    for doc in documents:
        for term in set(_tokenize(doc)):
            df[index[term]] += 1
    n_docs = len(documents)
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    return TfidfVocabulary(terms=terms, index=index, idf=idf)


def tfidf_transform(documents: list[str], vocab: TfidfVocabulary) -> np.ndarray:
    matrix = np.zeros((len(documents), len(vocab.terms)))
    for row, doc in enumerate(documents):
        for token in _tokenize(doc):
            col = vocab.index.get(token)
            if col is not None:
                matrix[row, col] += 1.0
    matrix *= vocab.idf
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return matrix / norms


@dataclass
class NbModel:
    vocab: TfidfVocabulary
    classes: list[str]
    log_prior: np.ndarray
    log_likelihood: np.ndarray  # (n_classes, n_terms)


def nb_baseline_train(cases_train: list[SimCase]) -> NbModel:
    classes = sorted({case.true_disease for case in cases_train})
    if len(classes) < 2:
        raise DegenerateTrainingSet(
            f"need >= 2 classes to train, got {len(classes)}")
    documents = [_case_document(case) for case in cases_train]
    vocab = tfidf_fit(documents)
    matrix = tfidf_transform(documents, vocab)
    class_index = {cls: i for i, cls in enumerate(classes)}
    counts = np.zeros(len(classes))
    mass = np.zeros((len(classes), len(vocab.terms)))
    for case, row in zip(cases_train, matrix):
        i = class_index[case.true_disease]
        counts[i] += 1
        mass[i] += row
    log_prior = np.log(counts / counts.sum())
    smoothed = mass + 1.0
    log_likelihood = np.log(smoothed / smoothed.sum(axis=1, keepdims=True))
    return NbModel(vocab=vocab, classes=classes, log_prior=log_prior,
                   log_likelihood=log_likelihood)


def nb_predict_top3(model: NbModel, case: SimCase) -> tuple[str, ...]:
    row = tfidf_transform([_case_document(case)], model.vocab)[0]
    scores = model.log_prior + model.log_likelihood @ row
    order = sorted(range(len(model.classes)),
                   key=lambda i: (-scores[i], model.classes[i]))
    return tuple(model.classes[i] for i in order[:3])


def nb_baseline_eval(model: NbModel, cases_test: list[SimCase]) -> Metrics:
    results = []
    for case in cases_test:
        started = time.perf_counter()
        top3 = nb_predict_top3(model, case)
        results.append(CaseResult(true_disease=case.true_disease,
                                  predicted_top3=top3, questions_asked=0,
                                  latency=time.perf_counter() - started))
    return compute_metrics(results)


def nb_crossval(cases: list[SimCase], k: int = 5, seed: int = 0) -> Metrics:
    """Held-out NB predictions over every case, via the same fold split."""
    folds = assign_folds(cases, k, seed)
    results: list[CaseResult] = []
    for fold in range(k):
        train = [c for c, f in zip(cases, folds) if f != fold]
        test = [c for c, f in zip(cases, folds) if f == fold]
        if not test:
            continue
        model = nb_baseline_train(train)
        for case in test:
            top3 = nb_predict_top3(model, case)
            results.append(CaseResult(true_disease=case.true_disease,
                                      predicted_top3=top3, questions_asked=0,
                                      latency=0.0))
    return compute_metrics(results)
