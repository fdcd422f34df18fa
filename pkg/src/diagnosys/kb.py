"""Disease knowledge base: sectioned plain-text documents, one per disease.

A document has a ``name:`` / ``category:`` preamble followed by the four
sections ``== SYMPTOMS ==``, ``== RISK FACTORS ==``, ``== TESTS ==`` and
``== MANAGEMENT ==`` (headers case-insensitive).  Symptom lines look like

    canonical | synonym; synonym | tier

where tier is mild, moderate or severe; the tier fixes the weight at its
band midpoint (0.3, 0.6, 0.85) unless an explicit ``w=`` override follows
the tier word.  Weights must stay inside the declared tier's band:
mild [0.2, 0.45), moderate [0.45, 0.75), severe [0.75, 1.0].
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import (
    BadWeight,
    DuplicateDisease,
    DuplicateSymptom,
    EmptyKnowledgeBase,
    MalformedLine,
    MissingSection,
)
from .text import phrase_key

CATEGORIES = (
    "Infectious Diseases",
    "Chronic Conditions",
    "Mental Health",
    "Other Common Conditions",
)

TIER_BANDS = {
    "mild": (0.2, 0.45),
    "moderate": (0.45, 0.75),
    "severe": (0.75, 1.0),
}
TIER_MIDPOINTS = {"mild": 0.3, "moderate": 0.6, "severe": 0.85}

COMPARATORS = (">", ">=", "<", "<=")

_SECTION_RE = re.compile(r"^==\s*(.+?)\s*==$")
_SECTIONS = ("SYMPTOMS", "RISK FACTORS", "TESTS", "MANAGEMENT")


@dataclass(frozen=True)
class SymptomEntry:
    canonical: str
    synonyms: tuple[str, ...]
    weight: float
    severity_tier: str


@dataclass(frozen=True)
class RiskFactor:
    description: str
    weight: float


@dataclass(frozen=True)
class TestCriterion:
    test_id: str
    display_name: str
    comparator: str
    threshold: float
    unit: str
    decisive: bool
    note: str


@dataclass(frozen=True)
class DiseaseRecord:
    name: str
    category: str
    symptoms: tuple[SymptomEntry, ...]
    risk_factors: tuple[RiskFactor, ...]
    tests: tuple[TestCriterion, ...]
    management: str

    def symptom(self, canonical: str) -> SymptomEntry | None:
        for s in self.symptoms:
            if s.canonical == canonical:
                return s
        return None

    @property
    def canonical_set(self) -> frozenset[str]:
        return frozenset(s.canonical for s in self.symptoms)

    @property
    def specialist(self) -> str:
        # Convention: the management section carries a "Specialist:" line.
        for line in self.management.splitlines():
            if line.strip().lower().startswith("specialist:"):
                return line.split(":", 1)[1].strip()
        return "General physician"


class KnowledgeBase:
    """Immutable collection of DiseaseRecords plus derived lookup maps."""

    def __init__(self, diseases: Iterable[DiseaseRecord]):
        self.diseases: tuple[DiseaseRecord, ...] = tuple(
            sorted(diseases, key=lambda d: d.name))
        self.by_name: dict[str, DiseaseRecord] = {d.name: d for d in self.diseases}
        if len(self.by_name) != len(self.diseases):
            raise DuplicateDisease("disease names must be unique")
        # phrase key -> ordered (disease, canonical) pairs declaring it
        syn: dict[str, list[tuple[str, str]]] = {}
        for d in self.diseases:
            for s in d.symptoms:
                for phrase in (s.canonical, *s.synonyms):
                    key = phrase_key(phrase)
                    pairs = syn.setdefault(key, [])
                    if (d.name, s.canonical) not in pairs:
                        pairs.append((d.name, s.canonical))
        self.synonym_map: dict[str, tuple[tuple[str, str], ...]] = {
            k: tuple(v) for k, v in syn.items()}

    def __len__(self) -> int:
        return len(self.diseases)

    def names(self) -> list[str]:
        return [d.name for d in self.diseases]

    def diseases_listing(self, canonical: str) -> list[DiseaseRecord]:
        return [d for d in self.diseases if d.symptom(canonical) is not None]

    @property
    def all_canonicals(self) -> list[str]:
        seen: set[str] = set()
        out: list[str] = []
        for d in self.diseases:
            for s in d.symptoms:
                if s.canonical not in seen:
                    seen.add(s.canonical)
                    out.append(s.canonical)
        return sorted(out)

    @property
    def category_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for d in self.diseases:
            counts[d.category] = counts.get(d.category, 0) + 1
        return counts


# -- parsing ----------------------------------------------------------------

def _split_sections(content: str, source: str) -> tuple[dict[str, str], dict[str, list[str]]]:
    preamble: dict[str, str] = {}
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for raw in content.splitlines():
        line = raw.rstrip()
        m = _SECTION_RE.match(line.strip())
        if m:
            title = m.group(1).upper()
            if title not in _SECTIONS:
                raise MalformedLine(line, f"unknown section {title!r}", source)
            current = sections.setdefault(title, [])
            continue
        if current is None:
            if not line.strip():
                continue
            if ":" not in line:
                raise MalformedLine(line, "expected 'key: value' before first section", source)
            key, value = line.split(":", 1)
            preamble[key.strip().lower()] = value.strip()
        else:
            current.append(line)
    return preamble, sections


def _parse_weight(tier_field: str, line: str, source: str) -> tuple[str, float]:
    tokens = tier_field.split()
    if not tokens:
        raise MalformedLine(line, "missing severity tier", source)
    tier = tokens[0].lower()
    if tier not in TIER_BANDS:
        raise MalformedLine(line, f"unknown tier {tier!r}", source)
    weight = TIER_MIDPOINTS[tier]
    for tok in tokens[1:]:
        if tok.startswith("w="):
            try:
                weight = float(tok[2:])
            except ValueError:
                raise MalformedLine(line, f"bad weight override {tok!r}", source) from None
        else:
            raise MalformedLine(line, f"unexpected token {tok!r} after tier", source)
    lo, hi = TIER_BANDS[tier]
    if not (0.2 <= weight <= 1.0):
        raise BadWeight(f"weight {weight} outside [0.2, 1.0] in {line!r} ({source})")
    closed = tier == "severe"
    inside = lo <= weight <= hi if closed else lo <= weight < hi
    if not inside:
        raise BadWeight(f"weight {weight} outside the {tier} band in {line!r} ({source})")
    return tier, weight


def _parse_symptom_line(line: str, source: str) -> SymptomEntry:
    parts = [p.strip() for p in line.split("|")]
    if len(parts) != 3:
        raise MalformedLine(line, "expected 'canonical | synonyms | tier'", source)
    canonical, syn_field, tier_field = parts
    if not canonical:
        raise MalformedLine(line, "empty canonical name", source)
    synonyms = tuple(s.strip() for s in syn_field.split(";") if s.strip())
    tier, weight = _parse_weight(tier_field, line, source)
    return SymptomEntry(canonical=canonical, synonyms=synonyms, weight=weight,
                        severity_tier=tier)


def _parse_risk_line(line: str, source: str) -> RiskFactor:
    parts = [p.strip() for p in line.split("|")]
    if len(parts) != 2:
        raise MalformedLine(line, "expected 'description | weight'", source)
    try:
        weight = float(parts[1])
    except ValueError:
        raise MalformedLine(line, f"bad risk weight {parts[1]!r}", source) from None
    if not (0.0 < weight <= 0.5):
        raise BadWeight(f"risk weight {weight} outside (0, 0.5] in {line!r} ({source})")
    return RiskFactor(description=parts[0], weight=weight)


def _parse_test_line(line: str, source: str) -> TestCriterion:
    parts = [p.strip() for p in line.split("|")]
    if len(parts) != 5:
        raise MalformedLine(
            line, "expected 'test_id | display | comparator threshold unit | decisive | note'",
            source)
    test_id, display, rule, kind, note = parts
    rule_tokens = rule.split()
    if len(rule_tokens) < 2:
        raise MalformedLine(line, "rule needs comparator and threshold", source)
    comparator = {"≥": ">=", "≤": "<="}.get(rule_tokens[0], rule_tokens[0])
    if comparator not in COMPARATORS:
        raise MalformedLine(line, f"unknown comparator {rule_tokens[0]!r}", source)
    try:
        threshold = float(rule_tokens[1])
    except ValueError:
        raise MalformedLine(line, f"bad threshold {rule_tokens[1]!r}", source) from None
    if not math.isfinite(threshold):
        raise MalformedLine(line, "threshold must be finite", source)
    unit = " ".join(rule_tokens[2:])
    kind_l = kind.lower()
    if kind_l not in ("decisive", "supportive"):
        raise MalformedLine(line, f"expected 'decisive' or 'supportive', got {kind!r}", source)
    return TestCriterion(test_id=test_id, display_name=display, comparator=comparator,
                         threshold=threshold, unit=unit, decisive=kind_l == "decisive",
                         note=note)


def parse_disease_document(content: str, source: str = "<string>") -> DiseaseRecord:
    """Parse one sectioned disease document into a DiseaseRecord."""
    preamble, sections = _split_sections(content, source)
    if "name" not in preamble or not preamble["name"]:
        raise MalformedLine("name:", "missing disease name", source)
    if "category" not in preamble or not preamble["category"]:
        raise MalformedLine("category:", "missing category", source)
    for required in _SECTIONS:
        if required not in sections:
            raise MissingSection(required, source)

    symptoms: list[SymptomEntry] = []
    seen_keys: dict[str, str] = {}
    for line in sections["SYMPTOMS"]:
        if not line.strip():
            continue
        entry = _parse_symptom_line(line, source)
        key = phrase_key(entry.canonical)
        if not key:
            raise MalformedLine(line, "canonical name is all stopwords", source)
        if key in seen_keys:
            raise DuplicateSymptom(
                f"{entry.canonical!r} collides with {seen_keys[key]!r} in {source}")
        seen_keys[key] = entry.canonical
        symptoms.append(entry)

    risks = [_parse_risk_line(line, source)
             for line in sections["RISK FACTORS"] if line.strip()]
    tests = [_parse_test_line(line, source)
             for line in sections["TESTS"] if line.strip()]
    management = "\n".join(sections["MANAGEMENT"]).strip()

    return DiseaseRecord(name=preamble["name"], category=preamble["category"],
                         symptoms=tuple(symptoms), risk_factors=tuple(risks),
                         tests=tuple(tests), management=management)


def emit_disease_document(record: DiseaseRecord) -> str:
    """Serialize a DiseaseRecord back to document form (reparse round-trips)."""
    lines = [f"name: {record.name}", f"category: {record.category}", ""]
    lines.append("== SYMPTOMS ==")
    for s in record.symptoms:
        tier_field = s.severity_tier
        if s.weight != TIER_MIDPOINTS[s.severity_tier]:
            tier_field += f" w={s.weight}"
        lines.append(f"{s.canonical} | {'; '.join(s.synonyms)} | {tier_field}")
    lines.append("")
    lines.append("== RISK FACTORS ==")
    for r in record.risk_factors:
        lines.append(f"{r.description} | {r.weight}")
    lines.append("")
    lines.append("== TESTS ==")
    for t in record.tests:
        rule = f"{t.comparator} {t.threshold:g}" + (f" {t.unit}" if t.unit else "")
        kind = "decisive" if t.decisive else "supportive"
        lines.append(f"{t.test_id} | {t.display_name} | {rule} | {kind} | {t.note}")
    lines.append("")
    lines.append("== MANAGEMENT ==")
    lines.append(record.management)
    return "\n".join(lines) + "\n"


def default_kb_path() -> Path:
    from importlib import resources

    return Path(str(resources.files("diagnosys").joinpath("data/kb")))


def load_knowledge_base(path: str | Path | None = None) -> KnowledgeBase:
    """Load every *.disease.txt under path (default: the bundled KB)."""
    kb_dir = Path(path) if path is not None else default_kb_path()
    files = sorted(kb_dir.glob("*.disease.txt"))
    if not files:
        raise EmptyKnowledgeBase(f"no *.disease.txt files under {kb_dir}")
    records = []
    names: set[str] = set()
    for f in files:
        record = parse_disease_document(f.read_text(encoding="utf-8"), source=f.name)
        if record.name in names:
            raise DuplicateDisease(f"{record.name!r} defined more than once")
        names.add(record.name)
        records.append(record)
    return KnowledgeBase(records)


# -- validation -------------------------------------------------------------

def validate_kb(kb: KnowledgeBase) -> list[str]:
    """Structural checks beyond what parsing enforces.  Empty list means clean."""
    problems: list[str] = []
    for d in kb.diseases:
        if d.category not in CATEGORIES:
            problems.append(f"{d.name}: unknown category {d.category!r}")
        if len(d.symptoms) < 5:
            problems.append(f"{d.name}: only {len(d.symptoms)} symptoms, need at least 5")
        if not d.tests:
            problems.append(f"{d.name}: no test criteria")
        for s in d.symptoms:
            ckey = phrase_key(s.canonical)
            for syn in s.synonyms:
                skey = phrase_key(syn)
                if not skey:
                    problems.append(f"{d.name}: synonym {syn!r} is all stopwords")
                elif skey == ckey:
                    problems.append(
                        f"{d.name}: synonym {syn!r} duplicates its canonical {s.canonical!r}")
        seen_syn: dict[str, str] = {}
        for s in d.symptoms:
            for syn in s.synonyms:
                skey = phrase_key(syn)
                owner = seen_syn.get(skey)
                if owner is not None and owner != s.canonical:
                    problems.append(
                        f"{d.name}: synonym {syn!r} claimed by both "
                        f"{owner!r} and {s.canonical!r}")
                seen_syn[skey] = s.canonical
    return problems


# -- profile similarity -----------------------------------------------------

def jaccard(a: DiseaseRecord, b: DiseaseRecord) -> float:
    """Jaccard overlap of canonical symptom sets; 1.0 when both are empty."""
    sa, sb = a.canonical_set, b.canonical_set
    if not sa and not sb:
        return 1.0
    union = sa | sb
    return len(sa & sb) / len(union)


def similarity_matrix(kb: KnowledgeBase) -> tuple[list[str], np.ndarray]:
    """Symmetric Jaccard matrix over all diseases, name-sorted order."""
    names = kb.names()
    n = len(names)
    matrix = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i, n):
            val = jaccard(kb.diseases[i], kb.diseases[j])
            matrix[i, j] = val
            matrix[j, i] = val
    return names, matrix


def max_offdiagonal_pair(kb: KnowledgeBase) -> tuple[str, str, float]:
    names, matrix = similarity_matrix(kb)
    best = ("", "", -1.0)
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            if matrix[i, j] > best[2]:
                best = (names[i], names[j], float(matrix[i, j]))
    return best


def format_similarity_csv(names: list[str], matrix: np.ndarray) -> str:
    lines = ["disease," + ",".join(names)]
    for i, name in enumerate(names):
        lines.append(name + "," + ",".join(f"{matrix[i, j]:.4f}" for j in range(len(names))))
    return "\n".join(lines) + "\n"
