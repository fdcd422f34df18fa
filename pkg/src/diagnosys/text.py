"""Token-level input normalization.

One normalization pipeline is shared by the symptom matcher, the offline
lexicon scanner, and the KB loader so that user phrasing and KB phrasing
land in the same key space: lowercase, punctuation replaced by spaces,
whitespace tokenized, stopwords removed.  The stopword list ships as a
data file and is fixed at 40 entries; changing it changes match keys, so
treat it as part of the KB contract.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

_NON_ALNUM = re.compile(r"[^a-z0-9]+")


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    raw = resources.files("diagnosys").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    words = frozenset(w.strip() for w in raw.splitlines() if w.strip())
    return words


def fold(text: str) -> str:
    """Lowercase and collapse every non-alphanumeric run to a single space."""
    return _NON_ALNUM.sub(" ", text.lower()).strip()


def normalize_input(text: str) -> list[str]:
    """Tokenize free text for matching: folded, stopwords dropped.

    >>> normalize_input("I have a headache and a fever")
    ['headache', 'fever']
    """
    stop = stopwords()
    return [tok for tok in fold(text).split() if tok not in stop]


def phrase_key(text: str) -> str:
    """Canonical lookup key for a symptom phrase."""
    return " ".join(normalize_input(text))
