"""Deterministic local embeddings, document chunking, and a flat vector index.

The builtin embedder hashes character trigrams of normalized text into a
fixed 256-dimensional count vector and L2-normalizes it.  It needs no
model artifacts, produces bitwise-identical vectors for identical input,
and is the default everywhere; a remote HTTP provider with the same
interface can be swapped in for live deployments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadChunkParams,
    DimensionMismatch,
    DuplicateKey,
    EmptyIndex,
    RemoteUnavailable,
)

DIMENSION = 256

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def _fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a over raw bytes."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _normalize(text: str) -> str:
    # Embedding normalization keeps stopwords; only case and punctuation
    # are folded so trigram mass is stable across surface variants.
    return _NON_ALNUM.sub(" ", text.lower()).strip()


@lru_cache(maxsize=8192)
def _embed_cached(text: str) -> np.ndarray:
    vec = np.zeros(DIMENSION, dtype=np.float64)
    norm = _normalize(text)
    for i in range(len(norm) - 2):
        tri = norm[i : i + 3]
        vec[_fnv1a_64(tri.encode("utf-8")) % DIMENSION] += 1.0
    n = float(np.linalg.norm(vec))
    if n > 0.0:
        vec /= n
    vec.flags.writeable = False
    return vec


def embed_text(text: str) -> np.ndarray:
    """Embed a string into a unit (or zero) vector of dimension 256.

    Strings with no trigrams after normalization map to the zero vector.
    The returned array is read-only; copy before mutating.
    """
    return _embed_cached(text)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0.0 if either has zero norm."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector dims differ: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


# -- chunking ---------------------------------------------------------------

@dataclass(frozen=True)
class Chunk:
    text: str
    start_offset: int
    source_id: str


def chunk_document(text: str, size: int = 1000, overlap: int = 200,
                   source_id: str = "doc") -> list[Chunk]:
    """Split text into fixed-stride chunks.

    Chunk i starts at i * (size - overlap).  Generation stops with the
    first chunk whose window extends past the end of the text, so every
    character is covered and consecutive chunks overlap by exactly
    `overlap` characters (the final chunk may be shorter).
    """
    if size <= 0 or overlap < 0 or overlap >= size:
        raise BadChunkParams(f"need 0 <= overlap < size, got size={size} overlap={overlap}")
    if not text:
        return []
    step = size - overlap
    chunks: list[Chunk] = []
    start = 0
    while True:
        chunks.append(Chunk(text=text[start : start + size], start_offset=start,
                            source_id=source_id))
        if start + size > len(text):
            break
        start += step
        if start >= len(text):
            break
    return chunks


def stitch_chunks(chunks: Sequence[Chunk], overlap: int = 200) -> str:
    """Inverse of chunk_document: drop each chunk's leading overlap and join."""
    if not chunks:
        return ""
    parts = [chunks[0].text]
    for c in chunks[1:]:
        parts.append(c.text[overlap:])
    return "".join(parts)


# -- flat index -------------------------------------------------------------

@dataclass
class VectorIndex:
    """Exact-scan cosine index over a fixed set of (key, vector) entries."""

    dimension: int = DIMENSION
    keys: list[str] = field(default_factory=list)
    matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, DIMENSION)))
    payloads: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.keys)

    def search(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        """Top-k entries by cosine similarity, ties broken by key ascending."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if not self.keys:
            raise EmptyIndex("search on an index with no entries")
        if query.shape != (self.dimension,):
            raise DimensionMismatch(f"query shape {query.shape}, index dim {self.dimension}")
        # Rows and query are unit or zero vectors, so the dot product is
        # already the cosine; zero rows/queries contribute 0 as required.
        qn = float(np.linalg.norm(query))
        q = query / qn if qn > 0.0 else query
        sims = self.matrix @ q
        order = sorted(range(len(self.keys)), key=lambda i: (-sims[i], self.keys[i]))
        return [(self.keys[i], float(sims[i])) for i in order[: min(k, len(self.keys))]]

    def scan(self, query: np.ndarray, threshold: float) -> list[tuple[str, float]]:
        """Every entry with similarity >= threshold, best first, key-ascending ties."""
        if not self.keys:
            return []
        qn = float(np.linalg.norm(query))
        q = query / qn if qn > 0.0 else query
        sims = self.matrix @ q
        hits = [(self.keys[i], float(sims[i])) for i in range(len(self.keys))
                if sims[i] >= threshold]
        hits.sort(key=lambda t: (-t[1], t[0]))
        return hits


def build_index(items: Sequence[tuple[str, str]]) -> VectorIndex:
    """Embed (key, text) pairs into a VectorIndex.  Keys must be unique."""
    seen: set[str] = set()
    keys: list[str] = []
    rows: list[np.ndarray] = []
    payloads: dict[str, str] = {}
    for key, text in items:
        if key in seen:
            raise DuplicateKey(f"duplicate index key {key!r}")
        seen.add(key)
        keys.append(key)
        rows.append(embed_text(text))
        payloads[key] = text
    matrix = np.vstack(rows) if rows else np.zeros((0, DIMENSION))
    return VectorIndex(dimension=DIMENSION, keys=keys, matrix=matrix, payloads=payloads)


# -- providers --------------------------------------------------------------

class BuiltinEmbedder:
    """Default provider: the local trigram embedder."""

    mode = "builtin"
    dimension = DIMENSION

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [embed_text(t) for t in texts]


class RemoteEmbedder:
    """Provider backed by an HTTP endpoint: POST {base_url}/embed.

    Request body is {"texts": [...]}, response {"vectors": [[...], ...]}.
    Any transport failure or malformed payload raises RemoteUnavailable.
    """

    mode = "remote"

    def __init__(self, base_url: str, timeout: float = 10.0,
                 dimension: int = DIMENSION, client: Optional[object] = None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.dimension = dimension
        self._client = client or httpx.Client(timeout=timeout)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        try:
            resp = self._client.post(f"{self.base_url}/embed", json={"texts": list(texts)})
            resp.raise_for_status()
            payload = resp.json()
            vectors = payload["vectors"]
        except Exception as exc:
            raise RemoteUnavailable(f"embedding endpoint failed: {exc}") from exc
        if len(vectors) != len(texts):
            raise RemoteUnavailable(
                f"endpoint returned {len(vectors)} vectors for {len(texts)} texts")
        out = []
        for v in vectors:
            arr = np.asarray(v, dtype=np.float64)
            if arr.shape != (self.dimension,):
                raise RemoteUnavailable(f"bad vector shape {arr.shape}")
            out.append(arr)
        return out
