"""In-process cosine-similarity store."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class IndexEntry:
    id: int
    text: str
    vector: np.ndarray


class VectorIndex:
    """Append-only list of (id, text, vector) with cosine top-k search.

    Ties in similarity are broken by ascending insertion id.
    """

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension
        self.entries: list[IndexEntry] = []
        self._texts: set[str] = set()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, text: str) -> bool:
        return text in self._texts

    def add(self, text: str, vector: Sequence[float]) -> int:
        vec = np.asarray(vector, dtype=float)
        if vec.shape != (self.dimension,):
            raise ValueError(f"vector has shape {vec.shape}, index dimension is {self.dimension}")
        entry_id = len(self.entries)
        self.entries.append(IndexEntry(entry_id, text, vec))
        self._texts.add(text)
        return entry_id

    def search(self, query_vector: Sequence[float], k: int) -> list[tuple[str, float]]:
        if k < 0:
            raise ValueError("k must be >= 0")
        if not self.entries or k == 0:
            return []
        q = np.asarray(query_vector, dtype=float)
        matrix = np.stack([e.vector for e in self.entries])
        norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(q)
        dots = matrix @ q
        scores = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
        # stable sort keeps insertion order among equal scores
        order = np.argsort(-scores, kind="stable")[:k]
        return [(self.entries[i].text, float(scores[i])) for i in order]

    def texts(self) -> list[str]:
        return [e.text for e in self.entries]

    def digest(self) -> str:
        h = hashlib.sha256()
        for e in self.entries:
            h.update(json.dumps([e.id, e.text]).encode("utf-8"))
            h.update(np.ascontiguousarray(e.vector).tobytes())
        return h.hexdigest()


def retrieve_topk(index: VectorIndex, query: str, k: int, embed_backend) -> list[tuple[str, float]]:
    """Top-``k`` entries for ``query`` by cosine similarity, best first."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if not len(index) or k == 0:
        return []
    [vector] = embed_backend.embed([query])
    return index.search(vector, k)
