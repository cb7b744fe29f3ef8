"""Lexical embedder for weak-tier retrieval: TF-IDF over stemmed words of the registry corpus.

Vectors are plain ``{stem: weight}`` dicts, L2-normalized, so cosine similarity
is a dot product. Any object with ``embed_text`` and ``similarity`` can stand
in for a neural embedder.
"""
import logging
from typing import Dict, Iterable

from sklearn.feature_extraction.text import TfidfVectorizer

from multiKGQA.text import stems

logger = logging.getLogger(__name__)

Vector = Dict[str, float]


class LexicalEmbedder:
    def __init__(self, corpus: Iterable[str]):
        documents = [doc for doc in corpus if stems(doc)]
        self._vectorizer = None
        self._features = []
        if documents:
            self._vectorizer = TfidfVectorizer(analyzer=stems, norm="l2")
            self._vectorizer.fit(documents)
            self._features = self._vectorizer.get_feature_names_out()
        logger.debug("fitted embedder over %d documents, %d terms", len(documents), len(self._features))

    @property
    def vocabulary_size(self) -> int:
        return len(self._features)

    def embed_text(self, text: str) -> Vector:
        if self._vectorizer is None or not text.strip():
            return {}
        row = self._vectorizer.transform([text]).tocoo()
        return {str(self._features[j]): float(v) for j, v in zip(row.col, row.data)}

    @staticmethod
    def similarity(left: Vector, right: Vector) -> float:
        if len(left) > len(right):
            left, right = right, left
        score = sum(weight * right.get(term, 0.0) for term, weight in left.items())
        return min(1.0, max(0.0, score))
