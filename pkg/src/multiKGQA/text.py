"""Word-level normalization shared by the lexicon matcher, schema grounding and the embedder."""
import re
from functools import lru_cache
from typing import FrozenSet, List

from nltk.stem import PorterStemmer

_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_WORD = re.compile(r"[A-Za-z0-9]+")

_stemmer = PorterStemmer()


@lru_cache(maxsize=8192)
def stem(word: str) -> str:
    return _stemmer.stem(word.lower())


def words(text: str) -> List[str]:
    """Lowercased word tokens, with camelCase identifiers split apart."""
    return [word.lower() for word in _WORD.findall(_CAMEL.sub(" ", text))]


def stems(text: str) -> List[str]:
    return [stem(word) for word in words(text)]


def stem_set(text: str) -> FrozenSet[str]:
    return frozenset(stems(text))


def jaccard(left: str, right: str) -> float:
    a, b = stem_set(left), stem_set(right)
    if not a or not b:
        return 0.0
    return len(a & b) / len(a | b)


def label_score(mention: str, label: str) -> float:
    """1.0 for a case-folded exact match, the stemmed Jaccard value when it is at least 0.5, else 0."""
    if mention.strip().casefold() == label.strip().casefold():
        return 1.0
    score = jaccard(mention, label)
    return score if score >= 0.5 else 0.0
