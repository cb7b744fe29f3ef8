import json
import logging
import os
from typing import Dict, List, Optional, Tuple

from attr import dataclass

from multiKGQA.errors import ConfigError
from multiKGQA.text import stems

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
DEFAULT_LEXICON = os.path.join(DATA_DIR, "lexicon.json")

KINDS = ("predicate", "class", "entity")


@dataclass(frozen=True)
class LexiconEntry:
    surface: str
    kind: str
    target: Optional[str] = None
    reading: Optional[str] = None

    @property
    def display(self) -> str:
        return self.reading or self.surface


class Lexicon:
    """Surface forms matched on stemmed word sequences, longest match first."""

    def __init__(self, entries: List[LexiconEntry]):
        for entry in entries:
            if entry.kind not in KINDS:
                raise ConfigError(f"lexicon entry {entry.surface!r} has unknown kind {entry.kind!r}")
        self.entries = list(entries)
        self._by_stems: Dict[Tuple[str, ...], List[LexiconEntry]] = {}
        for entry in self.entries:
            self._by_stems.setdefault(tuple(stems(entry.surface)), []).append(entry)
        self.max_words = max((len(key) for key in self._by_stems), default=0)

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, key: Tuple[str, ...]) -> List[LexiconEntry]:
        return self._by_stems.get(key, [])

    def entries_for(self, surface: str) -> List[LexiconEntry]:
        return self.lookup(tuple(stems(surface)))

    def default_target(self, mention: str) -> Optional[str]:
        """The target hint of the first entry whose surface matches the mention, if it has one."""
        for entry in self.entries_for(mention):
            if entry.target:
                return entry.target
        return None

    def is_ambiguous(self, surface: str) -> bool:
        targets = {entry.target for entry in self.entries_for(surface)}
        return len(targets) >= 2


def load_lexicon(path: Optional[str] = None) -> Lexicon:
    path = path or DEFAULT_LEXICON
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read lexicon {path}: {e}") from e
    entries = [
        LexiconEntry(
            surface=item["surface"],
            kind=item["kind"],
            target=item.get("target"),
            reading=item.get("reading"),
        )
        for item in raw
    ]
    logger.debug("loaded %d lexicon entries from %s", len(entries), path)
    return Lexicon(entries)
