"""Event text -> token lists.

Tags are never used as text: they are what the labels are derived from.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import UnknownCategory
from .ingest import Corpus, TiEvent

HASH_TOKEN = "hashtok"

# hex runs of md5/sha1/sha256 length not glued to other word characters
_HASH_RE = re.compile(r"(?<![0-9A-Za-z])(?:[0-9a-fA-F]{64}|[0-9a-fA-F]{40}|[0-9a-fA-F]{32})(?![0-9A-Za-z])")
_SPLIT_RE = re.compile(r"[^A-Za-z0-9]+")

ENGLISH_STOPWORDS = frozenset("""
a about above after again against ain all am an and any are aren aren't as at
be because been before being below between both but by
can couldn couldn't d did didn didn't do does doesn doesn't doing don don't down during
each few for from further
had hadn hadn't has hasn hasn't have haven haven't having he her here hers herself him
himself his how
i if in into is isn isn't it it's its itself
just ll m ma me mightn mightn't more most mustn mustn't my myself
needn needn't no nor not now
o of off on once only or other our ours ourselves out over own
re s same shan shan't she she's should should've shouldn shouldn't so some such
t than that that'll the their theirs them themselves then there these they this those
through to too
under until up ve very
was wasn wasn't we were weren weren't what when where which while who whom why will
with won won't wouldn wouldn't
y you you'd you'll you're you've your yours yourself yourselves
""".split())


class Source(enum.Enum):
    INFO = "info"
    COMMENTS = "comments"
    ATTR_VALUES = "attr_values"


ALL_SOURCES = frozenset(Source)


@dataclass(frozen=True)
class TokenDoc:
    event_id: str
    tokens: tuple[str, ...]
    source_mask: frozenset[Source]

    @property
    def empty(self) -> bool:
        return not self.tokens


def load_stopwords(path) -> frozenset[str]:
    """One word per line; ``#`` starts a comment."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            w = line.split("#", 1)[0].strip().lower()
            if w:
                words.add(w)
    return frozenset(words)


def compose_text(
    event: TiEvent,
    sources: Iterable[Source] = ALL_SOURCES,
    category_filter: Optional[str] = None,
    known_categories: Optional[Iterable[str]] = None,
) -> str:
    sources = frozenset(sources)
    if not sources:
        raise ValueError("at least one text source is required")
    cat = category_filter.lower() if category_filter is not None else None
    if cat is not None and known_categories is not None:
        if cat not in {c.lower() for c in known_categories}:
            raise UnknownCategory(f"category {category_filter!r} not present in corpus")
    attrs = [a for a in event.attributes if cat is None or a.category.lower() == cat]
    parts = []
    if Source.INFO in sources and event.info:
        parts.append(event.info)
    if Source.COMMENTS in sources:
        parts.extend(a.comment for a in attrs if a.comment)
    if Source.ATTR_VALUES in sources:
        parts.extend(a.value for a in attrs)
    return " ".join(parts)


def abstract_hashes(text: str) -> str:
    return _HASH_RE.sub(HASH_TOKEN, text)


def tokenize(text: str, stopwords=ENGLISH_STOPWORDS) -> list[str]:
    return [t for t in (p.lower() for p in _SPLIT_RE.split(text)) if t and t not in stopwords]


def build_docs(
    corpus: Corpus,
    sources: Iterable[Source] = ALL_SOURCES,
    stopwords=ENGLISH_STOPWORDS,
    category_filter: Optional[str] = None,
) -> list[TokenDoc]:
    sources = frozenset(sources)
    known = corpus.categories() if category_filter is not None else None
    docs = []
    for ev in corpus.events:
        text = compose_text(ev, sources, category_filter, known)
        docs.append(TokenDoc(ev.event_id, tuple(tokenize(abstract_hashes(text), stopwords)), sources))
    return docs
