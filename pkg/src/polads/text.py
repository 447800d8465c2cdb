"""Ad text to TF-IDF features: markup stripping, tokenization, stemming,
stop-word removal, and a smoothed-idf / L2-normalized vectorizer over
unigrams and bigrams.

Bigrams never span the title/message join: the builder inserts a boundary
marker between the two fields and the tokenizer records it as a break in
the token stream.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyCorpus, EmptyVocabulary
from .sparse import SparseVector
from .stemmer import stem

log = logging.getLogger(__name__)

BOUNDARY = "⊥"  # separates title from message so bigrams cannot cross

_TAG_RE = re.compile(r"<[^>]*>")
_TOKEN_RE = re.compile(r"[^\W_]{2,}", re.UNICODE)
_ENTITIES = (
    ("&lt;", "<"), ("&gt;", ">"), ("&quot;", '"'), ("&apos;", "'"), ("&amp;", "&"),
)

_VECTORIZER_SCHEMA = 1


def load_stop_words(path: str | Path | None = None) -> frozenset[str]:
    """The stop list: the bundled 318-word English list, or a substitute file
    with one word per line."""
    if path is None:
        text = resources.files("polads").joinpath(
            "data/stopwords-english.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def strip_markup(text: str) -> str:
    """Drop <...> spans and decode the five standard character entities."""
    text = _TAG_RE.sub(" ", text)
    for entity, char in _ENTITIES:
        text = text.replace(entity, char)
    return text


def build_text(title: str | None, message: str) -> str:
    """Concatenate title and markup-stripped message with a bigram boundary."""
    title = " ".join((title or "").split())
    body = " ".join(strip_markup(message or "").split())
    if title and body:
        return f"{title} {BOUNDARY} {body}"
    return title or body


@dataclass(frozen=True)
class TokenStream:
    """Stemmed, stop-filtered tokens plus the break positions between which
    bigrams may not form (a break at i blocks the bigram (i-1, i))."""

    tokens: tuple[str, ...]
    breaks: frozenset[int] = field(default_factory=frozenset)

    def ngrams(self, ngram_max: int) -> Iterable[str]:
        yield from self.tokens
        if ngram_max >= 2:
            for i in range(1, len(self.tokens)):
                if i not in self.breaks:
                    yield f"{self.tokens[i - 1]} {self.tokens[i]}"


def tokenize_and_stem(text: str, stop_words: frozenset[str]) -> TokenStream:
    """Lowercase, split on runs of 2+ alphanumerics, drop stop words, then
    stem the survivors. Stop words are matched before stemming."""
    tokens: list[str] = []
    breaks: set[int] = set()
    for segment in text.split(BOUNDARY):
        start = len(tokens)
        for raw in _TOKEN_RE.findall(segment.lower()):
            if raw in stop_words:
                continue
            stemmed = stem(raw)
            if len(stemmed) >= 2:
                tokens.append(stemmed)
        if 0 < start < len(tokens):
            breaks.add(start)
    return TokenStream(tuple(tokens), frozenset(breaks))


@dataclass
class TfIdfVectorizer:
    """Fitted text vocabulary with smoothed idf weights.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1; transform multiplies raw n-gram
    counts by idf and L2-normalizes.
    """

    vocabulary: dict[str, int]
    idf: np.ndarray
    ngram_max: int = 2
    min_df: int = 2

    @property
    def dim(self) -> int:
        return len(self.vocabulary)

    def feature_names(self) -> list[str]:
        names = [""] * len(self.vocabulary)
        for term, col in self.vocabulary.items():
            names[col] = term
        return names

    def to_json(self) -> dict:
        return {
            "schema_version": _VECTORIZER_SCHEMA,
            "kind": "tfidf",
            "ngram_max": self.ngram_max,
            "min_df": self.min_df,
            "terms": self.feature_names(),
            "idf": [float(v) for v in self.idf],
        }

    @staticmethod
    def from_json(doc: dict) -> "TfIdfVectorizer":
        if doc.get("schema_version") != _VECTORIZER_SCHEMA or doc.get("kind") != "tfidf":
            raise ValueError("not a vectorizer document")
        vocab = {t: i for i, t in enumerate(doc["terms"])}
        return TfIdfVectorizer(
            vocabulary=vocab,
            idf=np.asarray(doc["idf"], dtype=np.float64),
            ngram_max=int(doc["ngram_max"]),
            min_df=int(doc["min_df"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1),
                              encoding="utf-8")

    @staticmethod
    def load(path: str | Path) -> "TfIdfVectorizer":
        return TfIdfVectorizer.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_vectorizer(docs: Sequence[TokenStream], ngram_max: int = 2,
                   min_df: int = 2) -> TfIdfVectorizer:
    """Build the vocabulary of n-grams with document frequency >= min_df."""
    if not docs:
        raise EmptyCorpus("no documents to fit on")
    df: dict[str, int] = {}
    for doc in docs:
        for term in set(doc.ngrams(ngram_max)):
            df[term] = df.get(term, 0) + 1
    kept = sorted(t for t, c in df.items() if c >= min_df)
    if not kept:
        raise EmptyVocabulary(f"no n-gram reaches document frequency {min_df}")
    n = len(docs)
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in kept],
                   dtype=np.float64)
    vocab = {t: i for i, t in enumerate(kept)}
    log.debug("fitted vocabulary of %d n-grams over %d docs", len(kept), n)
    return TfIdfVectorizer(vocabulary=vocab, idf=idf, ngram_max=ngram_max,
                           min_df=min_df)


def transform(doc: TokenStream, v: TfIdfVectorizer) -> SparseVector:
    """TF-IDF vector of one document; out-of-vocabulary n-grams are ignored."""
    counts: dict[int, float] = {}
    for term in doc.ngrams(v.ngram_max):
        col = v.vocabulary.get(term)
        if col is not None:
            counts[col] = counts.get(col, 0.0) + 1.0
    vec = SparseVector.from_pairs(
        ((col, cnt * v.idf[col]) for col, cnt in counts.items()), v.dim)
    return vec.l2_normalized()
