"""Tokenization, an inverted index, and lexical rankers.

Every ranker returns a :class:`RankedList` sorted by score descending with
ties broken by ``doc_id`` ascending.  Documents with zero score are still
ranked (after every positive-scoring one), so a cutoff at least as large as
the corpus returns everything.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .kb import Document

__all__ = [
    "tokenize",
    "InvertedIndex",
    "RankedList",
    "bm25_scores",
    "bm25_rank",
    "tfidf_scores",
    "tfidf_rank",
    "oracle_rank",
    "Retriever",
    "BM25Retriever",
    "TfidfRetriever",
    "BM25_K1",
    "BM25_B",
]

BM25_K1 = 1.5
BM25_B = 0.75

_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return [t for t in _SPLIT.split(text.lower()) if t]


@dataclass(frozen=True)
class RankedList:
    """Ordered ``(doc_id, score)`` pairs."""

    items: tuple[tuple[str, float], ...] = ()

    @property
    def ids(self) -> list[str]:
        return [d for d, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def rank_of(self, doc_id: str) -> int | None:
        """1-based rank of ``doc_id``, or None when absent."""
        for i, (d, _) in enumerate(self.items, 1):
            if d == doc_id:
                return i
        return None


class InvertedIndex:
    """Posting lists plus the collection statistics BM25 and TF-IDF need.

    Internally documents are numbered in ``doc_id`` order so that ranking
    ties resolve by position.
    """

    def __init__(self, docs: Iterable[Document] | Iterable[tuple[str, str]]):
        pairs = []
        for d in docs:
            if isinstance(d, Document):
                pairs.append((d.doc_id, d.text))
            else:
                pairs.append((str(d[0]), str(d[1])))
        pairs.sort(key=lambda p: p[0])
        self.doc_ids: list[str] = [p[0] for p in pairs]
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValueError("duplicate doc_id in index input")
        self._pos = {d: i for i, d in enumerate(self.doc_ids)}
        self.n_docs = len(pairs)
        lengths = np.zeros(self.n_docs, dtype=np.float64)
        postings: dict[str, list[tuple[int, int]]] = {}
        for i, (_, text) in enumerate(pairs):
            counts = Counter(tokenize(text))
            lengths[i] = sum(counts.values())
            for term, tf in counts.items():
                postings.setdefault(term, []).append((i, tf))
        self.doc_lengths = lengths
        self.avg_doc_length = float(lengths.mean()) if self.n_docs else 0.0
        self.postings: dict[str, tuple[np.ndarray, np.ndarray]] = {
            t: (np.array([p[0] for p in pl], dtype=np.int64), np.array([p[1] for p in pl], dtype=np.float64))
            for t, pl in postings.items()
        }
        self.doc_freq = {t: len(pl[0]) for t, pl in self.postings.items()}
        self._bm25_cache: dict[str, np.ndarray] = {}
        self._tfidf_norms: np.ndarray | None = None

    def __len__(self) -> int:
        return self.n_docs

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._pos

    def position(self, doc_id: str) -> int:
        return self._pos[doc_id]

    # -- idf variants ---------------------------------------------------------
    def bm25_idf(self, term: str) -> float:
        df = self.doc_freq.get(term, 0)
        return math.log((self.n_docs - df + 0.5) / (df + 0.5) + 1.0)

    def smoothed_idf(self, term: str) -> float:
        df = self.doc_freq.get(term, 0)
        return math.log((1 + self.n_docs) / (1 + df)) + 1.0

    def _bm25_weights(self, term: str) -> np.ndarray:
        w = self._bm25_cache.get(term)
        if w is None:
            idx, tf = self.postings[term]
            norm = BM25_K1 * (1 - BM25_B + BM25_B * self.doc_lengths[idx] / self.avg_doc_length)
            w = self.bm25_idf(term) * tf * (BM25_K1 + 1) / (tf + norm)
            self._bm25_cache[term] = w
        return w

    def tfidf_norms(self) -> np.ndarray:
        if self._tfidf_norms is None:
            sq = np.zeros(self.n_docs)
            for term, (idx, tf) in self.postings.items():
                sq[idx] += (tf * self.smoothed_idf(term)) ** 2
            self._tfidf_norms = np.sqrt(sq)
        return self._tfidf_norms


def bm25_scores(index: InvertedIndex, query: str) -> np.ndarray:
    """BM25 score of every indexed document (positional order).

    Repeated query terms contribute once per occurrence.
    """
    scores = np.zeros(index.n_docs)
    for term in tokenize(query):
        if term in index.postings:
            idx, _ = index.postings[term]
            scores[idx] += index._bm25_weights(term)
    return scores


def tfidf_scores(index: InvertedIndex, query: str) -> np.ndarray:
    """Cosine between the query's and each document's raw-tf x smoothed-idf vector."""
    q = Counter(t for t in tokenize(query))
    scores = np.zeros(index.n_docs)
    q_sq = 0.0
    for term, qtf in q.items():
        wq = qtf * index.smoothed_idf(term)
        q_sq += wq * wq
        if term in index.postings:
            idx, tf = index.postings[term]
            scores[idx] += wq * tf * index.smoothed_idf(term)
    if q_sq == 0.0:
        return scores
    norms = index.tfidf_norms()
    denom = math.sqrt(q_sq) * norms
    np.divide(scores, denom, out=scores, where=denom > 0)
    return scores


def _top_k(index: InvertedIndex, scores: np.ndarray, k: int) -> RankedList:
    if k < 1:
        raise ValueError("k must be >= 1")
    n = len(scores)
    k = min(k, n)
    if k == 0:
        return RankedList()
    if k < n:
        # everything scoring at least the k-th largest value, so ties at the
        # boundary are resolved by position rather than by argpartition
        kth = np.partition(scores, n - k)[n - k]
        cand = np.flatnonzero(scores >= kth)
    else:
        cand = np.arange(n)
    order = cand[np.lexsort((cand, -scores[cand]))][:k]
    return RankedList(tuple((index.doc_ids[i], float(scores[i])) for i in order))


def bm25_rank(index: InvertedIndex, query: str, k: int) -> RankedList:
    """Okapi BM25 (k1=1.5, b=0.75) top-k.  An empty query yields an empty list."""
    if not tokenize(query):
        return RankedList()
    return _top_k(index, bm25_scores(index, query), k)


def tfidf_rank(index: InvertedIndex, query: str, k: int) -> RankedList:
    """TF-IDF cosine top-k.  An empty query yields an empty list."""
    if not tokenize(query):
        return RankedList()
    return _top_k(index, tfidf_scores(index, query), k)


def oracle_rank(gold_ids: Sequence[str], corpus: Iterable[Document] | Iterable[str], k: int) -> RankedList:
    """Gold documents first in the given order, then the rest by ``doc_id``."""
    all_ids = sorted(d.doc_id if isinstance(d, Document) else d for d in corpus)
    known = set(all_ids)
    for g in gold_ids:
        if g not in known:
            raise KeyError(f"unknown gold doc_id {g!r}")
    gold = list(dict.fromkeys(gold_ids))
    n_gold = len(gold)
    gold_set = set(gold)
    rest = [d for d in all_ids if d not in gold_set]
    ordered = gold + rest
    # scores only encode the order: gold above 1, others in (0, 1]
    items = [(d, float(n_gold - i + 1)) for i, d in enumerate(gold)]
    items += [(d, 1.0 / (i + 1)) for i, d in enumerate(rest)]
    return RankedList(tuple(items[: min(k, len(ordered))]))


class Retriever(Protocol):
    """Any object with ``retrieve(query, corpus, k) -> list of doc_ids``."""

    def retrieve(self, query: str, corpus: Sequence[Document], k: int) -> list[str]: ...


class _IndexedRetriever:
    _rank = staticmethod(bm25_rank)

    def __init__(self):
        self._index: InvertedIndex | None = None
        self._corpus_ref = None

    def index_for(self, corpus: Sequence[Document]) -> InvertedIndex:
        if self._index is None or self._corpus_ref is not corpus:
            self._index = InvertedIndex(corpus)
            self._corpus_ref = corpus
        return self._index

    def rank(self, query: str, corpus: Sequence[Document], k: int) -> RankedList:
        return type(self)._rank(self.index_for(corpus), query, k)

    def retrieve(self, query: str, corpus: Sequence[Document], k: int) -> list[str]:
        return self.rank(query, corpus, k).ids


class BM25Retriever(_IndexedRetriever):
    _rank = staticmethod(bm25_rank)


class TfidfRetriever(_IndexedRetriever):
    _rank = staticmethod(tfidf_rank)
