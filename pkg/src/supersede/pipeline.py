"""Entity-indexed two-stage retrieval and the deterministic answer function.

Stage 1 ranks the corpus lexically.  Stage 2 takes every Stage-1 hit whose
scope matches the query's entities (the anchors), pulls every later document
filed under the same entity key, decides which of those are still active, and
promotes the active ones to the top of the final list.

Activity is decided in one of two ways:

``anchor_only``
    Timestamps only: the latest document at or after the anchor in its
    bucket wins.  This is what any algorithm blind to the rules can do.
``anchor_plus_rssg``
    Supersession rules are applied pairwise over the bucket (the RSSG) and the
    frontier of the anchors' closure is promoted.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .kb import Document, EntityKey, SupersessionGraph, closure, frontier, key_dict, keys_compatible, make_key
from .retrieval import InvertedIndex, RankedList, bm25_rank, tfidf_rank
from .rules import EventType, RuleSet, build_rssg

__all__ = [
    "AnswerLabel",
    "Answer",
    "derive_answer",
    "EntityIndex",
    "build_entity_index",
    "extract_scope",
    "PipelineConfig",
    "STAGE1_RANKERS",
    "two_stage_retrieve",
    "dense_rerank_retrieve",
    "read_answer",
]


class AnswerLabel:
    EXCEPTION_GRANTED = "ExceptionGranted"
    BLOCKED = "Blocked"
    APPROVED = "Approved"
    NO_CLEARANCE = "NoClearance"
    REQUIRES_REVIEW = "RequiresReview"

    ALL = (EXCEPTION_GRANTED, BLOCKED, APPROVED, NO_CLEARANCE, REQUIRES_REVIEW)


@dataclass(frozen=True)
class Answer:
    label: str
    supporting: tuple[str, ...] = ()


_PRIORITY = (
    ((EventType.EMERGENCY_EXCEPTION,), AnswerLabel.EXCEPTION_GRANTED),
    ((EventType.BLACKOUT_ANNOUNCED, EventType.WATCHLIST_ADDED), AnswerLabel.BLOCKED),
    ((EventType.PRE_CLEARANCE_APPROVED,), AnswerLabel.APPROVED),
    ((EventType.BLACKOUT_LIFTED,), AnswerLabel.NO_CLEARANCE),
)


def derive_answer(active: Iterable[Document]) -> Answer:
    """Map an active document set to a compliance label by fixed priority."""
    active = list(active)
    for types, label in _PRIORITY:
        support = sorted(d.doc_id for d in active if d.doc_type in types)
        if support:
            return Answer(label, tuple(support))
    return Answer(AnswerLabel.REQUIRES_REVIEW)


class EntityIndex:
    """Entity key -> doc_ids ordered by ``(time, doc_id)``."""

    def __init__(self, buckets: dict[EntityKey, tuple[str, ...]], docs: dict[str, Document]):
        self.buckets = buckets
        self.docs = docs

    def __len__(self) -> int:
        return len(self.buckets)

    def __getitem__(self, key: EntityKey) -> tuple[str, ...]:
        return self.buckets.get(key, ())

    def __contains__(self, key: EntityKey) -> bool:
        return key in self.buckets

    def keys(self):
        return self.buckets.keys()

    def later_than(self, key: EntityKey, time: int) -> list[Document]:
        return [self.docs[i] for i in self[key] if self.docs[i].time > time]


def build_entity_index(corpus: Iterable[Document]) -> EntityIndex:
    docs: dict[str, Document] = {}
    raw: dict[EntityKey, list[Document]] = {}
    for d in corpus:
        docs[d.doc_id] = d
        for key in dict.fromkeys(d.scope):
            raw.setdefault(key, []).append(d)
    buckets = {
        key: tuple(d.doc_id for d in sorted(ds, key=lambda d: (d.time, d.doc_id))) for key, ds in raw.items()
    }
    return EntityIndex(buckets, docs)


_EMP = re.compile(r"\bEMP\d{5}\b")
_TICKER = re.compile(r"\b[A-Z]{3,5}\b")
# all-caps words that can appear in query text but are never tickers
_NOT_TICKERS = frozenset({"EMP", "SEC", "CVE", "FDA", "NDC"})


def extract_scope(query: str) -> set[EntityKey]:
    """All ``(emp, ticker)`` keys named by a query.

    Employee ids look like ``EMP`` plus five digits, tickers are 3-5 capital
    letters standing alone.  Every employee is paired with every ticker.
    """
    emps = list(dict.fromkeys(_EMP.findall(query)))
    tickers = [t for t in dict.fromkeys(_TICKER.findall(query)) if t not in _NOT_TICKERS]
    return {make_key(emp=e, ticker=t) for e in emps for t in tickers}


STAGE1_RANKERS = {"bm25": bm25_rank, "tfidf": tfidf_rank}


@dataclass(frozen=True)
class PipelineConfig:
    stage1_k: int = 20
    final_k: int = 5
    stage1_ranker: str = "tfidf"
    mode: str = "anchor_plus_rssg"

    def __post_init__(self):
        if not self.stage1_k >= self.final_k >= 1:
            raise ValueError("need stage1_k >= final_k >= 1")
        if self.stage1_ranker not in STAGE1_RANKERS:
            raise ValueError(f"unknown stage-1 ranker {self.stage1_ranker!r}")
        if self.mode not in ("anchor_only", "anchor_plus_rssg"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class _Trace:
    mode: str
    query_keys: list = field(default_factory=list)
    stage1_ids: list = field(default_factory=list)
    anchor_ids: list = field(default_factory=list)
    bucket_ids: list = field(default_factory=list)
    promoted_ids: list = field(default_factory=list)
    rssg_edge_count: int = 0
    rule_checks: int = 0

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "anchor_hit": bool(self.anchor_ids),
            "query_keys": [key_dict(k) for k in self.query_keys],
            "stage1_ids": list(self.stage1_ids),
            "anchor_ids": list(self.anchor_ids),
            "bucket_ids": list(self.bucket_ids),
            "promoted_ids": list(self.promoted_ids),
            "rssg_edge_count": self.rssg_edge_count,
            "rule_checks": self.rule_checks,
        }


def _lookup_keys(doc: Document, query_keys: set[EntityKey]) -> list[EntityKey]:
    if not query_keys:
        return list(doc.scope)
    return [k for k in doc.scope if any(keys_compatible(k, q) for q in query_keys)]


def _as_ranked(ids: Sequence[str]) -> RankedList:
    n = len(ids)
    return RankedList(tuple((d, float(n - i)) for i, d in enumerate(ids)))


def two_stage_retrieve(
    query: str,
    corpus: Sequence[Document] | None,
    index: EntityIndex,
    rules: RuleSet,
    cfg: PipelineConfig = PipelineConfig(),
    text_index: InvertedIndex | None = None,
) -> tuple[RankedList, dict]:
    """Anchor-probe retrieval.  Returns the final list and a diagnostics dict.

    Anchors are positive-scoring Stage-1 hits about the query's entities.

    The diagnostics carry ``active_ids``: the promoted documents surviving the
    final cutoff, i.e. the set the pipeline answers from.
    """
    if text_index is None:
        text_index = InvertedIndex(corpus if corpus is not None else index.docs.values())
    trace = _Trace(cfg.mode)
    ranked = STAGE1_RANKERS[cfg.stage1_ranker](text_index, query, cfg.stage1_k)
    stage1 = ranked.ids
    trace.stage1_ids = stage1
    query_keys = extract_scope(query)
    trace.query_keys = sorted(query_keys)

    # zero-score hits only fill the list; they never act as anchors
    anchors = [index.docs[d] for d, s in ranked if s > 0 and _lookup_keys(index.docs[d], query_keys)]
    trace.anchor_ids = [a.doc_id for a in anchors]

    # Stage 2: every later same-key document of every anchor -> cl(A)
    later: dict[str, list[Document]] = {}
    bucket: dict[str, Document] = {a.doc_id: a for a in anchors}
    for a in anchors:
        found: dict[str, Document] = {}
        for key in _lookup_keys(a, query_keys):
            for d in index.later_than(key, a.time):
                found.setdefault(d.doc_id, d)
        later[a.doc_id] = sorted(found.values(), key=lambda d: (d.time, d.doc_id))
        bucket.update(found)
    trace.bucket_ids = sorted(bucket)

    promoted: list[str] = []
    if cfg.mode == "anchor_only":
        for a in anchors:
            chain = [a] + later[a.doc_id]
            tip = max(chain, key=lambda d: (d.time, d.doc_id))
            if tip.doc_id not in promoted:
                promoted.append(tip.doc_id)
    else:
        stats: dict = {}
        rssg = build_rssg(sorted(bucket.values(), key=lambda d: (d.time, d.doc_id)), rules, stats)
        trace.rssg_edge_count = len(rssg.edges)
        trace.rule_checks = stats.get("rule_checks", 0)
        for a in anchors:
            reach = closure(rssg, [a.doc_id])
            tips = frontier(rssg, reach)
            for d in sorted(tips, key=lambda i: (bucket[i].time, i)):
                if d not in promoted:
                    promoted.append(d)

    promoted_set = set(promoted)
    superseded_anchors = [a.doc_id for a in anchors if a.doc_id not in promoted_set]
    final = list(dict.fromkeys(promoted + superseded_anchors + stage1))[: cfg.final_k]
    trace.promoted_ids = promoted
    diag = trace.as_dict()
    diag["active_ids"] = [d for d in promoted if d in set(final)]
    return _as_ranked(final), diag


def dense_rerank_retrieve(
    query: str,
    corpus: Sequence[Document] | None,
    gold_graph: SupersessionGraph,
    cfg: PipelineConfig = PipelineConfig(stage1_ranker="tfidf"),
    text_index: InvertedIndex | None = None,
) -> RankedList:
    """Re-rank a TF-IDF top-``stage1_k`` pool using gold supersession edges.

    A pool member superseded in ``gold_graph`` has its superseders moved to the
    front, but only superseders already present in the pool.
    """
    if text_index is None:
        text_index = InvertedIndex(corpus)
    pool = tfidf_rank(text_index, query, cfg.stage1_k).ids
    in_pool = set(pool)
    lift: set[str] = set()
    for d in pool:
        if d in gold_graph.nodes and gold_graph.is_superseded(d):
            lift |= gold_graph.superseders(d) & in_pool
    promoted = [d for d in pool if d in lift]
    final = list(dict.fromkeys(promoted + pool))[: cfg.final_k]
    return _as_ranked(final)


def read_answer(
    retrieved: Sequence[Document], query_keys: set[EntityKey], rules: RuleSet
) -> tuple[Answer, list[str]]:
    """Answer a query from a plain retrieved list.

    Reads only documents about the query's entities, works out which of them
    supersede which using ``rules``, and answers from the ones left active.
    """
    seen = [d for d in dict.fromkeys(retrieved)]
    if query_keys:
        seen = [d for d in seen if _lookup_keys(d, query_keys)]
    if not seen:
        return derive_answer([]), []
    g = build_rssg(seen, rules)
    active = frontier(g, g.nodes)
    docs = [d for d in seen if d.doc_id in active]
    return derive_answer(docs), [d.doc_id for d in docs]
