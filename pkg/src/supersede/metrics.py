"""Compliance-correctness metrics and diagnostics.

All checks against ground truth use the example's gold supersession graph.
Retrieved documents outside that graph (distractors) are neither gold nor
superseded in it, so they never count toward provenance recall or the
no-ignored-superseder condition.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from importlib import resources

from .kb import Document, SupersessionGraph, closure, frontier
from .pipeline import Answer, EntityIndex, build_entity_index
from .retrieval import InvertedIndex, bm25_scores, tfidf_scores, tokenize

__all__ = [
    "AuditVerdict",
    "audit_frontier_conditions",
    "no_ignored_superseder",
    "tca",
    "prov_rec",
    "recall_at_k",
    "answer_acc",
    "scope_stats",
    "divergence_stats",
    "make_scorer",
    "factorization_report",
    "vocab_gap_stats",
    "jaccard",
    "load_stopwords",
]


@dataclass(frozen=True)
class AuditVerdict:
    frontier_inclusion: bool
    no_ignored_superseder: bool
    violating_ids: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.frontier_inclusion and self.no_ignored_superseder

    def to_json(self) -> dict:
        return {
            "frontier_inclusion": self.frontier_inclusion,
            "no_ignored_superseder": self.no_ignored_superseder,
            "violating_ids": list(self.violating_ids),
        }


def _ignored(R: frozenset[str], graph: SupersessionGraph) -> list[str]:
    # superseded members of R with no retrieved superseder
    return sorted(d for d in R if graph.is_superseded(d) and not (graph.superseders(d) & R))


def no_ignored_superseder(R: Iterable[str], graph: SupersessionGraph) -> bool:
    R = frozenset(R)
    graph._check(R)
    return not _ignored(R, graph)


def audit_frontier_conditions(R: Iterable[str], anchors: Iterable[str], graph: SupersessionGraph) -> AuditVerdict:
    """Check frontier inclusion and no-ignored-superseder for retrieved set ``R``.

    ``violating_ids`` lists missing frontier documents first, then retrieved
    documents whose superseders were all left out.
    """
    R = frozenset(R)
    graph._check(R)
    front = frontier(graph, closure(graph, anchors))
    missing = sorted(front - R)
    ignored = _ignored(R, graph)
    return AuditVerdict(not missing, not ignored, tuple(missing + [d for d in ignored if d not in missing]))


def tca(R: Iterable[str], example, graph: SupersessionGraph, answer: Answer) -> int:
    """1 iff the answer is right and every retrieved superseded gold doc has its superseder."""
    R = frozenset(R) & graph.nodes
    return int(answer.label == example.gold_answer and no_ignored_superseder(R, graph))


def _gold_set(gold_ids: Iterable[str]) -> set[str]:
    gold = set(gold_ids)
    if not gold:
        raise ValueError("gold set is empty")
    return gold


def prov_rec(R: Iterable[str], gold_ids: Iterable[str]) -> float:
    gold = _gold_set(gold_ids)
    return len(gold & set(R)) / len(gold)


def recall_at_k(R: Sequence[str], gold_ids: Iterable[str], k: int) -> float:
    """Provenance recall over the first ``k`` retrieved ids."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return prov_rec(list(R)[:k], gold_ids)


def answer_acc(answer: Answer | str, gold: str) -> int:
    if not gold:
        raise ValueError("gold answer is empty")
    label = answer.label if isinstance(answer, Answer) else answer
    return int(label == gold)


def scope_stats(
    example, corpus: Iterable[Document] | EntityIndex, graph: SupersessionGraph
) -> tuple[float, float]:
    """``(kappa, phi)``: bucket size over the anchor chain's closure size."""
    index = corpus if isinstance(corpus, EntityIndex) else build_entity_index(corpus)
    bucket = index[example.scope]
    if not bucket:
        raise ValueError(f"empty scope bucket for {example.example_id}")
    anchor = example.gold_event_ids[0]
    cl = closure(graph, [anchor])
    kappa = max(1.0, len(bucket) / len(cl))
    return kappa, min(1.0, 1.0 / kappa)


Scorer = Callable[[str], Mapping[str, float]]


def make_scorer(index: InvertedIndex, kind: str = "bm25") -> Scorer:
    """Wrap an index into ``query -> {doc_id: score}``."""
    fn = {"bm25": bm25_scores, "tfidf": tfidf_scores}[kind]

    def score(query: str) -> dict[str, float]:
        return dict(zip(index.doc_ids, fn(index, query).tolist()))

    return score


def divergence_stats(example, corpus: Iterable[Document] | None, scorer: Scorer, graph: SupersessionGraph):
    """``(delta, n_plus)`` for one example.

    ``delta`` is the best score on the anchor's chain minus the best score on
    its active frontier; ``n_plus`` counts documents scoring strictly above
    the best frontier document (the controlling document).
    """
    scores = scorer(example.query)
    if corpus is not None:
        ids = [d.doc_id if isinstance(d, Document) else d for d in corpus]
        scores = {i: scores.get(i, 0.0) for i in ids}
    cl = closure(graph, [example.gold_event_ids[0]])
    front = frontier(graph, cl)
    best_front = max(scores.get(d, 0.0) for d in front)
    best_chain = max(scores.get(d, 0.0) for d in cl)
    n_plus = sum(1 for s in scores.values() if s > best_front)
    return best_chain - best_front, n_plus


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs) if xs else float("nan")


def factorization_report(records: Sequence[Mapping]) -> dict:
    """Empirical chain rule over nested indicator events.

    Each record needs ``anchor_hit`` (E_a), ``answer_correct`` (E_s),
    ``nis`` (E_f) and ``tca``.  Conditionals with an empty conditioning set
    are reported as None and the product check is skipped.
    """
    n = len(records)
    if n == 0:
        raise ValueError("no records")
    a = [r for r in records if r["anchor_hit"]]
    as_ = [r for r in a if r["answer_correct"]]
    asf = [r for r in as_ if r["nis"]]
    r_anchor = len(a) / n
    phi_hat = len(as_) / len(a) if a else None
    r_frontier = len(asf) / len(as_) if as_ else None
    tca_mean = _mean([float(r["tca"]) for r in records])
    if phi_hat is None or r_frontier is None:
        product = None
        residual = None
    else:
        product = r_anchor * phi_hat * r_frontier
        residual = product - tca_mean
    return {
        "r_anchor": r_anchor,
        "phi_hat": phi_hat,
        "r_frontier": r_frontier,
        "product": product,
        "tca": tca_mean,
        "residual": residual,
        "phi_mean": _mean([float(r["phi"]) for r in records]) if all("phi" in r for r in records) else None,
        "counts": {"n": n, "anchor_hit": len(a), "anchor_and_answer": len(as_), "all_three": len(asf)},
    }


_STOPWORDS: frozenset[str] | None = None


def load_stopwords() -> frozenset[str]:
    """The fixed 30-word English stopword list shipped with the package."""
    global _STOPWORDS
    if _STOPWORDS is None:
        text = resources.files("supersede").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
        _STOPWORDS = frozenset(w.strip() for w in text.splitlines() if w.strip())
    return _STOPWORDS


def jaccard(a: str, b: str, stopwords: Iterable[str] = ()) -> float:
    stop = set(stopwords)
    ta = set(tokenize(a)) - stop
    tb = set(tokenize(b)) - stop
    union = ta | tb
    return len(ta & tb) / len(union) if union else 0.0


@dataclass
class GapRow:
    jaccard_a: float
    jaccard_b: float
    jaccard_ns_a: float
    jaccard_ns_b: float
    bm25_a: float
    bm25_b: float

    @property
    def gaps(self) -> dict[str, float]:
        return {
            "jaccard": self.jaccard_a - self.jaccard_b,
            "jaccard_no_stopwords": self.jaccard_ns_a - self.jaccard_ns_b,
            "bm25": self.bm25_a - self.bm25_b,
        }


@dataclass
class GapTable:
    rows: list[GapRow] = field(default_factory=list)

    def positive_fraction(self) -> dict[str, float]:
        out = {}
        for metric in ("jaccard", "jaccard_no_stopwords", "bm25"):
            vals = [r.gaps[metric] for r in self.rows]
            out[metric] = sum(v > 0 for v in vals) / len(vals) if vals else math.nan
        return out

    def mean_gap(self) -> dict[str, float]:
        return {m: _mean([r.gaps[m] for r in self.rows]) for m in ("jaccard", "jaccard_no_stopwords", "bm25")}

    def to_json(self) -> dict:
        return {
            "n_pairs": len(self.rows),
            "positive_gap_fraction": self.positive_fraction(),
            "mean_gap": self.mean_gap(),
        }


def vocab_gap_stats(
    pairs: Sequence[tuple[str, str, str]], stopwords: Iterable[str] | None = None
) -> GapTable:
    """Lexical similarity of each query to document A versus document B.

    BM25 statistics come from an index over every distinct document text in
    ``pairs``, so scores are comparable across the table.
    """
    stop = load_stopwords() if stopwords is None else frozenset(stopwords)
    texts = sorted({t for _, a, b in pairs for t in (a, b)})
    index = InvertedIndex((f"t{i:06d}", t) for i, t in enumerate(texts))
    pos = {t: i for i, t in enumerate(texts)}
    table = GapTable()
    for q, a, b in pairs:
        scores = bm25_scores(index, q)
        table.rows.append(
            GapRow(
                jaccard(q, a),
                jaccard(q, b),
                jaccard(q, a, stop),
                jaccard(q, b, stop),
                float(scores[pos[a]]),
                float(scores[pos[b]]),
            )
        )
    return table
