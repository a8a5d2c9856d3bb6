"""Evaluation harness: run a system over a dataset and score every example."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from .benchgen import HOP_TYPES, Dataset, construct_adversarial_t1
from .kb import Document, keys_compatible
from .metrics import (
    audit_frontier_conditions,
    answer_acc,
    divergence_stats,
    factorization_report,
    make_scorer,
    no_ignored_superseder,
    prov_rec,
    recall_at_k,
    scope_stats,
)
from .pipeline import (
    PipelineConfig,
    build_entity_index,
    dense_rerank_retrieve,
    derive_answer,
    extract_scope,
    read_answer,
    two_stage_retrieve,
)
from .retrieval import InvertedIndex, bm25_rank, oracle_rank, tfidf_rank
from .rules import RuleSet, builtin_compliance_rules

__all__ = [
    "SYSTEMS",
    "EvalReport",
    "evaluate",
    "evaluate_retrieved",
    "audit_retrieved",
    "adversarial_sweep",
    "fmt",
]

SYSTEMS = ("bm25", "tfidf", "oracle", "dense_rerank", "two_stage", "two_stage_rssg")
ADVERSARIAL_SYSTEMS = ("bm25", "tfidf", "two_stage", "two_stage_rssg")

_METRICS = ("tca", "acc", "provrec", "recall_k", "anchor_hit", "frontier_inclusion", "nis", "kappa", "phi")


def fmt(x: float | None) -> str | None:
    return None if x is None else f"{x:.3f}"


def _summary(records: Sequence[Mapping]) -> dict:
    n = len(records)
    out: dict = {"n": n}
    for m in _METRICS:
        vals = [float(r[m]) for r in records]
        mean = sum(vals) / n if n else 0.0
        entry = {"value": round(mean, 3), "display": fmt(mean)}
        if m not in ("kappa", "phi", "provrec", "recall_k"):
            entry["count"] = int(sum(vals))
        out[m] = entry
    return out


@dataclass
class EvalReport:
    system: str
    config: dict
    records: list[dict]
    aggregates: dict = field(default_factory=dict)
    factorization: dict = field(default_factory=dict)

    def __post_init__(self):
        self.records.sort(key=lambda r: r["example_id"])
        if not self.aggregates:
            self.aggregates = {"overall": _summary(self.records)}
            for hop in HOP_TYPES:
                sub = [r for r in self.records if r["hop_type"] == hop]
                if sub:
                    self.aggregates[hop] = _summary(sub)
        if not self.factorization and self.records:
            self.factorization = factorization_report(self.records)

    def mean(self, metric: str, hop: str | None = None) -> float:
        rows = [r for r in self.records if hop is None or r["hop_type"] == hop]
        return sum(float(r[metric]) for r in rows) / len(rows)

    def to_json(self) -> dict:
        fact = dict(self.factorization)
        fact["display"] = {
            k: fmt(fact[k]) for k in ("r_anchor", "phi_hat", "r_frontier", "product", "tca")
        }
        return {
            "system": self.system,
            "config": self.config,
            "aggregates": self.aggregates,
            "tca_by_hop": {h: self.aggregates[h]["tca"]["display"] for h in HOP_TYPES if h in self.aggregates},
            "factorization": fact,
            "records": self.records,
        }


class _Context:
    """Per-dataset indexes shared by every example."""

    def __init__(self, ds: Dataset, rules: RuleSet):
        self.ds = ds
        self.rules = rules
        self.text_index = InvertedIndex(ds.corpus)
        self.entity_index = build_entity_index(ds.corpus)

    def docs(self, ids: Sequence[str]) -> list[Document]:
        return [self.ds.docs[i] for i in ids]

    def entity_matched(self, ids: Sequence[str], query: str) -> bool:
        keys = extract_scope(query)
        docs = self.docs(ids)
        if not keys:
            return bool(docs)
        return any(keys_compatible(k, q) for d in docs for k in d.scope for q in keys)


def _score(ctx: _Context, ex, R: list[str], answer, anchor_hit: bool, k: int, extra: dict | None = None) -> dict:
    graph = ctx.ds.gold_graph(ex)
    R_gold = [d for d in R if d in graph.nodes]
    verdict = audit_frontier_conditions(R_gold, [ex.gold_event_ids[0]], graph)
    nis = no_ignored_superseder(R_gold, graph)
    correct = answer_acc(answer, ex.gold_answer)
    kappa, phi = scope_stats(ex, ctx.entity_index, graph)
    rec = {
        "example_id": ex.example_id,
        "hop_type": ex.hop_type,
        "gold_answer": ex.gold_answer,
        "answer": answer.label,
        "retrieved": list(R),
        "tca": int(correct and nis),
        "acc": correct,
        "answer_correct": bool(correct),
        "nis": bool(nis),
        "frontier_inclusion": bool(verdict.frontier_inclusion),
        "provrec": prov_rec(R, ex.gold_event_ids),
        "recall_k": recall_at_k(R, ex.gold_event_ids, k) if R else 0.0,
        "anchor_hit": bool(anchor_hit),
        "kappa": kappa,
        "phi": phi,
        "audit": verdict.to_json(),
    }
    if extra:
        rec.update(extra)
    return rec


def evaluate(
    ds: Dataset,
    system: str,
    k: int = 5,
    stage1_k: int = 20,
    rules: RuleSet | None = None,
) -> EvalReport:
    """Score one built-in system on every example of ``ds``."""
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}; choose from {', '.join(SYSTEMS)}")
    rules = rules or ds.rules or builtin_compliance_rules()
    ctx = _Context(ds, rules)
    records = []
    for ex in ds.examples:
        keys = extract_scope(ex.query)
        if system in ("two_stage", "two_stage_rssg"):
            mode = "anchor_only" if system == "two_stage" else "anchor_plus_rssg"
            cfg = PipelineConfig(stage1_k=stage1_k, final_k=k, mode=mode)
            ranked, diag = two_stage_retrieve(ex.query, ds.corpus, ctx.entity_index, rules, cfg, ctx.text_index)
            R = ranked.ids
            answer = derive_answer(ctx.docs(diag["active_ids"]))
            extra = {
                "diagnostics": {
                    "mode": diag["mode"],
                    "promoted_ids": diag["promoted_ids"],
                    "active_ids": diag["active_ids"],
                    "rssg_edge_count": diag["rssg_edge_count"],
                    "rule_checks": diag["rule_checks"],
                    "bucket_size": len(diag["bucket_ids"]),
                }
            }
            records.append(_score(ctx, ex, R, answer, diag["anchor_hit"], k, extra))
            continue
        if system == "oracle":
            R = oracle_rank(ex.gold_event_ids, ds.corpus, k).ids
            pool = R
        elif system == "dense_rerank":
            cfg = PipelineConfig(stage1_k=stage1_k, final_k=k)
            R = dense_rerank_retrieve(ex.query, ds.corpus, ds.gold_graph(ex), cfg, ctx.text_index).ids
            pool = tfidf_rank(ctx.text_index, ex.query, stage1_k).ids
        else:
            rank = bm25_rank if system == "bm25" else tfidf_rank
            pool = rank(ctx.text_index, ex.query, max(k, stage1_k)).ids
            R = pool[:k]
        answer, _ = read_answer(ctx.docs(R), keys, rules)
        hit = ctx.entity_matched(pool[: max(k, stage1_k)], ex.query)
        records.append(_score(ctx, ex, R, answer, hit, k))
    config = {"system": system, "k": k, "stage1_k": stage1_k, "n_examples": len(ds.examples)}
    return EvalReport(system, config, records)


def _unknown(ds: Dataset, ids: Sequence[str]) -> list[str]:
    return sorted({i for i in ids if i not in ds.docs})


def evaluate_retrieved(
    ds: Dataset,
    retrieved: Mapping[str, Sequence[str]],
    k: int = 5,
    rules: RuleSet | None = None,
    name: str = "external",
) -> EvalReport:
    """Score externally produced retrieved sets (example_id -> doc ids).

    The answer is read from the retrieved documents with the rule set, the
    same reader the lexical baselines use.  Missing examples count as empty
    retrievals; unknown doc ids raise.
    """
    rules = rules or ds.rules
    ctx = _Context(ds, rules)
    records = []
    for ex in ds.examples:
        R = list(dict.fromkeys(retrieved.get(ex.example_id, ())))
        bad = _unknown(ds, R)
        if bad:
            raise KeyError(f"{ex.example_id}: unknown doc ids {bad[:5]}")
        answer, _ = read_answer(ctx.docs(R), extract_scope(ex.query), rules)
        records.append(_score(ctx, ex, R, answer, ctx.entity_matched(R, ex.query), k))
    config = {"system": name, "k": k, "n_examples": len(ds.examples)}
    return EvalReport(name, config, records)


def audit_retrieved(ds: Dataset, retrieved: Mapping[str, Sequence[str]]) -> dict:
    """Audit arbitrary retrieved sets against the two frontier conditions."""
    out = []
    extra_ids = sorted(set(retrieved) - {ex.example_id for ex in ds.examples})
    n_ok = 0
    for ex in ds.examples:
        entry: dict = {"example_id": ex.example_id, "hop_type": ex.hop_type}
        if ex.example_id not in retrieved:
            entry["error"] = "no retrieved set for this example"
            out.append(entry)
            continue
        R = list(dict.fromkeys(retrieved[ex.example_id]))
        bad = _unknown(ds, R)
        if bad:
            entry["error"] = f"doc ids not in corpus: {bad}"
            out.append(entry)
            continue
        graph = ds.gold_graph(ex)
        verdict = audit_frontier_conditions([d for d in R if d in graph.nodes], [ex.gold_event_ids[0]], graph)
        entry.update(verdict.to_json())
        entry["ok"] = verdict.ok
        n_ok += verdict.ok
        out.append(entry)
    n = len(ds.examples)
    return {
        "n_examples": n,
        "n_ok": n_ok,
        "ok_rate": round(n_ok / n, 3) if n else 0.0,
        "n_errors": sum("error" in e for e in out),
        "unknown_example_ids": extra_ids,
        "verdicts": out,
    }


def adversarial_sweep(
    ns: Sequence[int], k: int = 5, system: str = "bm25", seeds: Sequence[int] = (0,), stage1_k: int = 20
) -> dict:
    """TCA and anchor Recall@k across the lexical-displacement family."""
    if system not in ADVERSARIAL_SYSTEMS:
        raise ValueError(f"unknown system {system!r}; choose from {', '.join(ADVERSARIAL_SYSTEMS)}")
    rules = builtin_compliance_rules()
    rows = []
    for n in ns:
        for seed in seeds:
            inst = construct_adversarial_t1(n, k, seed=seed, strict=False)
            text_index = InvertedIndex(inst.corpus)
            docs = {d.doc_id: d for d in inst.corpus}
            keys = extract_scope(inst.query)
            if system in ("bm25", "tfidf"):
                rank = bm25_rank if system == "bm25" else tfidf_rank
                R = rank(text_index, inst.query, k).ids
                answer, _ = read_answer([docs[i] for i in R], keys, rules)
                scorer = make_scorer(text_index, system)
            else:
                mode = "anchor_only" if system == "two_stage" else "anchor_plus_rssg"
                cfg = PipelineConfig(stage1_k=max(stage1_k, k), final_k=k, mode=mode)
                ranked, diag = two_stage_retrieve(
                    inst.query, inst.corpus, build_entity_index(inst.corpus), rules, cfg, text_index
                )
                R = ranked.ids
                answer = derive_answer(docs[i] for i in diag["active_ids"])
                scorer = make_scorer(text_index, "tfidf")
            graph = inst.gold_graph
            nis = no_ignored_superseder([d for d in R if d in graph.nodes], graph)
            tca_k = int(answer.label == inst.example.gold_answer and nis)
            delta, n_plus = divergence_stats(inst.example, None, scorer, graph)
            rows.append(
                {
                    "n": n,
                    "seed": seed,
                    "k": k,
                    "corpus_size": len(inst.corpus),
                    "degenerate": inst.degenerate,
                    "tca": tca_k,
                    "anchor_recall": int(inst.anchor_id in R),
                    "superseder_retrieved": int(inst.superseder_id in R),
                    "n_plus": n_plus,
                    "delta": round(delta, 6),
                    "answer": answer.label,
                }
            )
    summary = {}
    for n in ns:
        sub = [r for r in rows if r["n"] == n]
        summary[str(n)] = {
            "tca": round(sum(r["tca"] for r in sub) / len(sub), 3),
            "anchor_recall": round(sum(r["anchor_recall"] for r in sub) / len(sub), 3),
            "superseder_rate": round(sum(r["superseder_retrieved"] for r in sub) / len(sub), 3),
            "k_over_n": round(k / n, 3),
        }
    return {"system": system, "k": k, "ns": list(ns), "seeds": list(seeds), "summary": summary, "rows": rows}
