"""A five-document knowledge base where the top lexical hit is stale.

The pre-clearance matches the question word for word; the blackout that
overrides it shares almost no vocabulary with it.  Plain BM25 hands the reader
the stale approval, the two-stage pipeline hands it the blackout.
"""

from supersede import (
    EventType as E,
    Document,
    InvertedIndex,
    PipelineConfig,
    build_entity_index,
    builtin_compliance_rules,
    derive_answer,
    extract_scope,
    make_key,
    two_stage_retrieve,
)
from supersede.pipeline import read_answer
from supersede.retrieval import bm25_rank

key = make_key(emp="EMP00042", ticker="XQZT")
other = make_key(emp="EMP00007", ticker="BRKL")
corpus = [
    Document("d1", 10, E.PRE_CLEARANCE_APPROVED, (key,),
             "Pre-clearance approved for EMP00042 to trade XQZT; clearance valid"),
    Document("d2", 12, E.BLACKOUT_ANNOUNCED, (key,), "Restricted window opened; all activity halted"),
    Document("d3", 4, E.PRE_CLEARANCE_APPROVED, (other,), "Pre-clearance approved for EMP00007 to trade BRKL"),
    Document("d4", 6, E.CONFLICT_DISCLOSED, (other,), "Disclosure filed regarding outside holdings"),
    Document("d5", 8, E.PRE_CLEARANCE_APPROVED, (make_key(emp="EMP00099", ticker="QQMV"),),
             "Pre-clearance approved, clearance valid for the requested trade"),
]
query = "Is EMP00042's pre-clearance for XQZT still valid?"
rules = builtin_compliance_rules()
text_index = InvertedIndex(corpus)
docs = {d.doc_id: d for d in corpus}

top = bm25_rank(text_index, query, 2).ids
answer, _ = read_answer([docs[i] for i in top], extract_scope(query), rules)
print(f"BM25 top-2:       {list(top)} -> {answer.label}")

cfg = PipelineConfig(stage1_k=5, final_k=2)
ranked, diag = two_stage_retrieve(query, corpus, build_entity_index(corpus), rules, cfg, text_index)
answer = derive_answer(docs[i] for i in diag["active_ids"])
print(f"two-stage top-2:  {list(ranked.ids)} -> {answer.label}")
print(f"  anchors {diag['anchor_ids']}, promoted {diag['promoted_ids']}")
