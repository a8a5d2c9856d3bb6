"""Supersession-aware retrieval: order operators, rules, retrievers, benchmark and metrics."""

__version__ = "0.1.0"

from .kb import (
    AuthorityOracle,
    CycleError,
    Document,
    Relation,
    SupersessionGraph,
    active_docs,
    bfs_frontier_recovery,
    closure,
    frontier,
    make_key,
    validate_kb,
)
from .rules import EventType, RuleSet, SupersessionRule, build_gold_graph, build_rssg, builtin_compliance_rules
from .retrieval import InvertedIndex, bm25_rank, oracle_rank, tfidf_rank
from .pipeline import (
    Answer,
    AnswerLabel,
    PipelineConfig,
    build_entity_index,
    dense_rerank_retrieve,
    derive_answer,
    extract_scope,
    two_stage_retrieve,
)
from .benchgen import BenchExample, GenConfig, construct_adversarial_t1, generate_contaminated, generate_dataset
from .metrics import AuditVerdict, audit_frontier_conditions, factorization_report, scope_stats, tca
from .evaluate import EvalReport, adversarial_sweep, audit_retrieved, evaluate, evaluate_retrieved
