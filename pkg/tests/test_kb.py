import json

import pytest
from hypothesis import given, settings, strategies as st

from supersede.kb import (
    AuthorityOracle,
    CycleError,
    Document,
    OracleInconsistencyError,
    Relation,
    SupersessionGraph,
    active_docs,
    bfs_frontier_recovery,
    closure,
    frontier,
    keys_compatible,
    make_key,
    normalize_time,
    read_corpus,
    scopes_intersect,
    validate_kb,
    write_corpus,
)

from conftest import brute_closure, brute_frontier, chain_graph, doc


@st.composite
def dags(draw, max_nodes=12):
    n = draw(st.integers(1, max_nodes))
    nodes = [f"d{i:02d}" for i in range(n)]
    pairs = [(nodes[i], nodes[j]) for i in range(n) for j in range(i + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    return nodes, edges


# -- documents and keys -----------------------------------------------------------

def test_make_key_sorted_and_hashable():
    assert make_key(ticker="ABC", emp="EMP00001") == (("emp", "EMP00001"), ("ticker", "ABC"))
    assert make_key({"b": 1}, a="x") == (("a", "x"), ("b", "1"))
    with pytest.raises(ValueError):
        make_key()


def test_keys_compatible():
    k = make_key(emp="E1", ticker="T")
    assert keys_compatible(k, make_key(ticker="T"))
    assert not keys_compatible(k, make_key(ticker="U"))
    assert not keys_compatible(k, make_key(emp="E1", ticker="U"))
    # no shared field means no evidence of overlap
    assert not keys_compatible(make_key(policy="GLOBAL"), k)


def test_scopes_intersect():
    assert scopes_intersect([make_key(a="1")], [make_key(b="2"), make_key(a="1")])
    assert not scopes_intersect([make_key(a="1")], [make_key(a="2")])


def test_document_rejects_empty_scope():
    with pytest.raises(ValueError):
        Document("x", 1, "T", ())


def test_normalize_time():
    assert normalize_time(5) == 5
    assert normalize_time("42") == 42
    assert normalize_time("1970-01-01T00:01:00Z") == 60
    assert normalize_time("1970-01-01T00:00:10") == 10
    assert normalize_time("1970-01-01T01:00:00+01:00") == 0
    with pytest.raises(TypeError):
        normalize_time(True)
    with pytest.raises(TypeError):
        normalize_time(1.5)


# -- graph ------------------------------------------------------------------------

def test_graph_rejects_cycle():
    with pytest.raises(CycleError) as info:
        SupersessionGraph.from_edges("abc", [("a", "b"), ("b", "c"), ("c", "a")])
    assert info.value.cycle[0] == info.value.cycle[-1]


def test_graph_rejects_unknown_endpoint():
    with pytest.raises(KeyError):
        SupersessionGraph.from_edges(["a"], [("a", "b")])


def test_chain_closure_and_frontier():
    g = chain_graph("d1", "d2", "d3")
    assert closure(g, ["d1"]) == {"d1", "d2", "d3"}
    assert frontier(g, closure(g, ["d1"])) == {"d3"}
    assert g.supersedes("d3", "d1")
    assert not g.supersedes("d1", "d3")
    assert g.depth_from("d1") == 2


def test_empty_set_operators():
    g = chain_graph("d1", "d2")
    assert closure(g, []) == frozenset()
    assert frontier(g, []) == frozenset()


def test_antichain_is_own_frontier():
    g = SupersessionGraph.from_edges(["a", "b", "c"], [])
    assert frontier(g, ["a", "b", "c"]) == {"a", "b", "c"}


def test_unknown_ids_raise():
    g = chain_graph("d1", "d2")
    with pytest.raises(KeyError):
        closure(g, ["zz"])
    with pytest.raises(KeyError):
        frontier(g, ["zz"])


def test_active_docs():
    docs = [doc("a", 1), doc("b", 2), doc("c", 3)]
    g = SupersessionGraph.from_edges("abc", [("a", "b")])
    assert active_docs(docs, g) == {"b", "c"}


@settings(max_examples=500, deadline=None)
@given(dags(), st.data())
def test_closure_frontier_match_brute_force(dag, data):
    nodes, edges = dag
    g = SupersessionGraph.from_edges(nodes, edges)
    A = set(data.draw(st.sets(st.sampled_from(nodes))))
    B = A | set(data.draw(st.sets(st.sampled_from(nodes))))
    cl = closure(g, A)
    assert cl == brute_closure(nodes, edges, A)
    assert frontier(g, cl) == brute_frontier(nodes, edges, cl)
    assert A <= cl  # extensive
    assert cl <= closure(g, B)  # monotone
    assert closure(g, cl) == cl  # idempotent
    fr = frontier(g, cl)
    assert not any(g.supersedes(x, y) for x in fr for y in fr)  # antichain
    if A:
        assert fr  # finite non-empty sets have maxima


# -- validation -------------------------------------------------------------------

def test_validate_clean_chain():
    docs = [doc("d1", 1), doc("d2", 2, "BlackoutAnnounced")]
    assert validate_kb(docs, chain_graph("d1", "d2")) == []


def test_validate_reports_each_violation():
    docs = [doc("d1", 5), doc("d2", 2, ticker="XYZ"), doc("d3", 7)]
    g = SupersessionGraph.from_edges(["d1", "d2", "d3", "ghost"], [("d1", "d2")])
    kinds = {v.kind for v in validate_kb(docs, g)}
    assert kinds == {"disjoint_scope", "time_order", "unknown_node"}


def test_validate_equal_time_and_missing_node():
    docs = [doc("d1", 5), doc("d2", 5), doc("d3", 6)]
    g = SupersessionGraph.from_edges(["d1", "d2"], [("d1", "d2")])
    kinds = sorted(v.kind for v in validate_kb(docs, g))
    assert kinds == ["missing_node", "time_order"]


def test_validate_detects_cycle_without_raising():
    docs = [doc("a", 1), doc("b", 2)]
    g = SupersessionGraph.from_edges("ab", [("a", "b"), ("b", "a")], check_acyclic=False)
    assert "cycle" in {v.kind for v in validate_kb(docs, g)}


# -- oracle + frontier recovery --------------------------------------------------

def test_oracle_counts_and_directions():
    g = chain_graph("a", "b", "c")
    o = AuthorityOracle.from_graph(g)
    assert o("a", "c") is Relation.FORWARD
    assert o("c", "a") is Relation.BACKWARD
    assert o("a", "a") is Relation.NONE
    assert o.calls == 3


def test_oracle_inconsistency_detected():
    answers = iter([Relation.FORWARD, Relation.FORWARD])
    o = AuthorityOracle(lambda a, b: next(answers))
    o("x", "y")
    with pytest.raises(OracleInconsistencyError):
        o("y", "x")  # should have been BACKWARD


def test_oracle_rejects_non_relation():
    o = AuthorityOracle(lambda a, b: True)
    with pytest.raises(OracleInconsistencyError):
        o("x", "y")


def test_bfs_recovery_chain_cost():
    ids = [f"d{i}" for i in range(6)]
    g = chain_graph(*ids)
    o = AuthorityOracle.from_graph(g)
    front, calls = bfs_frontier_recovery(o, "d0", ids)
    assert front == {"d5"}
    h = g.depth_from("d0")
    assert calls <= h * len(ids)


def test_bfs_recovery_requires_anchor():
    g = chain_graph("a", "b")
    with pytest.raises(KeyError):
        bfs_frontier_recovery(AuthorityOracle.from_graph(g), "z", ["a", "b"])


@settings(max_examples=300, deadline=None)
@given(dags(max_nodes=10), st.data())
def test_bfs_recovery_matches_frontier(dag, data):
    nodes, edges = dag
    g = SupersessionGraph.from_edges(nodes, edges)
    anchor = data.draw(st.sampled_from(nodes))
    o = AuthorityOracle.from_graph(g)
    front, calls = bfs_frontier_recovery(o, anchor, list(nodes))
    assert front == frontier(g, closure(g, [anchor]))
    assert calls == o.calls
    # one sweep plus at most one comparison per pair of closure members
    m = len(closure(g, [anchor])) - 1
    assert calls <= (len(nodes) - 1) + m * (m - 1) // 2


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 10), st.integers(0, 10), st.randoms(use_true_random=False))
def test_bfs_recovery_chain_bound(length, n_noise, rnd):
    chain = [f"c{i}" for i in range(length)]
    noise = [f"x{i}" for i in range(n_noise)]
    scope = chain + noise
    rnd.shuffle(scope)
    g = SupersessionGraph.from_edges(scope, zip(chain, chain[1:]))
    o = AuthorityOracle.from_graph(g)
    front, calls = bfs_frontier_recovery(o, chain[0], scope)
    assert front == {chain[-1]}
    h = g.depth_from(chain[0])
    assert calls <= max(h, 1) * len(scope)


# -- corpus io --------------------------------------------------------------------

def test_corpus_round_trip(tmp_path):
    docs = [doc("b", 2, text="ünïcode"), doc("a", 1)]
    path = tmp_path / "c.jsonl"
    write_corpus(docs, path)
    assert read_corpus(path) == docs
    first = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert list(first) == ["doc_id", "time", "doc_type", "scope", "text", "provenance"]


def test_corpus_rejects_duplicates(tmp_path):
    path = tmp_path / "c.jsonl"
    write_corpus([doc("a", 1), doc("a", 2)], path)
    with pytest.raises(ValueError, match="duplicate"):
        read_corpus(path)


def test_corpus_missing_fields(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"doc_id": "a"}\n')
    with pytest.raises(ValueError, match="missing"):
        read_corpus(path)
