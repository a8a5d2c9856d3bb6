"""Temporally ordered knowledge bases and the order operators over them.

A corpus is a collection of :class:`Document` objects.  Supersession is held
in a :class:`SupersessionGraph` whose direct edges ``(d1, d2)`` read "``d2``
supersedes ``d1``"; reachability along those edges is the (transitive)
supersession relation.  :func:`closure` and :func:`frontier` are the upward
closure and the set of maximal elements under that relation.
"""

from __future__ import annotations

import json
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

__all__ = [
    "Document",
    "EntityKey",
    "make_key",
    "key_dict",
    "keys_compatible",
    "scopes_intersect",
    "SupersessionGraph",
    "CycleError",
    "Violation",
    "validate_kb",
    "closure",
    "frontier",
    "active_docs",
    "Relation",
    "AuthorityOracle",
    "OracleInconsistencyError",
    "bfs_frontier_recovery",
    "normalize_time",
    "read_corpus",
    "write_corpus",
    "document_to_json",
    "document_from_json",
]

#: An entity key is a tuple of ``(field, value)`` pairs sorted by field name,
#: e.g. ``(("emp", "EMP00042"), ("ticker", "XQZT"))``.
EntityKey = tuple[tuple[str, str], ...]


def make_key(fields: Mapping[str, str] | None = None, **kwargs: str) -> EntityKey:
    """Build a normalized :data:`EntityKey` from a mapping or keyword args."""
    items = dict(fields or {})
    items.update(kwargs)
    if not items:
        raise ValueError("an entity key needs at least one field")
    return tuple(sorted((str(k), str(v)) for k, v in items.items()))


def key_dict(key: EntityKey) -> dict[str, str]:
    return dict(key)


def keys_compatible(a: EntityKey, b: EntityKey) -> bool:
    """True if two keys denote overlapping entity sets.

    A key constrains some fields; keys overlap unless they disagree on a field
    both of them constrain and they share at least one field.
    """
    da, db = dict(a), dict(b)
    shared = da.keys() & db.keys()
    return bool(shared) and all(da[f] == db[f] for f in shared)


def scopes_intersect(s1: Iterable[EntityKey], s2: Iterable[EntityKey]) -> bool:
    s2 = tuple(s2)
    return any(keys_compatible(a, b) for a in s1 for b in s2)


def normalize_time(value: int | str) -> int:
    """Convert a timestamp to an integer tick.

    Integers pass through.  ISO-8601 strings become whole seconds since the
    Unix epoch; naive timestamps are read as UTC.
    """
    if isinstance(value, bool):
        raise TypeError("boolean is not a timestamp")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        text = value.strip()
        if text.lstrip("-").isdigit():
            return int(text)
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        stamp = datetime.fromisoformat(text)
        if stamp.tzinfo is None:
            stamp = stamp.replace(tzinfo=timezone.utc)
        return int(stamp.timestamp())
    raise TypeError(f"unsupported timestamp {value!r}")


@dataclass(frozen=True)
class Document:
    """One timestamped, typed, entity-scoped unit of text."""

    doc_id: str
    time: int
    doc_type: str
    scope: tuple[EntityKey, ...]
    text: str = ""
    provenance: str = ""

    def __post_init__(self):
        if not self.scope:
            raise ValueError(f"document {self.doc_id!r} has an empty scope")
        object.__setattr__(self, "time", normalize_time(self.time))
        object.__setattr__(self, "scope", tuple(tuple(k) for k in self.scope))

    def has_key(self, key: EntityKey) -> bool:
        return key in self.scope


class CycleError(ValueError):
    """Raised when supersession edges contain a cycle."""

    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("supersession cycle: " + " -> ".join(cycle))


def _find_cycle(nodes: Iterable[str], succ: Mapping[str, Iterable[str]]) -> list[str] | None:
    white, grey, black = 0, 1, 2
    color = {n: white for n in nodes}
    for root in color:
        if color[root] != white:
            continue
        stack = [(root, iter(sorted(succ.get(root, ()))))]
        path = [root]
        color[root] = grey
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = black
                stack.pop()
                path.pop()
            elif color[nxt] == grey:
                return path[path.index(nxt):] + [nxt]
            elif color[nxt] == white:
                color[nxt] = grey
                path.append(nxt)
                stack.append((nxt, iter(sorted(succ.get(nxt, ())))))
    return None


@dataclass(frozen=True)
class SupersessionGraph:
    """Direct supersession edges over a node set, with materialized reachability.

    ``edges`` holds pairs ``(d1, d2)`` meaning ``d2`` supersedes ``d1``.
    Construction rejects cycles unless ``check_acyclic=False`` (used to feed
    malformed input to :func:`validate_kb`).
    """

    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]
    check_acyclic: bool = True
    _succ: dict = field(init=False, repr=False, compare=False)
    _pred: dict = field(init=False, repr=False, compare=False)
    _reach: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(self, "edges", frozenset(tuple(e) for e in self.edges))
        succ: dict[str, set[str]] = {n: set() for n in self.nodes}
        pred: dict[str, set[str]] = {n: set() for n in self.nodes}
        for a, b in self.edges:
            if a not in succ or b not in succ:
                missing = a if a not in succ else b
                raise KeyError(f"edge endpoint {missing!r} is not a node")
            succ[a].add(b)
            pred[b].add(a)
        if self.check_acyclic:
            cycle = _find_cycle(sorted(self.nodes), succ)
            if cycle:
                raise CycleError(cycle)
        object.__setattr__(self, "_succ", {n: frozenset(s) for n, s in succ.items()})
        object.__setattr__(self, "_pred", {n: frozenset(s) for n, s in pred.items()})
        object.__setattr__(self, "_reach", self._materialize())

    def _materialize(self) -> dict[str, frozenset[str]]:
        # Edges only join scope-intersecting documents, so each DFS stays
        # inside one entity bucket; no corpus-wide matrix is built.
        reach: dict[str, frozenset[str]] = {}
        for node in self.nodes:
            seen: set[str] = set()
            stack = list(self._succ[node])
            while stack:
                cur = stack.pop()
                if cur in seen:
                    continue
                seen.add(cur)
                stack.extend(self._succ[cur])
            reach[node] = frozenset(seen)
        return reach

    @classmethod
    def from_edges(cls, nodes: Iterable[str], edges: Iterable[tuple[str, str]], check_acyclic: bool = True):
        return cls(frozenset(nodes), frozenset(edges), check_acyclic)

    def _check(self, ids: Iterable[str]) -> None:
        for d in ids:
            if d not in self._reach:
                raise KeyError(f"unknown doc_id {d!r}")

    def successors(self, doc_id: str) -> frozenset[str]:
        """Documents that directly supersede ``doc_id``."""
        self._check([doc_id])
        return self._succ[doc_id]

    def predecessors(self, doc_id: str) -> frozenset[str]:
        self._check([doc_id])
        return self._pred[doc_id]

    def superseders(self, doc_id: str) -> frozenset[str]:
        """Every document that supersedes ``doc_id`` (transitively)."""
        self._check([doc_id])
        return self._reach[doc_id]

    def supersedes(self, later: str, earlier: str) -> bool:
        """True if ``earlier ⤳ later``."""
        self._check([later, earlier])
        return later in self._reach[earlier]

    def is_superseded(self, doc_id: str) -> bool:
        self._check([doc_id])
        return bool(self._succ[doc_id])

    def transitive_edges(self) -> frozenset[tuple[str, str]]:
        return frozenset((a, b) for a, bs in self._reach.items() for b in bs)

    def depth_from(self, doc_id: str) -> int:
        """Length in edges of the longest supersession chain starting at ``doc_id``."""
        self._check([doc_id])
        memo: dict[str, int] = {}

        def longest(n: str) -> int:
            if n not in memo:
                memo[n] = max((1 + longest(s) for s in self._succ[n]), default=0)
            return memo[n]

        return longest(doc_id)


def closure(graph: SupersessionGraph, ids: Iterable[str]) -> frozenset[str]:
    """Authority closure: ``ids`` plus everything that supersedes a member."""
    ids = frozenset(ids)
    graph._check(ids)
    out = set(ids)
    for d in ids:
        out |= graph._reach[d]
    return frozenset(out)


def frontier(graph: SupersessionGraph, ids: Iterable[str]) -> frozenset[str]:
    """Maximal elements of ``ids``: members not superseded by another member."""
    ids = frozenset(ids)
    graph._check(ids)
    return frozenset(d for d in ids if not (graph._reach[d] & ids))


def active_docs(corpus: Iterable[Document], graph: SupersessionGraph) -> frozenset[str]:
    """Documents of the corpus that nothing supersedes."""
    return frontier(graph, (d.doc_id for d in corpus))


@dataclass(frozen=True)
class Violation:
    kind: str  # "disjoint_scope" | "time_order" | "cycle" | "unknown_node" | "missing_node"
    ids: tuple[str, ...]
    detail: str = ""


def validate_kb(corpus: Iterable[Document], graph: SupersessionGraph) -> list[Violation]:
    """List every axiom violation of a corpus/graph pair; empty means well-formed."""
    docs = {d.doc_id: d for d in corpus}
    report: list[Violation] = []
    for n in sorted(graph.nodes - docs.keys()):
        report.append(Violation("unknown_node", (n,), "graph node absent from corpus"))
    for n in sorted(docs.keys() - graph.nodes):
        report.append(Violation("missing_node", (n,), "corpus document absent from graph"))
    for a, b in sorted(graph.edges):
        if a not in docs or b not in docs:
            continue
        d1, d2 = docs[a], docs[b]
        if not scopes_intersect(d1.scope, d2.scope):
            report.append(Violation("disjoint_scope", (a, b), "edge joins disjoint entity scopes"))
        if not d2.time > d1.time:
            report.append(
                Violation("time_order", (a, b), f"superseder time {d2.time} not after {d1.time}")
            )
    cycle = _find_cycle(sorted(graph.nodes), graph._succ)
    if cycle:
        report.append(Violation("cycle", tuple(cycle), "supersession must be acyclic"))
    return report


class Relation(Enum):
    """Answer of an authority-comparison oracle for an ordered pair ``(a, b)``."""

    FORWARD = "a_then_b"  # a ⤳ b
    BACKWARD = "b_then_a"  # b ⤳ a
    NONE = "incomparable"


class OracleInconsistencyError(RuntimeError):
    pass


_FLIP = {Relation.FORWARD: Relation.BACKWARD, Relation.BACKWARD: Relation.FORWARD, Relation.NONE: Relation.NONE}


class AuthorityOracle:
    """Pairwise supersession comparator with an invocation counter.

    Every call invokes the wrapped comparator once.  Answers are recorded so a
    comparator that contradicts itself on a pair is caught.
    """

    def __init__(self, compare: Callable[[str, str], Relation]):
        self._compare = compare
        self.calls = 0
        self._seen: dict[tuple[str, str], Relation] = {}

    @classmethod
    def from_graph(cls, graph: SupersessionGraph) -> "AuthorityOracle":
        def compare(a: str, b: str) -> Relation:
            if graph.supersedes(b, a):
                return Relation.FORWARD
            if graph.supersedes(a, b):
                return Relation.BACKWARD
            return Relation.NONE

        return cls(compare)

    def __call__(self, a: str, b: str) -> Relation:
        self.calls += 1
        answer = self._compare(a, b)
        if not isinstance(answer, Relation):
            raise OracleInconsistencyError(f"oracle returned {answer!r} for ({a!r}, {b!r})")
        prior = self._seen.get((a, b))
        if prior is None and (b, a) in self._seen:
            prior = _FLIP[self._seen[(b, a)]]
        if prior is not None and prior is not answer:
            raise OracleInconsistencyError(
                f"oracle answered {prior.value} and {answer.value} for pair ({a!r}, {b!r})"
            )
        self._seen[(a, b)] = answer
        return answer


def bfs_frontier_recovery(
    oracle: AuthorityOracle, anchor: str, scope_docs: list[str]
) -> tuple[frozenset[str], int]:
    """Recover ``front(cl({anchor}))`` within ``scope_docs`` using oracle calls only.

    One sweep from the anchor collects its closure.  Maxima are then found by
    elimination: each comparison removes the dominated side, so on a chain
    every call retires one candidate.  Returns the frontier and the number of
    oracle calls spent by this run.
    """
    if anchor not in scope_docs:
        raise KeyError(f"anchor {anchor!r} not among scope documents")
    start = oracle.calls
    members: list[str] = []
    for v in scope_docs:
        if v == anchor:
            continue
        rel = oracle(anchor, v)
        if rel is Relation.FORWARD:
            members.append(v)
    if not members:
        return frozenset([anchor]), oracle.calls - start

    alive = list(members)
    maxima: list[str] = []
    while alive:
        cand = alive.pop(0)
        dominated = False
        i = 0
        while i < len(alive):
            rel = oracle(cand, alive[i])
            if rel is Relation.FORWARD:
                dominated = True
                break
            if rel is Relation.BACKWARD:
                alive.pop(i)
                continue
            i += 1
        # a finished maximum was compared against every later candidate
        # while they were still alive, so no re-check is needed
        if not dominated:
            maxima.append(cand)
    return frozenset(maxima), oracle.calls - start


# -- corpus file format -------------------------------------------------------

def document_to_json(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "time": doc.time,
        "doc_type": doc.doc_type,
        "scope": [key_dict(k) for k in doc.scope],
        "text": doc.text,
        "provenance": doc.provenance,
    }


def document_from_json(obj: Mapping) -> Document:
    missing = {"doc_id", "time", "doc_type", "scope"} - obj.keys()
    if missing:
        raise ValueError(f"corpus record missing fields: {sorted(missing)}")
    return Document(
        doc_id=str(obj["doc_id"]),
        time=normalize_time(obj["time"]),
        doc_type=str(obj["doc_type"]),
        scope=tuple(make_key(k) for k in obj["scope"]),
        text=str(obj.get("text", "")),
        provenance=str(obj.get("provenance", "")),
    )


def write_corpus(docs: Iterable[Document], path: str | Path) -> None:
    """Write one JSON object per line in a fixed field order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(json.dumps(document_to_json(doc), ensure_ascii=False) + "\n")


def read_corpus(path: str | Path) -> list[Document]:
    docs = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            doc = document_from_json(json.loads(line))
            if doc.doc_id in seen:
                raise ValueError(f"line {lineno}: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            docs.append(doc)
    return docs
