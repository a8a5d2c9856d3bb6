"""Declarative supersession rules and the graphs built from them.

A rule says that a later document of ``trigger_type`` supersedes an earlier
document of ``target_type`` when their scopes agree on ``scope_keys``.  The
compliance rule set used by the benchmark is :func:`builtin_compliance_rules`.
"""

from __future__ import annotations

import itertools
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from .kb import Document, EntityKey, SupersessionGraph, keys_compatible

__all__ = [
    "EventType",
    "GLOBAL_POLICY_KEY",
    "SCOPE_MODES",
    "SupersessionRule",
    "RuleSet",
    "builtin_compliance_rules",
    "direct_edge",
    "build_gold_graph",
    "build_rssg",
    "read_rules",
    "write_rules",
]


class EventType:
    PRE_CLEARANCE_APPROVED = "PreClearanceApproved"
    BLACKOUT_ANNOUNCED = "BlackoutAnnounced"
    BLACKOUT_LIFTED = "BlackoutLifted"
    EMERGENCY_EXCEPTION = "EmergencyException"
    EXCEPTION_REVOKED = "ExceptionRevoked"
    WATCHLIST_ADDED = "WatchlistAdded"
    WATCHLIST_REMOVED = "WatchlistRemoved"
    CONFLICT_DISCLOSED = "ConflictDisclosed"
    CONFLICT_AMENDED = "ConflictAmended"
    CONFLICT_CLEARED = "ConflictCleared"
    POLICY_UPDATE = "PolicyUpdate"
    POLICY_ACKNOWLEDGED = "PolicyAcknowledged"

    ALL = (
        PRE_CLEARANCE_APPROVED,
        BLACKOUT_ANNOUNCED,
        BLACKOUT_LIFTED,
        EMERGENCY_EXCEPTION,
        EXCEPTION_REVOKED,
        WATCHLIST_ADDED,
        WATCHLIST_REMOVED,
        CONFLICT_DISCLOSED,
        CONFLICT_AMENDED,
        CONFLICT_CLEARED,
        POLICY_UPDATE,
        POLICY_ACKNOWLEDGED,
    )


#: Reserved key carried by firm-wide policy documents.  Global rules fire only
#: between documents that both carry it, which keeps the entity-scope axiom.
GLOBAL_POLICY_KEY: EntityKey = (("policy", "GLOBAL"),)

SCOPE_MODES = {
    "same_ticker": ("ticker",),
    "emp_and_ticker": ("emp", "ticker"),
    "same_emp": ("emp",),
    "global": (),
}


@dataclass(frozen=True)
class SupersessionRule:
    """``trigger_type`` (later) supersedes ``target_type`` (earlier)."""

    rule_id: str
    trigger_type: str
    target_type: str
    scope_mode: str | None = None
    scope_keys: tuple[str, ...] = ()

    def __post_init__(self):
        if self.scope_mode is not None:
            if self.scope_mode not in SCOPE_MODES:
                raise ValueError(f"unknown scope_mode {self.scope_mode!r}")
            object.__setattr__(self, "scope_keys", SCOPE_MODES[self.scope_mode])
        elif not self.scope_keys:
            raise ValueError(f"rule {self.rule_id}: needs scope_mode or scope_keys")
        object.__setattr__(self, "scope_keys", tuple(self.scope_keys))

    @property
    def is_global(self) -> bool:
        return self.scope_mode == "global"

    def scope_holds(self, d1: Document, d2: Document) -> bool:
        if self.is_global:
            return GLOBAL_POLICY_KEY in d1.scope and GLOBAL_POLICY_KEY in d2.scope
        for k1 in d1.scope:
            f1 = dict(k1)
            if not all(f in f1 for f in self.scope_keys):
                continue
            for k2 in d2.scope:
                f2 = dict(k2)
                if all(f in f2 and f1[f] == f2[f] for f in self.scope_keys) and keys_compatible(k1, k2):
                    return True
        return False

    def matches(self, d1: Document, d2: Document) -> bool:
        """Does this rule make ``d2`` supersede ``d1``?"""
        return (
            d1.doc_type == self.target_type
            and d2.doc_type == self.trigger_type
            and d2.time > d1.time
            and self.scope_holds(d1, d2)
        )

    def to_json(self) -> dict:
        out = {"rule_id": self.rule_id, "trigger_type": self.trigger_type, "target_type": self.target_type}
        if self.scope_mode is not None:
            out["scope_mode"] = self.scope_mode
        else:
            out["scope_keys"] = list(self.scope_keys)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SupersessionRule":
        return cls(
            rule_id=obj["rule_id"],
            trigger_type=obj["trigger_type"],
            target_type=obj["target_type"],
            scope_mode=obj.get("scope_mode"),
            scope_keys=tuple(obj.get("scope_keys", ())),
        )


class RuleSet(tuple):
    """Ordered, immutable collection of rules with unique ids."""

    def __new__(cls, rules: Iterable[SupersessionRule] = ()):
        rules = tuple(rules)
        ids = [r.rule_id for r in rules]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValueError(f"duplicate rule ids: {dupes}")
        self = super().__new__(cls, rules)
        index: dict[tuple[str, str], list[SupersessionRule]] = {}
        for r in rules:
            index.setdefault((r.target_type, r.trigger_type), []).append(r)
        self._by_types = index
        return self

    def by_id(self, rule_id: str) -> SupersessionRule:
        for r in self:
            if r.rule_id == rule_id:
                return r
        raise KeyError(rule_id)

    def candidates(self, target_type: str, trigger_type: str) -> list[SupersessionRule]:
        return self._by_types.get((target_type, trigger_type), [])


def builtin_compliance_rules() -> RuleSet:
    """The ten employee-trading compliance rules R1..R10."""
    E = EventType
    return RuleSet(
        [
            SupersessionRule("R1", E.BLACKOUT_ANNOUNCED, E.PRE_CLEARANCE_APPROVED, "same_ticker"),
            SupersessionRule("R2", E.BLACKOUT_LIFTED, E.BLACKOUT_ANNOUNCED, "same_ticker"),
            SupersessionRule("R3", E.EMERGENCY_EXCEPTION, E.BLACKOUT_ANNOUNCED, "emp_and_ticker"),
            SupersessionRule("R4", E.EXCEPTION_REVOKED, E.EMERGENCY_EXCEPTION, "emp_and_ticker"),
            SupersessionRule("R5", E.WATCHLIST_ADDED, E.PRE_CLEARANCE_APPROVED, "same_ticker"),
            SupersessionRule("R6", E.WATCHLIST_REMOVED, E.WATCHLIST_ADDED, "same_ticker"),
            SupersessionRule("R7", E.CONFLICT_AMENDED, E.CONFLICT_DISCLOSED, "same_emp"),
            SupersessionRule("R8", E.CONFLICT_CLEARED, E.CONFLICT_AMENDED, "same_emp"),
            SupersessionRule("R9", E.CONFLICT_CLEARED, E.CONFLICT_DISCLOSED, "same_emp"),
            SupersessionRule("R10", E.POLICY_UPDATE, E.POLICY_ACKNOWLEDGED, "global"),
        ]
    )


def direct_edge(rules: RuleSet, d1: Document, d2: Document) -> bool:
    """True iff some rule makes ``d2`` supersede ``d1``."""
    return any(r.matches(d1, d2) for r in rules)


class _Counter:
    checks = 0


def _pairwise_edges(docs: Sequence[Document], rules: RuleSet, counter: _Counter | None = None):
    if not isinstance(rules, RuleSet):
        rules = RuleSet(rules)
    edges = set()
    for a, b in itertools.combinations(docs, 2):
        # strict time order leaves at most one orientation to test
        if a.time == b.time:
            continue
        early, late = (a, b) if a.time < b.time else (b, a)
        for rule in rules.candidates(early.doc_type, late.doc_type):
            if counter is not None:
                counter.checks += 1
            if rule.scope_holds(early, late):
                edges.add((early.doc_id, late.doc_id))
                break
    return edges


def build_gold_graph(kb: Sequence[Document], rules: RuleSet) -> SupersessionGraph:
    """Ground-truth graph over a (small) gold event list."""
    return SupersessionGraph.from_edges((d.doc_id for d in kb), _pairwise_edges(kb, rules))


def build_rssg(
    retrieved: Sequence[Document], rules: RuleSet, stats: dict | None = None
) -> SupersessionGraph:
    """Retrieved-Set Supersession Graph: rules applied pairwise over ``retrieved``.

    Uses only document metadata and the rule set, never gold labels.  When
    ``stats`` is given, ``stats["rule_checks"]`` is incremented by the number
    of rule evaluations charged (``m`` per unordered pair).
    """
    seen: dict[str, Document] = {}
    for d in retrieved:
        seen.setdefault(d.doc_id, d)
    docs = list(seen.values())
    counter = _Counter()
    edges = _pairwise_edges(docs, rules, counter)
    if stats is not None:
        stats["rule_checks"] = stats.get("rule_checks", 0) + counter.checks
        stats["pairs"] = stats.get("pairs", 0) + len(docs) * (len(docs) - 1) // 2
    return SupersessionGraph.from_edges(seen, edges)


def write_rules(rules: Iterable[SupersessionRule], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_json() for r in rules], fh, indent=2)
        fh.write("\n")


def read_rules(path: str | Path) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        return RuleSet(SupersessionRule.from_json(o) for o in json.load(fh))
