"""Deterministic generator for the employee-trading compliance benchmark.

Each example owns one ``(employee, ticker)`` pair and a short gold event
chain; the query is instantiated from its hop type's template.  Distractors
are sampled around the gold pairs (same employee, same ticker, or random).

Text is written so that queries share vocabulary with the pre-clearance
anchor and none with the events that supersede it.  Superseding events
therefore never surface through lexical retrieval.
"""

from __future__ import annotations

import json
import random
import string
from collections.abc import Iterator, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .kb import Document, EntityKey, SupersessionGraph, frontier, key_dict, make_key, read_corpus, write_corpus
from .pipeline import AnswerLabel, build_entity_index, derive_answer
from .retrieval import tokenize
from .rules import GLOBAL_POLICY_KEY, EventType, RuleSet, build_gold_graph, builtin_compliance_rules

__all__ = [
    "HOP_TYPES",
    "QUERY_TEMPLATES",
    "TEXT_TEMPLATES",
    "GenConfig",
    "GenerationError",
    "BenchExample",
    "Dataset",
    "generate_dataset",
    "generate_contaminated",
    "AdversarialInstance",
    "construct_adversarial_t1",
    "write_dataset",
    "load_dataset",
]

HOP_TYPES = ("T0", "T1", "T2", "T3")

QUERY_TEMPLATES = {
    "T0": "What is the pre-clearance status for {emp}'s requested trade in {sec}?",
    "T1": "Is {emp}'s pre-clearance for {sec} still valid?",
    "T2": "Can {emp} currently trade {sec} given all recent compliance updates?",
    "T3": "What is {emp}'s current compliance status for trading {sec}?",
}

E = EventType

# Only the anchor-like types name the employee and ticker in their text.
TEXT_TEMPLATES = {
    E.PRE_CLEARANCE_APPROVED: (
        "Pre-clearance approved: {emp} requested trade in {sec} is cleared; clearance status valid for current window.",
        "Compliance pre-clearance for {emp} to trade {sec} approved; requested trade is valid.",
        "{emp} pre-clearance request for trading {sec} approved by compliance desk; status valid.",
    ),
    E.BLACKOUT_ANNOUNCED: (
        "Restricted window notice: desk halt imposed on covered security pending material nonpublic disclosure.",
        "Quiet period begins; personnel must refrain from dealing with named issuer until further notice.",
        "Insider restriction announced: no orders may be placed on this issuer during earnings quiet period.",
    ),
    E.BLACKOUT_LIFTED: (
        "Restricted window closed; desk halt withdrawn and ordinary dealing may resume.",
        "Quiet period ended; insider restriction removed on named issuer.",
    ),
    E.EMERGENCY_EXCEPTION: (
        "Hardship waiver granted by chief officer; individual exemption from restricted window under emergency provision.",
        "Emergency carve-out authorised: one-time waiver permits hardship sale despite restricted window.",
    ),
    E.EXCEPTION_REVOKED: (
        "Hardship waiver rescinded; emergency carve-out no longer applies.",
        "Individual exemption withdrawn by chief officer.",
    ),
    E.WATCHLIST_ADDED: (
        "Issuer placed on grey list after research coverage conflict was noted.",
        "Watchlist entry opened; issuer flagged by control room.",
    ),
    E.WATCHLIST_REMOVED: (
        "Issuer taken off grey list; control room flag removed.",
    ),
    E.CONFLICT_DISCLOSED: (
        "{emp} disclosed outside business interest relating to {sec}.",
        "Conflict of interest form filed by {emp} naming {sec}.",
    ),
    E.CONFLICT_AMENDED: (
        "Outside interest declaration amended with revised holdings.",
    ),
    E.CONFLICT_CLEARED: (
        "Outside interest review closed without findings.",
    ),
    E.POLICY_UPDATE: (
        "Code of ethics revised; personal dealing rules amended by board.",
    ),
    E.POLICY_ACKNOWLEDGED: (
        "{emp} acknowledged code of ethics attestation.",
    ),
}

# gold chain composition per hop type
_CHAINS = {
    "T0": (E.PRE_CLEARANCE_APPROVED,),
    "T1": (E.PRE_CLEARANCE_APPROVED, E.BLACKOUT_ANNOUNCED),
    "T2": (E.PRE_CLEARANCE_APPROVED, E.BLACKOUT_ANNOUNCED, E.BLACKOUT_LIFTED),
    "T3": (E.PRE_CLEARANCE_APPROVED, E.BLACKOUT_ANNOUNCED, E.EMERGENCY_EXCEPTION),
}

DISTRACTOR_KINDS = ("same_emp", "same_ticker", "random")

_GOLD_START_MAX = 80_000  # gold chains start at an even tick below 2 * this
_GAP_MAX = 5_000
_DISTRACTOR_TICKS = 100_000  # distractors sit on odd ticks below 2 * this


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    n_examples: int = 1000
    n_distractors_per_example: int = 10
    n_employees: int = 200
    n_tickers: int = 30
    enforce_entity_disjoint: bool = True
    # contaminated mode only: chance a distractor is forced onto its own
    # example's pair on top of naive sampling
    reuse_prob: float = 0.0

    def __post_init__(self):
        if self.n_examples % 4:
            raise ValueError("n_examples must be divisible by 4")
        if self.n_examples < 0 or self.n_distractors_per_example < 0:
            raise ValueError("counts must be non-negative")
        if self.n_employees < 1 or self.n_tickers < 1:
            raise ValueError("entity pool must be non-empty")
        if not 0.0 <= self.reuse_prob <= 1.0:
            raise ValueError("reuse_prob must lie in [0, 1]")

    @property
    def pool_size(self) -> int:
        return self.n_employees * self.n_tickers


@dataclass(frozen=True)
class BenchExample:
    example_id: str
    hop_type: str
    query: str
    gold_event_ids: tuple[str, ...]
    gold_answer: str
    scope: EntityKey

    def to_json(self) -> dict:
        return {
            "example_id": self.example_id,
            "hop_type": self.hop_type,
            "query": self.query,
            "gold_event_ids": list(self.gold_event_ids),
            "gold_answer": self.gold_answer,
            "scope": key_dict(self.scope),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BenchExample":
        return cls(
            example_id=obj["example_id"],
            hop_type=obj["hop_type"],
            query=obj["query"],
            gold_event_ids=tuple(obj["gold_event_ids"]),
            gold_answer=obj["gold_answer"],
            scope=make_key(obj["scope"]),
        )


@dataclass
class Dataset:
    corpus: list[Document]
    examples: list[BenchExample]
    config: GenConfig | None = None
    stats: dict = field(default_factory=dict)
    rules: RuleSet = field(default_factory=builtin_compliance_rules)

    def __iter__(self) -> Iterator:
        # lets ``corpus, examples = generate_dataset(cfg)`` work
        yield self.corpus
        yield self.examples

    def __post_init__(self):
        self._docs = {d.doc_id: d for d in self.corpus}
        self._graphs: dict[str, SupersessionGraph] = {}

    @property
    def docs(self) -> dict[str, Document]:
        return self._docs

    def gold_docs(self, ex: BenchExample) -> list[Document]:
        return [self._docs[i] for i in ex.gold_event_ids]

    def gold_graph(self, ex: BenchExample) -> SupersessionGraph:
        g = self._graphs.get(ex.example_id)
        if g is None:
            g = build_gold_graph(self.gold_docs(ex), self.rules)
            self._graphs[ex.example_id] = g
        return g


def _make_ids(rng: random.Random, cfg: GenConfig) -> tuple[list[str], list[str]]:
    if cfg.n_employees > 100_000:
        raise GenerationError("employee ids are limited to five digits")
    emps = [f"EMP{n:05d}" for n in sorted(rng.sample(range(100_000), cfg.n_employees))]
    tickers: set[str] = set()
    banned = {"EMP", "SEC", "CVE", "FDA", "NDC"}
    attempts = 0
    while len(tickers) < cfg.n_tickers:
        attempts += 1
        if attempts > 100 * cfg.n_tickers + 1000:
            raise GenerationError("could not draw enough distinct tickers")
        length = rng.choice((3, 4, 5))
        t = "".join(rng.choice(string.ascii_uppercase) for _ in range(length))
        if t not in banned:
            tickers.add(t)
    return emps, sorted(tickers)


def _text(rng: random.Random, doc_type: str, emp: str, sec: str) -> str:
    return rng.choice(TEXT_TEMPLATES[doc_type]).format(emp=emp, sec=sec)


def _scope(doc_type: str, key: EntityKey) -> tuple[EntityKey, ...]:
    if doc_type in (E.POLICY_UPDATE, E.POLICY_ACKNOWLEDGED):
        return (key, GLOBAL_POLICY_KEY)
    return (key,)


def generate_dataset(cfg: GenConfig = GenConfig()) -> Dataset:
    """Build corpus and examples; fully determined by ``cfg``."""
    rng = random.Random(cfg.seed)
    if cfg.enforce_entity_disjoint and cfg.n_examples >= cfg.pool_size and cfg.n_distractors_per_example:
        raise GenerationError("entity pool too small to keep distractors off every gold pair")
    if cfg.n_examples > cfg.pool_size:
        raise GenerationError("entity pool smaller than the number of examples")
    emps, tickers = _make_ids(rng, cfg)
    pairs = rng.sample(range(cfg.pool_size), cfg.n_examples)
    gold_pairs = [(emps[p // cfg.n_tickers], tickers[p % cfg.n_tickers]) for p in pairs]
    gold_set = set(gold_pairs)

    per_emp: dict[str, int] = {}
    per_ticker: dict[str, int] = {}
    for e, t in gold_pairs:
        per_emp[e] = per_emp.get(e, 0) + 1
        per_ticker[t] = per_ticker.get(t, 0) + 1

    # (temp_id, doc_type, time, key, text, provenance)
    raw: list[list] = []
    chains: list[tuple[str, list[int]]] = []
    n_per_hop = cfg.n_examples // 4
    for i, (emp, sec) in enumerate(gold_pairs):
        hop = HOP_TYPES[i // n_per_hop] if n_per_hop else HOP_TYPES[0]
        key = make_key(emp=emp, ticker=sec)
        session = f"session-{rng.randrange(10_000):04d}"
        t = 2 * rng.randint(1, _GOLD_START_MAX)
        members = []
        for j, doc_type in enumerate(_CHAINS[hop]):
            if j:
                t += 2 * rng.randint(1, _GAP_MAX)
            prov = session
            if hop == "T3" and j == 2:
                other = session
                while other == session:
                    other = f"session-{rng.randrange(10_000):04d}"
                prov = other
            members.append(len(raw))
            raw.append([doc_type, t, key, _text(rng, doc_type, emp, sec), prov])
        chains.append((hop, members))

        for _ in range(cfg.n_distractors_per_example):
            kind = rng.choice(DISTRACTOR_KINDS)
            d_emp, d_sec = _draw_pair(rng, kind, emp, sec, emps, tickers, gold_set, per_emp, per_ticker, cfg)
            if not cfg.enforce_entity_disjoint and cfg.reuse_prob > 0 and rng.random() < cfg.reuse_prob:
                d_emp, d_sec = emp, sec
            doc_type = rng.choice(E.ALL)
            d_time = 2 * rng.randrange(_DISTRACTOR_TICKS) + 1
            d_key = make_key(emp=d_emp, ticker=d_sec)
            raw.append(
                [doc_type, d_time, d_key, _text(rng, doc_type, d_emp, d_sec), f"session-{rng.randrange(10_000):04d}"]
            )

    order = list(range(len(raw)))
    rng.shuffle(order)
    width = max(5, len(str(len(raw))))
    ids = [""] * len(raw)
    for new, old in enumerate(order):
        ids[old] = f"ev{new:0{width}d}"
    corpus = sorted(
        (
            Document(ids[i], r[1], r[0], _scope(r[0], r[2]), r[3], r[4])
            for i, r in enumerate(raw)
        ),
        key=lambda d: d.doc_id,
    )
    docs = {d.doc_id: d for d in corpus}

    rules = builtin_compliance_rules()
    examples = []
    for i, ((hop, members), (emp, sec)) in enumerate(zip(chains, gold_pairs)):
        gold = [docs[ids[m]] for m in members]
        graph = build_gold_graph(gold, rules)
        active = frontier(graph, graph.nodes)
        answer = derive_answer(d for d in gold if d.doc_id in active)
        examples.append(
            BenchExample(
                example_id=f"q{i:04d}",
                hop_type=hop,
                query=QUERY_TEMPLATES[hop].format(emp=emp, sec=sec),
                gold_event_ids=tuple(d.doc_id for d in gold),
                gold_answer=answer.label,
                scope=make_key(emp=emp, ticker=sec),
            )
        )
    ds = Dataset(corpus, examples, cfg, rules=rules)
    ds.stats = contamination_stats(ds)
    return ds


def _draw_pair(rng, kind, emp, sec, emps, tickers, gold_set, per_emp, per_ticker, cfg):
    if cfg.enforce_entity_disjoint:
        if kind == "same_emp" and per_emp.get(emp, 0) >= len(tickers):
            raise GenerationError(f"every ticker of {emp} is a gold pair")
        if kind == "same_ticker" and per_ticker.get(sec, 0) >= len(emps):
            raise GenerationError(f"every employee holding {sec} is a gold pair")
    while True:
        if kind == "same_emp":
            pair = (emp, rng.choice(tickers))
        elif kind == "same_ticker":
            pair = (rng.choice(emps), sec)
        else:
            pair = (rng.choice(emps), rng.choice(tickers))
        if not cfg.enforce_entity_disjoint or pair not in gold_set:
            return pair


def generate_contaminated(cfg: GenConfig = GenConfig(enforce_entity_disjoint=False)) -> Dataset:
    """Same construction with naive distractor sampling; reports the realized rate."""
    if cfg.enforce_entity_disjoint:
        cfg = GenConfig(**{**asdict(cfg), "enforce_entity_disjoint": False})
    return generate_dataset(cfg)


def contamination_stats(ds: Dataset) -> dict:
    index = build_entity_index(ds.corpus)
    flagged = []
    for ex in ds.examples:
        if len(index[ex.scope]) > len(ex.gold_event_ids):
            flagged.append(ex.example_id)
    n = len(ds.examples)
    return {
        "n_documents": len(ds.corpus),
        "n_examples": n,
        "contaminated_examples": len(flagged),
        "contamination_rate": len(flagged) / n if n else 0.0,
        "contaminated_ids": flagged,
    }


# -- adversarial family ---------------------------------------------------------

@dataclass
class AdversarialInstance:
    corpus: list[Document]
    query: str
    example: BenchExample
    gold_graph: SupersessionGraph
    anchor_id: str
    superseder_id: str
    k: int

    @property
    def degenerate(self) -> bool:
        """Cutoff covers the whole corpus, so every document is retrieved."""
        return self.k >= len(self.corpus)


def construct_adversarial_t1(n: int, k: int, seed: int = 0, strict: bool = True) -> AdversarialInstance:
    """One instance of the lexical-displacement family.

    Target ``d1`` (a pre-clearance matching the query), ``n - 1`` pre-clearances
    for other employees and tickers dated before it, and a blackout ``d*``
    dated after it that shares no vocabulary with the query.  ``strict``
    enforces ``n >= k + 2``; pass False to build the small degenerate cases.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if strict and n < k + 2:
        raise ValueError(f"need n >= k + 2, got n={n}, k={k}")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(seed)
    n_emps = max(n, 2)
    emps = [f"EMP{x:05d}" for x in rng.sample(range(100_000), n_emps)]
    tickers: list[str] = []
    seen: set[str] = set()
    while len(tickers) < n_emps:
        t = "".join(rng.choice(string.ascii_uppercase) for _ in range(rng.choice((3, 4, 5))))
        if t not in seen and t not in ("EMP", "SEC", "CVE", "FDA", "NDC"):
            seen.add(t)
            tickers.append(t)
    emp, sec = emps[0], tickers[0]
    key = make_key(emp=emp, ticker=sec)
    t1 = 2 * (n + 10)
    template = TEXT_TEMPLATES[E.PRE_CLEARANCE_APPROVED][0]
    width = max(5, len(str(n + 1)))
    anchor = Document(
        f"adv{0:0{width}d}", t1, E.PRE_CLEARANCE_APPROVED, (key,), template.format(emp=emp, sec=sec), "src-a"
    )
    others = [
        Document(
            f"adv{j:0{width}d}",
            2 * j,
            E.PRE_CLEARANCE_APPROVED,
            (make_key(emp=emps[j], ticker=tickers[j]),),
            template.format(emp=emps[j], sec=tickers[j]),
            "src-a",
        )
        for j in range(1, n)
    ]
    star = Document(
        f"adv{n:0{width}d}", t1 + 2, E.BLACKOUT_ANNOUNCED, (key,), TEXT_TEMPLATES[E.BLACKOUT_ANNOUNCED][0], "src-b"
    )
    corpus = [anchor, *others, star]
    gold = [anchor, star]
    graph = build_gold_graph(gold, builtin_compliance_rules())
    query = QUERY_TEMPLATES["T1"].format(emp=emp, sec=sec)
    example = BenchExample("adv", "T1", query, (anchor.doc_id, star.doc_id), AnswerLabel.BLOCKED, key)
    return AdversarialInstance(corpus, query, example, graph, anchor.doc_id, star.doc_id, k)


# -- files ------------------------------------------------------------------------

def write_dataset(ds: Dataset, out_dir: str | Path) -> dict[str, Path]:
    """Write ``corpus.jsonl`` and ``examples.jsonl``; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_path = out / "corpus.jsonl"
    examples_path = out / "examples.jsonl"
    write_corpus(ds.corpus, corpus_path)
    with open(examples_path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in ds.examples:
            fh.write(json.dumps(ex.to_json(), ensure_ascii=False) + "\n")
    return {"corpus": corpus_path, "examples": examples_path}


def load_dataset(data_dir: str | Path, rules: RuleSet | None = None) -> Dataset:
    data = Path(data_dir)
    corpus = read_corpus(data / "corpus.jsonl")
    examples = []
    with open(data / "examples.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                examples.append(BenchExample.from_json(json.loads(line)))
    ds = Dataset(corpus, examples, rules=rules or builtin_compliance_rules())
    missing = {i for ex in examples for i in ex.gold_event_ids} - ds.docs.keys()
    if missing:
        raise ValueError(f"examples reference unknown doc ids: {sorted(missing)[:5]}")
    return ds


def query_vocabulary(hops: Sequence[str] = HOP_TYPES) -> set[str]:
    """Fixed (non-id) tokens used by the query templates."""
    words: set[str] = set()
    for h in hops:
        words |= set(tokenize(QUERY_TEMPLATES[h].format(emp="", sec="")))
    return words
