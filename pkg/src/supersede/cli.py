"""Command-line entry points: generate, evaluate, audit, adversarial.

Every command writes UTF-8 JSON and a run manifest listing the sha256 of its
inputs and outputs.  Manifests record file names, not absolute paths, and no
wall-clock times (those go to stderr), so identical runs give identical bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .benchgen import GenConfig, GenerationError, generate_contaminated, generate_dataset, load_dataset, write_dataset
from .evaluate import ADVERSARIAL_SYSTEMS, SYSTEMS, adversarial_sweep, audit_retrieved, evaluate, evaluate_retrieved

log = logging.getLogger("supersede")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(obj, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, ensure_ascii=False, sort_keys=False)
        fh.write("\n")


def _digests(paths) -> dict[str, str]:
    return {Path(p).name: sha256_file(p) for p in paths}


def write_manifest(path: str | Path, command: str, config: dict, inputs=(), outputs=(), extra=None) -> dict:
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "inputs": _digests(inputs),
        "outputs": _digests(outputs),
        **(extra or {}),
    }
    write_json(manifest, path)
    return manifest


def _sidecar(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _dataset_inputs(data: Path) -> list[Path]:
    return [data / "corpus.jsonl", data / "examples.jsonl"]


def cmd_generate(args) -> int:
    cfg = GenConfig(
        seed=args.seed,
        n_examples=args.n_examples,
        n_distractors_per_example=args.distractors,
        enforce_entity_disjoint=not args.contaminated,
        reuse_prob=args.reuse_prob,
    )
    ds = generate_contaminated(cfg) if args.contaminated else generate_dataset(cfg)
    paths = write_dataset(ds, args.out)
    stats = {k: v for k, v in ds.stats.items() if k != "contaminated_ids"}
    stats["contamination_rate_display"] = f"{stats['contamination_rate']:.3f}"
    config = {
        "seed": cfg.seed,
        "n_examples": cfg.n_examples,
        "n_distractors_per_example": cfg.n_distractors_per_example,
        "n_employees": cfg.n_employees,
        "n_tickers": cfg.n_tickers,
        "enforce_entity_disjoint": cfg.enforce_entity_disjoint,
        "reuse_prob": cfg.reuse_prob,
    }
    write_manifest(
        Path(args.out) / "manifest.json", "generate", config, outputs=paths.values(), extra={"stats": stats}
    )
    log.info("wrote %d documents, %d examples to %s", len(ds.corpus), len(ds.examples), args.out)
    return 0


def _load_retrieved(path: str | Path) -> dict[str, list[str]]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict) or not all(isinstance(v, list) for v in obj.values()):
        raise ValueError("retrieved-sets file must map example_id -> list of doc ids")
    return {str(k): [str(x) for x in v] for k, v in obj.items()}


def cmd_evaluate(args) -> int:
    data = Path(args.data)
    ds = load_dataset(data)
    inputs = _dataset_inputs(data)
    if args.system in SYSTEMS:
        report = evaluate(ds, args.system, k=args.k, stage1_k=args.stage1_k)
    else:
        report = evaluate_retrieved(ds, _load_retrieved(args.system), k=args.k, name=Path(args.system).name)
        inputs.append(Path(args.system))
    out = Path(args.out)
    write_json(report.to_json(), out)
    write_manifest(_sidecar(out), "evaluate", dict(report.config), inputs=inputs, outputs=[out])
    overall = report.aggregates["overall"]
    log.info("%s: TCA %s Acc %s", report.system, overall["tca"]["display"], overall["acc"]["display"])
    return 0


def cmd_audit(args) -> int:
    data = Path(args.data)
    ds = load_dataset(data)
    result = audit_retrieved(ds, _load_retrieved(args.retrieved))
    out = Path(args.out)
    write_json(result, out)
    inputs = [*_dataset_inputs(data), args.retrieved]
    write_manifest(_sidecar(out), "audit", {"n_examples": len(ds.examples)}, inputs=inputs, outputs=[out])
    log.info("audit: %d/%d examples pass both conditions", result["n_ok"], result["n_examples"])
    return 0


def cmd_adversarial(args) -> int:
    result = adversarial_sweep(args.n, k=args.k, system=args.system, seeds=range(args.seeds))
    out = Path(args.out)
    write_json(result, out)
    config = {"n": list(args.n), "k": args.k, "system": args.system, "seeds": args.seeds}
    write_manifest(_sidecar(out), "adversarial", config, outputs=[out])
    return 0


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="supersede", description="Supersession-aware retrieval benchmark tools.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress and timings to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a benchmark dataset")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-examples", type=int, default=1000)
    g.add_argument("--distractors", type=int, default=10, help="distractors per example")
    g.add_argument("--contaminated", action="store_true", help="naive distractor sampling (may hit gold scopes)")
    g.add_argument("--reuse-prob", type=float, default=0.0, help="extra chance a distractor reuses its own gold scope")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="score a system on a dataset")
    e.add_argument("--data", required=True)
    e.add_argument(
        "--system", required=True, help=f"one of {', '.join(SYSTEMS)}, or a retrieved-sets JSON file"
    )
    e.add_argument("--k", type=_positive, default=5)
    e.add_argument("--stage1-k", type=_positive, default=20)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("audit", help="check retrieved sets for frontier inclusion and ignored superseders")
    a.add_argument("--data", required=True)
    a.add_argument("--retrieved", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_audit)

    v = sub.add_parser("adversarial", help="sweep the lexical-displacement instance family")
    v.add_argument("--n", type=_positive, nargs="+", default=[1000])
    v.add_argument("--k", type=_positive, default=5)
    v.add_argument("--system", choices=ADVERSARIAL_SYSTEMS, default="bm25")
    v.add_argument("--seeds", type=_positive, default=1, help="instances per n")
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_adversarial)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s", stream=sys.stderr
    )
    if args.command == "evaluate" and args.system not in SYSTEMS and not Path(args.system).is_file():
        parser.error(f"unknown system {args.system!r}: expected one of {', '.join(SYSTEMS)} or an existing file")
    started = time.perf_counter()
    try:
        code = args.func(args)
    except (GenerationError, ValueError, KeyError, FileNotFoundError) as exc:
        parser.exit(2, f"supersede {args.command}: error: {exc}\n")
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - started)
    return code


if __name__ == "__main__":
    sys.exit(main())
