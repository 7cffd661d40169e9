"""Operator command line: ingest, learn weights, build indexes, query,
compare frameworks, validate graph files, and launch the service.

Query and compare share the coordinator with the HTTP service, so a scripted
run and a served run of the same configuration return identical results.
Exit codes: 0 success, 1 operational error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import catalog
from .coordinator import Coordinator, SystemConfig
from .errors import EngineError
from .fusion import ModalityWeightLearner, load_triplets
from .index import load_graph, save_graph, validate_graph
from .search import FRAMEWORKS

SCHEMA_VERSION = 1
DEFAULT_LISTEN = "127.0.0.1:8080"


def _load_config(path: str) -> SystemConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise EngineError(f"cannot read config {path}: {exc}") from exc
    return SystemConfig.model_validate(raw)


def _configure(coordinator: Coordinator, config: SystemConfig) -> None:
    milestones = coordinator.configure(config)
    for stage, status in milestones.stages.items():
        if status == "failed":
            raise EngineError(f"stage {stage} failed: {milestones.details[stage]}")


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps({"schema_version": SCHEMA_VERSION, **payload}, indent=2))
        return
    answer = payload.get("answer")
    if answer:
        print(answer)
        print()
    rows = payload.get("results", [])
    if rows:
        _print_table(["rank", "id", "distance"],
                     [[r["rank"], r["id"], f"{r['distance']:.6f}"] for r in rows])
    stats = payload.get("stats")
    if stats:
        print(f"\nvisited={stats['visited']} full_evals={stats['full_evals']} "
              f"abandoned={stats['abandoned']}")


def _print_table(header: list[str], rows: list[list]) -> None:
    cells = [header] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[col]) for row in cells) for col in range(len(header))]
    for row in cells:
        print("  ".join(cell.ljust(width) for cell, width in zip(row, widths)))


def _default_format() -> str:
    return "table" if sys.stdout.isatty() else "json"


def cmd_ingest(args) -> int:
    config = _load_config(args.config)
    kb = catalog.ingest(config.knowledge_base.manifest, config.schema(),
                        name=config.knowledge_base.name)
    coverage = kb.coverage()
    print(f"ingested {len(kb)} objects from {config.knowledge_base.manifest}")
    for modality, count in coverage.items():
        print(f"  {modality}: {count}/{len(kb)} objects")
    return 0


def cmd_learn_weights(args) -> int:
    if args.config:
        modalities = [e.modality for e in _load_config(args.config).encoders]
    elif args.modalities:
        modalities = [m.strip() for m in args.modalities.split(",") if m.strip()]
    else:
        raise EngineError("learn-weights needs --config or --modalities")
    triplets = load_triplets(args.triplets, modalities)
    learner = ModalityWeightLearner(margin=args.margin, learning_rate=args.lr,
                                    epochs=args.epochs)
    learner.fit(triplets)
    catalog.save_weights(args.out, modalities, learner.weights_)
    printable = ", ".join(f"{m}={w:.4f}" for m, w in zip(modalities, learner.weights_))
    print(f"learned weights over {len(triplets)} triplets: {printable}")
    print(f"final loss {learner.loss_curve_[-1]:.6f} -> {args.out}")
    return 0


def cmd_build_index(args) -> int:
    config = _load_config(args.config)
    coordinator = Coordinator()
    _configure(coordinator, config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written = catalog.save_vectors(coordinator.kb, out_dir / "vectors.mqav")
    catalog.save_weights(out_dir / "weights.json",
                         list(coordinator.layout.modalities), coordinator.weights)
    print(f"vectors.mqav ({written} bytes), weights.json")
    indexes = coordinator.indexes
    if indexes.unified is not None:
        size = save_graph(indexes.unified.graph_, out_dir / "unified.mqag")
        print(f"unified.mqag ({size} bytes)")
    for modality, index in indexes.per_modality.items():
        size = save_graph(index.graph_, out_dir / f"modality-{modality}.mqag")
        print(f"modality-{modality}.mqag ({size} bytes)")
    if indexes.joint is not None:
        size = save_graph(indexes.joint.graph_, out_dir / "joint.mqag")
        print(f"joint.mqag ({size} bytes)")
    for stage, detail in coordinator.milestones.details.items():
        print(f"{stage}: {detail}")
    return 0


def _read_image(path: str | None) -> bytes | None:
    if not path:
        return None
    return Path(path).read_bytes()


def cmd_query(args) -> int:
    config = _load_config(args.config)
    coordinator = Coordinator()
    _configure(coordinator, config)
    session_id = coordinator.open_session()
    response = coordinator.submit_query(
        session_id, text=args.text, image=_read_image(args.image),
        k=args.k, L=args.L, framework=args.framework,
    )
    payload = {"answer": response.answer, "degraded": response.degraded}
    payload.update(response.result.as_dict())
    _emit(payload, args.format or _default_format())
    return 0


def _oracle_topk(coordinator: Coordinator, query_vectors: dict, k: int) -> list[str]:
    """Exact weighted-distance top-k over the whole knowledge base."""
    indexes = coordinator.indexes
    totals = np.zeros(len(indexes.object_ids), dtype=np.float64)
    for m, modality in enumerate(indexes.layout.modalities):
        matrix = indexes.modality_vectors[modality]
        q = np.asarray(query_vectors[modality], dtype=np.float64)
        diff = matrix - q
        totals += indexes.weights[m] * np.einsum("ij,ij->i", diff, diff)
    order = np.lexsort((np.arange(len(totals)), totals))[:k]
    return [indexes.object_ids[i] for i in order]


def cmd_compare(args) -> int:
    config = _load_config(args.config)
    coordinator = Coordinator()
    _configure(coordinator, config)
    session_id = coordinator.open_session()
    k = args.k if args.k is not None else config.retrieval.k
    L = args.L if args.L is not None else config.retrieval.L

    from .encoders import QueryContext, encode_query

    context = QueryContext(text=args.text, image=_read_image(args.image))
    query_vectors = encode_query(coordinator.kb, context, coordinator.registry)
    outcomes = coordinator.compare(text=args.text, image=_read_image(args.image),
                                   session_id=session_id, k=k, L=L)

    truth: list[str] | None = None
    if args.ground_truth:
        if args.ground_truth == "oracle":
            truth = _oracle_topk(coordinator, query_vectors, k)
        else:
            truth = [str(i) for i in json.loads(Path(args.ground_truth).read_text())]

    rows = []
    for name in FRAMEWORKS:
        outcome = outcomes[name]
        if outcome.error is not None:
            rows.append({"framework": name, "error": outcome.error,
                         "latency_ms": outcome.latency_ms})
            continue
        stats = outcome.result.stats
        row = {
            "framework": name, "k": k, "L": L,
            "latency_ms": round(outcome.latency_ms, 3),
            "visited": stats.visited, "full_evals": stats.full_evals,
            "abandoned": stats.abandoned,
            "ids": [h[0] for h in outcome.result.hits],
        }
        if truth is not None:
            overlap = len(set(row["ids"]) & set(truth))
            row["recall"] = overlap / max(1, len(truth))
        rows.append(row)

    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["framework", "k", "L", "recall", "latency_ms",
                             "visited", "full_evals", "abandoned"])
            for row in rows:
                if "error" in row:
                    continue
                writer.writerow([row["framework"], row["k"], row["L"],
                                 row.get("recall", ""), row["latency_ms"],
                                 row["visited"], row["full_evals"], row["abandoned"]])
        print(f"wrote {args.csv}", file=sys.stderr)

    fmt = args.format or _default_format()
    if fmt == "json":
        print(json.dumps({"schema_version": SCHEMA_VERSION, "frameworks": rows}, indent=2))
    else:
        header = ["framework", "latency_ms", "visited", "full_evals", "abandoned", "top ids"]
        if truth is not None:
            header.insert(1, "recall")
        table = []
        for row in rows:
            if "error" in row:
                table.append([row["framework"], *([""] * (len(header) - 2)), row["error"]])
                continue
            cells = [row["framework"], f"{row['latency_ms']:.2f}", row["visited"],
                     row["full_evals"], row["abandoned"], " ".join(map(str, row["ids"][:5]))]
            if truth is not None:
                cells.insert(1, f"{row['recall']:.3f}")
            table.append(cells)
        _print_table(header, table)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _load_config(args.config)
    coordinator = Coordinator()
    _configure(coordinator, config)

    static_dir = args.static
    if static_dir is None and Path("frontend/dist").is_dir():
        static_dir = "frontend/dist"
    app = create_app(coordinator, static_dir=static_dir)

    listen = args.listen or os.environ.get("MQA_LISTEN_ADDR", DEFAULT_LISTEN)
    host, _, port = listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def cmd_validate(args) -> int:
    graph = load_graph(args.graph)
    report = validate_graph(graph)
    for vertex in report.over_degree:
        print(f"note: vertex {vertex} exceeds degree bound (repair edges allowed)",
              file=sys.stderr)
    if report.ok:
        print("OK")
        return 0
    for violation in report.violations:
        print(f"violation: {violation}", file=sys.stderr)
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mqa",
                                     description="Multi-modal query answering engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="ingest a manifest and report coverage")
    p.add_argument("--config", required=True, help="system config JSON")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("learn-weights", help="learn modality weights from triplets")
    p.add_argument("--triplets", required=True, help="JSON-lines triplet file")
    p.add_argument("--config", help="system config JSON (for modality order)")
    p.add_argument("--modalities", help="comma-separated modality order")
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--out", required=True, help="output weights JSON path")
    p.set_defaults(func=cmd_learn_weights)

    p = sub.add_parser("build-index", help="run the full pipeline and save artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("query", help="run one query through the coordinator")
    p.add_argument("--config", required=True)
    p.add_argument("--text")
    p.add_argument("--image", help="path to an image file")
    p.add_argument("-k", type=int, default=None)
    p.add_argument("-L", type=int, default=None)
    p.add_argument("--framework", choices=list(FRAMEWORKS))
    p.add_argument("--format", choices=["json", "table"])
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("compare", help="run all frameworks on one query")
    p.add_argument("--config", required=True)
    p.add_argument("--text")
    p.add_argument("--image", help="path to an image file")
    p.add_argument("-k", type=int, default=None)
    p.add_argument("-L", type=int, default=None)
    p.add_argument("--ground-truth",
                   help="'oracle' for the exact weighted top-k, or a JSON id list")
    p.add_argument("--csv", help="write per-framework recall/latency CSV here")
    p.add_argument("--format", choices=["json", "table"])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("serve", help="launch the HTTP service")
    p.add_argument("--config", required=True)
    p.add_argument("--listen", help=f"host:port (default env MQA_LISTEN_ADDR or {DEFAULT_LISTEN})")
    p.add_argument("--static", help="static frontend directory")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("validate", help="validate a saved graph file")
    p.add_argument("--graph", required=True)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(part) for part in first.get("loc", []))
        print(f"error: invalid config at {loc}: {first.get('msg')}", file=sys.stderr)
        return 1
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
