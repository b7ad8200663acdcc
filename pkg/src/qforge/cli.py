"""Command-line entry point wiring generation, evaluation, retrieval, data
preparation, and the error-correction toolkit.

Exit codes: 0 on success (verdicts live in the report, not the exit code),
1 for infrastructure failures, 2 for usage errors. Every subcommand honors
``--seed`` (default 42) and an optional ``--config`` JSON file whose keys
fill in flags the command line left unset; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

import numpy as np

from . import dataprep as dp
from . import rag
from .backend import backend_from_spec
from .errors import QForgeError, UsageError
from .evalsuite import (SuiteReport, default_suite, load_suite, render_svg,
                        render_table, run_suite, validate_suite)
from .orchestrator import (CheckerSpec, GenerationTask, PipelineConfig,
                           report_to_dict, run_task)
from .prompting import seed_exemplars
from .qec import (DecoderConfig, DeviceTopology, NoiseModel, SyndromeHistory,
                  build_layout, decode, generate_decoder_for_topology,
                  logical_error_rate, run_demo)
from .rng import DEFAULT_SEED, substream
from .sandbox import ExecutorConfig, InlineExecutor, SubprocessExecutor


def _write_json(payload, path: str | None) -> None:
    if path is None:
        return
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise UsageError("config file must hold a JSON object")
    return config


def _resolve(args, config: dict, key: str, default):
    """Flag > config file > built-in default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _executor_for(backend_spec: str, args, config):
    """Scripted and replay backends run candidates in process so artifacts
    are byte-stable; live backends get the subprocess sandbox."""
    choice = _resolve(args, config, "executor", None)
    if choice is None:
        deterministic = backend_spec.startswith(("scripted", "replay"))
        choice = "inline" if deterministic else "subprocess"
    if choice == "inline":
        return InlineExecutor()
    if choice == "subprocess":
        timeout_s = float(_resolve(args, config, "timeout_s", 30.0))
        return SubprocessExecutor(ExecutorConfig(timeout_s=timeout_s))
    raise UsageError(f"unknown executor {choice!r}")


def _suite_from(path: str):
    return default_suite() if path == "default" else load_suite(path)


# ----------------------------------------------------------------- commands

def _cmd_generate(args, config) -> int:
    prompt = _resolve(args, config, "prompt", None)
    if not prompt:
        raise UsageError("generate requires --prompt")
    checker = None
    kind = _resolve(args, config, "checker_kind", None)
    if kind is not None:
        payload = _resolve(args, config, "checker_payload", None)
        if payload is None:
            raise UsageError("--checker-kind requires --checker-payload")
        checker = CheckerSpec(kind=kind, payload=payload)
    task = GenerationTask(id=_resolve(args, config, "task_id", "task-1"),
                          prompt=prompt, checker=checker)
    strategy = _resolve(args, config, "strategy", "plain")
    retrieval_k = int(_resolve(args, config, "retrieval_k",
                               rag.DEFAULT_RETRIEVAL_K if strategy == "rag" else 0))
    pipeline = PipelineConfig(
        max_passes=int(_resolve(args, config, "max_passes", 3)),
        strategy=strategy,
        samples_n=int(_resolve(args, config, "samples_n", 1)),
        retrieval_k=retrieval_k,
    )
    spec = _resolve(args, config, "backend", "scripted:allfail")
    backend = backend_from_spec(spec)
    executor = _executor_for(spec, args, config)
    index = None
    index_path = _resolve(args, config, "index", None)
    if strategy == "rag" and index_path:
        index = rag.load_index(index_path)
    exemplars = seed_exemplars(strategy) if strategy in ("cot", "scot") else None
    report = run_task(task, pipeline, backend, executor=executor, index=index,
                      exemplars=exemplars)
    _write_json(report_to_dict(report), _resolve(args, config, "out", None))
    print(f"{task.id}: {report.final_verdict} after {report.passes_used} pass(es)")
    return 0


def _cmd_eval(args, config) -> int:
    suite = _suite_from(_resolve(args, config, "suite", "default"))
    spec = _resolve(args, config, "backend", "scripted:allpass")
    backend = backend_from_spec(spec, suite=suite)
    executor = _executor_for(spec, args, config)
    pipeline = PipelineConfig(samples_n=int(_resolve(args, config, "samples_n", 1)))
    seed = int(_resolve(args, config, "seed", DEFAULT_SEED))
    report = run_suite(suite, pipeline, backend, executor=executor, seed=seed)
    _write_json(report.to_dict(), _resolve(args, config, "out", None))
    sys.stdout.write(render_table(report))
    return 0


def _cmd_rag_index(args, config) -> int:
    corpus_dir = Path(_resolve(args, config, "corpus", "."))
    documents = []
    for path in sorted(corpus_dir.rglob("*")):
        if path.suffix in (".txt", ".md") and path.is_file():
            documents.append((path.relative_to(corpus_dir).as_posix(),
                              path.read_text(encoding="utf-8")))
    chunks = rag.chunk_corpus(
        documents,
        chunk_size=int(_resolve(args, config, "chunk_size", rag.DEFAULT_CHUNK_SIZE)),
        overlap=int(_resolve(args, config, "overlap", rag.DEFAULT_OVERLAP)))
    embedder = rag.resolve_embedder(
        _resolve(args, config, "embedder", "hashed-bow-512"))
    index = rag.embed_chunks(chunks, embedder)
    out = _resolve(args, config, "out", "index.qfrg")
    rag.save_index(index, out)
    print(f"indexed {len(chunks)} chunks from {len(documents)} documents -> {out}")
    return 0


def _cmd_rag_query(args, config) -> int:
    index = rag.load_index(_resolve(args, config, "index", "index.qfrg"))
    query = _resolve(args, config, "q", None)
    if not query:
        raise UsageError("rag query requires --q")
    k = int(_resolve(args, config, "k", rag.DEFAULT_RETRIEVAL_K))
    results = rag.retrieve(index, query, k=k)
    payload = [{"id": r.chunk.id, "source": r.chunk.source, "score": r.score,
                "text": r.chunk.text} for r in results]
    _write_json(payload, _resolve(args, config, "out", None))
    for rank, r in enumerate(results, start=1):
        snippet = r.chunk.text[:60].replace("\n", " ")
        print(f"{rank}. [{r.score:.4f}] {r.chunk.source}: {snippet}")
    return 0


def _cmd_dataprep_filter(args, config) -> int:
    corpus = dp.load_corpus(_resolve(args, config, "corpus", "."))
    cutoff = date.fromisoformat(
        _resolve(args, config, "cutoff", dp.DEFAULT_CUTOFF.isoformat()))
    pattern = _resolve(args, config, "pattern", dp.DEFAULT_IMPORT_PATTERN)
    kept = dp.filter_corpus(corpus, cutoff=cutoff, import_pattern=pattern)
    payload = [{"path": f.path, "kind": f.kind,
                "last_updated": f.last_updated.isoformat(),
                "official": f.official} for f in kept]
    _write_json(payload, _resolve(args, config, "out", None))
    print(f"kept {len(kept)} of {len(corpus)} files")
    return 0


def _cmd_dataprep_split(args, config) -> int:
    notebook_path = _resolve(args, config, "notebook", None)
    if notebook_path is None:
        raise UsageError("dataprep split requires --notebook")
    path = Path(notebook_path)
    cells = dp._parse_notebook_cells(path.read_text(encoding="utf-8"), str(path))
    nb = dp.CorpusFile(path=str(path), kind="notebook", last_updated=date.min,
                       cells=cells)
    tiles = dp.split_notebook(nb)
    _write_json(tiles, _resolve(args, config, "out", None))
    print(f"{len(tiles)} tiles")
    return 0


def _cmd_dataprep_fim(args, config) -> int:
    chunks = dp.load_chunks(_resolve(args, config, "chunks", "chunks.jsonl"))
    rate = float(_resolve(args, config, "rate", dp.DEFAULT_FIM_RATE))
    seed = int(_resolve(args, config, "seed", DEFAULT_SEED))
    rng = substream(seed, "dataprep.fim")
    out = [dp.fim_transform(chunk, rng, rate) for chunk in chunks]
    out_path = _resolve(args, config, "out", "chunks_fim.jsonl")
    dp.write_chunks(out, out_path)
    applied = sum(1 for c in out if c.fim_applied)
    print(f"transformed {applied} of {len(out)} chunks -> {out_path}")
    return 0


def _cmd_dataprep_upsample(args, config) -> int:
    chunks = dp.load_chunks(_resolve(args, config, "chunks", "chunks.jsonl"))
    target = _resolve(args, config, "target_tokens", None)
    if target is None:
        raise UsageError("dataprep upsample requires --target-tokens")
    out = dp.upsample(chunks, int(target),
                      official_weight=float(_resolve(
                          args, config, "official_weight",
                          dp.DEFAULT_OFFICIAL_WEIGHT)),
                      seed=int(_resolve(args, config, "seed", DEFAULT_SEED)))
    out_path = _resolve(args, config, "out", "chunks_upsampled.jsonl")
    dp.write_chunks(out, out_path)
    print(f"{len(chunks)} chunks / {dp.total_tokens(chunks)} tokens -> "
          f"{len(out)} chunks / {dp.total_tokens(out)} tokens")
    return 0


def _cmd_qec_layout(args, config) -> int:
    layout = build_layout(int(_resolve(args, config, "distance", 3)))
    payload = {
        "distance": layout.distance,
        "n_data": layout.n_data,
        "x_stabilizers": [list(s) for s in layout.x_stabilizers],
        "z_stabilizers": [list(s) for s in layout.z_stabilizers],
        "logical_x": list(layout.logical_x),
        "logical_z": list(layout.logical_z),
    }
    _write_json(payload, _resolve(args, config, "out", None))
    print(f"distance {layout.distance}: {layout.n_data} data qubits, "
          f"{layout.n_x} X + {layout.n_z} Z stabilizers")
    return 0


def _cmd_qec_decode(args, config) -> int:
    history_path = _resolve(args, config, "history", None)
    if history_path is None:
        raise UsageError("qec decode requires --history")
    record = json.loads(Path(history_path).read_text(encoding="utf-8"))
    layout = build_layout(int(record.get(
        "distance", _resolve(args, config, "distance", 3))))
    decoder = DecoderConfig(
        layout,
        space_weight=float(_resolve(args, config, "space_weight", 1.0)),
        time_weight=float(_resolve(args, config, "time_weight", 1.0)))
    history = SyndromeHistory(np.array(record["outcomes"], dtype=np.uint8))
    correction = decode(history, decoder)
    payload = {"x": sorted(int(q) for q in np.flatnonzero(correction.x)),
               "z": sorted(int(q) for q in np.flatnonzero(correction.z)),
               "exact": correction.exact}
    _write_json(payload, _resolve(args, config, "out", None))
    print(f"x flips {payload['x']}, z flips {payload['z']}"
          + ("" if correction.exact else " (greedy fallback)"))
    return 0


def _cmd_qec_rate(args, config) -> int:
    estimate = logical_error_rate(
        distance=int(_resolve(args, config, "d", 3)),
        model=NoiseModel(p=float(_resolve(args, config, "p", 0.001)),
                         q=float(_resolve(args, config, "q", 0.0))),
        rounds=int(_resolve(args, config, "rounds", 1)),
        trials=int(_resolve(args, config, "trials", 1000)),
        seed=int(_resolve(args, config, "seed", DEFAULT_SEED)))
    _write_json(estimate.to_dict(), _resolve(args, config, "out", None))
    print(f"logical error rate {estimate.logical_error_rate:.6f} "
          f"[{estimate.ci_low:.6f}, {estimate.ci_high:.6f}] "
          f"over {estimate.trials} trials")
    return 0


def _cmd_qec_demo(args, config) -> int:
    result = run_demo(
        p_noisy=float(_resolve(args, config, "p_noisy", 0.05)),
        p_corrected=float(_resolve(args, config, "p_corrected", 0.01)),
        shots=int(_resolve(args, config, "shots", 2000)),
        seed=int(_resolve(args, config, "seed", DEFAULT_SEED)))
    _write_json(result, _resolve(args, config, "out", None))
    print(f"target {result['target']}: noisy success "
          f"{result['noisy']['success_fraction']:.4f}, corrected "
          f"{result['corrected']['success_fraction']:.4f}")
    return 0


def _cmd_qec_topology(args, config) -> int:
    topo_path = _resolve(args, config, "topology", None)
    if topo_path is None:
        raise UsageError("qec topology requires --topology")
    topology = DeviceTopology.load(topo_path)
    max_distance = _resolve(args, config, "max_distance", None)
    decoder = generate_decoder_for_topology(
        topology, max_distance=None if max_distance is None else int(max_distance))
    payload = {"distance": decoder.layout.distance,
               "n_data": decoder.layout.n_data,
               "space_weight": decoder.space_weight,
               "time_weight": decoder.time_weight}
    _write_json(payload, _resolve(args, config, "out", None))
    print(f"largest embeddable distance: {decoder.layout.distance}")
    return 0


def _cmd_report(args, config) -> int:
    report_path = _resolve(args, config, "report", None)
    if report_path is None:
        raise UsageError("report requires --report")
    record = json.loads(Path(report_path).read_text(encoding="utf-8"))
    fmt = _resolve(args, config, "format", "table")
    if isinstance(record, dict) and "pass_at_k" in record:
        suite = SuiteReport(
            category_counts=record["category_counts"],
            syntactic_accuracy=record["syntactic_accuracy"],
            semantic_accuracy=record["semantic_accuracy"],
            pass_at_k={int(k): v for k, v in record["pass_at_k"].items()},
            samples_n=record["samples_n"],
            seed=record["seed"])
        rendered = render_svg(suite) if fmt == "svg" else render_table(suite)
    elif isinstance(record, list):
        lines = ["task                  verdict         passes",
                 "--------------------  --------------  ------"]
        for entry in record:
            if "error" in entry:
                lines.append(f"{entry['task_id']:<21} error:{entry['error']['code']}")
            else:
                lines.append(f"{entry['task_id']:<21} "
                             f"{entry['final_verdict']:<15} {entry['passes_used']}")
        rendered = "\n".join(lines) + "\n"
        if fmt == "svg":
            raise UsageError("svg rendering applies to suite reports")
    else:
        raise UsageError("unrecognized report file shape")
    out = _resolve(args, config, "out", None)
    if out is not None:
        Path(out).write_text(rendered, encoding="utf-8")
    sys.stdout.write(rendered)
    return 0


# -------------------------------------------------------------------- parser

def _add(parser, *flags, **kwargs):
    kwargs.setdefault("default", None)
    parser.add_argument(*flags, **kwargs)


def _leaf(parser, func):
    # SUPPRESS so an absent subcommand-level flag does not clobber the value
    # the root parser already put in the namespace
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    parser.add_argument("--config", default=argparse.SUPPRESS)
    parser.set_defaults(func=func)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qforge",
        description="generate, repair, and evaluate quantum programs")
    _add(parser, "--seed", type=int, help="root seed (default 42)")
    _add(parser, "--config", help="JSON config file; flags override its keys")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run one task through the repair loop")
    _add(p, "--prompt")
    _add(p, "--task-id", dest="task_id")
    _add(p, "--backend")
    _add(p, "--strategy", choices=("plain", "cot", "scot", "rag"))
    _add(p, "--max-passes", dest="max_passes", type=int)
    _add(p, "--samples-n", dest="samples_n", type=int)
    _add(p, "--retrieval-k", dest="retrieval_k", type=int)
    _add(p, "--index")
    _add(p, "--checker-kind", dest="checker_kind")
    _add(p, "--checker-payload", dest="checker_payload")
    _add(p, "--executor", choices=("inline", "subprocess"))
    _add(p, "--timeout-s", dest="timeout_s", type=float)
    _add(p, "--out")
    _leaf(p, _cmd_generate)

    p = sub.add_parser("eval", help="run a benchmark suite")
    _add(p, "--suite", help="suite JSONL path or 'default'")
    _add(p, "--backend")
    _add(p, "--samples-n", dest="samples_n", type=int)
    _add(p, "--executor", choices=("inline", "subprocess"))
    _add(p, "--timeout-s", dest="timeout_s", type=float)
    _add(p, "--out")
    _leaf(p, _cmd_eval)

    p = sub.add_parser("rag", help="retrieval corpus tools")
    rag_sub = p.add_subparsers(dest="rag_command", required=True)
    q = rag_sub.add_parser("index")
    _add(q, "--corpus")
    _add(q, "--chunk-size", dest="chunk_size", type=int)
    _add(q, "--overlap", type=int)
    _add(q, "--embedder")
    _add(q, "--out")
    _leaf(q, _cmd_rag_index)
    q = rag_sub.add_parser("query")
    _add(q, "--index")
    _add(q, "--q")
    _add(q, "--k", type=int)
    _add(q, "--out")
    _leaf(q, _cmd_rag_query)

    p = sub.add_parser("dataprep", help="training corpus tools")
    dp_sub = p.add_subparsers(dest="dataprep_command", required=True)
    q = dp_sub.add_parser("filter")
    _add(q, "--corpus")
    _add(q, "--cutoff")
    _add(q, "--pattern")
    _add(q, "--out")
    _leaf(q, _cmd_dataprep_filter)
    q = dp_sub.add_parser("split")
    _add(q, "--notebook")
    _add(q, "--out")
    _leaf(q, _cmd_dataprep_split)
    q = dp_sub.add_parser("fim")
    _add(q, "--chunks")
    _add(q, "--rate", type=float)
    _add(q, "--out")
    _leaf(q, _cmd_dataprep_fim)
    q = dp_sub.add_parser("upsample")
    _add(q, "--chunks")
    _add(q, "--target-tokens", dest="target_tokens", type=int)
    _add(q, "--official-weight", dest="official_weight", type=float)
    _add(q, "--out")
    _leaf(q, _cmd_dataprep_upsample)

    p = sub.add_parser("qec", help="surface-code toolkit")
    qec_sub = p.add_subparsers(dest="qec_command", required=True)
    q = qec_sub.add_parser("layout")
    _add(q, "--distance", type=int)
    _add(q, "--out")
    _leaf(q, _cmd_qec_layout)
    q = qec_sub.add_parser("decode")
    _add(q, "--history")
    _add(q, "--distance", type=int)
    _add(q, "--space-weight", dest="space_weight", type=float)
    _add(q, "--time-weight", dest="time_weight", type=float)
    _add(q, "--out")
    _leaf(q, _cmd_qec_decode)
    q = qec_sub.add_parser("rate")
    _add(q, "--d", type=int)
    _add(q, "--p", type=float)
    _add(q, "--q", type=float)
    _add(q, "--rounds", type=int)
    _add(q, "--trials", type=int)
    _add(q, "--out")
    _leaf(q, _cmd_qec_rate)
    q = qec_sub.add_parser("demo")
    _add(q, "--p-noisy", dest="p_noisy", type=float)
    _add(q, "--p-corrected", dest="p_corrected", type=float)
    _add(q, "--shots", type=int)
    _add(q, "--out")
    _leaf(q, _cmd_qec_demo)
    q = qec_sub.add_parser("topology")
    _add(q, "--topology")
    _add(q, "--max-distance", dest="max_distance", type=int)
    _add(q, "--out")
    _leaf(q, _cmd_qec_topology)

    p = sub.add_parser("report", help="render a report file for humans")
    _add(p, "--report")
    _add(p, "--format", choices=("table", "svg"))
    _add(p, "--out")
    _leaf(p, _cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except QForgeError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
