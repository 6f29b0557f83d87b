"""Subcommand CLI orchestrating the full pipeline end to end.

Every subcommand is a thin wrapper over the library, so its output artifacts
are bitwise-identical to the corresponding direct calls. Exit codes: 0 on
success, 2 on input/config errors, 3 on numerical failures. Logs go to
standard error; result summaries go to standard output.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .core import LanguageMatrix, RetrievalDataset, corpus_fingerprint
from .errors import ConfigError, DuplicateKey, FormatError, LirError, NumericalFailure
from .evaluation import LogisticConfig, evaluate_retrieval, evaluate_transfer, export_projection
from .io import (
    read_components_dir,
    read_embeddings,
    read_labels,
    read_qrels,
    write_components,
    write_embeddings,
    write_labels,
    write_projection_csv,
    write_qrels,
    write_report,
)
from .removal import RemovalMode, fit_decomposition, remove_batch
from .synth import TOPIC_PARITY, SynthConfig, generate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_MODES = {mode.value: mode for mode in RemovalMode}
_SAFE_LANG = re.compile(r"^[A-Za-z0-9._-]+$")


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _embedding_paths(target: str) -> list[Path]:
    path = Path(target)
    if path.is_dir():
        files = sorted(path.glob("*.lire"))
        if not files:
            raise FormatError(f"no .lire files found in {path}")
        return files
    return [path]


def _read_collection(target: str):
    records = []
    for file in _embedding_paths(target):
        records.extend(read_embeddings(file))
    return records


def _cmd_fit(args) -> int:
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    seen: set[str] = set()
    for file in _embedding_paths(args.input):
        records = read_embeddings(file)
        matrix = LanguageMatrix.from_records(records)
        if matrix.lang in seen:
            raise DuplicateKey(matrix.lang, f"two input files for language {matrix.lang!r}")
        seen.add(matrix.lang)
        if not _SAFE_LANG.match(matrix.lang):
            raise FormatError(f"language tag {matrix.lang!r} is not filename-safe")
        basis, sigma = fit_decomposition(
            matrix, args.rank, center=args.center, normalize=args.normalize
        )
        write_components(outdir / f"{matrix.lang}.lirc", basis)
        top = ", ".join(f"{s:.6g}" for s in sigma[:5])
        print(f"{matrix.lang}: n={matrix.n} d={matrix.d} top_singular_values=[{top}]")
    return EXIT_OK


def _cmd_apply(args) -> int:
    bases = read_components_dir(args.components)
    records = read_embeddings(args.input)
    result = remove_batch(records, bases, _MODES[args.mode], strict=args.strict)
    if result.passed_count:
        langs = ", ".join(sorted(result.passed_through))
        _log(
            f"warning: {result.passed_count} records passed through without a basis "
            f"(languages: {langs})"
        )
    write_embeddings(args.output, result.records)
    return EXIT_OK


def _cmd_eval_retrieval(args) -> int:
    dataset = RetrievalDataset(
        queries=_read_collection(args.queries),
        candidates=_read_collection(args.candidates),
        qrels=read_qrels(args.qrels),
    )
    bases = read_components_dir(args.components) if args.components else None
    report = evaluate_retrieval(dataset, bases, mode=_MODES[args.mode])
    write_report(args.report, report)
    print(f"overall_map={report.overall_map!r} queries={report.query_count}")
    return EXIT_OK


def _labeled(records, labels):
    out = []
    for rec in records:
        if rec.id not in labels:
            raise ConfigError(f"no label for record {rec.id!r}")
        out.append(labels[rec.id])
    return out


def _cmd_eval_transfer(args) -> int:
    labels = read_labels(args.labels)
    train_records = read_embeddings(args.train)
    train_labels = _labeled(train_records, labels)
    tests = {}
    for file in sorted(Path(args.tests).glob("*.lire")):
        records = read_embeddings(file)
        lang = records[0].lang if records else file.stem
        if lang in tests:
            raise DuplicateKey(lang, f"two test files for language {lang!r}")
        tests[lang] = (records, _labeled(records, labels))
    if not tests:
        raise FormatError(f"no .lire files found in {args.tests}")
    bases = read_components_dir(args.components) if args.components else None
    report = evaluate_transfer(
        train_records,
        train_labels,
        tests,
        bases,
        mode=_MODES[args.mode],
        placement=args.placement,
        logistic=LogisticConfig(learning_rate=args.lr, epochs=args.epochs, l2=args.l2),
    )
    write_report(args.report, report)
    print(f"average_accuracy={report.average!r} train_language={report.train_language}")
    return EXIT_OK


def _cmd_project(args) -> int:
    records = _read_collection(args.input)
    rows = export_projection(records, args.dims)
    write_projection_csv(args.output, rows)
    print(f"wrote {len(rows)} rows with {args.dims} scores each")
    return EXIT_OK


def _cmd_synth(args) -> int:
    config = SynthConfig(
        languages=tuple(f"l{i:02d}" for i in range(args.languages)),
        topics=args.topics,
        per_topic_per_lang=args.per,
        dim=args.dim,
        bias_scale=args.bias,
        semantic_scale=args.semantic,
        noise_scale=args.noise,
        seed=args.seed,
        label_rule=TOPIC_PARITY if args.labels else None,
        skew=args.skew,
    )
    result = generate(config)
    out = Path(args.out)
    for sub in ("corpus", "queries", "candidates"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    queries = result.queries
    candidates = result.candidates
    for lang in config.languages:
        write_embeddings(out / "corpus" / f"{lang}.lire", result.records_for(lang))
        write_embeddings(
            out / "queries" / f"{lang}.lire", [r for r in queries if r.lang == lang]
        )
        write_embeddings(
            out / "candidates" / f"{lang}.lire",
            [r for r in candidates if r.lang == lang],
        )
    write_qrels(out / "qrels.jsonl", dict(result.qrels))
    if result.labels is not None:
        write_labels(out / "labels.jsonl", dict(result.labels))
    manifest = {
        "config": {
            "bias_scale": config.bias_scale,
            "dim": config.dim,
            "label_rule": config.label_rule,
            "languages": list(config.languages),
            "noise_scale": config.noise_scale,
            "per_topic_per_lang": config.per_topic_per_lang,
            "seed": config.seed,
            "semantic_scale": config.semantic_scale,
            "skew": config.skew,
            "topics": config.topics,
        },
        "counts": {
            "candidates": len(candidates),
            "queries": len(queries),
            "records": len(result.records),
        },
        "fingerprints": {
            lang: corpus_fingerprint(result.records_for(lang))
            for lang in config.languages
        },
    }
    (out / "manifest.json").write_bytes(
        (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8")
    )
    print(f"wrote {len(result.records)} records for {args.languages} languages to {out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lir",
        description=(
            "Fit per-language identity components from embedding matrices, remove "
            "them by projection, and evaluate retrieval/transfer/PCA effects."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit component bases from embedding files")
    p.add_argument("--input", required=True, help=".lire file or directory of them")
    p.add_argument("--rank", required=True, type=int, help="number of components r")
    p.add_argument("--output", required=True, help="output directory for .lirc files")
    p.add_argument(
        "--center",
        action="store_true",
        help="subtract the column mean before the factorization (default: off)",
    )
    p.add_argument(
        "--normalize",
        action="store_true",
        help="length-normalize rows before the factorization (default: off)",
    )
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("apply", help="remove fitted components from embeddings")
    p.add_argument("--components", required=True, help="directory of .lirc files")
    p.add_argument("--input", required=True, help="input .lire file")
    p.add_argument("--output", required=True, help="output .lire file")
    p.add_argument(
        "--mode",
        choices=sorted(_MODES),
        default=RemovalMode.ORTHOGONAL.value,
        help="removal mode (default: orthogonal)",
    )
    p.add_argument(
        "--strict",
        action="store_true",
        help="fail on records whose language has no basis (default: pass through)",
    )
    p.set_defaults(func=_cmd_apply)

    p = sub.add_parser("eval-retrieval", help="MAP evaluation of cosine retrieval")
    p.add_argument("--queries", required=True, help=".lire file or directory")
    p.add_argument("--candidates", required=True, help=".lire file or directory")
    p.add_argument("--qrels", required=True, help="relevance judgments (JSONL)")
    p.add_argument("--components", help="directory of .lirc files (optional)")
    p.add_argument(
        "--mode",
        choices=sorted(_MODES),
        default=RemovalMode.ORTHOGONAL.value,
        help="removal mode (default: orthogonal)",
    )
    p.add_argument("--report", required=True, help="output report JSON path")
    p.set_defaults(func=_cmd_eval_retrieval)

    p = sub.add_parser("eval-transfer", help="zero-shot transfer classification")
    p.add_argument("--train", required=True, help="training .lire file (one language)")
    p.add_argument("--tests", required=True, help="directory of test .lire files")
    p.add_argument("--labels", required=True, help="labels JSONL ({'id','label'})")
    p.add_argument("--components", help="directory of .lirc files (optional)")
    p.add_argument(
        "--placement",
        choices=("both", "eval"),
        default="both",
        help="apply removal at train+eval or eval only (default: both)",
    )
    p.add_argument(
        "--mode",
        choices=sorted(_MODES),
        default=RemovalMode.ORTHOGONAL.value,
        help="removal mode (default: orthogonal)",
    )
    p.add_argument("--lr", type=float, default=0.5, help="learning rate (default: 0.5)")
    p.add_argument("--epochs", type=int, default=300, help="epochs (default: 300)")
    p.add_argument("--l2", type=float, default=0.0, help="L2 penalty (default: 0.0)")
    p.add_argument("--report", required=True, help="output report JSON path")
    p.set_defaults(func=_cmd_eval_transfer)

    p = sub.add_parser("project", help="export PCA scores as CSV")
    p.add_argument("--input", required=True, help=".lire file or directory")
    p.add_argument("--dims", required=True, type=int, help="number of PCA scores K")
    p.add_argument("--output", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("synth", help="generate a synthetic multilingual corpus")
    p.add_argument("--languages", required=True, type=int, help="number of languages")
    p.add_argument("--topics", required=True, type=int, help="number of topics T")
    p.add_argument("--per", required=True, type=int, help="records per (topic, language)")
    p.add_argument("--dim", required=True, type=int, help="embedding dimension")
    p.add_argument("--bias", required=True, type=float, help="language offset length")
    p.add_argument(
        "--semantic", type=float, default=1.0, help="topic vector length (default: 1.0)"
    )
    p.add_argument(
        "--noise", type=float, default=0.1, help="per-coordinate noise std (default: 0.1)"
    )
    p.add_argument("--seed", required=True, type=int, help="PCG64 seed")
    p.add_argument(
        "--labels",
        action="store_true",
        help="emit topic-parity labels for transfer experiments (default: off)",
    )
    p.add_argument(
        "--skew",
        type=float,
        default=0.0,
        help="tilt offsets back into the topic span by this factor (default: 0.0)",
    )
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalFailure as exc:
        _log(f"error: {exc}")
        return EXIT_NUMERIC
    except (LirError, OSError) as exc:
        _log(f"error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
