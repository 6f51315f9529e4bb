"""Command-line entry point: perturb, evaluate, ensemble, importance,
constraints, features, predict-errors, report, mock-serve, pipeline.

Exit codes: 0 ok, 2 configuration error, 3 protocol/transport error,
4 data validation error. Endpoint resolution order: --endpoint flag,
ADVSPAN_ENDPOINT environment variable, config file.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .analysis import build_features, cross_validate, report_tables
from .analysis.features import FeatureVector
from .analysis.report import svg_bars, svg_heatmap
from .attack import constraints_to_jsonl, importance_scores, top_k_constraints
from .confusables import load_default_table, parse_confusables
from .corpus import (
    DatasetError, DatasetParseError, DatasetValidationError, parse_dataset,
    serialize_dataset,
)
from .embeddings import load_embeddings
from .eval import (
    EvalRecord, ensemble_records, evaluate_dataset, records_from_jsonl,
    records_to_csv, records_to_jsonl,
)
from .model_client import (
    MockModelConfig, MockServer, ProtocolError, TransportError, http_predictor,
)
from .perturb import (
    PerturbationResources, PerturbationSpec, load_paraphrase_sets, make_variant,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROTOCOL = 3
EXIT_VALIDATION = 4

ENDPOINT_ENV = "ADVSPAN_ENDPOINT"


class ConfigError(Exception):
    pass


def _read_bytes(path: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"file not found: {path}")
    return p.read_bytes()


def _resolve_endpoint(args, config: dict | None = None) -> str:
    endpoint = getattr(args, "endpoint", None) or os.environ.get(ENDPOINT_ENV)
    if not endpoint and config:
        endpoint = config.get("endpoint")
    if not endpoint:
        raise ConfigError(
            f"no endpoint: pass --endpoint or set {ENDPOINT_ENV}")
    return endpoint


def _load_resources(args, spec_type: str) -> PerturbationResources:
    """Validate and load exactly what the perturbation type needs, before
    any work starts."""
    if spec_type == "char":
        if getattr(args, "confusables", None):
            table = parse_confusables(_read_bytes(args.confusables))
        else:
            table = load_default_table()
        return PerturbationResources(table=table)
    if spec_type == "word":
        if not getattr(args, "embeddings", None):
            raise ConfigError("word perturbation requires --embeddings")
        return PerturbationResources(
            store=load_embeddings(_read_bytes(args.embeddings)))
    if not getattr(args, "paraphrases", None):
        raise ConfigError("para perturbation requires --paraphrases")
    return PerturbationResources(
        paraphrases=load_paraphrase_sets(_read_bytes(args.paraphrases)))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_perturb(args) -> int:
    spec = PerturbationSpec(type=args.type, amount=args.amount,
                            rate=args.rate, seed=args.seed)
    resources = _load_resources(args, args.type)
    dataset = parse_dataset(_read_bytes(args.infile))
    variant = make_variant(dataset, spec, resources)
    Path(args.outfile).write_bytes(serialize_dataset(variant))
    print(f"wrote {args.outfile}: {variant.qa_count()} QAs")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    dataset = parse_dataset(_read_bytes(args.infile))
    endpoint = _resolve_endpoint(args)
    predictor = http_predictor(endpoint, timeout=args.timeout,
                               retries=args.retries)
    records = evaluate_dataset(dataset, predictor, training_amount=args.amount,
                               concurrency=args.concurrency)
    _write_records(records, args.outfile, args.format)
    errors = sum(r.is_error for r in records)
    print(f"wrote {args.outfile}: {len(records)} records, {errors} errors")
    return EXIT_OK


def _write_records(records, outfile: str, fmt: str) -> None:
    text = records_to_csv(records) if fmt == "csv" else records_to_jsonl(records)
    Path(outfile).write_text(text, encoding="utf-8")


def cmd_ensemble(args) -> int:
    runs = [records_from_jsonl(_read_bytes(p).decode("utf-8"))
            for p in (args.none, args.half, args.full)]
    records = ensemble_records(*runs)
    _write_records(records, args.outfile, args.format)
    errors = sum(r.is_error for r in records)
    print(f"wrote {args.outfile}: {len(records)} records, {errors} errors")
    return EXIT_OK


def cmd_importance(args) -> int:
    dataset = parse_dataset(_read_bytes(args.infile))
    predictor = http_predictor(_resolve_endpoint(args), timeout=args.timeout,
                               retries=args.retries)
    lines = []
    for index, paragraph in dataset.paragraphs():
        for qa in paragraph.qas:
            scores = importance_scores(paragraph, qa, predictor)
            lines.append(json.dumps({
                "paragraph_index": index,
                "qa_id": qa.id,
                "scores": [{"token": s.token, "start": s.start, "end": s.end,
                            "score": s.score, "base_correct": s.base_correct,
                            "ablated_correct": s.ablated_correct}
                           for s in scores],
            }, ensure_ascii=False))
    Path(args.outfile).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {args.outfile}: {len(lines)} QA score sets")
    return EXIT_OK


def cmd_constraints(args) -> int:
    dataset = parse_dataset(_read_bytes(args.infile))
    predictor = http_predictor(_resolve_endpoint(args), timeout=args.timeout,
                               retries=args.retries)
    specs = []
    for index, paragraph in dataset.paragraphs():
        if not paragraph.qas:
            continue
        if args.aggregate == "max":
            merged: dict[tuple[int, int], object] = {}
            for qa in paragraph.qas:
                for s in importance_scores(paragraph, qa, predictor):
                    key = (s.start, s.end)
                    if key not in merged or s.score > merged[key].score:
                        merged[key] = s
            scores = sorted(merged.values(), key=lambda s: s.start)
        else:
            scores = importance_scores(paragraph, paragraph.qas[0], predictor)
        specs.append(top_k_constraints(scores, args.k, paragraph.context,
                                       paragraph_index=index))
    Path(args.outfile).write_text(constraints_to_jsonl(specs), encoding="utf-8")
    print(f"wrote {args.outfile}: {len(specs)} paragraphs")
    return EXIT_OK


def cmd_features(args) -> int:
    records = records_from_jsonl(_read_bytes(args.records).decode("utf-8"))
    dataset = parse_dataset(_read_bytes(args.dataset))
    vectors = build_features(records, dataset)
    text = "".join(json.dumps(v.to_dict(), ensure_ascii=False) + "\n"
                   for v in vectors)
    Path(args.outfile).write_text(text, encoding="utf-8")
    print(f"wrote {args.outfile}: {len(vectors)} feature vectors")
    return EXIT_OK


def _load_feature_vectors(path: str) -> list[FeatureVector]:
    vectors = []
    for line in _read_bytes(path).decode("utf-8").splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        doc.pop("qa_id_ignored", None)
        vectors.append(FeatureVector(
            qa_id=doc["qa_id"],
            training_amount=doc["training_amount"],
            perturbation_type=doc["perturbation_type"],
            question_type=doc["question_type"],
            question_length=int(doc["question_length"]),
            context_length=int(doc["context_length"]),
            answer_length=int(doc["answer_length"]),
            readability=float(doc["readability"]),
            label=int(doc["label"]),
            human_agreement=doc.get("human_agreement"),
            confidence=doc.get("confidence"),
        ))
    return vectors


def cmd_predict_errors(args) -> int:
    vectors = _load_feature_vectors(args.features)
    report = cross_validate(
        vectors, params=None, seed=args.seed, n_folds=args.folds,
        include_confidence=args.include_confidence,
        include_agreement=args.include_agreement)
    doc = report.to_dict()
    doc["meta"] = {"toolkit_version": __version__, "seed": args.seed}
    Path(args.outfile).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {args.outfile}: mean micro-F1 {report.mean_f1:.4f} "
          f"(majority {report.majority_baseline:.4f})")
    return EXIT_OK


def cmd_report(args) -> int:
    records = records_from_jsonl(_read_bytes(args.records).decode("utf-8"))
    features = _load_feature_vectors(args.features) if args.features else None
    tables = report_tables(records, features,
                           threshold=args.confidence_threshold, bins=args.bins)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = _write_report(tables, out_dir)
    print(f"wrote {len(written)} report files to {args.out_dir}")
    return EXIT_OK


def _write_report(tables, out_dir: Path) -> list[Path]:
    written = []
    for name, table in sorted(tables.items()):
        csv_path = out_dir / f"{name}.csv"
        csv_path.write_text(table.to_csv(), encoding="utf-8")
        json_path = out_dir / f"{name}.json"
        json_path.write_text(table.to_json(), encoding="utf-8")
        written += [csv_path, json_path]
    svg_specs = {
        "error_heatmap": lambda t: svg_heatmap(t, "errors by amount and type"),
        "answer_length_ratio": lambda t: svg_bars(
            t, "errors by answer length", value_col=2),
        "question_type_distribution": lambda t: svg_bars(
            t, "question types"),
    }
    for name, render in svg_specs.items():
        if name in tables:
            svg_path = out_dir / f"{name}.svg"
            svg_path.write_text(render(tables[name]), encoding="utf-8")
            written.append(svg_path)
    return written


def cmd_mock_serve(args) -> int:
    config = MockModelConfig.from_dict(json.loads(_read_bytes(args.config)))
    server = MockServer(config, port=args.port)
    print(f"mock model listening on {server.endpoint}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return EXIT_OK


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def cmd_pipeline(args) -> int:
    config = json.loads(_read_bytes(args.config))
    # The output location does not affect artifact content, so it stays
    # out of the hash: runs into different directories stay comparable.
    hashed = {k: v for k, v in config.items() if k != "out_dir"}
    config_hash = hashlib.sha256(
        json.dumps(hashed, sort_keys=True).encode("utf-8")).hexdigest()
    manifest = run_pipeline(config, config_hash)
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return EXIT_OK if not manifest.get("failure") else EXIT_VALIDATION


def run_pipeline(config: dict, config_hash: str) -> dict:
    """Deterministic perturb -> evaluate -> ensemble -> features -> report
    run producing variants/, eval/, reports/ and a hashed manifest."""
    for key in ("dataset", "out_dir", "perturbation"):
        if key not in config:
            raise ConfigError(f'pipeline config missing "{key}"')
    ptype = config["perturbation"].get("type", "char")
    rate = float(config["perturbation"].get("rate", 0.25))
    seed = int(config.get("seed", 0))
    amounts = config.get("amounts", ["none", "half", "full", "both"])
    endpoint = os.environ.get(ENDPOINT_ENV) or config.get("endpoint")
    if not endpoint:
        raise ConfigError('pipeline config missing "endpoint"')

    class _ResourceArgs:
        confusables = config.get("confusables")
        embeddings = config.get("embeddings")
        paraphrases = config.get("paraphrases")

    resources = _load_resources(_ResourceArgs, ptype)
    dataset = parse_dataset(_read_bytes(config["dataset"]))

    out_dir = Path(config["out_dir"])
    for sub in ("variants", "eval", "reports"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    manifest: dict = {
        "toolkit_version": __version__,
        "seed": seed,
        "config_hash": config_hash,
        "files": {},
    }
    run_meta = {"toolkit_version": __version__, "seed": seed,
                "config_hash": config_hash}

    try:
        # Stage 1: dataset variants for external training.
        for amount in amounts:
            spec = PerturbationSpec(type=ptype, amount=amount, rate=rate,
                                    seed=seed)
            variant = make_variant(dataset, spec, resources)
            variant_doc = replace_extra(variant, run_meta)
            path = out_dir / "variants" / f"{ptype}_{amount}.json"
            path.write_bytes(serialize_dataset(variant_doc))
            _record(manifest, out_dir, path)

        # Stage 2: evaluation on fully perturbed test data, one labeled run
        # per training amount the endpoint is standing in for.
        test_spec = PerturbationSpec(type=ptype, amount="full", rate=rate,
                                     seed=seed)
        test_set = make_variant(dataset, test_spec, resources)
        predictor = http_predictor(endpoint)
        concurrency = int(config.get("concurrency", 8))
        eval_runs: dict[str, list[EvalRecord]] = {}
        for amount in ("none", "half", "full", "both"):
            if amount not in amounts:
                continue
            records = evaluate_dataset(test_set, predictor,
                                       training_amount=amount,
                                       concurrency=concurrency)
            eval_runs[amount] = records
            path = out_dir / "eval" / f"{amount}.jsonl"
            path.write_text(records_to_jsonl(records), encoding="utf-8")
            _record(manifest, out_dir, path)

        # Stage 3: two-vote ensemble of the none/half/full runs.
        if all(a in eval_runs for a in ("none", "half", "full")):
            ens = ensemble_records(eval_runs["none"], eval_runs["half"],
                                   eval_runs["full"])
            eval_runs["ens"] = ens
            path = out_dir / "eval" / "ens.jsonl"
            path.write_text(records_to_jsonl(ens), encoding="utf-8")
            _record(manifest, out_dir, path)

        # Stage 4: features and reports over all runs.
        all_records = [r for amount in sorted(eval_runs)
                       for r in eval_runs[amount]]
        features = []
        for amount in sorted(eval_runs):
            if amount == "ens":
                continue
            features.extend(build_features(eval_runs[amount], test_set))
        report_cfg = config.get("report", {})
        tables = report_tables(
            all_records, features or None,
            threshold=float(report_cfg.get("confidence_threshold", 0.5)),
            bins=int(report_cfg.get("bins", 6)))
        for path in _write_report(tables, out_dir / "reports"):
            _record(manifest, out_dir, path)
    except Exception as exc:
        manifest["failure"] = f"{type(exc).__name__}: {exc}"
        _write_manifest(manifest, out_dir)
        raise
    _write_manifest(manifest, out_dir)
    return manifest


def replace_extra(dataset, run_meta: dict):
    from dataclasses import replace as dc_replace
    extra = dict(dataset.extra)
    extra["x_run"] = run_meta
    return dc_replace(dataset, extra=extra)


def _record(manifest: dict, out_dir: Path, path: Path) -> None:
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    manifest["files"][str(path.relative_to(out_dir))] = digest


def _write_manifest(manifest: dict, out_dir: Path) -> None:
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advspan",
        description="Adversarial robustness evaluation for span-based "
                    "machine comprehension")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("perturb", help="build a perturbed dataset variant")
    p.add_argument("--type", required=True, choices=("char", "word", "para"))
    p.add_argument("--amount", default="full",
                   choices=("none", "half", "full", "both"))
    p.add_argument("--rate", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--confusables")
    p.add_argument("--embeddings")
    p.add_argument("--paraphrases")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("evaluate", help="evaluate an endpoint on a dataset")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--endpoint")
    p.add_argument("--amount", default="none",
                   choices=("none", "half", "full", "both", "ens"))
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--format", default="jsonl", choices=("jsonl", "csv"))
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--concurrency", type=int, default=8)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ensemble", help="two-vote ensemble of three runs")
    p.add_argument("--none", required=True)
    p.add_argument("--half", required=True)
    p.add_argument("--full", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--format", default="jsonl", choices=("jsonl", "csv"))
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("importance",
                       help="leave-one-out word importance scores")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--endpoint")
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--retries", type=int, default=3)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("constraints",
                       help="negative-constraint sets for the rewriter")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--endpoint")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--aggregate", default="first", choices=("first", "max"))
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--retries", type=int, default=3)
    p.set_defaults(func=cmd_constraints)

    p = sub.add_parser("features", help="feature vectors from eval records")
    p.add_argument("--records", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("predict-errors",
                       help="cross-validated error prediction")
    p.add_argument("--features", required=True)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-confidence", action="store_true")
    p.add_argument("--include-agreement", action="store_true")
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(func=cmd_predict_errors)

    p = sub.add_parser("report", help="emit report tables and plots")
    p.add_argument("--records", required=True)
    p.add_argument("--features")
    p.add_argument("--confidence-threshold", type=float, default=0.5)
    p.add_argument("--bins", type=int, default=6)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("mock-serve", help="serve the deterministic mock model")
    p.add_argument("--config", required=True)
    p.add_argument("--port", type=int, default=8400)
    p.set_defaults(func=cmd_mock_serve)

    p = sub.add_parser("pipeline", help="run the full experiment pipeline")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        if isinstance(exc, (DatasetParseError, DatasetValidationError)):
            print(f"validation error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TransportError, ProtocolError) as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except DatasetError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
