"""Command-line entry point: extract | ground | answer | evaluate | ablate.

Stages compose through plain files (schema text, resolved-schema JSON,
prediction JSON-lines, report JSON), and every deliberate failure maps to a
distinct exit code via the error taxonomy.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dsl import parse_schema, render_schema
from .errors import BackendConfigError, MissingImageError, PipelineError, exit_code_for
from .evaluate import format_report_table, load_manifest, report_to_json
from .extraction import ExtractionPolicy, extract_schema, load_canonical_schema
from .gateway import ImageRef, ModelGateway
from .grounding import ground_hierarchical, ground_sequential
from .qa import AnswerMode, write_predictions_jsonl
from .runner import evaluate_mode, load_schemas, run_predictions

MODE_CHOICES = [mode.value for mode in AnswerMode]
METRIC_CHOICES = {"exact": "exact_match", "graded": "graded"}


def _add_backend_flags(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument(
        "--backend-config",
        type=Path,
        required=required,
        help="JSON backend description (kind, model_id, ...)",
    )
    parser.add_argument("--cache-dir", type=Path, default=None, help="response cache directory")
    parser.add_argument("--temperature", type=float, default=0.0)
    parser.add_argument("--max-tokens", type=int, default=512)
    parser.add_argument("--seed-hint", type=int, default=None)


def _add_choice_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument(
        "--multiple-choice",
        dest="multiple_choice",
        action="store_true",
        default=True,
        help="instances must carry options; replies resolve to one (default)",
    )
    group.add_argument(
        "--free-response",
        dest="multiple_choice",
        action="store_false",
        help="drop options; replies are scored as normalized text",
    )


def _gateway(args: argparse.Namespace) -> ModelGateway:
    return ModelGateway.from_config(
        args.backend_config,
        cache_dir=args.cache_dir,
        temperature=args.temperature,
        max_tokens=args.max_tokens,
    )


def cmd_extract(args: argparse.Namespace) -> int:
    if args.canonical:
        program = load_canonical_schema(args.concept)
    else:
        if args.backend_config is None:
            raise BackendConfigError(
                "extract requires --backend-config unless --canonical is given"
            )
        policy = ExtractionPolicy(
            gateway=_gateway(args),
            max_retries=args.max_retries,
            fallback_to_canonical=args.fallback_to_canonical,
        )
        program = extract_schema(args.concept, policy).program
    out = args.out or Path(f"{args.concept}.schema")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_schema(program), encoding="utf-8")
    print(f"wrote {out}")
    return 0


def cmd_ground(args: argparse.Namespace) -> int:
    schema = parse_schema(Path(args.schema).read_text(encoding="utf-8"))
    if not args.image.is_file():
        raise MissingImageError(f"image not found: {args.image}")
    image = ImageRef.from_file(args.image)
    ground = ground_sequential if args.sequential else ground_hierarchical
    resolved = ground(schema, image, _gateway(args), seed_hint=args.seed_hint)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(resolved.to_json(), encoding="utf-8")
    print(f"wrote {args.out} ({len(resolved.bindings)} bindings)")
    return 0


def cmd_answer(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest, multiple_choice=args.multiple_choice)
    gateway = _gateway(args)
    schemas = load_schemas(manifest, args.schema_dir)
    mode = AnswerMode(args.mode)
    predictions = run_predictions(
        manifest,
        mode,
        gateway,
        runs=args.runs,
        concurrency=args.concurrency,
        seed_hint=args.seed_hint,
        schemas=schemas,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"{mode.value}.predictions.jsonl"
    write_predictions_jsonl(predictions, path)
    print(f"wrote {path} ({len(predictions)} predictions)")
    return 0


def _evaluate_modes(args: argparse.Namespace, modes: list[AnswerMode]) -> int:
    manifest = load_manifest(args.manifest, multiple_choice=args.multiple_choice)
    gateway = _gateway(args)
    schemas = load_schemas(manifest, args.schema_dir)
    metric = METRIC_CHOICES[args.metric]
    args.out.mkdir(parents=True, exist_ok=True)
    rows = []
    summary: dict[str, object] = {"metric": metric, "runs": args.runs, "modes": {}}
    for mode in modes:
        predictions, report = evaluate_mode(
            manifest,
            mode,
            gateway,
            runs=args.runs,
            concurrency=args.concurrency,
            seed_hint=args.seed_hint,
            metric=metric,
            include_human_row=args.human_row,
            schemas=schemas,
        )
        write_predictions_jsonl(predictions, args.out / f"{mode.value}.predictions.jsonl")
        report_json = report_to_json(report)
        (args.out / f"{mode.value}.report.json").write_text(report_json, encoding="utf-8")
        summary["modes"][mode.value] = json.loads(report_json)
        rows.append((mode.value, report))
    summary_path = args.out / "summary.json"
    summary_path.write_text(
        json.dumps(summary, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    print(format_report_table(rows, by="question_type"))
    print()
    print(format_report_table(rows, by="category"))
    print(f"wrote {summary_path}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    modes = [AnswerMode(value) for value in (args.mode or [AnswerMode.FULL_DSG.value])]
    return _evaluate_modes(args, modes)


def cmd_ablate(args: argparse.Namespace) -> int:
    return _evaluate_modes(args, list(AnswerMode))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schemaground",
        description="Schema-grounded visual question answering pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_extract = sub.add_parser("extract", help="obtain a schema program for a concept")
    p_extract.add_argument("concept")
    p_extract.add_argument(
        "--canonical", action="store_true", help="copy the stored fixture, no backend call"
    )
    p_extract.add_argument("--max-retries", type=int, default=2)
    p_extract.add_argument("--fallback-to-canonical", action="store_true")
    p_extract.add_argument("--out", type=Path, default=None)
    _add_backend_flags(p_extract, required=False)
    p_extract.set_defaults(func=cmd_extract)

    p_ground = sub.add_parser("ground", help="resolve a schema's components on an image")
    p_ground.add_argument("--schema", type=Path, required=True)
    p_ground.add_argument("--image", type=Path, required=True)
    p_ground.add_argument(
        "--sequential",
        action="store_true",
        help="query components in isolation instead of conditioning on dependencies",
    )
    p_ground.add_argument("--out", type=Path, default=Path("resolved.json"))
    _add_backend_flags(p_ground)
    p_ground.set_defaults(func=cmd_ground)

    p_answer = sub.add_parser("answer", help="produce predictions for a manifest")
    p_answer.add_argument("--manifest", type=Path, required=True)
    p_answer.add_argument("--mode", choices=MODE_CHOICES, default=AnswerMode.FULL_DSG.value)
    p_answer.add_argument("--runs", type=int, default=1)
    p_answer.add_argument("--concurrency", type=int, default=4)
    p_answer.add_argument("--schema-dir", type=Path, default=None)
    p_answer.add_argument("--out", type=Path, default=Path("out"))
    _add_choice_flags(p_answer)
    _add_backend_flags(p_answer)
    p_answer.set_defaults(func=cmd_answer)

    for name, help_text, func in (
        ("evaluate", "answer a manifest and score the predictions", cmd_evaluate),
        ("ablate", "evaluate across all five answer modes", cmd_ablate),
    ):
        p_eval = sub.add_parser(name, help=help_text)
        p_eval.add_argument("--manifest", type=Path, required=True)
        if name == "evaluate":
            p_eval.add_argument(
                "--mode",
                choices=MODE_CHOICES,
                action="append",
                help="repeatable; default full_dsg",
            )
        p_eval.add_argument("--runs", type=int, default=1)
        p_eval.add_argument("--metric", choices=sorted(METRIC_CHOICES), default="exact")
        p_eval.add_argument("--concurrency", type=int, default=4)
        p_eval.add_argument("--schema-dir", type=Path, default=None)
        p_eval.add_argument(
            "--human-row",
            action="store_true",
            help="add leave-one-annotator-out accuracy to each report",
        )
        p_eval.add_argument("--out", type=Path, default=Path("out"))
        _add_choice_flags(p_eval)
        _add_backend_flags(p_eval)
        p_eval.set_defaults(func=func)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return exit_code_for(err)


if __name__ == "__main__":
    sys.exit(main())
