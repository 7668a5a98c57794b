"""Command-line entry point: ``attribqa convert | run | score | report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .client import (
    DEFAULT_API_KEY_ENV,
    CannedClient,
    CompletionClient,
    EchoGoldClient,
    FaultInjector,
    GenerationConfig,
    OpenAICompatibleClient,
)
from .dataset import _decode, iter_lines, load_dataset
from .errors import AttribQAError
from .pipeline import (
    AggregateReport,
    RunSpec,
    convert_corpus,
    emit_report,
    load_config,
    load_sidecar_responses,
    make_judge,
    rescore,
    run_matrix,
    write_sidecar_requests,
)

log = logging.getLogger("attribqa")


def _csv(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _canned(path: str) -> CannedClient:
    """``{"prompt_sha256": ..., "response": ...}`` or ``{"prompt": ..., "response": ...}`` per line."""
    from .client import prompt_hash

    table = {}
    for lineno, line in iter_lines(path):
        rec = _decode(line, lineno)
        key = rec.get("prompt_sha256") or prompt_hash(rec["prompt"])
        table[key] = rec["response"]
    return CannedClient(table)


def build_client(args: argparse.Namespace) -> CompletionClient:
    mock = args.mock
    if mock:
        if mock == "echo":
            return EchoGoldClient()
        if mock == "malformed":
            return FaultInjector(EchoGoldClient(), 0.0, 1.0, seed=args.seed)
        if mock.startswith("fault:"):
            fail, bad = (float(x) for x in mock[len("fault:") :].split(","))
            return FaultInjector(EchoGoldClient(), fail, bad, seed=args.seed)
        if mock.startswith("canned:"):
            return _canned(mock[len("canned:") :])
        raise SystemExit(f"unknown --mock {mock!r} (echo, malformed, fault:F,M, canned:FILE)")
    if not args.endpoint or not args.model:
        raise SystemExit("run needs --mock, or --endpoint and --model for a live endpoint")
    key_env = None if args.api_key_env in ("", "none") else args.api_key_env
    return OpenAICompatibleClient(args.endpoint, args.model, api_key_env=key_env)


def _generation(args: argparse.Namespace) -> GenerationConfig:
    return GenerationConfig(
        max_tokens=args.max_tokens,
        timeout=args.timeout,
        max_retries=args.max_retries,
        seed=args.seed if args.endpoint else None,
    )


def cmd_convert(args: argparse.Namespace) -> int:
    stats = convert_corpus(
        args.input,
        args.output,
        min_len=args.min_len,
        containment=args.containment,
        low_coverage_threshold=args.low_coverage,
    )
    print(json.dumps(stats.to_dict() if args.verbose else {k: v for k, v in stats.to_dict().items() if k != "errors"},
                     indent=2))
    return 1 if args.strict and stats.n_errors else 0


def _load(args: argparse.Namespace):
    data = load_dataset(args.dataset, args.dataset_level, strict=args.strict)
    pool = load_dataset(args.train_pool, args.dataset_level, strict=args.strict) if args.train_pool else None
    for name, ds in (("dataset", data), ("train pool", pool)):
        if ds is not None and ds.skipped:
            print(f"warning: {name}: skipped {len(ds.skipped)} malformed line(s)", file=sys.stderr)
    return data, pool


def _sidecar(args: argparse.Namespace):
    return load_sidecar_responses(args.external) if args.external else None


def _finish(report: AggregateReport, args: argparse.Namespace) -> int:
    if args.out:
        emit_report(report, "json", args.out)
    text = emit_report(report, args.format)
    sys.stdout.write(text)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    data, pool = _load(args)
    spec = RunSpec(
        levels=tuple(_csv(args.levels)),
        methods=tuple(_csv(args.cot)),
        k_fewshot=args.fewshot_k,
        fewshot_order=args.fewshot_order,
        judge=args.judge,
        judge_threshold=args.judge_threshold,
        seed=args.seed,
        max_in_flight=args.max_in_flight,
        generation=_generation(args),
        templates=args.templates,
    )
    client = build_client(args)
    report = run_matrix(data, spec, client, pool=pool, workdir=args.workdir, sidecar=_sidecar(args))
    return _finish(report, args)


def cmd_score(args: argparse.Namespace) -> int:
    data, _ = _load(args)
    if args.sidecar_requests:
        n = write_sidecar_requests(data, args.workdir, args.sidecar_requests)
        print(f"wrote {n} sidecar request(s) to {args.sidecar_requests}", file=sys.stderr)
    meta_path = Path(args.workdir) / "run.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    meta["rescored_with"] = {"judge": args.judge, "judge_threshold": args.judge_threshold}
    report = rescore(data, args.workdir, make_judge(args.judge, args.judge_threshold), _sidecar(args), meta)
    return _finish(report, args)


def cmd_report(args: argparse.Namespace) -> int:
    report = AggregateReport.from_json(Path(args.report).read_text(encoding="utf-8"))
    text = emit_report(report, args.format, args.out)
    if not args.out:
        sys.stdout.write(text)
    return 0


def _common_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="evaluation split, JSONL")
    p.add_argument("--dataset-level", default="span", help="markup level of the gold answers (default span)")
    p.add_argument("--train-pool", help="fewshot pool, JSONL (default: the dataset, leave-one-out)")
    p.add_argument("--strict", action="store_true", help="abort on the first malformed line")
    p.add_argument("--judge", default="lexical")
    p.add_argument("--judge-threshold", type=float, default=0.5)
    p.add_argument("--external", help="sidecar score responses, JSONL {id, metric, score}")
    p.add_argument("--workdir", default="attribqa_run", help="journal directory (default ./attribqa_run)")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--format", default="markdown", choices=["markdown", "csv", "json"], help="stdout format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attribqa", description="Attributed QA evaluation toolkit.")
    parser.add_argument("--config", help="key = value file supplying defaults for any long option")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="derive span labels from a passage-labeled corpus")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--min-len", type=int, default=10)
    p.add_argument("--containment", action="store_true", help="require a whole entity inside each span")
    p.add_argument("--low-coverage", type=float, default=0.1)
    p.add_argument("--strict", action="store_true", help="exit non-zero if any line failed")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("run", help="evaluate the level x CoT matrix")
    _common_data(p)
    p.add_argument("--levels", default="span,sentence,passage")
    p.add_argument("--cot", default="none,span,sentence,passage")
    p.add_argument("--fewshot-k", type=int, default=4)
    p.add_argument("--fewshot-order", default="most_similar_last", choices=["most_similar_last", "most_similar_first"])
    p.add_argument("--templates", help="prompt template JSON overriding the built-in one")
    p.add_argument("--mock", help="echo | malformed | fault:F,M | canned:FILE")
    p.add_argument("--endpoint", help="base URL of an OpenAI-compatible API")
    p.add_argument("--model")
    p.add_argument("--api-key-env", default=DEFAULT_API_KEY_ENV, help="env var holding the key ('none' for no auth)")
    p.add_argument("--max-in-flight", type=int, default=4)
    p.add_argument("--max-tokens", type=int, default=2000)
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="re-score journals offline")
    _common_data(p)
    p.add_argument("--sidecar-requests", help="also write {id, candidate, reference} requests here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="render a JSON report")
    p.add_argument("report")
    p.add_argument("--format", default="markdown", choices=["markdown", "csv", "json"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = load_config(known.config)
    for action in parser._subparsers._group_actions:  # the subcommand dispatcher
        for sub in action.choices.values():
            dests = {a.dest: a for a in sub._actions}
            defaults = {}
            for key, raw in values.items():
                a = dests.get(key)
                if a is None:
                    continue
                a.required = False  # the config file supplies it
                if a.const is True:
                    defaults[key] = raw.lower() in ("1", "true", "yes", "on")
                else:
                    defaults[key] = a.type(raw) if a.type else raw
            sub.set_defaults(**defaults)
    for key in values:
        if not any(key in {a.dest for a in s._actions} for act in parser._subparsers._group_actions
                   for s in act.choices.values()):
            log.warning("config key %r matches no option", key)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (AttribQAError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
