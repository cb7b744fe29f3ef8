"""Command-line entry point: ``multikgqa <command> ...``.

Exit codes: 0 success, 1 usage, 2 pipeline failure, 3 clarification needed
(fail-fast mode), 4 registry error. Diagnostics go to stderr; machine output
(``--json``) to stdout.
"""
import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from multiKGQA.errors import (
    ClarificationNeeded,
    ConfigError,
    CorpusError,
    KGQAError,
    RegistryError,
)
from multiKGQA.fixtures import make_fixtures
from multiKGQA.pipeline import Pipeline
from multiKGQA.pipeline_config import ABLATIONS, FAIL_FAST, INTERACTIVE, PipelineConfig, load_config
from multiKGQA.registry import ENDPOINT, FILE, INITIAL_UTILITY, GraphRegistry, load_registry
from multiKGQA.run_benchmark import run_bench
from multiKGQA.schema import schema_summary
from multiKGQA.subgoals import ClarificationRequest
from multiKGQA.trace import DictJsonEncoder
from multiKGQA.verifier import verify

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PIPELINE = 2
EXIT_CLARIFICATION = 3
EXIT_REGISTRY = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _color(text: str, code: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stderr.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def _error(message: str):
    print(f"{_color('error:', '31')} {message}", file=sys.stderr)


def _print_json(obj):
    print(json.dumps(obj, cls=DictJsonEncoder, indent=2, ensure_ascii=False))


def _config(args) -> PipelineConfig:
    overrides = {
        "registry": getattr(args, "registry", None),
        "backend": getattr(args, "backend", None),
        "parallelism": getattr(args, "parallelism", None),
    }
    if getattr(args, "interactive", False):
        overrides["clarification"] = INTERACTIVE if sys.stdin.isatty() else FAIL_FAST
    return load_config(getattr(args, "config", None), overrides)


def _ask_terminal(request: ClarificationRequest) -> str:
    print(request.question, file=sys.stderr)
    for number, reading in enumerate(request.readings, start=1):
        print(f"  {number}. {reading}", file=sys.stderr)
    reply = sys.stdin.readline().strip()
    if reply.isdigit() and 1 <= int(reply) <= len(request.readings):
        return request.readings[int(reply) - 1]
    return reply


# commands


def cmd_ask(args) -> int:
    config = _config(args)
    trace_path = args.trace or config.trace_file
    pipeline = Pipeline(config)
    try:
        consensus, trace = pipeline.answer(args.question, args.clarify, _ask_terminal)
    except ClarificationNeeded as e:
        if e.trace is not None:
            e.trace.save(trace_path)
        _print_json({"clarification": e.request.to_json()})
        return EXIT_CLARIFICATION
    except RegistryError:
        raise
    except KGQAError as e:
        trace = getattr(e, "trace", None)
        if trace is not None:
            trace.save(trace_path)
        _error(f"{type(e).__name__}: {e}")
        return EXIT_PIPELINE
    trace.save(trace_path)
    logger.info("trace written to %s", trace_path)
    if args.json:
        _print_json(consensus.to_json())
    else:
        print(consensus.answer_text)
        for chain in consensus.provenance[:1]:
            print("provenance: " + " -> ".join(f"{graph_id}#{subgoal_id}" for graph_id, subgoal_id in chain))
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _config(args)
    registry = load_registry(config.registry)
    entry = registry.get(args.graph)
    if args.query_file:
        with open(args.query_file, encoding="utf-8") as f:
            text = f.read()
    else:
        text = args.query
    report = verify(text, entry.schema, entry.executor(config.timeout), config.perturbations)
    if args.json:
        _print_json(report.to_json())
    else:
        print(f"{report.verdict}" + (f" ({report.failed_check})" if report.failed_check else ""))
        for result in report.stage1:
            print(f"  {result.check}: {result.status}" + (f" - {result.detail}" if result.detail else ""))
        if report.note:
            print(f"  {report.note}")
    return EXIT_OK if report.passed else EXIT_PIPELINE


def _open_registry(path: str) -> GraphRegistry:
    return load_registry(path) if os.path.exists(path) else GraphRegistry(path)


def cmd_registry(args) -> int:
    if args.registry_command == "add":
        registry = _open_registry(args.registry)
        kind, location = (FILE, os.path.abspath(args.path)) if args.path else (ENDPOINT, args.url)
        registry.register_graph(
            args.graph_id,
            kind,
            location,
            metadata=args.metadata,
            sources=[os.path.abspath(s) for s in args.source],
            utility=args.utility,
        )
        registry.save()
        print(f"registered {args.graph_id}", file=sys.stderr)
        return EXIT_OK
    registry = load_registry(args.registry)
    if args.registry_command == "remove":
        registry.remove_graph(args.graph_id)
        registry.save()
        print(f"removed {args.graph_id}", file=sys.stderr)
    elif args.registry_command == "list":
        entries = registry.snapshot()
        if args.json:
            _print_json([entry.to_manifest(os.path.dirname(os.path.abspath(args.registry))) for entry in entries])
        else:
            for entry in entries:
                print(f"{entry.graph_id}\t{entry.kind}\t{len(entry.schema.predicates)} predicates\tutility {entry.utility:.3f}")
    else:
        entry = registry.get(args.graph_id)
        if args.json:
            manifest = entry.to_manifest(os.path.dirname(os.path.abspath(args.registry)))
            _print_json(dict(manifest, schema=entry.schema.to_json()))
        else:
            print(f"{entry.graph_id} ({entry.kind}) {entry.location}")
            print(f"utility {entry.utility:.3f}")
            if entry.metadata:
                print(entry.metadata)
            print(schema_summary(entry.schema), end="")
    return EXIT_OK


def cmd_schema(args) -> int:
    registry = load_registry(_config(args).registry)
    slice = registry.get(args.graph_id).schema
    if args.json:
        _print_json(slice.to_json())
    else:
        print(schema_summary(slice, top=len(slice.predicates) + len(slice.classes)), end="")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _config(args)
    try:
        seeds = [int(seed) for seed in args.seeds.split(",") if seed.strip()]
    except ValueError:
        raise UsageError(f"--seeds expects comma-separated integers, got {args.seeds!r}")
    try:
        report = run_bench(args.corpus, config, seeds, args.ablate, args.report)
    except CorpusError as e:
        _error(str(e))
        return EXIT_PIPELINE
    if args.json:
        _print_json(report)
    else:
        print(report.table().to_string())
        if report.footer:
            print(f"\n{report.footer}")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    written = make_fixtures(args.output, args.seed)
    for name, path in written.items():
        print(f"{name}\t{path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="multikgqa", description="Question answering over several RDF graphs.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)
    commands.required = True

    def common(sub, registry=True):
        sub.add_argument("--config", help="key = value configuration file")
        if registry:
            sub.add_argument("--registry", help="registry manifest (JSON)")
        sub.add_argument("--json", action="store_true", help="machine-readable output")

    ask = commands.add_parser("ask", help="answer one question")
    common(ask)
    ask.add_argument("--question", required=True)
    ask.add_argument("--trace", help="trace file (default: <output_root_dir>/trace.json)")
    ask.add_argument("--clarify", action="append", default=[], help="canned clarification answer, in order")
    ask.add_argument("--interactive", action="store_true", help="ask clarification questions on the terminal")
    ask.add_argument("--backend", choices=["rule", "http"])
    ask.add_argument("--parallelism", type=int)
    ask.set_defaults(handler=cmd_ask)

    validate = commands.add_parser("validate", help="verify one query against a registered graph")
    common(validate)
    validate.add_argument("--graph", required=True)
    query = validate.add_mutually_exclusive_group(required=True)
    query.add_argument("--query")
    query.add_argument("--query-file")
    validate.set_defaults(handler=cmd_validate)

    registry = commands.add_parser("registry", help="manage the graph registry")
    registry_commands = registry.add_subparsers(dest="registry_command", parser_class=_Parser)
    registry_commands.required = True
    add = registry_commands.add_parser("add")
    add.add_argument("--registry", required=True)
    add.add_argument("--graph-id", required=True)
    location = add.add_mutually_exclusive_group(required=True)
    location.add_argument("--path")
    location.add_argument("--url")
    add.add_argument("--metadata", default="")
    add.add_argument("--source", action="append", default=[])
    add.add_argument("--utility", type=float, default=INITIAL_UTILITY)
    remove = registry_commands.add_parser("remove")
    remove.add_argument("--registry", required=True)
    remove.add_argument("graph_id")
    listing = registry_commands.add_parser("list")
    listing.add_argument("--registry", required=True)
    listing.add_argument("--json", action="store_true")
    show = registry_commands.add_parser("show")
    show.add_argument("--registry", required=True)
    show.add_argument("graph_id")
    show.add_argument("--json", action="store_true")
    registry.set_defaults(handler=cmd_registry)

    schema = commands.add_parser("schema", help="inspect schema slices")
    schema_commands = schema.add_subparsers(dest="schema_command", parser_class=_Parser)
    schema_commands.required = True
    schema_show = schema_commands.add_parser("show")
    common(schema_show)
    schema_show.add_argument("graph_id")
    schema.set_defaults(handler=cmd_schema)

    bench = commands.add_parser("bench", help="run the benchmark corpus")
    common(bench)
    bench.add_argument("--corpus", required=True)
    bench.add_argument("--seeds", default="0")
    bench.add_argument("--ablate", action="append", default=[], choices=ABLATIONS)
    bench.add_argument("--report", help="report JSON path")
    bench.add_argument("--parallelism", type=int)
    bench.set_defaults(handler=cmd_bench)

    fixtures = commands.add_parser("fixtures", help="generate the synthetic graphs and corpus")
    fixtures.add_argument("--output", default="fixtures")
    fixtures.add_argument("--seed", type=int, default=0)
    fixtures.set_defaults(handler=cmd_fixtures)
    return parser


def run_cli(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except UsageError as e:
        _error(str(e))
        return EXIT_USAGE
    except ConfigError as e:
        _error(f"configuration: {e}")
        return EXIT_USAGE
    except RegistryError as e:
        _error(f"registry: {e}")
        return EXIT_REGISTRY
    except KGQAError as e:
        _error(f"{type(e).__name__}: {e}")
        return EXIT_PIPELINE
    except OSError as e:
        _error(str(e))
        return EXIT_PIPELINE


def main():
    sys.exit(run_cli())
