"""Command-line interface.

Four subcommands:

  run     full eight-stage pipeline over WARC archives
  stage   one stage over JSONL in/out, for debugging and composition
  stats   render a stats.json report as the per-stage text table
  sample  reservoir-sample documents from JSONL shards, optionally
          rendering scoring prompts for an external model

Every PipelineConfig field is also a flag (underscores become dashes);
a config file gives defaults and flags override it. Exit codes: 0 on
success, 1 for configuration problems (nothing has been written yet),
2 for runtime failures (partial output may remain).
"""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path

from .config import (
    CONFIG_KEYS,
    ConfigInvalid,
    _PARSERS,
    _parse_bool,
    _parse_list,
    config_from_sources,
)
from .corpus_io import read_documents_jsonl, write_documents_jsonl
from .evaluation import load_rubric_template, sample_documents, write_prompts_jsonl
from .pipeline import (
    STAGE_NAMES,
    render_stats_table,
    run_pipeline,
    run_single_stage,
)

log = logging.getLogger(__name__)


def _add_config_flags(parser: argparse.ArgumentParser, *, skip: tuple[str, ...] = ()) -> None:
    """One flag per config field, defaulting to None (= not given)."""
    group = parser.add_argument_group("pipeline configuration")
    for key in CONFIG_KEYS:
        if key in skip:
            continue
        flag = "--" + key.replace("_", "-")
        value_parser = _PARSERS[key]
        if value_parser is _parse_bool:
            group.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None)
        elif value_parser is _parse_list:
            group.add_argument(flag, dest=key, type=_parse_list, default=None,
                               metavar="A,B,...")
        elif value_parser is int:
            group.add_argument(flag, dest=key, type=int, default=None, metavar="N")
        elif value_parser is float:
            group.add_argument(flag, dest=key, type=float, default=None, metavar="X")
        else:
            group.add_argument(flag, dest=key, default=None, metavar="VALUE")


def _collect_overrides(args: argparse.Namespace) -> dict:
    return {
        key: getattr(args, key)
        for key in CONFIG_KEYS
        if getattr(args, key, None) is not None
    }


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hantweb",
        description="Curate a Traditional Chinese corpus from web crawl archives.",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the full eight-stage pipeline")
    run_p.add_argument("archives", nargs="*", help="input WARC archives")
    run_p.add_argument("--config", help="key = value config file")
    run_p.add_argument("--input", dest="input_flag", action="append", default=[],
                       metavar="PATH", help="input archive (repeatable)")
    run_p.add_argument("--output", dest="output_dir", metavar="DIR", default=None,
                       help="output directory (same as --output-dir)")
    _add_config_flags(run_p, skip=("input_paths",))

    stage_p = sub.add_parser("stage", help="run one stage over JSONL in/out")
    stage_p.add_argument("name", choices=STAGE_NAMES)
    stage_p.add_argument("--in", dest="in_path", required=True, metavar="PATH",
                         help="input file (WARC for prefilter, JSONL otherwise)")
    stage_p.add_argument("--out", dest="out_path", required=True, metavar="PATH",
                         help="output JSONL file")
    stage_p.add_argument("--config", help="key = value config file")
    stage_p.add_argument("--stats-out", metavar="PATH",
                         help="also write this stage's stats as JSON")
    _add_config_flags(stage_p, skip=("input_paths", "output_dir", "worker_count"))

    stats_p = sub.add_parser("stats", help="render a stats report as a table")
    stats_p.add_argument("report", help="stats.json file or a pipeline output directory")

    sample_p = sub.add_parser("sample", help="reservoir-sample documents from JSONL shards")
    sample_p.add_argument("shards", nargs="+", help="input JSONL files")
    sample_p.add_argument("--out", dest="out_path", required=True, metavar="PATH",
                          help="sampled documents JSONL")
    sample_p.add_argument("-n", "--size", type=int, default=1000,
                          help="sample size (default 1000)")
    sample_p.add_argument("--seed", type=int, default=0, help="sampling seed")
    sample_p.add_argument("--prompts", metavar="PATH",
                          help="also write rubric prompts for the sample")
    sample_p.add_argument("--template", metavar="PATH",
                          help="rubric template (default: packaged)")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    overrides = _collect_overrides(args)
    archives = list(args.input_flag) + list(args.archives)
    if archives:
        overrides["input_paths"] = archives
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    config = config_from_sources(args.config, overrides)
    run_pipeline(config)  # validates before touching the output directory
    report_path = Path(config.output_dir) / "stats.json"
    sys.stdout.write(render_stats_table(json.loads(report_path.read_text(encoding="utf-8"))))
    return 0


def _cmd_stage(args: argparse.Namespace) -> int:
    overrides = _collect_overrides(args)
    config = config_from_sources(args.config, overrides)
    config.validate(require_inputs=False)
    if not Path(args.in_path).exists():
        raise ConfigInvalid([f"input file does not exist: {args.in_path}"])
    stats = run_single_stage(args.name, args.in_path, args.out_path, config)
    removed = stats.docs_in - stats.docs_out
    sys.stdout.write(
        f"{stats.stage_name}: {stats.docs_in} in, {stats.docs_out} out "
        f"({removed} removed), {stats.bytes_in} -> {stats.bytes_out} bytes\n"
    )
    if args.stats_out:
        payload = {
            "stage_name": stats.stage_name,
            "metric": stats.metric,
            "docs_in": stats.docs_in,
            "docs_out": stats.docs_out,
            "bytes_in": stats.bytes_in,
            "bytes_out": stats.bytes_out,
            "removal_reasons": stats.removal_reasons,
        }
        Path(args.stats_out).write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    path = Path(args.report)
    if path.is_dir():
        path = path / "stats.json"
    if not path.exists():
        raise ConfigInvalid([f"no stats report at {path}"])
    report = json.loads(path.read_text(encoding="utf-8"))
    sys.stdout.write(render_stats_table(report))
    return 0


def _cmd_sample(args: argparse.Namespace) -> int:
    for shard in args.shards:
        if not Path(shard).exists():
            raise ConfigInvalid([f"input file does not exist: {shard}"])
    docs = itertools.chain.from_iterable(read_documents_jsonl(s) for s in args.shards)
    sampled = sample_documents(docs, n=args.size, seed=args.seed)
    write_documents_jsonl(sampled, args.out_path)
    sys.stdout.write(f"sampled {len(sampled)} documents -> {args.out_path}\n")
    if args.prompts:
        template = load_rubric_template(args.template)
        count = write_prompts_jsonl(sampled, args.prompts, template)
        sys.stdout.write(f"wrote {count} prompts -> {args.prompts}\n")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "stage": _cmd_stage,
    "stats": _cmd_stats,
    "sample": _cmd_sample,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except ConfigInvalid as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        log.debug("unhandled failure", exc_info=True)
        sys.stderr.write(
            f"error: {type(exc).__name__}: {exc}\n"
            "note: the run did not finish; output files may be partial\n"
        )
        return 2


def main() -> None:
    sys.exit(cli_main())
