"""Pipeline orchestration: the fixed eight-stage cascade over WARC archives.

Stage order is part of the contract:

1. prefilter   (WARC read + URL blocklist + fuzzy CJK run, on raw payload)
2. extract     (HTML to text; transform, never removes documents)
3. langid      (language score, script check, blocked phrases)
4. gopher      (document-shape quality rules)
5. c4          (bracket ratio + boilerplate line dropping)
6. fineweb     (line-statistics quality rules)
7. minhash     (near-duplicate clusters, one survivor each)
8. line_trim   (frequent leading/trailing line removal; transform)

Stages 1-6 run document-parallel over a worker pool; results are consumed
in input order, so worker_count changes speed, never output. Dedup needs
whole-corpus state and runs in the coordinator over the always-persisted
stage-6 file. Every stage reports documents and UTF-8 text bytes in and
out plus a removal-reason breakdown; rates are document-based for stages
1-3 and byte-based for 4-8, matching how a curation run is usually read.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import multiprocessing
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .config import PipelineConfig
from .corpus_io import (
    Document,
    MalformedGzipMember,
    RawRecord,
    WarcTally,
    doc_id_for_record,
    read_documents_jsonl,
    read_warc_records,
    write_documents_jsonl,
    document_to_json,
)
from .dedup import (
    EmptyShingleSet,
    LineFrequencyTable,
    MinhashParams,
    MinhashSignature,
    cluster_and_select,
    lsh_bucket_keys,
    minhash_signature,
    shingles,
    trim_frequent_lines,
    write_signature_shard,
)
from .extract import extract_main_text
from .langid import identify
from .prefilter import prefilter_record
from .quality import c4_document_filter, fineweb_filter, gopher_filter
from .verdicts import Reason

log = logging.getLogger(__name__)

STAGE_NAMES = (
    "prefilter", "extract", "langid", "gopher", "c4", "fineweb",
    "minhash", "line_trim",
)

# Governing metric per stage: documents through language id, bytes after.
DOC_METRIC_STAGES = frozenset({"prefilter", "extract", "langid"})

SCHEMA_VERSION = "1"

_REASON_ORDER = tuple(r.value for r in Reason if r is not Reason.KEPT)

STAGE6_FILENAME = "stage6_fineweb.jsonl"


@dataclass
class StageStats:
    stage_name: str
    docs_in: int = 0
    docs_out: int = 0
    bytes_in: int = 0
    bytes_out: int = 0
    removal_reasons: dict[str, int] = field(default_factory=dict)

    @property
    def metric(self) -> str:
        return "documents" if self.stage_name in DOC_METRIC_STAGES else "bytes"

    @property
    def zero_input(self) -> bool:
        return (self.docs_in if self.metric == "documents" else self.bytes_in) == 0

    def record(self, reason: str | None, bytes_in: int, bytes_out: int) -> None:
        self.docs_in += 1
        self.bytes_in += bytes_in
        if reason is None:
            self.docs_out += 1
            self.bytes_out += bytes_out
        else:
            self.removal_reasons[reason] = self.removal_reasons.get(reason, 0) + 1


@dataclass
class IoStats:
    archives: int = 0
    failed_archives: int = 0
    corrupt_records: int = 0
    skipped_records: int = 0


def relative_removal_rate(stats: StageStats) -> float:
    """1 - out/in in the stage's governing metric; 0.0 on zero input."""
    if stats.metric == "documents":
        total, out = stats.docs_in, stats.docs_out
    else:
        total, out = stats.bytes_in, stats.bytes_out
    if total == 0:
        return 0.0
    return 1.0 - out / total


def _chain_rate(pairs: list[tuple[int, int]]) -> float:
    """Product of out/in over a stage chain.

    When the chain is contiguous (each stage's input equals the previous
    stage's output) this collapses to final/initial, which is also the
    numerically exact answer; otherwise the literal product is returned,
    with zero-input stages contributing a factor of 1.
    """
    live = [(i, o) for i, o in pairs if i > 0]
    if not live:
        return 1.0
    contiguous = all(live[k + 1][0] == live[k][1] for k in range(len(live) - 1))
    if contiguous and live == pairs:
        return live[-1][1] / live[0][0]
    rate = 1.0
    for total, out in live:
        rate *= out / total
    return rate


def global_kept_rate(all_stats: list[StageStats]) -> float:
    """Kept-rate product in each stage's governing metric (Figure-1 style)."""
    pairs = []
    for stats in all_stats:
        if stats.metric == "documents":
            pairs.append((stats.docs_in, stats.docs_out))
        else:
            pairs.append((stats.bytes_in, stats.bytes_out))
    return _chain_rate(pairs)


def doc_kept_rate(all_stats: list[StageStats]) -> float:
    return _chain_rate([(s.docs_in, s.docs_out) for s in all_stats])


def byte_kept_rate(all_stats: list[StageStats]) -> float:
    return _chain_rate([(s.bytes_in, s.bytes_out) for s in all_stats])


def shard_index(doc_id: str, shard_count: int) -> int:
    """Stable shard assignment, independent of processing order."""
    digest = hashlib.sha1(doc_id.encode("utf-8")).hexdigest()
    return int(digest[:8], 16) % shard_count


# ---------------------------------------------------------------------------
# Worker side: stages 1-6 on one record
# ---------------------------------------------------------------------------

@dataclass
class _Runtime:
    config: PipelineConfig
    blocklist: object
    profile: object
    scorer: object
    quality: object


_RUNTIME: _Runtime | None = None


def _build_runtime(config: PipelineConfig) -> _Runtime:
    return _Runtime(
        config=config,
        blocklist=config.build_blocklist(),
        profile=config.build_profile(),
        scorer=config.build_scorer(),
        quality=config.build_quality_config(),
    )


def _init_worker(config: PipelineConfig) -> None:
    global _RUNTIME
    _RUNTIME = _build_runtime(config)


@dataclass
class MapResult:
    # (stage, removal_reason_or_None, bytes_in, bytes_out) per stage reached
    outcomes: list[tuple[str, str | None, int, int]]
    doc: Document | None  # survivor of stages 1-6
    snapshots: dict[str, Document]  # stage -> state, only when persisting


def _snapshot(doc: Document) -> Document:
    return Document(id=doc.id, url=doc.url, date=doc.date, text=doc.text, meta=dict(doc.meta))


def _process_record(record: RawRecord) -> MapResult:
    """Run stages 1-6 on one record. Needs _init_worker to have run."""
    rt = _RUNTIME
    assert rt is not None, "worker runtime not initialized"
    cfg = rt.config
    persist = cfg.persist_stages
    outcomes: list[tuple[str, str | None, int, int]] = []
    snapshots: dict[str, Document] = {}

    payload_bytes = len(record.payload)
    pre = prefilter_record(record, rt.blocklist, cfg.min_cjk_run)
    if not pre.verdict.keep:
        outcomes.append(("prefilter", pre.verdict.reason.value, payload_bytes, 0))
        return MapResult(outcomes, None, snapshots)
    outcomes.append(("prefilter", None, payload_bytes, payload_bytes))
    doc = Document(
        id=doc_id_for_record(record.warc_record_id),
        url=record.url,
        date=record.fetch_date,
        text=pre.text,
    )
    if persist:
        snapshots["prefilter"] = _snapshot(doc)

    raw_text_bytes = doc.byte_len
    doc.set_text(extract_main_text(doc.text))
    outcomes.append(("extract", None, raw_text_bytes, doc.byte_len))
    if persist:
        snapshots["extract"] = _snapshot(doc)

    verdict = identify(
        doc, rt.scorer, rt.profile,
        threshold=cfg.language_threshold,
        max_simplified_fraction=cfg.max_simplified_fraction,
    )
    if not verdict.keep:
        outcomes.append(("langid", verdict.reason.value, doc.byte_len, 0))
        return MapResult(outcomes, None, snapshots)
    outcomes.append(("langid", None, doc.byte_len, doc.byte_len))
    if persist:
        snapshots["langid"] = _snapshot(doc)

    verdict = gopher_filter(doc, rt.quality)
    if not verdict.keep:
        outcomes.append(("gopher", verdict.reason.value, doc.byte_len, 0))
        return MapResult(outcomes, None, snapshots)
    outcomes.append(("gopher", None, doc.byte_len, doc.byte_len))
    if persist:
        snapshots["gopher"] = _snapshot(doc)

    verdict, cleaned = c4_document_filter(doc, rt.quality)
    if not verdict.keep:
        outcomes.append(("c4", verdict.reason.value, doc.byte_len, 0))
        return MapResult(outcomes, None, snapshots)
    bytes_before = doc.byte_len
    doc.set_text(cleaned)
    outcomes.append(("c4", None, bytes_before, doc.byte_len))
    if persist:
        snapshots["c4"] = _snapshot(doc)

    verdict = fineweb_filter(doc, rt.quality)
    if not verdict.keep:
        outcomes.append(("fineweb", verdict.reason.value, doc.byte_len, 0))
        return MapResult(outcomes, None, snapshots)
    outcomes.append(("fineweb", None, doc.byte_len, doc.byte_len))
    return MapResult(outcomes, doc, snapshots)


def _sign_document(doc: Document) -> tuple[str, int, tuple[bytes, ...] | None, tuple[int, ...] | None]:
    """Stage-7 worker: (id, byte_len, band keys or None, signature values)."""
    rt = _RUNTIME
    assert rt is not None, "worker runtime not initialized"
    params = rt.config.build_minhash_params()
    try:
        sig = minhash_signature(shingles(doc.text, params.shingle_size), params)
    except EmptyShingleSet:
        return doc.id, doc.byte_len, None, None
    return doc.id, doc.byte_len, lsh_bucket_keys(sig, params), sig.values


# ---------------------------------------------------------------------------
# Coordinator
# ---------------------------------------------------------------------------

def _iter_records(config: PipelineConfig, io_stats: IoStats) -> Iterator[RawRecord]:
    """All response records across archives; archive failures are contained.

    A failed archive is logged and tallied, never raised, so a worker pool
    feeding from this iterator cannot be poisoned mid-run.
    """
    for path in config.input_paths:
        io_stats.archives += 1
        tally = WarcTally()
        try:
            yield from read_warc_records(path, tally=tally)
        except (MalformedGzipMember, OSError) as exc:
            log.error("abandoning archive %s: %s", path, exc)
            io_stats.failed_archives += 1
        finally:
            io_stats.corrupt_records += tally.corrupt_records
            io_stats.skipped_records += tally.skipped_records


class _PoolRunner:
    """imap over a pool, or a plain map when one worker is enough."""

    def __init__(self, config: PipelineConfig):
        self._config = config
        self._pool: multiprocessing.pool.Pool | None = None

    def __enter__(self) -> _PoolRunner:
        if self._config.worker_count > 1:
            self._pool = multiprocessing.get_context().Pool(
                processes=self._config.worker_count,
                initializer=_init_worker,
                initargs=(self._config,),
            )
        _init_worker(self._config)  # coordinator runtime (also used inline)
        return self

    def __exit__(self, *exc_info) -> None:
        if self._pool is not None:
            self._pool.close()
            self._pool.join()

    def imap(self, func, items: Iterable, chunksize: int = 16) -> Iterator:
        if self._pool is None:
            return map(func, items)
        return self._pool.imap(func, items, chunksize=chunksize)


def run_pipeline(config: PipelineConfig) -> list[StageStats]:
    """Execute all eight stages; write shards and the stats report.

    Validates first (nothing is created on invalid config), streams
    archives through the map stages into the stage-6 intermediate file,
    then runs dedup and trimming over it and shards the survivors by
    document id. Returns the per-stage statistics.
    """
    config.validate()
    out_dir = Path(config.output_dir)
    inter_dir = out_dir / "intermediate"
    if inter_dir.exists():
        shutil.rmtree(inter_dir)
    inter_dir.mkdir(parents=True)
    for stale in out_dir.glob("part-*.jsonl"):
        stale.unlink()

    stats = {name: StageStats(name) for name in STAGE_NAMES}
    io_stats = IoStats()
    stage6_path = inter_dir / STAGE6_FILENAME

    persist_writers: dict[str, object] = {}
    persist_names = ("prefilter", "extract", "langid", "gopher", "c4")

    with _PoolRunner(config) as runner:
        # Stages 1-6: map over records, accumulate stats in arrival order.
        with open(stage6_path, "w", encoding="utf-8", newline="\n") as stage6:
            try:
                if config.persist_stages:
                    for i, name in enumerate(persist_names, start=1):
                        path = inter_dir / f"stage{i}_{name}.jsonl"
                        persist_writers[name] = open(path, "w", encoding="utf-8", newline="\n")
                for result in runner.imap(_process_record, _iter_records(config, io_stats)):
                    for stage, reason, bytes_in, bytes_out in result.outcomes:
                        stats[stage].record(reason, bytes_in, bytes_out)
                    for stage, snapshot in result.snapshots.items():
                        writer = persist_writers.get(stage)
                        if writer is not None:
                            writer.write(document_to_json(snapshot))
                            writer.write("\n")
                    if result.doc is not None:
                        stage6.write(document_to_json(result.doc))
                        stage6.write("\n")
            finally:
                for writer in persist_writers.values():
                    writer.close()

        # Stage 7: minhash dedup over the persisted stage-6 output.
        minhash_stats = stats["minhash"]
        removals = _minhash_pass(runner, config, stage6_path, minhash_stats, inter_dir)

        # Stage 8: frequent-line trimming over the survivors.
        _line_trim_pass(config, stage6_path, removals, stats, out_dir, inter_dir)

    ordered = [stats[name] for name in STAGE_NAMES]
    report = build_stats_report(ordered, io_stats)
    _write_report(report, out_dir)
    return ordered


def _surviving_docs(stage6_path: Path, removals: set[str]) -> Iterator[Document]:
    for doc in read_documents_jsonl(stage6_path):
        if doc.id not in removals:
            yield doc


def _minhash_pass(
    runner: _PoolRunner,
    config: PipelineConfig,
    stage6_path: Path,
    stats: StageStats,
    inter_dir: Path,
) -> set[str]:
    """Signatures + banding + clustering; returns the ids to drop."""
    byte_len_by_id: dict[str, int] = {}
    sig_sink = None
    params = config.build_minhash_params()
    if config.persist_stages:
        sig_sink = open(inter_dir / "signatures.mhsg", "wb")

    def candidates() -> Iterator[tuple[str, tuple[bytes, ...]]]:
        signed = runner.imap(_sign_document, read_documents_jsonl(stage6_path))
        entries = []
        try:
            for doc_id, byte_len, keys, values in signed:
                byte_len_by_id[doc_id] = byte_len
                if values is not None and sig_sink is not None:
                    entries.append((doc_id, MinhashSignature(values)))
                if keys is not None:
                    yield doc_id, keys
        finally:
            if sig_sink is not None:
                write_signature_shard(sig_sink, entries, params)

    try:
        removals = cluster_and_select(candidates())
    finally:
        if sig_sink is not None:
            sig_sink.close()

    for doc_id, byte_len in byte_len_by_id.items():
        if doc_id in removals:
            stats.record(Reason.DUPLICATE.value, byte_len, 0)
        else:
            stats.record(None, byte_len, byte_len)
    return removals


def _line_trim_pass(
    config: PipelineConfig,
    stage6_path: Path,
    removals: set[str],
    stats: dict[str, StageStats],
    out_dir: Path,
    inter_dir: Path,
) -> None:
    """Build the line table on survivors, trim, and write final shards."""
    table = LineFrequencyTable()
    for doc in _surviving_docs(stage6_path, removals):
        table.add_text(doc.text)

    trim_stats = stats["line_trim"]
    post_minhash_writer = None
    if config.persist_stages:
        post_minhash_writer = open(
            inter_dir / "stage7_minhash.jsonl", "w", encoding="utf-8", newline="\n"
        )
    shard_paths = [out_dir / f"part-{i:05d}.jsonl" for i in range(config.shard_count)]
    shard_writers = [open(p, "w", encoding="utf-8", newline="\n") for p in shard_paths]
    try:
        for doc in _surviving_docs(stage6_path, removals):
            if post_minhash_writer is not None:
                post_minhash_writer.write(document_to_json(doc))
                post_minhash_writer.write("\n")
            before = doc.byte_len
            trimmed = trim_frequent_lines(doc, table, config.line_trim_threshold)
            trim_stats.record(None, before, trimmed.byte_len)
            writer = shard_writers[shard_index(trimmed.id, config.shard_count)]
            writer.write(document_to_json(trimmed))
            writer.write("\n")
    finally:
        for writer in shard_writers:
            writer.close()
        if post_minhash_writer is not None:
            post_minhash_writer.close()


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def _stage_to_json(stats: StageStats) -> dict:
    reasons = {
        reason: stats.removal_reasons[reason]
        for reason in _REASON_ORDER
        if reason in stats.removal_reasons
    }
    return {
        "stage_name": stats.stage_name,
        "metric": stats.metric,
        "docs_in": stats.docs_in,
        "docs_out": stats.docs_out,
        "bytes_in": stats.bytes_in,
        "bytes_out": stats.bytes_out,
        "removal_reasons": reasons,
        "zero_input": stats.zero_input,
    }


def build_stats_report(all_stats: list[StageStats], io_stats: IoStats | None = None) -> dict:
    """The stats.json shape. Deliberately carries no timestamps: reruns
    must be byte-identical."""
    report = {
        "schema_version": SCHEMA_VERSION,
        "stages": [_stage_to_json(s) for s in all_stats],
        "global": {
            "doc_kept_rate": doc_kept_rate(all_stats),
            "byte_kept_rate": byte_kept_rate(all_stats),
        },
    }
    if io_stats is not None:
        report["io"] = dataclasses.asdict(io_stats)
    return report


def render_stats_table(report: dict) -> str:
    """Aligned text table of per-stage flow plus removal reasons."""
    lines = []
    header = (
        f"{'stage':<10} {'metric':<9} {'docs_in':>9} {'docs_out':>9} "
        f"{'bytes_in':>12} {'bytes_out':>12} {'removed%':>9} {'kept_glob':>10}"
    )
    lines.append(header)
    lines.append("-" * len(header))
    kept_running = 1.0
    for stage in report["stages"]:
        stats = StageStats(
            stage_name=stage["stage_name"],
            docs_in=stage["docs_in"],
            docs_out=stage["docs_out"],
            bytes_in=stage["bytes_in"],
            bytes_out=stage["bytes_out"],
            removal_reasons=dict(stage["removal_reasons"]),
        )
        removal = relative_removal_rate(stats)
        if not stats.zero_input:
            kept_running *= 1.0 - removal
        lines.append(
            f"{stage['stage_name']:<10} {stage['metric']:<9} {stage['docs_in']:>9} "
            f"{stage['docs_out']:>9} {stage['bytes_in']:>12} {stage['bytes_out']:>12} "
            f"{100 * removal:>8.2f}% {kept_running:>10.6f}"
        )
    lines.append("")
    lines.append(f"global doc kept rate:  {report['global']['doc_kept_rate']:.6f}")
    lines.append(f"global byte kept rate: {report['global']['byte_kept_rate']:.6f}")
    if "io" in report:
        io_part = report["io"]
        lines.append(
            f"archives: {io_part['archives']} ({io_part['failed_archives']} failed), "
            f"corrupt records: {io_part['corrupt_records']}, "
            f"non-response records skipped: {io_part['skipped_records']}"
        )
    reasons = [
        (stage["stage_name"], reason, count)
        for stage in report["stages"]
        for reason, count in stage["removal_reasons"].items()
    ]
    if reasons:
        lines.append("")
        lines.append("removal reasons:")
        for stage_name, reason, count in reasons:
            lines.append(f"  {stage_name:<10} {reason:<20} {count}")
    return "\n".join(lines) + "\n"


def _write_report(report: dict, out_dir: Path) -> None:
    stats_json = json.dumps(report, ensure_ascii=False, indent=2) + "\n"
    (out_dir / "stats.json").write_text(stats_json, encoding="utf-8")
    (out_dir / "stats.txt").write_text(render_stats_table(report), encoding="utf-8")


# ---------------------------------------------------------------------------
# Single-stage execution (the `stage` subcommand and composability tests)
# ---------------------------------------------------------------------------

def run_single_stage(
    name: str,
    in_path: str | Path,
    out_path: str | Path,
    config: PipelineConfig,
) -> StageStats:
    """One stage over JSONL in/out (stage 1 reads WARC instead).

    Single-threaded by design; this is the debugging and composition tool;
    chaining all eight equals one `run` by construction.
    """
    if name not in STAGE_NAMES:
        raise ValueError(f"unknown stage {name!r}; expected one of {STAGE_NAMES}")
    runtime = _build_runtime(config)
    stats = StageStats(name)
    io_stats = IoStats()

    def transform(docs: Iterable[Document]) -> Iterator[Document]:
        cfg = runtime.config
        for doc in docs:
            if name == "extract":
                before = doc.byte_len
                doc.set_text(extract_main_text(doc.text))
                stats.record(None, before, doc.byte_len)
                yield doc
            elif name == "langid":
                verdict = identify(
                    doc, runtime.scorer, runtime.profile,
                    threshold=cfg.language_threshold,
                    max_simplified_fraction=cfg.max_simplified_fraction,
                )
                stats.record(None if verdict.keep else verdict.reason.value, doc.byte_len, doc.byte_len)
                if verdict.keep:
                    yield doc
            elif name == "gopher":
                verdict = gopher_filter(doc, runtime.quality)
                stats.record(None if verdict.keep else verdict.reason.value, doc.byte_len, doc.byte_len)
                if verdict.keep:
                    yield doc
            elif name == "c4":
                verdict, cleaned = c4_document_filter(doc, runtime.quality)
                if verdict.keep:
                    before = doc.byte_len
                    doc.set_text(cleaned)
                    stats.record(None, before, doc.byte_len)
                    yield doc
                else:
                    stats.record(verdict.reason.value, doc.byte_len, 0)
            elif name == "fineweb":
                verdict = fineweb_filter(doc, runtime.quality)
                stats.record(None if verdict.keep else verdict.reason.value, doc.byte_len, doc.byte_len)
                if verdict.keep:
                    yield doc
            else:  # pragma: no cover - guarded by STAGE_NAMES check
                raise AssertionError(name)

    if name == "prefilter":
        def prefiltered() -> Iterator[Document]:
            for record in _iter_records(
                dataclasses.replace(config, input_paths=[str(in_path)]), io_stats
            ):
                payload_bytes = len(record.payload)
                outcome = prefilter_record(record, runtime.blocklist, config.min_cjk_run)
                if outcome.verdict.keep:
                    stats.record(None, payload_bytes, payload_bytes)
                    yield Document(
                        id=doc_id_for_record(record.warc_record_id),
                        url=record.url,
                        date=record.fetch_date,
                        text=outcome.text,
                    )
                else:
                    stats.record(outcome.verdict.reason.value, payload_bytes, 0)
        write_documents_jsonl(prefiltered(), out_path)
    elif name == "minhash":
        _init_worker(config)
        params = config.build_minhash_params()
        def entries() -> Iterator[tuple[str, tuple[bytes, ...]]]:
            for doc in read_documents_jsonl(in_path):
                signed = _sign_document(doc)
                if signed[2] is not None:
                    yield signed[0], signed[2]
        removals = cluster_and_select(entries())
        def survivors() -> Iterator[Document]:
            for doc in read_documents_jsonl(in_path):
                if doc.id in removals:
                    stats.record(Reason.DUPLICATE.value, doc.byte_len, 0)
                else:
                    stats.record(None, doc.byte_len, doc.byte_len)
                    yield doc
        write_documents_jsonl(survivors(), out_path)
    elif name == "line_trim":
        table = LineFrequencyTable()
        for doc in read_documents_jsonl(in_path):
            table.add_text(doc.text)
        def trimmed() -> Iterator[Document]:
            for doc in read_documents_jsonl(in_path):
                before = doc.byte_len
                out_doc = trim_frequent_lines(doc, table, config.line_trim_threshold)
                stats.record(None, before, out_doc.byte_len)
                yield out_doc
        write_documents_jsonl(trimmed(), out_path)
    else:
        write_documents_jsonl(transform(read_documents_jsonl(in_path)), out_path)
    return stats
