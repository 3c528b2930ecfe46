"""End-to-end pipeline run over the bundled fixture archive.

Streams the ~40-page WARC through all eight stages, prints the stats table,
and shows a couple of surviving documents. Output goes to ./demo-out (wiped
and rewritten on each run; the stats file is byte-identical every time).

    python3 demos/run_pipeline.py
"""
from __future__ import annotations

import json
from pathlib import Path

from hantweb.config import config_from_sources
from hantweb.corpus_io import read_documents_jsonl
from hantweb.pipeline import render_stats_table, run_pipeline

REPO = Path(__file__).resolve().parent.parent
DATA = REPO / "tests" / "data"
OUT = REPO / "demo-out"


def main() -> None:
    cfg = config_from_sources(
        file_path=DATA / "golden.conf",
        env={},
        overrides={
            "input_paths": [str(DATA / "golden.warc.gz")],
            "blocklist_path": str(DATA / "golden_blocklist.txt"),
            "output_dir": str(OUT),
        },
    )
    run_pipeline(cfg)

    report = json.loads((OUT / "stats.json").read_text(encoding="utf-8"))
    print(render_stats_table(report))
    print()

    docs = []
    for shard in sorted(OUT.glob("part-*.jsonl")):
        docs.extend(read_documents_jsonl(shard))
    print(f"{len(docs)} documents survived; two of them:")
    for doc in docs[:2]:
        print(f"\n--- {doc.id} ({doc.url})")
        print(doc.text)


if __name__ == "__main__":
    main()
