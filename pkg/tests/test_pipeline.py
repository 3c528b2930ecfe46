"""End-to-end pipeline runs, stage statistics, configuration, and the CLI.

The synthetic corpus has one record per removal reason plus a handful of
keepers, so a full run exercises every stage's accounting. Determinism is
checked the strong way: rerunning (and rerunning with more workers) must
reproduce stats.json and every shard byte for byte.
"""
from __future__ import annotations

import json
from pathlib import Path

import pytest

from hantweb.cli import cli_main
from hantweb.config import (
    ConfigInvalid,
    PipelineConfig,
    config_from_sources,
    parse_config_file,
)
from hantweb.corpus_io import Document, read_documents_jsonl, write_documents_jsonl
from hantweb.dedup import read_signature_shard
from hantweb.pipeline import (
    STAGE_NAMES,
    IoStats,
    StageStats,
    byte_kept_rate,
    doc_kept_rate,
    global_kept_rate,
    relative_removal_rate,
    run_pipeline,
    run_single_stage,
    shard_index,
)

from warc_builder import http_block, page_record, warc_record, write_gzip_archive


# ---------------------------------------------------------------------------
# stage statistics
# ---------------------------------------------------------------------------

def test_stage_stats_accumulation():
    stats = StageStats("gopher")
    stats.record(None, 100, 100)
    stats.record("TooShort", 40, 0)
    stats.record(None, 60, 60)
    assert (stats.docs_in, stats.docs_out) == (3, 2)
    assert (stats.bytes_in, stats.bytes_out) == (200, 160)
    assert stats.removal_reasons == {"TooShort": 1}
    assert stats.metric == "bytes"
    assert StageStats("langid").metric == "documents"


def test_zero_input_uses_governing_metric():
    doc_stage = StageStats("prefilter", docs_in=0, bytes_in=500)
    byte_stage = StageStats("c4", docs_in=5, bytes_in=0)
    assert doc_stage.zero_input
    assert byte_stage.zero_input


def test_relative_removal_rate():
    stats = StageStats("prefilter", docs_in=500, docs_out=200)
    assert relative_removal_rate(stats) == 0.6
    assert relative_removal_rate(StageStats("prefilter")) == 0.0


def chain(*pairs: tuple[int, int]) -> list[StageStats]:
    return [
        StageStats("prefilter", docs_in=i, docs_out=o, bytes_in=i, bytes_out=o)
        for i, o in pairs
    ]


def test_doc_kept_rate_telescopes_exactly():
    # the naive factor product is off by one ulp here; the chain collapses
    # to final/initial, which is exact
    assert (300 / 500) * (200 / 300) != 0.4
    assert doc_kept_rate(chain((500, 300), (300, 200))) == 0.4


def test_kept_rate_broken_chain_multiplies():
    rate = byte_kept_rate(chain((1000, 800), (500, 400)))
    assert rate == pytest.approx(0.64)


def test_kept_rate_skips_zero_input_stages():
    assert doc_kept_rate(chain((500, 250), (0, 0))) == 0.5
    assert doc_kept_rate(chain((0, 0), (0, 0))) == 1.0


def test_global_rate_uses_per_stage_metric():
    doc_stage = StageStats("prefilter", docs_in=10, docs_out=5, bytes_in=999, bytes_out=999)
    byte_stage = StageStats("gopher", docs_in=7, docs_out=7, bytes_in=50, bytes_out=25)
    assert global_kept_rate([doc_stage, byte_stage]) == 0.25


def test_shard_index_stable_and_bounded():
    assert shard_index("doc-id", 1) == 0
    first = shard_index("4e77a224", 8)
    assert first == shard_index("4e77a224", 8)
    counts = [0] * 8
    for i in range(1000):
        idx = shard_index(f"doc-{i}", 8)
        assert 0 <= idx < 8
        counts[idx] += 1
    assert min(counts) > 60  # roughly uniform (expected 125 per shard)


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------

KEEPERS = {
    "night-market": [
        "台北的夜市在黃昏之後逐漸湧入人潮，攤位上的小吃香味四處飄散。",
        "老闆熟練地翻動鐵板上的蚵仔煎，旁邊的客人排著長長的隊伍。",
        "有些攤位專賣甜品，像是豆花與芒果冰，受到年輕族群的喜愛。",
        "逛完夜市之後，許多人會沿著河堤散步，替一天畫下句點。",
    ],
    "hiking": [
        "清晨的山徑籠罩在薄霧之中，步道兩旁的樹影顯得格外安靜。",
        "登山客背著簡單的行囊，沿著木棧道緩緩向上攀行。",
        "山頂的展望台可以眺望整片河谷，遠方的稜線層層疊疊。",
        "下山的路上，大家在涼亭稍作休息，分享帶來的水果。",
    ],
    "tea": [
        "烏龍茶的製作需要經過萎凋、殺菁與揉捻等多道工序。",
        "茶農依照天氣調整日曬的時間，確保茶葉的香氣飽滿。",
        "沖泡時水溫不宜過高，以免苦澀的味道蓋過茶香。",
        "品茶的時候搭配簡單的茶點，更能感受回甘的層次。",
    ],
    "library": [
        "這座圖書館建於上個世紀初，館藏以地方文獻最為豐富。",
        "閱覽室的窗邊座位總是最先被占滿，學生們安靜地翻著書頁。",
        "館方定期舉辦講座，邀請作家分享寫作的心路歷程。",
        "夜間閉館之前，志工會協助整理歸還的書籍。",
    ],
    "harbor": [  # served as Big5 to exercise charset handling in a full run
        "港口的清晨充滿魚貨的氣味，漁船陸續靠岸卸下漁獲。",
        "市場裡的攤販大聲吆喝，新鮮的海產吸引大批民眾。",
        "競標結束之後，餐廳的採購人員忙著將漁獲裝箱。",
        "午後的港邊恢復平靜，只剩海鷗在堤防上盤旋。",
    ],
}

WEATHER = [
    "今天各地的天氣大致晴朗，午後山區偶有短暫陣雨。",
    "氣象單位提醒民眾外出時攜帶雨具，並注意紫外線。",
    "沿海地區的風浪稍大，從事水上活動需要特別小心。",
    "未來幾天的氣溫變化不大，早晚仍有些許涼意。",
]

JAPANESE = (
    "これはテストページです。今日の天気はとても良いですね。"
    "データの処理について説明します。みなさんも試してみてください。"
)

SIMPLIFIED = (
    "这是一个简体中文的测试页面，我们讨论数据处理的流程。"
    "网络上的内容需要经过清理才能使用。简体字的比例很高，因此会被排除在外。"
    "最后一句话同样使用简体字。"
)

BLOCKED_PHRASE = (
    "請先下載我們提供的軟件，完成安裝之後重新啟動。"
    "若在使用過程遇到問題，可以聯絡客服人員。"
)

UNPUNCTUATED = [
    "第" + "一二三四五六七八九十"[i] + "行的內容沒有任何結尾標點符號"
    for i in range(10)
]


def html(paragraphs: list[str]) -> str:
    return "<html><body>" + "".join(f"<p>{p}</p>" for p in paragraphs) + "</body></html>"


def build_records() -> list[bytes]:
    records = []
    for name in ("night-market", "hiking", "tea", "library"):
        records.append(
            page_record(f"keeper-{name}", f"http://example.tw/{name}", html(KEEPERS[name]))
        )
    records.append(page_record("keeper-harbor", "http://example.tw/harbor",
                               html(KEEPERS["harbor"]), charset="big5", declared="big5"))
    # a near-duplicate pair; one survives
    records.append(page_record("dup-a", "http://example.tw/weather/a", html(WEATHER)))
    records.append(page_record("dup-b", "http://example.tw/weather/b",
                               html(WEATHER[:-1] + [WEATHER[-1][:-1] + "「"])))
    # one record per removal reason
    records.append(page_record("blocked", "http://blocked.example.test/promo", html(WEATHER)))
    records.append(page_record("english", "http://example.com/en",
                               html(["Hello world, this page is English only.",
                                     "No relevant characters appear anywhere here."])))
    records.append(page_record("japanese", "http://example.jp/ja", html([JAPANESE])))
    records.append(page_record("simplified", "http://example.cn/simp", html([SIMPLIFIED])))
    records.append(page_record("phrase", "http://example.tw/phrase", html([BLOCKED_PHRASE])))
    records.append(page_record("short", "http://example.tw/short",
                               html(["這是一個太短的測試頁面。"])))
    records.append(page_record("bracket", "http://example.tw/bracket",
                               html(WEATHER + ["（" * 20])))
    records.append(page_record("unpunct", "http://example.tw/unpunct", html(UNPUNCTUATED)))
    # parse failure and a non-response record, counted but never staged
    records.append(warc_record("corrupt", "http://example.tw/corrupt",
                               http_block("<p>中文中文中文中文中文</p>".encode("utf-8")),
                               omit=("Content-Length",)))
    records.append(warc_record("request", "http://example.tw/req",
                               b"GET / HTTP/1.1\r\n\r\n", warc_type="request"))
    return records


RESPONSE_RECORDS = 15  # parseable response records in build_records()
FINAL_DOCS = 6

EXPECTED_REASONS = {
    "prefilter": {"UrlBlocked": 1, "NoCjkRun": 1},
    "extract": {},
    "langid": {"LowLangConfidence": 1, "SimplifiedScript": 1, "BlockedPhrase": 1},
    "gopher": {"TooShort": 1},
    "c4": {"BracketRatio": 1},
    "fineweb": {"LinePunctRatio": 1},
    "minhash": {"Duplicate": 1},
    "line_trim": {},
}


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    archive = root / "corpus.warc.gz"
    write_gzip_archive(archive, build_records())
    blocklist = root / "blocklist.txt"
    blocklist.write_text("host:blocked.example.test\n", encoding="utf-8")
    return archive, blocklist


def corpus_config(corpus, out_dir: Path, **kwargs) -> PipelineConfig:
    archive, blocklist = corpus
    kwargs.setdefault("shard_count", 2)
    return PipelineConfig(
        input_paths=[str(archive)],
        output_dir=str(out_dir),
        blocklist_path=str(blocklist),
        **kwargs,
    )


def read_output_docs(out_dir: Path) -> dict[str, str]:
    docs = {}
    for path in sorted(out_dir.glob("part-*.jsonl")):
        for doc in read_documents_jsonl(path):
            docs[doc.id] = doc.text
    return docs


def output_bytes(out_dir: Path) -> dict[str, bytes]:
    names = ["stats.json"] + [p.name for p in sorted(out_dir.glob("part-*.jsonl"))]
    return {name: (out_dir / name).read_bytes() for name in names}


# ---------------------------------------------------------------------------
# run_pipeline
# ---------------------------------------------------------------------------

def test_full_run_accounting(corpus, tmp_path):
    out_dir = tmp_path / "out"
    stats = run_pipeline(corpus_config(corpus, out_dir))
    assert [s.stage_name for s in stats] == list(STAGE_NAMES)
    by_name = {s.stage_name: s for s in stats}

    assert by_name["prefilter"].docs_in == RESPONSE_RECORDS
    for name, reasons in EXPECTED_REASONS.items():
        assert by_name[name].removal_reasons == reasons, name
    for s in stats:
        assert s.docs_out == s.docs_in - sum(s.removal_reasons.values())
    # each stage consumes exactly what the previous one produced
    for prev, cur in zip(stats, stats[1:]):
        assert cur.docs_in == prev.docs_out
    assert by_name["line_trim"].docs_out == FINAL_DOCS

    report = json.loads((out_dir / "stats.json").read_text(encoding="utf-8"))
    assert report["schema_version"] == "1"
    assert report["global"]["doc_kept_rate"] == FINAL_DOCS / RESPONSE_RECORDS
    assert report["io"] == {
        "archives": 1, "failed_archives": 0, "corrupt_records": 1, "skipped_records": 1,
    }
    assert "timestamp" not in json.dumps(report)

    # the dedup input is always persisted; 7 documents reach it
    stage6 = out_dir / "intermediate" / "stage6_fineweb.jsonl"
    assert len(stage6.read_text(encoding="utf-8").splitlines()) == 7

    docs = read_output_docs(out_dir)
    assert len(docs) == FINAL_DOCS
    # survivors are sharded by id, text intact after the whole cascade
    for path in out_dir.glob("part-*.jsonl"):
        shard = int(path.stem.split("-")[1])
        for doc in read_documents_jsonl(path):
            assert shard_index(doc.id, 2) == shard
    night_market = "\n".join(KEEPERS["night-market"])
    assert night_market in docs.values()


def test_rerun_is_byte_identical(corpus, tmp_path):
    out_dir = tmp_path / "out"
    run_pipeline(corpus_config(corpus, out_dir))
    first = output_bytes(out_dir)
    run_pipeline(corpus_config(corpus, out_dir))
    assert output_bytes(out_dir) == first


def test_worker_count_does_not_change_output(corpus, tmp_path):
    serial_dir = tmp_path / "serial"
    parallel_dir = tmp_path / "parallel"
    run_pipeline(corpus_config(corpus, serial_dir, worker_count=1))
    run_pipeline(corpus_config(corpus, parallel_dir, worker_count=4))
    serial = output_bytes(serial_dir)
    parallel = output_bytes(parallel_dir)
    assert serial == parallel


def test_persist_stages_artifacts(corpus, tmp_path):
    out_dir = tmp_path / "out"
    run_pipeline(corpus_config(corpus, out_dir, persist_stages=True))
    inter = out_dir / "intermediate"
    line_counts = {
        "stage1_prefilter.jsonl": 13,
        "stage2_extract.jsonl": 13,
        "stage3_langid.jsonl": 10,
        "stage4_gopher.jsonl": 9,
        "stage5_c4.jsonl": 8,
        "stage6_fineweb.jsonl": 7,
        "stage7_minhash.jsonl": 6,
    }
    for name, expected in line_counts.items():
        lines = (inter / name).read_text(encoding="utf-8").splitlines()
        assert len(lines) == expected, name
    params, entries = read_signature_shard(inter / "signatures.mhsg")
    assert params.num_permutations == 112
    assert len(entries) == 7  # every dedup input document got a signature


def test_failed_archive_is_contained(corpus, tmp_path):
    archive, blocklist = corpus
    junk = tmp_path / "junk.warc.gz"
    junk.write_bytes(b"\x1f\x8b" + b"corrupt beyond the gzip magic")
    config = corpus_config(corpus, tmp_path / "out")
    config.input_paths = [str(junk), str(archive)]
    stats = run_pipeline(config)
    assert {s.stage_name: s.docs_out for s in stats}["line_trim"] == FINAL_DOCS
    report = json.loads((tmp_path / "out" / "stats.json").read_text(encoding="utf-8"))
    assert report["io"]["archives"] == 2
    assert report["io"]["failed_archives"] == 1


def test_empty_run_reports_unit_rates(corpus, tmp_path):
    archive = tmp_path / "empty.warc.gz"
    write_gzip_archive(archive, [
        warc_record("request", "http://example.tw/req", b"GET / HTTP/1.1\r\n\r\n",
                    warc_type="request"),
    ])
    config = corpus_config(corpus, tmp_path / "out")
    config.input_paths = [str(archive)]
    stats = run_pipeline(config)
    assert all(s.docs_in == 0 for s in stats)
    report = json.loads((tmp_path / "out" / "stats.json").read_text(encoding="utf-8"))
    assert report["global"] == {"doc_kept_rate": 1.0, "byte_kept_rate": 1.0}
    assert report["io"]["skipped_records"] == 1
    assert (tmp_path / "out" / "part-00000.jsonl").read_text(encoding="utf-8") == ""


def test_rerun_clears_stale_shards(corpus, tmp_path):
    out_dir = tmp_path / "out"
    run_pipeline(corpus_config(corpus, out_dir))  # shard_count=2
    assert (out_dir / "part-00001.jsonl").exists()
    run_pipeline(corpus_config(corpus, out_dir, shard_count=1))
    assert not (out_dir / "part-00001.jsonl").exists()
    assert len(read_output_docs(out_dir)) == FINAL_DOCS


def test_single_stages_compose_to_full_run(corpus, tmp_path):
    out_dir = tmp_path / "out"
    run_pipeline(corpus_config(corpus, out_dir))
    pipeline_docs = read_output_docs(out_dir)

    config = corpus_config(corpus, tmp_path / "unused")
    archive, _ = corpus
    current = Path(archive)
    stage_stats = {}
    for i, name in enumerate(STAGE_NAMES):
        next_path = tmp_path / f"chain{i}_{name}.jsonl"
        stage_stats[name] = run_single_stage(name, current, next_path, config)
        current = next_path
    chained_docs = {doc.id: doc.text for doc in read_documents_jsonl(current)}
    assert chained_docs == pipeline_docs
    for name, stats in stage_stats.items():
        assert stats.removal_reasons == EXPECTED_REASONS[name], name


def test_single_stage_rejects_unknown_name(corpus, tmp_path):
    config = corpus_config(corpus, tmp_path / "out")
    with pytest.raises(ValueError, match="unknown stage"):
        run_single_stage("tokenize", tmp_path / "in.jsonl", tmp_path / "out.jsonl", config)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def test_validate_collects_all_problems(tmp_path):
    config = PipelineConfig(
        input_paths=[str(tmp_path / "missing.warc.gz")],
        blocklist_path=str(tmp_path / "missing-blocklist.txt"),
        worker_count=0,
    )
    with pytest.raises(ConfigInvalid) as exc_info:
        config.validate()
    problems = exc_info.value.problems
    assert len(problems) == 3
    assert any("input path" in p for p in problems)
    assert any("blocklist_path" in p for p in problems)
    assert any("worker_count" in p for p in problems)


def test_validate_require_inputs_flag():
    config = PipelineConfig()
    with pytest.raises(ConfigInvalid, match="no input paths"):
        config.validate()
    config.validate(require_inputs=False)


def test_parse_config_file(tmp_path):
    path = tmp_path / "pipeline.conf"
    path.write_text(
        "# full corpus settings\n"
        "\n"
        "worker_count = 4\n"
        "persist_stages = yes\n"
        "ellipsis_forms = …, ...\n"
        "language_threshold = 0.7  # stricter than default\n",
        encoding="utf-8",
    )
    values = parse_config_file(path)
    assert values == {
        "worker_count": 4,
        "persist_stages": True,
        "ellipsis_forms": ["…", "..."],
        "language_threshold": 0.7,
    }


def test_parse_config_file_reports_lines(tmp_path):
    path = tmp_path / "bad.conf"
    path.write_text(
        "mystery_key = 1\nworker_count four\nlanguage_threshold = abc\n",
        encoding="utf-8",
    )
    with pytest.raises(ConfigInvalid) as exc_info:
        parse_config_file(path)
    message = str(exc_info.value)
    assert f"{path}:1: unknown key" in message
    assert f"{path}:2: expected 'key = value'" in message
    assert f"{path}:3: bad value for language_threshold" in message


def test_config_precedence(tmp_path):
    conf = tmp_path / "pipeline.conf"
    conf.write_text("worker_count = 2\noutput_dir = from-file\n", encoding="utf-8")
    assert config_from_sources(conf, {}, env={}).worker_count == 2
    env = {"HANTWEB_WORKER_COUNT": "3", "HANTWEB_OUTPUT_DIR": "from-env"}
    merged = config_from_sources(conf, {}, env=env)
    assert merged.worker_count == 3
    assert merged.output_dir == "from-env"
    flagged = config_from_sources(conf, {"worker_count": 5}, env=env)
    assert flagged.worker_count == 5


def test_config_bad_env_value():
    with pytest.raises(ConfigInvalid, match="HANTWEB_WORKER_COUNT"):
        config_from_sources(None, {}, env={"HANTWEB_WORKER_COUNT": "three"})


def test_config_unknown_override():
    with pytest.raises(ConfigInvalid, match="unknown config fields"):
        config_from_sources(None, {"min_wordz": 5}, env={})


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_run(corpus, tmp_path, capsys):
    archive, blocklist = corpus
    out_dir = tmp_path / "out"
    code = cli_main([
        "run", str(archive),
        "--output", str(out_dir),
        "--blocklist-path", str(blocklist),
        "--shard-count", "2",
    ])
    assert code == 0
    captured = capsys.readouterr()
    assert "global doc kept rate:  0.400000" in captured.out
    assert (out_dir / "stats.json").exists()
    assert len(read_output_docs(out_dir)) == FINAL_DOCS


def test_cli_config_error_creates_nothing(corpus, tmp_path, capsys):
    archive, _ = corpus
    out_dir = tmp_path / "never-created"
    code = cli_main([
        "run", str(archive),
        "--output", str(out_dir),
        "--blocklist-path", str(tmp_path / "missing-blocklist.txt"),
    ])
    assert code == 1
    assert "blocklist_path does not exist" in capsys.readouterr().err
    assert not out_dir.exists()


def test_cli_runtime_error_reports_partial_output(corpus, tmp_path, capsys):
    archive, blocklist = corpus
    collision = tmp_path / "occupied"
    collision.write_text("a file, not a directory", encoding="utf-8")
    code = cli_main([
        "run", str(archive),
        "--output", str(collision),
        "--blocklist-path", str(blocklist),
    ])
    assert code == 2
    assert "output files may be partial" in capsys.readouterr().err


def test_cli_stats_renders_report(corpus, tmp_path, capsys):
    out_dir = tmp_path / "out"
    run_pipeline(corpus_config(corpus, out_dir))
    capsys.readouterr()
    assert cli_main(["stats", str(out_dir)]) == 0
    table = capsys.readouterr().out
    for name in STAGE_NAMES:
        assert name in table
    assert "UrlBlocked" in table

    assert cli_main(["stats", str(tmp_path / "nowhere")]) == 1


def test_cli_stage_matches_direct_filtering(tmp_path, capsys):
    long_text = "\n".join(KEEPERS["tea"])
    docs = [
        Document(id="keep", url="http://example.tw/a", date="2024", text=long_text),
        Document(id="drop", url="http://example.tw/b", date="2024", text="太短的文字。"),
    ]
    in_path = tmp_path / "in.jsonl"
    write_documents_jsonl(docs, in_path)
    out_path = tmp_path / "out.jsonl"
    stats_path = tmp_path / "stage-stats.json"
    code = cli_main([
        "stage", "gopher",
        "--in", str(in_path), "--out", str(out_path),
        "--stats-out", str(stats_path),
    ])
    assert code == 0
    assert "gopher: 2 in, 1 out (1 removed)" in capsys.readouterr().out
    survivors = list(read_documents_jsonl(out_path))
    assert [doc.id for doc in survivors] == ["keep"]
    payload = json.loads(stats_path.read_text(encoding="utf-8"))
    assert payload["docs_in"] == 2
    assert payload["removal_reasons"] == {"TooShort": 1}


def test_cli_stage_missing_input(tmp_path):
    code = cli_main([
        "stage", "gopher",
        "--in", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path / "out.jsonl"),
    ])
    assert code == 1


def test_cli_sample_with_prompts(corpus, tmp_path, capsys):
    out_dir = tmp_path / "out"
    run_pipeline(corpus_config(corpus, out_dir))
    shards = sorted(str(p) for p in out_dir.glob("part-*.jsonl"))
    sampled_path = tmp_path / "sampled.jsonl"
    prompts_path = tmp_path / "prompts.jsonl"
    code = cli_main([
        "sample", *shards,
        "--out", str(sampled_path),
        "-n", "3", "--seed", "7",
        "--prompts", str(prompts_path),
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "sampled 3 documents" in out
    sampled = list(read_documents_jsonl(sampled_path))
    assert len(sampled) == 3
    prompts = [json.loads(line) for line in prompts_path.read_text(encoding="utf-8").splitlines()]
    assert [p["doc_id"] for p in prompts] == [doc.id for doc in sampled]
    for doc, prompt in zip(sampled, prompts):
        assert doc.text in prompt["prompt"]
