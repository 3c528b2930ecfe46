"""Regenerate the committed golden fixture under tests/data/.

Produces a deterministic ~40-page WARC archive that exercises every removal
reason at least once, plus the blocklist, config, and reference stats.json
for the fixture run. The archive uses one gzip member per record with mtime
pinned to zero, so regeneration is byte-stable for a given Python build.

Run from the repository root:

    python3 tools/make_golden_fixture.py

The script validates its own output: it screens every surviving text against
the packaged simplified-exclusive character list, runs the full pipeline
twice (worker counts 1 and 4), and asserts the stage-by-stage accounting
before overwriting anything under tests/data/.
"""
from __future__ import annotations

import json
import random
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from warc_builder import http_block, page_record, warc_record, write_gzip_archive

from hantweb.config import config_from_sources
from hantweb.pipeline import run_pipeline
from hantweb.resources import load_entries, packaged_data_path

DATA_DIR = REPO / "tests" / "data"

# Traditional-safe character pool for generated filler prose. Deliberately
# avoids every packaged stop word so the no-stop-word page can draw from the
# same pool; pages that should read as prose get a stop word inserted.
ALPHABET = (
    "中文字內容資料網頁書報讀寫語言學習歷史地理山川河海天氣風雨雲晴朝夕"
    "春秋冬夏花草樹木鳥魚蟲獸菜飯茶酒街市城鄉村里路橋燈光影色聲香味觸法"
    "願想念思情愛敬謝禮樂詩歌畫圖形體手足耳目口鼻心肝膽肺頭頸肩背胸腹強"
    "弱高低長短大小多少寬窄深淺新舊好"
)

# Boilerplate lines shared by every keeper page. They survive to the trim
# stage on 18 documents, above the fixture's threshold of 15, so the trim
# stage has real work to do in the golden stats.
HOT_NAV = "首頁導覽列最新消息專欄"
HOT_FOOT = "版權所有轉載請註明出處"

KEEPER_HAND = {
    "market": [
        "夜市裡的小吃攤位一到傍晚便陸續點起燈火。",
        "蚵仔煎與臭豆腐的香味混在溫熱的空氣裡。",
        "攤販吆喝聲和遊客的笑語此起彼落。",
        "走到巷尾還有一攤賣著古早味的紅茶。",
    ],
    "hiking": [
        "清晨的登山步道鋪著前夜落下的細雨。",
        "沿途的相思樹林間偶爾傳來五色鳥的叫聲。",
        "接近稜線時視野逐漸開闊，能望見遠方的海岸。",
        "山頂的涼亭裡已經有幾位早起的山友在泡茶。",
    ],
    "tea": [
        "高山茶園的清晨總是籠罩著一層薄霧。",
        "採茶的工人揹著竹簍沿著等高線緩緩移動。",
        "新摘的茶菁要在日光下靜置萎凋數小時。",
        "焙火的深淺決定了茶湯最後的香氣走向。",
    ],
    "library": [
        "圖書館三樓的閱覽室靠窗的位置最搶手。",
        "午後的陽光斜斜落在攤開的書頁上。",
        "管理員推著還書車在書架間安靜地穿行。",
        "閉館的音樂響起時總有人依依不捨地合上書。",
    ],
    "harbor": [
        "漁港的清晨五點就開始了一天的喧鬧。",
        "卸貨的工人把整箱的漁獲搬上碼頭。",
        "拍賣員的鈴聲一響，圍觀的人群立刻安靜下來。",
        "遠處的燈塔在濛濛亮的天色裡忽明忽滅。",
    ],
}

DUP_BASES = {
    "rail": [
        "新的捷運路線預計在明年春天通車。",
        "沿線共設有八個車站，其中兩個是轉乘站。",
        "通車初期將以尖峰六分鐘一班的頻率行駛。",
        "車站周邊的自行車停放空間也一併擴建完成。",
    ],
    "museum": [
        "美術館本季的特展以河流與城市為主題。",
        "展場入口處懸掛著一幅巨大的水墨長卷。",
        "策展人將老照片與當代裝置並置在同一展間。",
        "展期只到月底，假日時段建議提前預約。",
    ],
    "recipe": [
        "滷肉飯的靈魂在於那鍋慢火熬煮的肉燥。",
        "豬肉要切成小丁而不是絞碎，口感才有層次。",
        "加入紅蔥頭酥之後轉小火，讓醬汁慢慢收濃。",
        "起鍋前淋一匙米酒，香氣會更加飽滿。",
    ],
}

ENGLISH_PAGE = [
    "The quarterly report shows steady growth across all regions.",
    "Management expects the trend to continue through the year.",
]

NUMBERS_PAGE = [
    "2024-03-01 09:30 101.5 +0.7",
    "2024-03-01 10:30 102.1 +0.6",
    "2024-03-01 11:30 101.9 -0.2",
]

JAPANESE_PAGE = [
    "これはテスト用のページです。今日の天気はとても良いですね。",
    "データの処理についてこれから詳しく説明します。",
]

# The hanja run keeps this page past the fuzzy CJK screen so the language
# stage is the one to reject it.
KOREAN_PAGE = [
    "한국어 페이지입니다. 오늘 날씨가 좋습니다.",
    "대한민국역사박물관(大韓民國歷史博物館)을 소개합니다.",
    "데이터 처리 과정을 지금부터 설명합니다.",
]

SIMPLIFIED_PAGE = [
    "这是一个简体中文的测试页面，我们讨论数据处理的流程。",
    "网络上的内容需要经过清理才能使用，简体字的比例很高。",
]

PHRASE_PAGE = [
    "請先下載我們提供的軟件，完成安裝之後重新啟動電腦。",
    "若在使用過程中遇到任何問題，歡迎聯絡客服人員詢問。",
]


def soup_line(rng: random.Random, length: int) -> str:
    return "".join(rng.choice(ALPHABET) for _ in range(length)) + "。"


def soup_page(rng: random.Random, lines: int = 4, with_stop: bool = True) -> list[str]:
    page = [soup_line(rng, rng.randint(22, 30)) for _ in range(lines)]
    if with_stop:
        page[0] = "的" + page[0]
    return page


def html(paragraphs: list[str]) -> str:
    return "<html><body>" + "".join(f"<p>{p}</p>" for p in paragraphs) + "</body></html>"


def keeper_html(paragraphs: list[str]) -> str:
    return html([HOT_NAV, *paragraphs, HOT_FOOT])


def build_records(rng: random.Random) -> list[bytes]:
    records: list[bytes] = []

    # 13 generated + 5 hand-written keepers, all framed by the hot lines.
    for i in range(13):
        records.append(
            page_record(
                f"keep-gen-{i:02d}",
                f"http://news.golden.example/art/{i:02d}",
                keeper_html(soup_page(rng)),
            )
        )
    for name, paragraphs in KEEPER_HAND.items():
        if name == "harbor":
            records.append(
                page_record(
                    "keep-harbor", "http://port.golden.example/harbor",
                    keeper_html(paragraphs), charset="big5", declared="big5",
                )
            )
        else:
            records.append(
                page_record(
                    f"keep-{name}", f"http://life.golden.example/{name}",
                    keeper_html(paragraphs),
                )
            )

    # Three near-duplicate pairs: the copy differs by one trailing character,
    # well above the banding threshold, and the smaller id survives.
    for name, paragraphs in DUP_BASES.items():
        mutated = paragraphs[:-1] + [paragraphs[-1][:-1] + "呀。"]
        records.append(
            page_record(f"dup-{name}-1", f"http://blog.golden.example/{name}", html(paragraphs))
        )
        records.append(
            page_record(f"dup-{name}-2", f"http://mirror.golden.example/{name}", html(mutated))
        )

    # Prefilter removals: two blocked URLs, two pages with no CJK run.
    records.append(
        page_record("blk-host", "http://ads.golden.test/banner", html(soup_page(rng)))
    )
    records.append(
        page_record(
            "blk-sub", "http://games.golden.example/casino/jackpot", html(soup_page(rng))
        )
    )
    records.append(page_record("nocjk-en", "http://en.golden.example/report", html(ENGLISH_PAGE)))
    records.append(page_record("nocjk-num", "http://tick.golden.example/feed", html(NUMBERS_PAGE)))

    # Language stage removals.
    records.append(page_record("lang-ja", "http://jp.golden.example/page", html(JAPANESE_PAGE)))
    records.append(page_record("lang-ko", "http://kr.golden.example/page", html(KOREAN_PAGE)))
    records.append(page_record("lang-simp", "http://cn.golden.example/page", html(SIMPLIFIED_PAGE)))
    records.append(page_record("lang-phrase", "http://dl.golden.example/app", html(PHRASE_PAGE)))

    # Document-shape removals, one per rule.
    records.append(
        page_record("shape-short", "http://tiny.golden.example/p", html(["這頁的內容太少。"]))
    )
    records.append(
        page_record(
            "shape-long", "http://huge.golden.example/p", html(["的中文字內容" * 20000])
        )
    )
    records.append(
        page_record(
            "shape-symbol", "http://tag.golden.example/p",
            html(soup_page(rng, lines=2) + ["#" * 15]),
        )
    )
    ellipsis_lines = [soup_line(rng, 20) for _ in range(10)]
    for i in (0, 3, 6, 9):
        ellipsis_lines[i] = ellipsis_lines[i][:-1] + "……"
    ellipsis_lines[1] = "的" + ellipsis_lines[1]
    records.append(
        page_record("shape-ellipsis", "http://dots.golden.example/p", html(ellipsis_lines))
    )
    records.append(
        page_record(
            "shape-nostop", "http://flat.golden.example/p",
            html(soup_page(rng, lines=5, with_stop=False)),
        )
    )

    # Bracket-heavy page, removed at the line-rule stage's document gate.
    records.append(
        page_record(
            "brackets", "http://deco.golden.example/p",
            html(soup_page(rng) + ["（（（（（（（特別（（（注意（（（（。"]),
        )
    )

    # Line-shape removals, one per rule, in rule order.
    records.append(
        page_record(
            "lines-punct", "http://raw.golden.example/p",
            html(["的" + soup_line(rng, 24)[:-1] for _ in range(10)]),
        )
    )
    short_lines = ["的" + soup_line(rng, 7) for _ in range(9)]  # 9 codepoints each
    records.append(
        page_record(
            "lines-short", "http://stub.golden.example/p",
            html(short_lines + ["的" + soup_line(rng, 24)]),
        )
    )
    hot = soup_line(rng, 39)
    fillers = [soup_line(rng, 27) for _ in range(6)]
    fillers[0] = "的" + fillers[0][1:]
    records.append(
        page_record("lines-dup", "http://echo.golden.example/p", html([hot] * 4 + fillers))
    )
    # The leading all-CJK line carries the page past the prefilter run
    # check; the sixty one-word list lines push newlines far over words.
    records.append(
        page_record(
            "lines-newline", "http://list.golden.example/p",
            html(["的中文字內容資料網頁。"] + [f"的{10000000 + i}。" for i in range(60)]),
        )
    )

    # Counted by io stats but never staged: a record with no Content-Length,
    # a request, and a metadata record.
    records.append(
        warc_record(
            "io-corrupt", "http://bad.golden.example/p",
            http_block("<p>中文中文中文中文中文</p>".encode("utf-8")),
            omit=("Content-Length",),
        )
    )
    records.append(
        warc_record("io-request", "http://req.golden.example/p",
                    b"GET / HTTP/1.1\r\n\r\n", warc_type="request")
    )
    records.append(
        warc_record("io-meta", "http://meta.golden.example/p",
                    b"fetchTimeMs: 120\r\n", warc_type="metadata")
    )
    return records


BLOCKLIST = """\
# fixture blocklist: one entry of each kind
host:ads.golden.test
suffix:.tracker.golden.example
sub:/casino/
"""

CONFIG = """\
# knobs for the golden fixture run; paths are supplied by the caller
shard_count = 2
line_trim_threshold = 15
worker_count = 1
"""

EXPECTED_REASONS = {
    "prefilter": {"UrlBlocked": 2, "NoCjkRun": 2},
    "extract": {},
    "langid": {"LowLangConfidence": 2, "SimplifiedScript": 1, "BlockedPhrase": 1},
    "gopher": {"TooShort": 1, "TooLong": 1, "SymbolRatio": 1,
               "EllipsisLines": 1, "NoStopWords": 1},
    "c4": {"BracketRatio": 1},
    "fineweb": {"LinePunctRatio": 1, "ShortLineRatio": 1,
                "CharDupRatio": 1, "NewLineRatio": 1},
    "minhash": {"Duplicate": 3},
    "line_trim": {},
}
DOCS_IN = 42
DOCS_OUT = 21


def screen_texts(records_html: list[str]) -> None:
    simplified = set(load_entries(packaged_data_path("simplified_exclusive.txt")))
    hits = {ch for page in records_html for ch in page if ch in simplified}
    if hits:
        raise SystemExit(f"simplified-exclusive characters in keeper text: {hits}")


def run_once(archive: Path, blocklist: Path, config: Path, out_dir: Path, workers: int) -> dict:
    cfg = config_from_sources(
        file_path=config,
        env={},
        overrides={
            "input_paths": [str(archive)],
            "blocklist_path": str(blocklist),
            "output_dir": str(out_dir),
            "worker_count": workers,
        },
    )
    run_pipeline(cfg)
    return json.loads((out_dir / "stats.json").read_text(encoding="utf-8"))


def main() -> None:
    rng = random.Random(20240301)
    records = build_records(rng)

    keeper_pages = [HOT_NAV, HOT_FOOT]
    keeper_pages += [line for page in KEEPER_HAND.values() for line in page]
    keeper_pages += [line for page in DUP_BASES.values() for line in page]
    screen_texts(keeper_pages)

    DATA_DIR.mkdir(parents=True, exist_ok=True)
    archive = DATA_DIR / "golden.warc.gz"
    blocklist = DATA_DIR / "golden_blocklist.txt"
    config = DATA_DIR / "golden.conf"
    write_gzip_archive(archive, records)
    blocklist.write_text(BLOCKLIST, encoding="utf-8")
    config.write_text(CONFIG, encoding="utf-8")

    with tempfile.TemporaryDirectory() as tmp:
        out_a = Path(tmp) / "run-a"
        out_b = Path(tmp) / "run-b"
        report = run_once(archive, blocklist, config, out_a, workers=1)
        run_once(archive, blocklist, config, out_b, workers=4)

        stats_a = (out_a / "stats.json").read_bytes()
        stats_b = (out_b / "stats.json").read_bytes()
        if stats_a != stats_b:
            raise SystemExit("stats.json differs between worker counts 1 and 4")

        stages = {s["stage_name"]: s for s in report["stages"]}
        for stage, reasons in EXPECTED_REASONS.items():
            got = stages[stage]["removal_reasons"]
            if got != reasons:
                raise SystemExit(f"{stage}: expected {reasons}, got {got}")
        if stages["prefilter"]["docs_in"] != DOCS_IN:
            raise SystemExit(f"docs_in {stages['prefilter']['docs_in']} != {DOCS_IN}")
        if stages["line_trim"]["docs_out"] != DOCS_OUT:
            raise SystemExit(f"docs_out {stages['line_trim']['docs_out']} != {DOCS_OUT}")
        trim = stages["line_trim"]
        if trim["bytes_out"] >= trim["bytes_in"]:
            raise SystemExit("line trim removed no bytes")

        (DATA_DIR / "golden_stats.json").write_bytes(stats_a)

    print(f"wrote {archive} ({archive.stat().st_size} bytes, {len(records)} records)")
    print(f"docs: {DOCS_IN} in, {DOCS_OUT} out")
    for stage, reasons in EXPECTED_REASONS.items():
        if reasons:
            print(f"  {stage}: {reasons}")


if __name__ == "__main__":
    main()
