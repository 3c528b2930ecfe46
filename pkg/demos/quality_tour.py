"""Walk some crafted documents through the three quality gates.

Shows which rule fires first and the measured metric value, so the fixed
rule order inside each gate is visible.

    python3 demos/quality_tour.py
"""
from __future__ import annotations

from hantweb.corpus_io import Document
from hantweb.quality import QualityConfig, c4_document_filter, fineweb_filter, gopher_filter

CFG = QualityConfig()

SAMPLES = {
    "prose that passes": "\n".join([
        "夜市裡的小吃攤位一到傍晚便陸續點起燈火。",
        "蚵仔煎與臭豆腐的香味混在溫熱的空氣裡。",
        "攤販吆喝聲和遊客的笑語此起彼落。",
    ]),
    "too short": "這頁的內容太少。",
    "symbol heavy": "的" * 60 + "#" * 12,
    "ellipsis endings": "\n".join(
        [f"第{ch}段的內容還沒有寫完……" for ch in "一二三四"]
        + [f"第{ch}段的內容已經完成了。" for ch in "五六七八九十"]
    ),
    "bracket noise": "\n".join(
        [f"第{ch}段的正文寫得相當完整也相當流暢通順。" for ch in "一二三"]
        + ["這段文字（（（（（（夾雜（（（（了太多（（（（（括號。"]
    ),
    "unpunctuated lines": "\n".join(
        f"第{ch}行的內容沒有任何結尾標點符號" for ch in "一二三四五六七八九十"
    ),
    "repeated line": "\n".join(
        ["每一頁都重複出現的同一句宣傳標語在這裡。"] * 4
        + [f"只出現一次的第{ch}句正文內容填在這裡。" for ch in "一二三"]
    ),
}


def describe(name: str, text: str) -> None:
    doc = Document(id=name, url="http://example.tw/", date="2024", text=text)
    for gate, result in (
        ("gopher", gopher_filter(doc, CFG)),
        ("c4", c4_document_filter(doc, CFG)[0]),
        ("fineweb", fineweb_filter(doc, CFG)),
    ):
        if not result.keep:
            value = "" if result.metric_value is None else f" (metric {result.metric_value:.3f})"
            print(f"{name:<22} removed at {gate}: {result.reason.value}{value}")
            return
    print(f"{name:<22} kept by all three gates")


def main() -> None:
    for name, text in SAMPLES.items():
        describe(name, text)


if __name__ == "__main__":
    main()
