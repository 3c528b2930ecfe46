"""Judge-scoring flow: rubric prompt, response parsing, stage comparison.

Renders the packaged rubric for one document, parses a few simulated judge
responses (including one that states a wrong total and one that cannot be
parsed), then compares two pipeline variants with Welch t-tests.

    python3 demos/judge_scoring.py
"""
from __future__ import annotations

import random

from hantweb.corpus_io import Document
from hantweb.evaluation import (
    ScoreCard,
    UnparsableResponse,
    compare_stages,
    parse_scores,
    render_comparison_table,
    render_rubric_prompt,
)

RESPONSES = {
    "clean": "1. 繁體中文與語言自然性：4\n2. 教育價值：3\n3. 敏感內容：5\n總分：12",
    "fullwidth": "１．繁體中文與語言自然性：４分\n２．教育價值：５分\n３．敏感內容：５分\n總分：１４",
    "wrong total": "- 1. 繁體中文與語言自然性: 2\n- 2. 教育價值: 2\n- 3. 敏感內容: 4\n總分：15",
    "prose only": "這篇文章寫得還不錯，大致上通順，值得一讀。",
}


def synthetic_cards(rng: random.Random, stage: str, n: int, lift: int) -> list[ScoreCard]:
    cards = []
    for i in range(n):
        a = min(5, rng.randint(2, 4) + lift)
        b = min(5, rng.randint(1, 4) + lift)
        c = rng.randint(3, 5)
        cards.append(ScoreCard(doc_id=f"{stage}-{i:03d}", naturalness=a,
                               educational=b, sensitivity=c, total=a + b + c))
    return cards


def main() -> None:
    doc = Document(id="sample", url="http://example.tw/", date="2024",
                   text="夜市裡的小吃攤位一到傍晚便陸續點起燈火。")
    prompt = render_rubric_prompt(doc)
    print("rendered prompt tail:")
    for line in prompt.splitlines()[-6:]:
        print(f"  {line}")
    print()

    for name, response in RESPONSES.items():
        try:
            card = parse_scores(response, name)
        except UnparsableResponse as exc:
            print(f"{name:<12} -> unparsable ({exc})")
        else:
            print(f"{name:<12} -> naturalness {card.naturalness}, "
                  f"educational {card.educational}, sensitivity {card.sensitivity}, "
                  f"total {card.total}")
    print()

    rng = random.Random(11)
    report = compare_stages({
        "langid_only": synthetic_cards(rng, "langid_only", 40, lift=0),
        "full_pipeline": synthetic_cards(rng, "full_pipeline", 40, lift=1),
    })
    print(render_comparison_table(report))


if __name__ == "__main__":
    main()
