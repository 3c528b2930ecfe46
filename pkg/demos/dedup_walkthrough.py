"""Near-duplicate detection from shingles to clusters, step by step.

Shows how signature agreement tracks exact Jaccard similarity, how band
keys turn similarity into hash collisions, and how the frequent-line table
strips shared boilerplate edges from survivors.

    python3 demos/dedup_walkthrough.py
"""
from __future__ import annotations

from hantweb.corpus_io import Document
from hantweb.dedup import (
    LineFrequencyTable,
    MinhashParams,
    cluster_and_select,
    lsh_bucket_keys,
    minhash_signature,
    shingles,
    signature_agreement,
    trim_frequent_lines,
)

PARAMS = MinhashParams()

ORIGINAL = (
    "新的捷運路線預計在明年春天通車，沿線共設有八個車站。"
    "通車初期將以尖峰六分鐘一班的頻率行駛，離峰時段約十分鐘一班。"
    "車站周邊的自行車停放空間也一併擴建完成，方便轉乘的旅客。"
)
RETOUCHED = ORIGINAL.replace("方便轉乘的旅客", "讓轉乘的旅客更方便")
UNRELATED = (
    "高山茶園的清晨總是籠罩著一層薄霧，採茶的工人揹著竹簍緩緩移動。"
    "新摘的茶菁要在日光下靜置萎凋數小時，焙火深淺決定香氣走向。"
)


def jaccard(a: set[str], b: set[str]) -> float:
    return len(a & b) / len(a | b)


def main() -> None:
    texts = {"original": ORIGINAL, "retouched": RETOUCHED, "unrelated": UNRELATED}
    shingle_sets = {name: shingles(text, PARAMS.shingle_size) for name, text in texts.items()}
    sigs = {name: minhash_signature(s, PARAMS) for name, s in shingle_sets.items()}

    print(f"{PARAMS.num_permutations} permutations, "
          f"{PARAMS.num_bands} bands x {PARAMS.rows_per_band} rows\n")
    for name, s in shingle_sets.items():
        print(f"{name:<10} {len(s):>4} shingles")
    print()
    for a, b in (("original", "retouched"), ("original", "unrelated")):
        exact = jaccard(shingle_sets[a], shingle_sets[b])
        estimate = signature_agreement(sigs[a], sigs[b])
        shared = len(set(lsh_bucket_keys(sigs[a], PARAMS))
                     & set(lsh_bucket_keys(sigs[b], PARAMS)))
        print(f"{a} vs {b}: exact Jaccard {exact:.3f}, "
              f"signature agreement {estimate:.3f}, shared bands {shared}/{PARAMS.num_bands}")

    candidates = [
        (name, lsh_bucket_keys(sig, PARAMS)) for name, sig in sorted(sigs.items())
    ]
    removed = cluster_and_select(candidates)
    print(f"\nmarked for removal: {sorted(removed)} "
          f"(the lexicographically smallest cluster member survives)\n")

    nav = "網站導覽首頁最新消息"
    table = LineFrequencyTable()
    docs = []
    for i in range(120):
        doc = Document(id=f"doc-{i:03d}", url="http://example.tw/", date="2024",
                       text="\n".join([nav, f"第{i}頁各自不同的正文內容。"]))
        table.add_text(doc.text)
        docs.append(doc)
    trimmed = trim_frequent_lines(docs[0], table, threshold=100)
    print(f"boilerplate line seen {table.count(nav)} times (threshold 100):")
    print(f"  before: {docs[0].text.splitlines()}")
    print(f"  after:  {trimmed.text.splitlines()}")


if __name__ == "__main__":
    main()
