"""Near-duplicate removal (minhash + LSH banding) and frequent-line trimming.

The minhash scheme, fixed for reproducibility:

* shingles are codepoint n-grams (default n=5) over the text with
  whitespace runs collapsed to single spaces; character shingles are the
  standard adaptation for unsegmented Chinese;
* each shingle gets one 64-bit base hash (blake2b, 8-byte digest);
* hash function i is ``mix64(base ^ c_i)`` where the ``c_i`` come from a
  splitmix64 stream seeded by ``hash_seed`` and mix64 is the splitmix64
  finalizer. All arithmetic is uint64 with wraparound, vectorized in numpy;
* the signature is the per-function minimum over shingles.

Coordinate agreement between two signatures is then an unbiased estimator
of the Jaccard similarity of the shingle sets, and banding turns "high
agreement" into "shared bucket key" for candidate generation.
"""
from __future__ import annotations

import hashlib
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .corpus_io import Document

_WS_RUN = re.compile(r"\s+")

_SHARD_MAGIC = b"MHSG"
_SHARD_VERSION = 1

# splitmix64 constants
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)
_SHIFT_30 = np.uint64(30)
_SHIFT_27 = np.uint64(27)
_SHIFT_31 = np.uint64(31)

_U64 = np.uint64
_MASK64 = (1 << 64) - 1


class EmptyShingleSet(Exception):
    """No shingles to hash; the document is treated as unique downstream."""


@dataclass(frozen=True)
class MinhashParams:
    shingle_size: int = 5
    num_permutations: int = 112
    num_bands: int = 14
    rows_per_band: int = 8
    hash_seed: int = 0

    def __post_init__(self) -> None:
        if self.shingle_size < 1:
            raise ValueError(f"shingle_size must be >= 1, got {self.shingle_size}")
        if self.num_bands * self.rows_per_band != self.num_permutations:
            raise ValueError(
                f"num_bands*rows_per_band must equal num_permutations: "
                f"{self.num_bands}*{self.rows_per_band} != {self.num_permutations}"
            )


@dataclass(frozen=True)
class MinhashSignature:
    values: tuple[int, ...]  # num_permutations uint64 values

    def __len__(self) -> int:
        return len(self.values)


def shingles(text: str, n: int = 5) -> set[str]:
    """All length-n codepoint substrings after whitespace collapsing.

    Text shorter than n yields the whole normalized text as a singleton,
    or the empty set if nothing is left.
    """
    normalized = _WS_RUN.sub(" ", text).strip()
    if not normalized:
        return set()
    if len(normalized) < n:
        return {normalized}
    return {normalized[i:i + n] for i in range(len(normalized) - n + 1)}


def _splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of splitmix64 starting from ``seed``."""
    out = np.empty(count, dtype=np.uint64)
    state = seed & _MASK64
    for i in range(count):
        state = (state + int(_GOLDEN)) & _MASK64
        out[i] = _mix64_scalar(state)
    return out


def _mix64_scalar(z: int) -> int:
    z = (z ^ (z >> 30)) * int(_MIX_1) & _MASK64
    z = (z ^ (z >> 27)) * int(_MIX_2) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _SHIFT_30)) * _MIX_1
    z = (z ^ (z >> _SHIFT_27)) * _MIX_2
    return z ^ (z >> _SHIFT_31)


def _base_hashes(shingle_set: Iterable[str]) -> np.ndarray:
    digests = [
        hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest()
        for s in shingle_set
    ]
    return np.frombuffer(b"".join(digests), dtype="<u8").astype(np.uint64)


def hash_constants(params: MinhashParams) -> np.ndarray:
    """The per-function mixing constants derived from the seed."""
    return _splitmix64_stream(params.hash_seed, params.num_permutations)


_CHUNK_SHINGLES = 8192


def minhash_signature(shingle_set: set[str], params: MinhashParams) -> MinhashSignature:
    """Per-hash-function minima over the shingle set.

    Raises EmptyShingleSet on an empty set; callers treat such documents as
    unique rather than clustering them all together.
    """
    if not shingle_set:
        raise EmptyShingleSet("cannot sign an empty shingle set")
    constants = hash_constants(params)[:, np.newaxis]  # (k, 1)
    bases = _base_hashes(shingle_set)
    minima = np.full(params.num_permutations, _MASK64, dtype=np.uint64)
    # Chunked so the (k, n) mix matrix stays small for huge documents.
    for start in range(0, len(bases), _CHUNK_SHINGLES):
        chunk = bases[start:start + _CHUNK_SHINGLES][np.newaxis, :]  # (1, n)
        mixed = _mix64_array(chunk ^ constants)  # (k, n) uint64, wrapping
        np.minimum(minima, mixed.min(axis=1), out=minima)
    return MinhashSignature(tuple(int(v) for v in minima))


def signature_agreement(a: MinhashSignature, b: MinhashSignature) -> float:
    """Fraction of coordinates where two signatures agree (Jaccard estimate)."""
    if len(a) != len(b):
        raise ValueError("signatures have different lengths")
    matches = sum(1 for x, y in zip(a.values, b.values) if x == y)
    return matches / len(a.values)


def lsh_bucket_keys(sig: MinhashSignature, params: MinhashParams) -> tuple[bytes, ...]:
    """One stable bucket key per band: hash of (band index, that band's rows)."""
    if len(sig) != params.num_permutations:
        raise ValueError(
            f"signature length {len(sig)} does not match params {params.num_permutations}"
        )
    rows = params.rows_per_band
    keys = []
    for band in range(params.num_bands):
        packed = struct.pack(
            f"<I{rows}Q", band, *sig.values[band * rows:(band + 1) * rows]
        )
        keys.append(hashlib.blake2b(packed, digest_size=16).digest())
    return tuple(keys)


class _UnionFind:
    def __init__(self) -> None:
        self._parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        root = self._parent.setdefault(x, x)
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[x] != root:  # path compression
            self._parent[x], x = root, self._parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # Deterministic orientation: smaller id becomes the root, which
            # also makes the surviving representative easy to reason about.
            if rb < ra:
                ra, rb = rb, ra
            self._parent[rb] = ra


def cluster_and_select(candidates: Iterable[tuple[str, Iterable[bytes]]]) -> set[str]:
    """Union documents sharing any band key; mark all but one for removal.

    The survivor of each cluster is the lexicographically smallest doc id,
    so the result is independent of input order.
    """
    uf = _UnionFind()
    owner: dict[bytes, str] = {}
    ids: list[str] = []
    for doc_id, keys in candidates:
        ids.append(doc_id)
        uf.find(doc_id)
        for key in keys:
            first = owner.setdefault(key, doc_id)
            if first != doc_id:
                uf.union(first, doc_id)
    clusters: dict[str, list[str]] = {}
    for doc_id in ids:
        clusters.setdefault(uf.find(doc_id), []).append(doc_id)
    removals: set[str] = set()
    for members in clusters.values():
        keep = min(members)
        removals.update(m for m in members if m != keep)
    return removals


# ---------------------------------------------------------------------------
# Signature shard serialization
# ---------------------------------------------------------------------------

def write_signature_shard(
    sink: str | Path | BinaryIO,
    entries: Iterable[tuple[str, MinhashSignature]],
    params: MinhashParams,
) -> int:
    """Write (doc_id, signature) pairs in the compact binary shard layout.

    Layout: magic "MHSG", u16 version, u32 shingle_size, u32 num_permutations,
    u32 num_bands, u32 rows_per_band, u64 hash_seed, then per record a u16
    id length, the UTF-8 id, and num_permutations little-endian u64 values.
    """
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as fh:
            return write_signature_shard(fh, entries, params)
    sink.write(_SHARD_MAGIC)
    sink.write(struct.pack(
        "<HIIIIQ", _SHARD_VERSION, params.shingle_size, params.num_permutations,
        params.num_bands, params.rows_per_band, params.hash_seed & _MASK64,
    ))
    n = 0
    for doc_id, sig in entries:
        raw_id = doc_id.encode("utf-8")
        sink.write(struct.pack("<H", len(raw_id)))
        sink.write(raw_id)
        sink.write(struct.pack(f"<{len(sig.values)}Q", *sig.values))
        n += 1
    return n


def read_signature_shard(
    source: str | Path | BinaryIO,
) -> tuple[MinhashParams, list[tuple[str, MinhashSignature]]]:
    """Read a signature shard back; validates magic and version."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return read_signature_shard(fh)
    magic = source.read(4)
    if magic != _SHARD_MAGIC:
        raise ValueError(f"not a signature shard (magic {magic!r})")
    version, shingle_size, num_perm, bands, rows, seed = struct.unpack(
        "<HIIIIQ", source.read(26)
    )
    if version != _SHARD_VERSION:
        raise ValueError(f"unsupported shard version {version}")
    params = MinhashParams(
        shingle_size=shingle_size, num_permutations=num_perm,
        num_bands=bands, rows_per_band=rows, hash_seed=seed,
    )
    entries: list[tuple[str, MinhashSignature]] = []
    while True:
        head = source.read(2)
        if not head:
            break
        (id_len,) = struct.unpack("<H", head)
        doc_id = source.read(id_len).decode("utf-8")
        values = struct.unpack(f"<{num_perm}Q", source.read(8 * num_perm))
        entries.append((doc_id, MinhashSignature(values)))
    return params, entries


# ---------------------------------------------------------------------------
# Frequent-line trimming
# ---------------------------------------------------------------------------

@dataclass
class LineFrequencyTable:
    """Occurrence counts of normalized (whitespace-trimmed) non-empty lines.

    Scoped to one dump; shard tables merge by addition into exactly the
    table a single pass would have produced.
    """

    counts: Counter[str] = field(default_factory=Counter)

    def add_text(self, text: str) -> None:
        for line in text.split("\n"):
            normalized = line.strip()
            if normalized:
                self.counts[normalized] += 1

    def merge(self, other: LineFrequencyTable) -> LineFrequencyTable:
        self.counts.update(other.counts)
        return self

    def count(self, line: str) -> int:
        return self.counts.get(line.strip(), 0)


def build_line_frequency(docs: Iterable[Document]) -> LineFrequencyTable:
    table = LineFrequencyTable()
    for doc in docs:
        table.add_text(doc.text)
    return table


def trim_frequent_lines(
    doc: Document,
    table: LineFrequencyTable,
    threshold: int = 100,
) -> Document:
    """Strip boilerplate edges: leading then trailing lines over threshold.

    "Over" is strict: a line occurring exactly ``threshold`` times stays.
    Interior lines are never touched, which makes the operation idempotent
    (after one pass the edge lines are all at or under threshold).
    """
    lines = doc.text.split("\n")
    start, end = 0, len(lines)
    while start < end and table.count(lines[start]) > threshold:
        start += 1
    while end > start and table.count(lines[end - 1]) > threshold:
        end -= 1
    if start == 0 and end == len(lines):
        return doc
    trimmed = Document(
        id=doc.id, url=doc.url, date=doc.date,
        text="\n".join(lines[start:end]), meta=dict(doc.meta),
    )
    return trimmed
