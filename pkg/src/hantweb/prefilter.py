"""Cheap pre-extraction screens: URL blocklist and fuzzy CJK-run detection.

These run on the raw decoded payload, HTML tags and all, before any
extraction work is spent. The CJK screen is deliberately fuzzy: its ranges
include kana, so Japanese pages pass here and are rejected later by language
identification. That is the intended division of labor; this stage only has
to be cheap and to never drop a Chinese page.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlsplit

from .corpus_io import RawRecord
from .verdicts import FilterVerdict, Reason

log = logging.getLogger(__name__)

# Inclusive codepoint ranges treated as "CJK-ish" by the fuzzy screen.
# Hiragana is intentionally cut at U+3090 and kana kept in: recall over
# precision at this stage.
CJK_RANGES: tuple[tuple[int, int], ...] = (
    (0x3040, 0x3090),
    (0x30A0, 0x30FF),
    (0x4E00, 0x9FFF),
)

DEFAULT_MIN_RUN = 5


def is_cjk_codepoint(cp: int, ranges: tuple[tuple[int, int], ...] = CJK_RANGES) -> bool:
    return any(lo <= cp <= hi for lo, hi in ranges)


def has_fuzzy_cjk_run(
    text: str,
    min_run: int = DEFAULT_MIN_RUN,
    ranges: tuple[tuple[int, int], ...] = CJK_RANGES,
) -> bool:
    """True iff ``text`` contains >= ``min_run`` adjacent in-range codepoints.

    Adjacent means literally consecutive characters: whitespace, ASCII, or
    any other out-of-range character resets the run.
    """
    run = 0
    for ch in text:
        if is_cjk_codepoint(ord(ch), ranges):
            run += 1
            if run >= min_run:
                return True
        else:
            run = 0
    return False


# ---------------------------------------------------------------------------
# URL blocklist
# ---------------------------------------------------------------------------

@dataclass
class UrlBlocklist:
    """Three-way URL blocklist: exact hosts, host suffixes, substrings.

    All entries are lowercase; suffixes start with a dot and match whole
    label boundaries (``.example.com`` matches ``a.example.com`` but also
    ``example.com`` itself is matched only via exact_hosts).
    """

    exact_hosts: frozenset[str] = frozenset()
    host_suffixes: tuple[str, ...] = ()
    substrings: tuple[str, ...] = ()

    @classmethod
    def empty(cls) -> UrlBlocklist:
        return cls()


def load_blocklist(path: str | Path) -> UrlBlocklist:
    """Parse a blocklist file.

    One entry per line; ``#`` starts a comment. Lines use ``host:``,
    ``suffix:`` or ``sub:`` prefixes; a bare line means ``host:``. Suffix
    entries are normalized to start with a dot.
    """
    hosts: set[str] = set()
    suffixes: set[str] = set()
    subs: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip().lower()
            if not line:
                continue
            kind, sep, value = line.partition(":")
            if not sep or kind not in ("host", "suffix", "sub"):
                kind, value = "host", line
            value = value.strip()
            if not value:
                continue
            if kind == "host":
                hosts.add(value)
            elif kind == "suffix":
                suffixes.add(value if value.startswith(".") else "." + value)
            else:
                subs.add(value)
    return UrlBlocklist(
        exact_hosts=frozenset(hosts),
        host_suffixes=tuple(sorted(suffixes)),
        substrings=tuple(sorted(subs)),
    )


def url_blocked(url: str, blocklist: UrlBlocklist) -> bool:
    """True iff the URL matches the blocklist. Unparsable URLs are blocked."""
    lowered = url.lower()
    try:
        parts = urlsplit(lowered if "//" in lowered else "//" + lowered)
        host = parts.hostname or ""
    except ValueError:
        log.warning("treating unparsable URL as blocked: %.120s", url)
        return True
    if host in blocklist.exact_hosts:
        return True
    for suffix in blocklist.host_suffixes:
        if host.endswith(suffix):
            return True
    for sub in blocklist.substrings:
        if sub in lowered:
            return True
    return False


# ---------------------------------------------------------------------------
# Payload decoding and the combined prefilter
# ---------------------------------------------------------------------------

def _declared_charset(content_type: str | None) -> str | None:
    if not content_type:
        return None
    for part in content_type.split(";")[1:]:
        name, sep, value = part.partition("=")
        if sep and name.strip().lower() == "charset":
            return value.strip().strip('"\'').lower() or None
    return None


def decode_payload(record: RawRecord) -> str:
    """Decode the HTTP body to text.

    Honors the Content-Type charset when one is declared and usable, then
    tries strict UTF-8, then falls back to UTF-8 with replacement. The
    replacement character is outside every CJK range, so undecodable binary
    self-rejects at the run check rather than needing a special case.
    """
    charset = _declared_charset(record.content_type)
    if charset:
        try:
            return record.payload.decode(charset)
        except (LookupError, UnicodeDecodeError):
            pass
    try:
        return record.payload.decode("utf-8")
    except UnicodeDecodeError:
        return record.payload.decode("utf-8", errors="replace")


@dataclass
class PrefilterOutcome:
    verdict: FilterVerdict
    text: str = ""  # decoded payload, only meaningful on keep


def prefilter_record(
    record: RawRecord,
    blocklist: UrlBlocklist,
    min_run: int = DEFAULT_MIN_RUN,
) -> PrefilterOutcome:
    """URL screen first (cheapest), then the CJK run check on decoded payload.

    Returns the decoded text alongside the verdict so the caller never
    decodes twice.
    """
    if url_blocked(record.url, blocklist):
        return PrefilterOutcome(FilterVerdict.removed(Reason.URL_BLOCKED))
    text = decode_payload(record)
    if not has_fuzzy_cjk_run(text, min_run):
        return PrefilterOutcome(FilterVerdict.removed(Reason.NO_CJK_RUN))
    return PrefilterOutcome(FilterVerdict.kept(), text)


def prefilter_document(
    record: RawRecord,
    blocklist: UrlBlocklist,
    min_run: int = DEFAULT_MIN_RUN,
) -> FilterVerdict:
    """Verdict-only wrapper over :func:`prefilter_record`."""
    return prefilter_record(record, blocklist, min_run).verdict
