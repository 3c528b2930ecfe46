"""Corpus I/O: WARC archive reading and JSONL document interchange.

The WARC reader is written directly against the gzip member-per-record
layout used by large web crawls, because the pipeline needs two guarantees
that generic readers do not make:

* a corrupt gzip member raises :class:`MalformedGzipMember` with the byte
  offset of the member, and the remainder of that archive is abandoned;
* a record with an unusable WARC header is skipped and tallied instead of
  killing the archive.

Everything is streamed record-at-a-time; memory stays bounded by the size
of the largest single record, never the archive.
"""
from __future__ import annotations

import hashlib
import json
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Iterable, Iterator, TextIO

log = logging.getLogger(__name__)

_CHUNK = 1 << 16
_GZIP_WBITS = zlib.MAX_WBITS | 16
_GZIP_MAGIC = b"\x1f\x8b"

JSONL_KEYS = ("id", "url", "date", "text", "meta")


class MalformedGzipMember(Exception):
    """A gzip member could not be decompressed; carries its byte offset."""

    def __init__(self, offset: int, detail: str):
        super().__init__(f"malformed gzip member at byte {offset}: {detail}")
        self.offset = offset
        self.detail = detail


class MalformedWarcHeader(Exception):
    """A WARC record header was missing or unusable."""


class MalformedLine(Exception):
    """A JSONL line failed to parse; carries its 1-based line number."""

    def __init__(self, line_no: int, detail: str):
        super().__init__(f"malformed JSONL line {line_no}: {detail}")
        self.line_no = line_no
        self.detail = detail


@dataclass
class WarcTally:
    """Side counts from a read pass that are not records themselves."""

    corrupt_records: int = 0
    skipped_records: int = 0  # request/metadata/warcinfo and friends


@dataclass
class RawRecord:
    """One WARC response record, HTTP envelope already split off."""

    warc_record_id: str
    url: str
    fetch_date: str
    content_type: str | None
    payload: bytes


@dataclass
class Document:
    """A corpus document as it flows between pipeline stages.

    ``byte_len`` is always the UTF-8 length of ``text``; it is recomputed on
    construction and must be kept in sync through :meth:`set_text` whenever a
    stage rewrites the text. NUL characters never survive construction.
    """

    id: str
    url: str
    date: str
    text: str
    meta: dict[str, Any] = field(default_factory=dict)
    byte_len: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        if "\x00" in self.text:
            self.text = self.text.replace("\x00", "")
        self.byte_len = len(self.text.encode("utf-8"))

    def set_text(self, text: str) -> None:
        """Replace the text, re-enforcing the NUL and byte_len invariants."""
        if "\x00" in text:
            text = text.replace("\x00", "")
        self.text = text
        self.byte_len = len(text.encode("utf-8"))


def doc_id_for_record(warc_record_id: str) -> str:
    """Stable document id: SHA-1 hex digest of the WARC record id."""
    return hashlib.sha1(warc_record_id.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# WARC reading
# ---------------------------------------------------------------------------

def _iter_gzip_members(stream: BinaryIO) -> Iterator[tuple[int, bytes]]:
    """Yield (member_offset, decompressed_bytes) per gzip member.

    Raises MalformedGzipMember on a truncated or undecodable member; by then
    every earlier member has already been yielded.
    """
    offset = 0  # absolute offset of the first unconsumed compressed byte
    pending = b""
    eof = False

    def fill() -> None:
        nonlocal pending, eof
        if not eof and not pending:
            pending = stream.read(_CHUNK)
            if not pending:
                eof = True

    while True:
        fill()
        if not pending:
            return
        member_start = offset
        decomp = zlib.decompressobj(_GZIP_WBITS)
        parts: list[bytes] = []
        try:
            while not decomp.eof:
                fill()
                if not pending:
                    raise MalformedGzipMember(member_start, "truncated member")
                data = pending
                pending = b""
                parts.append(decomp.decompress(data))
                if decomp.eof:
                    pending = decomp.unused_data
                    offset += len(data) - len(pending)
                else:
                    offset += len(data)
        except zlib.error as exc:
            raise MalformedGzipMember(member_start, str(exc)) from exc
        yield member_start, b"".join(parts)


def _parse_warc_headers(block: bytes) -> tuple[dict[str, str], bytes]:
    """Split one record's WARC header off the front of ``block``.

    Returns (headers, rest-after-header-terminator). Raises
    MalformedWarcHeader when the version line or terminator is missing.
    """
    end = block.find(b"\r\n\r\n")
    if end < 0:
        raise MalformedWarcHeader("missing header terminator")
    head = block[:end].decode("utf-8", errors="replace")
    lines = head.split("\r\n")
    if not lines or not lines[0].startswith("WARC/"):
        raise MalformedWarcHeader(f"bad version line: {lines[0][:40]!r}")
    headers: dict[str, str] = {}
    for line in lines[1:]:
        name, sep, value = line.partition(":")
        if not sep:
            raise MalformedWarcHeader(f"bad header line: {line[:40]!r}")
        headers[name.strip().lower()] = value.strip()
    return headers, block[end + 4:]


def _split_http_payload(block: bytes) -> tuple[str | None, bytes]:
    """Split an HTTP response into (content_type, body).

    Non-HTTP blocks pass through whole with content_type None.
    """
    if not block.startswith(b"HTTP/"):
        return None, block
    end = block.find(b"\r\n\r\n")
    if end < 0:
        return None, b""
    head = block[:end].decode("latin-1")
    content_type = None
    for line in head.split("\r\n")[1:]:
        name, sep, value = line.partition(":")
        if sep and name.strip().lower() == "content-type":
            content_type = value.strip()
    return content_type, block[end + 4:]


def _records_in_member(member: bytes, tally: WarcTally) -> Iterator[RawRecord]:
    """Parse the WARC records inside one decompressed member.

    The crawl layout puts one record per member, but nothing breaks if a
    member carries several. An unusable header abandons the rest of the
    member (there is no way to resync without Content-Length).
    """
    rest = member
    while rest.strip(b"\r\n"):
        try:
            headers, body = _parse_warc_headers(rest)
            length_text = headers.get("content-length")
            if length_text is None:
                raise MalformedWarcHeader("missing Content-Length")
            try:
                length = int(length_text)
            except ValueError:
                raise MalformedWarcHeader(f"bad Content-Length: {length_text!r}") from None
            if length < 0 or length > len(body):
                raise MalformedWarcHeader(f"Content-Length {length} exceeds member")
        except MalformedWarcHeader as exc:
            tally.corrupt_records += 1
            log.warning("skipping corrupt WARC record: %s", exc)
            return
        block, rest = body[:length], body[length:]
        # Records are separated by a blank line pair; consume it so the next
        # iteration starts at the version line.
        rest = rest.lstrip(b"\r\n")

        rec_type = headers.get("warc-type", "")
        if rec_type != "response":
            tally.skipped_records += 1
            continue
        record_id = headers.get("warc-record-id")
        url = headers.get("warc-target-uri")
        date = headers.get("warc-date", "")
        if not record_id or not url:
            tally.corrupt_records += 1
            log.warning("skipping response record with missing id or target URI")
            continue
        content_type, payload = _split_http_payload(block)
        yield RawRecord(
            warc_record_id=record_id,
            url=url,
            fetch_date=date,
            content_type=content_type,
            payload=payload,
        )


def read_warc_records(
    source: str | Path | BinaryIO,
    *,
    tally: WarcTally | None = None,
) -> Iterator[RawRecord]:
    """Stream the response records of a WARC archive.

    ``source`` is a path or binary stream, gzip member-per-record or plain
    uncompressed WARC (sniffed from the magic bytes). Request, metadata and
    warcinfo records are skipped. Pass a :class:`WarcTally` to observe the
    corrupt/skipped side counts.
    """
    if tally is None:
        tally = WarcTally()

    def _go(stream: BinaryIO) -> Iterator[RawRecord]:
        lead = stream.read(2)
        if lead == _GZIP_MAGIC:
            members = _iter_gzip_members(_Rechain(lead, stream))
        else:
            members = _whole_stream_member(lead, stream)
        for _, member in members:
            yield from _records_in_member(member, tally)

    if isinstance(source, (str, Path)):
        with open(source, "rb") as stream:
            yield from _go(stream)
    else:
        yield from _go(source)


def _whole_stream_member(lead: bytes, stream: BinaryIO) -> Iterator[tuple[int, bytes]]:
    yield 0, lead + stream.read()


class _Rechain:
    """Binary reader that replays already-read lead bytes before the stream."""

    def __init__(self, lead: bytes, stream: BinaryIO):
        self._lead = lead
        self._stream = stream

    def read(self, n: int = -1) -> bytes:
        if self._lead:
            if n < 0 or n >= len(self._lead):
                out, self._lead = self._lead, b""
                if n < 0:
                    return out + self._stream.read()
                return out + self._stream.read(n - len(out))
            out, self._lead = self._lead[:n], self._lead[n:]
            return out
        return self._stream.read(n)


# ---------------------------------------------------------------------------
# JSONL interchange
# ---------------------------------------------------------------------------

def document_to_json(doc: Document) -> str:
    """Serialize one document with the fixed key order."""
    record = {
        "id": doc.id,
        "url": doc.url,
        "date": doc.date,
        "text": doc.text,
        "meta": doc.meta,
    }
    return json.dumps(record, ensure_ascii=False)


def document_from_json(line: str, line_no: int = 0) -> Document:
    try:
        record = json.loads(line)
        return Document(
            id=record["id"],
            url=record["url"],
            date=record["date"],
            text=record["text"],
            meta=record.get("meta") or {},
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise MalformedLine(line_no, str(exc)) from exc


def write_documents_jsonl(docs: Iterable[Document], sink: str | Path | TextIO) -> int:
    """Write documents as UTF-8 JSONL (LF line ends, no BOM). Returns count."""
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            return write_documents_jsonl(docs, fh)
    n = 0
    for doc in docs:
        sink.write(document_to_json(doc))
        sink.write("\n")
        n += 1
    return n


def read_documents_jsonl(
    source: str | Path | TextIO,
    *,
    on_error: str = "raise",
) -> Iterator[Document]:
    """Stream documents back from JSONL.

    ``on_error="raise"`` propagates :class:`MalformedLine` (with the line
    number); ``"skip"`` logs and continues. Blank lines are ignored either
    way.
    """
    if on_error not in ("raise", "skip"):
        raise ValueError(f"on_error must be 'raise' or 'skip', got {on_error!r}")
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from read_documents_jsonl(fh, on_error=on_error)
        return
    for line_no, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            yield document_from_json(line, line_no)
        except MalformedLine as exc:
            if on_error == "raise":
                raise
            log.warning("skipping %s", exc)
