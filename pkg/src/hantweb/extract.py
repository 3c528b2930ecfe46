"""Main-content extraction from raw HTML.

The goal is corpus precision, not rendering fidelity: boilerplate regions
(navigation, headers, footers, forms, scripts) are cut out wholesale, block
elements become lines, and anything structurally ambiguous is dropped rather
than guessed at. Tokenization rides on html.parser, which never raises on
malformed markup; all the policy lives here.
"""
from __future__ import annotations

import re
from html.parser import HTMLParser

# Subtrees that never contribute corpus text. The non-negotiable core is
# script/style/nav/header/footer/aside/form; the rest push precision further
# (chrome, metadata, embedded widgets).
EXCLUDED_TAGS = frozenset({
    "script", "style", "nav", "header", "footer", "aside", "form",
    "head", "title", "noscript", "iframe", "svg", "canvas", "template",
    "button", "select", "option", "datalist", "label", "object", "embed",
    "video", "audio", "map", "figcaption",
})

# Elements that open or close a line of output. Inline markup (a, span, b,
# em, ...) flows through without breaking the line.
BLOCK_TAGS = frozenset({
    "address", "article", "blockquote", "body", "caption", "center", "dd",
    "details", "dialog", "div", "dl", "dt", "fieldset", "figure", "h1",
    "h2", "h3", "h4", "h5", "h6", "hgroup", "hr", "html", "li", "main",
    "ol", "p", "pre", "section", "summary", "table", "tbody", "td",
    "tfoot", "th", "thead", "tr", "ul",
})

_WS_RUN = re.compile(r"\s+")


class _TextCollector(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.lines: list[str] = []
        self._buf: list[str] = []
        # Depth per excluded tag name. Tolerates interleaved/mismatched
        # nesting better than a single stack: a stray close tag can only
        # cancel its own kind.
        self._excluded_depth: dict[str, int] = {}
        self._suppressing = 0

    def _flush(self) -> None:
        if not self._buf:
            return
        line = _WS_RUN.sub(" ", "".join(self._buf)).strip()
        self._buf.clear()
        if line:
            self.lines.append(line)

    def handle_starttag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        if tag in EXCLUDED_TAGS:
            self._flush()
            self._excluded_depth[tag] = self._excluded_depth.get(tag, 0) + 1
            self._suppressing += 1
        elif tag in BLOCK_TAGS or tag == "br":
            self._flush()

    def handle_endtag(self, tag: str) -> None:
        if tag in EXCLUDED_TAGS:
            # A stray close tag with no matching open is ignored; it must
            # not be allowed to unsuppress an unrelated region.
            if self._excluded_depth.get(tag, 0) > 0:
                self._excluded_depth[tag] -= 1
                self._suppressing -= 1
        elif tag in BLOCK_TAGS:
            self._flush()

    def handle_startendtag(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        self.handle_starttag(tag, attrs)
        if tag in EXCLUDED_TAGS:
            self.handle_endtag(tag)

    def handle_data(self, data: str) -> None:
        if self._suppressing == 0 and data:
            self._buf.append(data)

    # Comments, doctype, processing instructions: never content.
    def handle_comment(self, data: str) -> None:
        pass

    def handle_decl(self, decl: str) -> None:
        pass

    def handle_pi(self, data: str) -> None:
        pass


def extract_main_text(html: str) -> str:
    """Extract readable text from HTML, one line per block element.

    Postconditions: output lines are in document order, runs of whitespace
    inside a line collapse to single spaces, excluded subtrees and comments
    contribute nothing. A page whose every region is excluded (or a subtree
    left ambiguous by an unclosed excluded tag) yields the empty string;
    downstream length filters handle that, this function never raises.
    """
    collector = _TextCollector()
    collector.feed(html)
    collector.close()
    collector._flush()
    # Note: if an excluded tag never closes, suppression runs to EOF and the
    # tail of the page is dropped. That is the "ambiguous means drop" rule.
    return "\n".join(collector.lines)
