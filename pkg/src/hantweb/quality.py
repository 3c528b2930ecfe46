"""Heuristic quality filters: document shape, boilerplate lines, line stats.

Three rule families applied as separate pipeline stages, in this order:

* document-shape rules: length, symbol ratio, ellipsis lines, stop words;
* line rules: javascript/curly-brace/policy boilerplate dropped per line,
  plus a whole-document bracket-ratio rejection;
* line-statistics rules: terminal punctuation, short lines, duplicate-line
  character mass, newline-to-word ratio.

Every threshold is strict as written: a value exactly at the threshold
passes. All rules are pure functions of (text, config).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .corpus_io import Document
from .resources import load_entries, packaged_data_path
from .verdicts import FilterVerdict, Reason

CJK_WORD_RANGE = (0x4E00, 0x9FFF)

BRACKET_CHARS = frozenset("{}[]()（）【】")

DEFAULT_TERMINAL_PUNCTUATION = frozenset("。！？…」』）.!?\"')")

DEFAULT_ELLIPSIS_FORMS = ("…", "……", "...")

NEWLINE_DENOMINATORS = ("words", "codepoints")


def _default_stop_words() -> frozenset[str]:
    return frozenset(load_entries(packaged_data_path("stop_words_zh.txt")))


def _default_symbols() -> frozenset[str]:
    return frozenset(load_entries(packaged_data_path("symbols.txt")))


def _default_policy_substrings() -> frozenset[str]:
    entries = load_entries(packaged_data_path("policy_substrings.txt"))
    return frozenset(e.lower() for e in entries)


@dataclass(frozen=True)
class QualityConfig:
    """All quality thresholds and term sets, defaults as shipped."""

    min_words: int = 50
    max_words: int = 100000
    max_symbol_word_ratio: float = 0.1
    max_ellipsis_line_ratio: float = 0.3
    stop_words: frozenset[str] = field(default_factory=_default_stop_words)
    max_bracket_ratio: float = 0.01
    policy_substrings: frozenset[str] = field(default_factory=_default_policy_substrings)
    min_line_punct_ratio: float = 0.04
    short_line_char_threshold: int = 10
    max_short_line_ratio: float = 0.8
    max_char_dup_ratio: float = 0.3
    max_new_line_ratio: float = 0.3
    symbols: frozenset[str] = field(default_factory=_default_symbols)
    terminal_punctuation: frozenset[str] = DEFAULT_TERMINAL_PUNCTUATION
    ellipsis_forms: tuple[str, ...] = DEFAULT_ELLIPSIS_FORMS
    newline_denominator: str = "words"

    def __post_init__(self) -> None:
        problems = []
        if not 0 < self.min_words < self.max_words:
            problems.append(f"need 0 < min_words < max_words, got {self.min_words}/{self.max_words}")
        for name in ("max_symbol_word_ratio", "max_ellipsis_line_ratio", "max_bracket_ratio",
                     "min_line_punct_ratio", "max_short_line_ratio", "max_char_dup_ratio",
                     "max_new_line_ratio"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                problems.append(f"{name} must be in [0,1], got {value}")
        if not self.stop_words:
            problems.append("stop_words must be non-empty")
        if self.newline_denominator not in NEWLINE_DENOMINATORS:
            problems.append(f"newline_denominator must be one of {NEWLINE_DENOMINATORS}")
        if problems:
            raise ValueError("; ".join(problems))


def _is_cjk_word_char(ch: str) -> bool:
    return CJK_WORD_RANGE[0] <= ord(ch) <= CJK_WORD_RANGE[1]


def word_count(text: str) -> int:
    """Word count for unsegmented Chinese mixed with spaced scripts.

    Each CJK codepoint counts as one word; each whitespace-delimited token
    made entirely of non-CJK characters counts as one word; a mixed token
    contributes only its CJK characters. Deterministic, no lexicon.
    """
    count = 0
    for token in text.split():
        cjk = sum(1 for ch in token if _is_cjk_word_char(ch))
        count += cjk if cjk else 1
    return count


def _symbol_occurrences(text: str, symbols: frozenset[str]) -> int:
    return sum(text.count(sym) for sym in symbols if sym)


def _ends_with_ellipsis(line: str, forms: tuple[str, ...]) -> bool:
    stripped = line.rstrip()
    return stripped.endswith(forms) if stripped else False


def gopher_filter(doc: Document, cfg: QualityConfig) -> FilterVerdict:
    """Document-shape gate, rules checked in fixed order.

    Too short, too long, symbol-heavy, ellipsis-heavy, then the stop-word
    prose check. The first tripped rule names the removal reason.
    """
    text = doc.text
    words = word_count(text)
    if words < cfg.min_words:
        return FilterVerdict.removed(Reason.TOO_SHORT, words)
    if words > cfg.max_words:
        return FilterVerdict.removed(Reason.TOO_LONG, words)
    symbol_ratio = _symbol_occurrences(text, cfg.symbols) / max(1, words)
    if symbol_ratio > cfg.max_symbol_word_ratio:
        return FilterVerdict.removed(Reason.SYMBOL_RATIO, symbol_ratio)
    lines = text.split("\n")
    ellipsis_ratio = sum(
        1 for line in lines if _ends_with_ellipsis(line, cfg.ellipsis_forms)
    ) / max(1, len(lines))
    if ellipsis_ratio > cfg.max_ellipsis_line_ratio:
        return FilterVerdict.removed(Reason.ELLIPSIS_LINES, ellipsis_ratio)
    if not any(stop in text for stop in cfg.stop_words):
        return FilterVerdict.removed(Reason.NO_STOP_WORDS, 0.0)
    return FilterVerdict.kept()


def c4_line_filter(line: str, cfg: QualityConfig) -> bool:
    """Keep the line? False for javascript/curly-brace/policy boilerplate."""
    lowered = line.lower()
    if "javascript" in lowered or "{" in line or "}" in line:
        return False
    return not any(policy in lowered for policy in cfg.policy_substrings)


def bracket_ratio(text: str) -> float:
    """Bracket characters (ASCII and fullwidth) over total codepoints."""
    brackets = sum(1 for ch in text if ch in BRACKET_CHARS)
    return brackets / max(1, len(text))


def c4_document_filter(doc: Document, cfg: QualityConfig) -> tuple[FilterVerdict, str]:
    """Bracket-ratio gate on the whole text, then per-line boilerplate drop.

    Returns (verdict, cleaned_text); the text comes back untouched on
    removal. Line-dropping re-joins survivors with LF, so applying the
    filter to its own output changes nothing.
    """
    ratio = bracket_ratio(doc.text)
    if ratio > cfg.max_bracket_ratio:
        return FilterVerdict.removed(Reason.BRACKET_RATIO, ratio), doc.text
    kept = [line for line in doc.text.split("\n") if c4_line_filter(line, cfg)]
    return FilterVerdict.kept(), "\n".join(kept)


def fineweb_filter(doc: Document, cfg: QualityConfig) -> FilterVerdict:
    """Line-statistics gate over LF-split non-empty lines, fixed order.

    Terminal-punctuation ratio, short-line ratio, duplicate-line character
    mass, then newline-to-word ratio over the full text.
    """
    text = doc.text
    lines = [line for line in text.split("\n") if line != ""]
    n = max(1, len(lines))

    punct_lines = 0
    for line in lines:
        stripped = line.rstrip()
        if stripped and stripped[-1] in cfg.terminal_punctuation:
            punct_lines += 1
    punct_ratio = punct_lines / n
    if punct_ratio < cfg.min_line_punct_ratio:
        return FilterVerdict.removed(Reason.LINE_PUNCT_RATIO, punct_ratio)

    short_ratio = sum(1 for line in lines if len(line) < cfg.short_line_char_threshold) / n
    if short_ratio > cfg.max_short_line_ratio:
        return FilterVerdict.removed(Reason.SHORT_LINE_RATIO, short_ratio)

    counts = Counter(lines)
    total_mass = sum(len(line) for line in lines)
    dup_mass = sum(len(line) * count for line, count in counts.items() if count > 1)
    dup_ratio = dup_mass / max(1, total_mass)
    if dup_ratio > cfg.max_char_dup_ratio:
        return FilterVerdict.removed(Reason.CHAR_DUP_RATIO, dup_ratio)

    if cfg.newline_denominator == "words":
        denominator = word_count(text)
    else:
        denominator = len(text)
    newline_ratio = text.count("\n") / max(1, denominator)
    if newline_ratio > cfg.max_new_line_ratio:
        return FilterVerdict.removed(Reason.NEW_LINE_RATIO, newline_ratio)

    return FilterVerdict.kept()
