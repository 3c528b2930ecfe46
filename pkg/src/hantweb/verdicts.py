"""Filter verdicts shared by every stage of the pipeline.

Every filter returns a :class:`FilterVerdict` instead of a bare bool so the
pipeline can account for *why* documents were dropped. Reason names double as
keys in the stats report, so they are stable strings, not implementation
details.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass


class Reason(str, enum.Enum):
    """Removal reasons, one per filter rule, plus ``KEPT`` for survivors."""

    KEPT = "Kept"

    # prefilter
    URL_BLOCKED = "UrlBlocked"
    NO_CJK_RUN = "NoCjkRun"

    # language identification
    LOW_LANG_CONFIDENCE = "LowLangConfidence"
    SIMPLIFIED_SCRIPT = "SimplifiedScript"
    BLOCKED_PHRASE = "BlockedPhrase"

    # document-level quality rules
    TOO_SHORT = "TooShort"
    TOO_LONG = "TooLong"
    SYMBOL_RATIO = "SymbolRatio"
    ELLIPSIS_LINES = "EllipsisLines"
    NO_STOP_WORDS = "NoStopWords"
    BRACKET_RATIO = "BracketRatio"

    # line-shape quality rules
    LINE_PUNCT_RATIO = "LinePunctRatio"
    SHORT_LINE_RATIO = "ShortLineRatio"
    CHAR_DUP_RATIO = "CharDupRatio"
    NEW_LINE_RATIO = "NewLineRatio"

    # dedup
    DUPLICATE = "Duplicate"

    def __str__(self) -> str:  # keep f"{reason}" equal to the report key
        return self.value


@dataclass(frozen=True)
class FilterVerdict:
    """Outcome of one filter applied to one document.

    ``keep`` is True iff ``reason`` is ``Reason.KEPT``. ``metric_value``
    carries the number that tripped (or cleared) the threshold, when the
    rule has one; it exists for logging and tests, never for control flow.
    """

    keep: bool
    reason: Reason
    metric_value: float | None = None

    def __post_init__(self) -> None:
        if self.keep != (self.reason is Reason.KEPT):
            raise ValueError(f"inconsistent verdict: keep={self.keep} reason={self.reason}")

    @classmethod
    def kept(cls, metric_value: float | None = None) -> FilterVerdict:
        return cls(True, Reason.KEPT, metric_value)

    @classmethod
    def removed(cls, reason: Reason, metric_value: float | None = None) -> FilterVerdict:
        if reason is Reason.KEPT:
            raise ValueError("removal verdict needs a removal reason")
        return cls(False, reason, metric_value)
