"""Language identification and Traditional/simplified script discrimination.

Two layers, in order:

1. a pluggable scorer answers "which language, how sure"; keep only
   confident Chinese;
2. a script profile rejects simplified-character documents and documents
   carrying mainland-usage phrases that survive glyph conversion.

The scorer interface is one method so that a real fastText-style model can
drop in; the builtin default is a deterministic codepoint-class heuristic
with no model file, which is what tests and the fixtures run on.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .aho_corasick import PhraseMatcher
from .corpus_io import Document
from .resources import load_charset, load_entries, packaged_data_path
from .verdicts import FilterVerdict, Reason

log = logging.getLogger(__name__)

DEFAULT_LANGUAGE_THRESHOLD = 0.65
DEFAULT_MAX_SIMPLIFIED_FRACTION = 0.0


class ScorerUnavailable(Exception):
    """A configured language scorer could not be constructed."""


@dataclass(frozen=True)
class LanguageScore:
    language: str
    confidence: float


class LanguageScorer(Protocol):
    def score(self, text: str) -> LanguageScore: ...


class HeuristicScorer:
    """Model-free scorer: classify by dominant letter script.

    Counts codepoints per script class and reports the dominant language
    with the dominant class's letter fraction as confidence. Kana presence
    beats Han counts because Japanese prose always carries kana while
    Chinese prose essentially never does. Latin-heavy text is reported as
    "en" without distinguishing European languages; for this pipeline every
    non-zh tag is equally a rejection, so that crudeness is harmless.
    """

    _KANA_DECISIVE = 0.05

    def score(self, text: str) -> LanguageScore:
        han = hira = kata = hangul = latin = cyrillic = other = 0
        for ch in text:
            cp = ord(ch)
            if 0x4E00 <= cp <= 0x9FFF or 0x3400 <= cp <= 0x4DBF:
                han += 1
            elif 0x3040 <= cp <= 0x309F:
                hira += 1
            elif 0x30A0 <= cp <= 0x30FF or 0x31F0 <= cp <= 0x31FF:
                kata += 1
            elif 0xAC00 <= cp <= 0xD7A3 or 0x1100 <= cp <= 0x11FF:
                hangul += 1
            elif ch.isalpha() and cp < 0x0370:
                latin += 1
            elif 0x0400 <= cp <= 0x04FF:
                cyrillic += 1
            elif ch.isalpha():
                other += 1
        letters = han + hira + kata + hangul + latin + cyrillic + other
        if letters == 0:
            return LanguageScore("und", 0.0)
        kana = hira + kata
        if kana / letters > self._KANA_DECISIVE:
            return LanguageScore("ja", (kana + han) / letters)
        if hangul / letters > 0.3:
            return LanguageScore("ko", hangul / letters)
        if han / letters >= 0.5:
            return LanguageScore("zh", han / letters)
        if cyrillic > latin:
            return LanguageScore("ru", cyrillic / letters)
        if latin > 0:
            return LanguageScore("en", latin / letters)
        return LanguageScore("und", other / letters)


class FasttextScorer:
    """Adapter for a fastText language-id model (e.g. lid.176.bin).

    Imported lazily; any failure to import the library or load the model
    file raises ScorerUnavailable at construction, so a bad config dies
    before any archive is read.
    """

    def __init__(self, model_path: str | Path):
        try:
            import fasttext  # deferred: optional heavyweight dependency
        except ImportError as exc:
            raise ScorerUnavailable(f"fasttext not installed: {exc}") from exc
        try:
            self._model = fasttext.load_model(str(model_path))
        except Exception as exc:
            raise ScorerUnavailable(f"cannot load model {model_path}: {exc}") from exc

    def score(self, text: str) -> LanguageScore:
        labels, probs = self._model.predict(text.replace("\n", " "), k=1)
        if not labels:
            return LanguageScore("und", 0.0)
        return LanguageScore(labels[0].removeprefix("__label__"), float(probs[0]))


def load_scorer(model_path: str | Path | None = None) -> LanguageScorer:
    """Build the configured scorer: a model adapter if a path is given,
    the builtin heuristic otherwise."""
    if model_path is None or model_path == "":
        return HeuristicScorer()
    if not Path(model_path).exists():
        raise ScorerUnavailable(f"scorer model path does not exist: {model_path}")
    return FasttextScorer(model_path)


def score_language(text: str, scorer: LanguageScorer) -> LanguageScore:
    """The scorer's top label and confidence for ``text``."""
    return scorer.score(text)


# ---------------------------------------------------------------------------
# Script profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScriptProfile:
    """Character sets and phrases that discriminate the two Chinese scripts.

    ``simplified_exclusive`` and ``traditional_exclusive`` must be disjoint;
    ``blocked_phrases`` catches mainland vocabulary that survives
    glyph-level conversion to traditional characters.
    """

    simplified_exclusive: frozenset[str]
    traditional_exclusive: frozenset[str]
    blocked_phrases: tuple[str, ...]
    _matcher: PhraseMatcher = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        overlap = self.simplified_exclusive & self.traditional_exclusive
        if overlap:
            raise ValueError(f"profile sets overlap: {sorted(overlap)[:5]!r}")
        object.__setattr__(self, "_matcher", PhraseMatcher(self.blocked_phrases))

    @property
    def matcher(self) -> PhraseMatcher:
        return self._matcher


def load_profile(
    simplified_path: str | Path,
    traditional_path: str | Path,
    phrases_path: str | Path,
) -> ScriptProfile:
    return ScriptProfile(
        simplified_exclusive=load_charset(simplified_path),
        traditional_exclusive=load_charset(traditional_path),
        blocked_phrases=tuple(load_entries(phrases_path)),
    )


def default_profile() -> ScriptProfile:
    return load_profile(
        packaged_data_path("simplified_exclusive.txt"),
        packaged_data_path("traditional_exclusive.txt"),
        packaged_data_path("blocked_phrases.txt"),
    )


def simplified_char_fraction(text: str, profile: ScriptProfile) -> float:
    """Simplified-exclusive occurrences over all discriminating occurrences.

    Counts occurrences (multiset, not distinct characters); text with no
    discriminating characters at all scores 0.0.
    """
    simp = trad = 0
    for ch in text:
        if ch in profile.simplified_exclusive:
            simp += 1
        elif ch in profile.traditional_exclusive:
            trad += 1
    return simp / max(1, simp + trad)


def contains_blocked_phrase(text: str, profile: ScriptProfile) -> bool:
    """Single-pass multi-phrase scan; cost O(len(text)) however many phrases."""
    return profile.matcher.contains_any(text)


def identify(
    doc: Document,
    scorer: LanguageScorer,
    profile: ScriptProfile,
    threshold: float = DEFAULT_LANGUAGE_THRESHOLD,
    max_simplified_fraction: float = DEFAULT_MAX_SIMPLIFIED_FRACTION,
) -> FilterVerdict:
    """Language/script verdict for one document, checks in fixed order.

    Empty text counts as confidence 0. The verdict reason and the language
    score land in doc.meta for downstream inspection.
    """
    if not doc.text:
        score = LanguageScore("und", 0.0)
    else:
        score = score_language(doc.text, scorer)
    doc.meta["lang"] = score.language
    doc.meta["lang_score"] = round(score.confidence, 6)

    verdict: FilterVerdict
    if score.language != "zh" or score.confidence < threshold:
        verdict = FilterVerdict.removed(Reason.LOW_LANG_CONFIDENCE, score.confidence)
    else:
        fraction = simplified_char_fraction(doc.text, profile)
        if fraction > max_simplified_fraction:
            verdict = FilterVerdict.removed(Reason.SIMPLIFIED_SCRIPT, fraction)
        elif contains_blocked_phrase(doc.text, profile):
            verdict = FilterVerdict.removed(Reason.BLOCKED_PHRASE)
        else:
            verdict = FilterVerdict.kept(score.confidence)
    if not verdict.keep:
        doc.meta["langid_reason"] = verdict.reason.value
    return verdict
