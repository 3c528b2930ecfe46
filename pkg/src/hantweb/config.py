"""Pipeline configuration: one flat dataclass, a key = value file format,
environment overrides, and validation that runs before any work starts.

Precedence, lowest to highest: built-in defaults, config file, environment
(HANTWEB_WORKER_COUNT and HANTWEB_OUTPUT_DIR only), command-line flags.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .dedup import MinhashParams
from .langid import ScorerUnavailable, load_profile, load_scorer
from .prefilter import UrlBlocklist, load_blocklist
from .quality import QualityConfig
from .resources import load_entries, packaged_data_path

ENV_WORKER_COUNT = "HANTWEB_WORKER_COUNT"
ENV_OUTPUT_DIR = "HANTWEB_OUTPUT_DIR"


class ConfigInvalid(Exception):
    """Configuration rejected before any work; carries every problem found."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _parse_opt_str(raw: str) -> str | None:
    stripped = raw.strip()
    return stripped or None


@dataclass
class PipelineConfig:
    """Everything the pipeline run needs, as primitives.

    Heavyweight objects (scorer, profile, blocklist, quality config) are
    built from these via the ``build_*`` methods after validation.
    """

    # inputs and outputs
    input_paths: list[str] = field(default_factory=list)
    output_dir: str = "out"
    shard_count: int = 1
    persist_stages: bool = False

    # prefilter
    blocklist_path: str | None = None  # None = packaged empty default
    min_cjk_run: int = 5

    # language identification
    scorer_model_path: str | None = None  # None = builtin heuristic scorer
    language_threshold: float = 0.65
    max_simplified_fraction: float = 0.0
    simplified_chars_path: str | None = None
    traditional_chars_path: str | None = None
    blocked_phrases_path: str | None = None

    # quality thresholds
    min_words: int = 50
    max_words: int = 100000
    max_symbol_word_ratio: float = 0.1
    max_ellipsis_line_ratio: float = 0.3
    max_bracket_ratio: float = 0.01
    min_line_punct_ratio: float = 0.04
    short_line_char_threshold: int = 10
    max_short_line_ratio: float = 0.8
    max_char_dup_ratio: float = 0.3
    max_new_line_ratio: float = 0.3
    newline_denominator: str = "words"
    terminal_punctuation: str = "。！？…」』）.!?\"')"
    ellipsis_forms: list[str] = field(default_factory=lambda: ["…", "……", "..."])
    stop_words_path: str | None = None
    symbols_path: str | None = None
    policy_substrings_path: str | None = None

    # dedup
    shingle_size: int = 5
    num_permutations: int = 112
    num_bands: int = 14
    rows_per_band: int = 8
    hash_seed: int | None = None  # None = follow `seed`
    line_trim_threshold: int = 100

    # execution
    worker_count: int = 1
    seed: int = 0

    # ------------------------------------------------------------------
    # Resolved paths (packaged defaults fill the Nones)
    # ------------------------------------------------------------------

    def resolved_blocklist_path(self) -> Path:
        return Path(self.blocklist_path) if self.blocklist_path else packaged_data_path("url_blocklist.txt")

    def resolved_profile_paths(self) -> tuple[Path, Path, Path]:
        return (
            Path(self.simplified_chars_path) if self.simplified_chars_path else packaged_data_path("simplified_exclusive.txt"),
            Path(self.traditional_chars_path) if self.traditional_chars_path else packaged_data_path("traditional_exclusive.txt"),
            Path(self.blocked_phrases_path) if self.blocked_phrases_path else packaged_data_path("blocked_phrases.txt"),
        )

    def effective_hash_seed(self) -> int:
        return self.seed if self.hash_seed is None else self.hash_seed

    # ------------------------------------------------------------------
    # Builders for the heavyweight objects
    # ------------------------------------------------------------------

    def build_quality_config(self) -> QualityConfig:
        stop_words_path = Path(self.stop_words_path) if self.stop_words_path else packaged_data_path("stop_words_zh.txt")
        symbols_path = Path(self.symbols_path) if self.symbols_path else packaged_data_path("symbols.txt")
        policy_path = Path(self.policy_substrings_path) if self.policy_substrings_path else packaged_data_path("policy_substrings.txt")
        return QualityConfig(
            min_words=self.min_words,
            max_words=self.max_words,
            max_symbol_word_ratio=self.max_symbol_word_ratio,
            max_ellipsis_line_ratio=self.max_ellipsis_line_ratio,
            stop_words=frozenset(load_entries(stop_words_path)),
            max_bracket_ratio=self.max_bracket_ratio,
            policy_substrings=frozenset(e.lower() for e in load_entries(policy_path)),
            min_line_punct_ratio=self.min_line_punct_ratio,
            short_line_char_threshold=self.short_line_char_threshold,
            max_short_line_ratio=self.max_short_line_ratio,
            max_char_dup_ratio=self.max_char_dup_ratio,
            max_new_line_ratio=self.max_new_line_ratio,
            symbols=frozenset(load_entries(symbols_path)),
            terminal_punctuation=frozenset(self.terminal_punctuation),
            ellipsis_forms=tuple(self.ellipsis_forms),
            newline_denominator=self.newline_denominator,
        )

    def build_minhash_params(self) -> MinhashParams:
        return MinhashParams(
            shingle_size=self.shingle_size,
            num_permutations=self.num_permutations,
            num_bands=self.num_bands,
            rows_per_band=self.rows_per_band,
            hash_seed=self.effective_hash_seed(),
        )

    def build_blocklist(self) -> UrlBlocklist:
        return load_blocklist(self.resolved_blocklist_path())

    def build_profile(self):
        simplified, traditional, phrases = self.resolved_profile_paths()
        return load_profile(simplified, traditional, phrases)

    def build_scorer(self):
        return load_scorer(self.scorer_model_path)

    # ------------------------------------------------------------------
    # Validation
    # ------------------------------------------------------------------

    def validate(self, *, require_inputs: bool = True) -> None:
        """Raise ConfigInvalid listing every problem. Runs before any work."""
        problems: list[str] = []
        if require_inputs and not self.input_paths:
            problems.append("no input paths given")
        for path in self.input_paths:
            if not Path(path).exists():
                problems.append(f"input path does not exist: {path}")
        for label, path in (
            ("blocklist_path", self.blocklist_path),
            ("scorer_model_path", self.scorer_model_path),
            ("simplified_chars_path", self.simplified_chars_path),
            ("traditional_chars_path", self.traditional_chars_path),
            ("blocked_phrases_path", self.blocked_phrases_path),
            ("stop_words_path", self.stop_words_path),
            ("symbols_path", self.symbols_path),
            ("policy_substrings_path", self.policy_substrings_path),
        ):
            if path is not None and not Path(path).exists():
                problems.append(f"{label} does not exist: {path}")
        if self.worker_count < 1:
            problems.append(f"worker_count must be >= 1, got {self.worker_count}")
        if self.shard_count < 1:
            problems.append(f"shard_count must be >= 1, got {self.shard_count}")
        if self.min_cjk_run < 1:
            problems.append(f"min_cjk_run must be >= 1, got {self.min_cjk_run}")
        if not 0.0 <= self.language_threshold <= 1.0:
            problems.append(f"language_threshold must be in [0,1], got {self.language_threshold}")
        if not 0.0 <= self.max_simplified_fraction <= 1.0:
            problems.append(f"max_simplified_fraction must be in [0,1], got {self.max_simplified_fraction}")
        if self.line_trim_threshold < 0:
            problems.append(f"line_trim_threshold must be >= 0, got {self.line_trim_threshold}")
        if not problems:
            # Construction errors from the component configs read better one
            # at a time, and only fire once the cheap checks are clean.
            try:
                self.build_minhash_params()
            except ValueError as exc:
                problems.append(str(exc))
            try:
                self.build_quality_config()
            except ValueError as exc:
                problems.append(str(exc))
            try:
                self.build_profile()
            except ValueError as exc:
                problems.append(str(exc))
            try:
                self.build_scorer()
            except ScorerUnavailable as exc:
                problems.append(str(exc))
        if problems:
            raise ConfigInvalid(problems)


# ---------------------------------------------------------------------------
# Config file format
# ---------------------------------------------------------------------------

_PARSERS: dict[str, Callable[[str], Any]] = {
    "input_paths": _parse_list,
    "output_dir": str.strip,
    "shard_count": int,
    "persist_stages": _parse_bool,
    "blocklist_path": _parse_opt_str,
    "min_cjk_run": int,
    "scorer_model_path": _parse_opt_str,
    "language_threshold": float,
    "max_simplified_fraction": float,
    "simplified_chars_path": _parse_opt_str,
    "traditional_chars_path": _parse_opt_str,
    "blocked_phrases_path": _parse_opt_str,
    "min_words": int,
    "max_words": int,
    "max_symbol_word_ratio": float,
    "max_ellipsis_line_ratio": float,
    "max_bracket_ratio": float,
    "min_line_punct_ratio": float,
    "short_line_char_threshold": int,
    "max_short_line_ratio": float,
    "max_char_dup_ratio": float,
    "max_new_line_ratio": float,
    "newline_denominator": str.strip,
    "terminal_punctuation": str.strip,
    "ellipsis_forms": _parse_list,
    "stop_words_path": _parse_opt_str,
    "symbols_path": _parse_opt_str,
    "policy_substrings_path": _parse_opt_str,
    "shingle_size": int,
    "num_permutations": int,
    "num_bands": int,
    "rows_per_band": int,
    "hash_seed": int,
    "line_trim_threshold": int,
    "worker_count": int,
    "seed": int,
}

CONFIG_KEYS = tuple(_PARSERS)


def parse_config_file(path: str | Path) -> dict[str, Any]:
    """Parse a flat ``key = value`` config file into typed values.

    '#' starts a comment, blank lines are skipped, keys must be known.
    """
    values: dict[str, Any] = {}
    problems: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep:
                problems.append(f"{path}:{line_no}: expected 'key = value', got {line!r}")
                continue
            parser = _PARSERS.get(key)
            if parser is None:
                problems.append(f"{path}:{line_no}: unknown key {key!r}")
                continue
            try:
                values[key] = parser(value.strip())
            except ValueError as exc:
                problems.append(f"{path}:{line_no}: bad value for {key}: {exc}")
    if problems:
        raise ConfigInvalid(problems)
    return values


def config_from_sources(
    file_path: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
    env: dict[str, str] | None = None,
) -> PipelineConfig:
    """Merge defaults, config file, environment, and explicit overrides."""
    values: dict[str, Any] = {}
    if file_path is not None:
        if not Path(file_path).exists():
            raise ConfigInvalid([f"config file does not exist: {file_path}"])
        values.update(parse_config_file(file_path))
    env = os.environ if env is None else env
    if ENV_WORKER_COUNT in env:
        try:
            values["worker_count"] = int(env[ENV_WORKER_COUNT])
        except ValueError:
            raise ConfigInvalid([f"{ENV_WORKER_COUNT} must be an integer, got {env[ENV_WORKER_COUNT]!r}"])
    if ENV_OUTPUT_DIR in env:
        values["output_dir"] = env[ENV_OUTPUT_DIR]
    if overrides:
        known = {f.name for f in dataclasses.fields(PipelineConfig)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigInvalid([f"unknown config fields: {sorted(unknown)}"])
        values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)
