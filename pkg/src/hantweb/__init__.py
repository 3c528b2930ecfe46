"""hantweb: curate a Traditional Chinese text corpus from web crawl archives.

The pipeline is a fixed eight-stage cascade (prefilter, extract, langid,
gopher, c4, fineweb, minhash, line_trim) with per-stage accounting, plus
an evaluation harness for rubric-based quality scoring and significance
tests between pipeline stages.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .config import ConfigInvalid, PipelineConfig, config_from_sources
from .corpus_io import (
    Document,
    RawRecord,
    read_documents_jsonl,
    read_warc_records,
    write_documents_jsonl,
)
from .dedup import MinhashParams, MinhashSignature, minhash_signature, shingles
from .evaluation import (
    ScoreCard,
    TTestResult,
    compare_stages,
    parse_scores,
    render_rubric_prompt,
    sample_documents,
    welch_t_test,
)
from .extract import extract_main_text
from .langid import ScriptProfile, identify, load_profile, load_scorer
from .pipeline import StageStats, global_kept_rate, relative_removal_rate, run_pipeline
from .prefilter import has_fuzzy_cjk_run, prefilter_document, url_blocked
from .quality import QualityConfig, c4_document_filter, fineweb_filter, gopher_filter, word_count
from .verdicts import FilterVerdict, Reason

__all__ = [
    "__version__",
    "ConfigInvalid",
    "PipelineConfig",
    "config_from_sources",
    "Document",
    "RawRecord",
    "read_documents_jsonl",
    "read_warc_records",
    "write_documents_jsonl",
    "MinhashParams",
    "MinhashSignature",
    "minhash_signature",
    "shingles",
    "ScoreCard",
    "TTestResult",
    "compare_stages",
    "parse_scores",
    "render_rubric_prompt",
    "sample_documents",
    "welch_t_test",
    "extract_main_text",
    "ScriptProfile",
    "identify",
    "load_profile",
    "load_scorer",
    "StageStats",
    "global_kept_rate",
    "relative_removal_rate",
    "run_pipeline",
    "has_fuzzy_cjk_run",
    "prefilter_document",
    "url_blocked",
    "QualityConfig",
    "c4_document_filter",
    "fineweb_filter",
    "gopher_filter",
    "word_count",
    "FilterVerdict",
    "Reason",
]
