"""Loading of packaged default data files and the shared line format.

Data files hold one entry per line. Full-line comments start with '#';
blank lines are skipped; an entry wrapped in double quotes is taken
literally (that is how a literal "#" entry is written).
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Iterable

_DATA_PACKAGE = "hantweb.data"


def packaged_data_path(name: str) -> Path:
    """Filesystem path of a packaged data file (they ship as real files)."""
    path = resources.files(_DATA_PACKAGE).joinpath(name)
    return Path(str(path))


def parse_entries(lines: Iterable[str]) -> list[str]:
    entries: list[str] = []
    for raw in lines:
        line = raw.rstrip("\n").strip()
        if not line or line.startswith("#"):
            continue
        if len(line) >= 2 and line.startswith('"') and line.endswith('"'):
            line = line[1:-1]
        if line:
            entries.append(line)
    return entries


def load_entries(path: str | Path) -> list[str]:
    """Read a one-entry-per-line data file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_entries(fh)


def load_charset(path: str | Path) -> frozenset[str]:
    """Read a data file of single characters; reject longer entries early."""
    chars = load_entries(path)
    bad = [c for c in chars if len(c) != 1]
    if bad:
        raise ValueError(f"{path}: expected one character per line, got {bad[:5]!r}")
    return frozenset(chars)
