"""Canonical text forms that defeat encoding and look-alike evasion.

Every input is rendered into four analysis views (original, normalized,
squashed, lowercase); the rule layer runs its patterns across all of them.
Normalization is NFKD + combining-mark/format-char removal + homoglyph
folding + leet folding, in that order, and is idempotent.
"""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from .config import DEFAULT_MAX_INPUT_BYTES, data_path
from .errors import EmptyInput, InputTooLarge

_RUN = re.compile(r"(.)\1{2,}", re.DOTALL)
_TOKEN = re.compile(r"[a-z0-9_]+")


@dataclass(frozen=True)
class AnalysisViews:
    """The four parallel renderings of one input."""

    original: str
    normalized: str
    squashed: str
    lowercase: str

    def named(self) -> list[tuple[str, str]]:
        return [
            ("original", self.original),
            ("normalized", self.normalized),
            ("squashed", self.squashed),
            ("lowercase", self.lowercase),
        ]


def load_mapping_table(path: str | Path) -> dict[int, str]:
    """Load a `source<TAB>target` folding table keyed by code point."""
    mappings: dict[int, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or len(parts[0]) != 1:
            raise ValueError(f"{path}:{line_no}: expected single char, tab, replacement")
        mappings[ord(parts[0])] = parts[1]
    return mappings


@lru_cache(maxsize=8)
def _table(path_str: str) -> dict[int, str]:
    return load_mapping_table(path_str)


def homoglyph_table(path: str | Path | None = None) -> dict[int, str]:
    return _table(str(path or data_path("homoglyphs.tsv")))


def leet_table(path: str | Path | None = None) -> dict[int, str]:
    table = _table(str(path or data_path("leet.tsv")))
    if len(table) < 30:
        raise ValueError(f"leet table needs >= 30 mappings, found {len(table)}")
    return table


def _strip_marks(ch: str) -> bool:
    # Mn: combining marks left over from NFKD; Cf: zero-width/format chars
    # used to split tokens invisibly.
    return unicodedata.category(ch) in ("Mn", "Cf")


def normalize(
    text: str,
    *,
    max_input_bytes: int = DEFAULT_MAX_INPUT_BYTES,
    homoglyphs: dict[int, str] | None = None,
    leet: dict[int, str] | None = None,
) -> str:
    """NFKD-normalize and fold homoglyphs/leet to plain Latin. Idempotent."""
    size = len(text.encode("utf-8"))
    if size > max_input_bytes:
        raise InputTooLarge(size, max_input_bytes)
    out = unicodedata.normalize("NFKD", text)
    out = "".join(ch for ch in out if not _strip_marks(ch))
    out = out.translate(homoglyphs if homoglyphs is not None else homoglyph_table())
    out = out.translate(leet if leet is not None else leet_table())
    return out


def squash(text: str) -> str:
    """Compress every run of >= 3 identical characters down to exactly 2."""
    return _RUN.sub(r"\1\1", text)


def build_views(text: str, *, max_input_bytes: int = DEFAULT_MAX_INPUT_BYTES) -> AnalysisViews:
    norm = normalize(text, max_input_bytes=max_input_bytes)
    return AnalysisViews(
        original=text,
        normalized=norm,
        squashed=squash(norm),
        lowercase=norm.lower(),
    )


def shannon_entropy(text: str) -> float:
    """Character-frequency entropy in bits per character."""
    if not text:
        raise EmptyInput("entropy of empty text is undefined")
    n = len(text)
    return -sum((k / n) * math.log2(k / n) for k in Counter(text).values()) + 0.0


def high_entropy_tokens(text: str, *, min_len: int = 24, threshold: float = 4.5) -> list[str]:
    """Whitespace-delimited tokens long and random-looking enough to flag."""
    return [
        tok
        for tok in text.split()
        if len(tok) >= min_len and shannon_entropy(tok) > threshold
    ]


def signal_hits(text: str, vocabulary: frozenset[str]) -> int:
    """Count word tokens of `text` that appear in `vocabulary` (lowercased)."""
    return sum(1 for tok in _TOKEN.findall(text.lower()) if tok in vocabulary)
