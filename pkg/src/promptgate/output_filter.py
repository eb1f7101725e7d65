"""Response-side filter: sensitive keywords, secret patterns, and base64
entropy analysis.  A response is blocked iff any scanner finds something.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .config import DEFAULT_ENTROPY_MIN_LEN, DEFAULT_ENTROPY_THRESHOLD, data_path
from .normalize import shannon_entropy

_B64_RUN = re.compile(r"[A-Za-z0-9+/=]+")


class FindingKind(str, enum.Enum):
    SECRET = "secret"
    KEYWORD = "keyword"
    HIGH_ENTROPY_BASE64 = "high_entropy_base64"


@dataclass(frozen=True)
class SecretPattern:
    id: str
    provider_label: str
    pattern: str
    compiled: re.Pattern


@dataclass(frozen=True)
class L3Finding:
    kind: FindingKind
    span: tuple[int, int]
    detail: str


@dataclass(frozen=True)
class L3Verdict:
    action: str  # "block" | "allow"
    findings: tuple[L3Finding, ...]


def load_secret_patterns(path: str | Path | None = None) -> list[SecretPattern]:
    source = Path(path) if path else data_path("l3", "secret_patterns.rules")
    patterns: list[SecretPattern] = []
    for line_no, line in enumerate(source.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ValueError(f"{source}:{line_no}: expected 4 tab-separated fields")
        label, _kind, _weight, pattern = parts
        patterns.append(
            SecretPattern(
                id=label,
                provider_label=label,
                pattern=pattern,
                compiled=re.compile(pattern),
            )
        )
    if len(patterns) < 5:
        raise ValueError(f"need >= 5 secret patterns, found {len(patterns)}")
    return patterns


def load_keywords(path: str | Path | None = None) -> frozenset[str]:
    source = Path(path) if path else data_path("signals", "sensitive_context.txt")
    words = set()
    for line in source.read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def scan_secrets(text: str, patterns: Sequence[SecretPattern]) -> list[L3Finding]:
    findings = []
    for pat in patterns:
        for match in pat.compiled.finditer(text):
            findings.append(L3Finding(FindingKind.SECRET, match.span(), pat.id))
    return findings


def scan_keywords(text: str, keywords: frozenset[str]) -> list[L3Finding]:
    """Case-insensitive whole-token hits of the sensitive-term list."""
    findings = []
    for match in re.finditer(r"[A-Za-z0-9_]+", text):
        if match.group().lower() in keywords:
            findings.append(L3Finding(FindingKind.KEYWORD, match.span(), match.group().lower()))
    return findings


def scan_base64_entropy(
    text: str,
    min_len: int = DEFAULT_ENTROPY_MIN_LEN,
    threshold: float = DEFAULT_ENTROPY_THRESHOLD,
) -> list[L3Finding]:
    """Flag long base64-alphabet runs whose character entropy exceeds the
    threshold - the signature of an encrypted or random payload."""
    if min_len < 16:
        raise ValueError(f"min_len must be >= 16, got {min_len}")
    findings = []
    for match in _B64_RUN.finditer(text):
        run = match.group()
        if len(run) < min_len:
            continue
        entropy = shannon_entropy(run)
        if entropy > threshold:
            findings.append(
                L3Finding(FindingKind.HIGH_ENTROPY_BASE64, match.span(), f"{entropy:.4f}")
            )
    return findings


class OutputFilter:
    """L3 as one configured object; pure and safe for concurrent use."""

    def __init__(
        self,
        patterns: Sequence[SecretPattern] | None = None,
        keywords: frozenset[str] | None = None,
        entropy_min_len: int = DEFAULT_ENTROPY_MIN_LEN,
        entropy_threshold: float = DEFAULT_ENTROPY_THRESHOLD,
    ):
        self.patterns = list(patterns) if patterns is not None else load_secret_patterns()
        self.keywords = keywords if keywords is not None else load_keywords()
        self.entropy_min_len = entropy_min_len
        self.entropy_threshold = entropy_threshold

    def evaluate(self, text: str) -> L3Verdict:
        findings = (
            scan_secrets(text, self.patterns)
            + scan_keywords(text, self.keywords)
            + scan_base64_entropy(text, self.entropy_min_len, self.entropy_threshold)
        )
        return L3Verdict(
            action="block" if findings else "allow",
            findings=tuple(findings),
        )


def l3_evaluate(text: str, filter_: OutputFilter | None = None) -> L3Verdict:
    return (filter_ or OutputFilter()).evaluate(text)
