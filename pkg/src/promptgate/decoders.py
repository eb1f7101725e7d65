"""Recursive obfuscation decoding: base64, ROT13, percent, octal, HTML
entities, hex, and Unicode escapes.

Each decoder scans for plausibly-encoded substrings, decodes them, and the
driver recurses on the result up to ``max_depth``.  Undecodable content is
skipped, never fatal; plain text yields no candidates.
"""

from __future__ import annotations

import base64
import binascii
import codecs
import html
import re
import urllib.parse
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from .config import DEFAULT_MAX_DECODE_DEPTH, data_path
from .normalize import signal_hits

_MAX_CANDIDATES = 64

_B64_TOKEN = re.compile(r"[A-Za-z0-9+/]{8,}={0,2}")
_PCT_SEQ = re.compile(r"%[0-9A-Fa-f]{2}")
_OCT_RUN = re.compile(r"(?:\\[0-7]{1,3}){2,}")
_OCT_SEQ = re.compile(r"\\([0-7]{1,3})")
_ENTITY = re.compile(r"&(?:#\d{1,7}|#[xX][0-9A-Fa-f]{1,6}|[A-Za-z][A-Za-z0-9]{1,30});")
_HEX_RUN = re.compile(r"(?:\\x[0-9A-Fa-f]{2}){2,}")
_HEX_SEQ = re.compile(r"\\x([0-9A-Fa-f]{2})")
_HEX_BARE = re.compile(r"\b(?:[0-9A-Fa-f]{2}){8,}\b")
_UNI_RUN = re.compile(r"(?:\\u[0-9A-Fa-f]{4}){2,}")
_UNI_SEQ = re.compile(r"\\u([0-9A-Fa-f]{4})")


@dataclass(frozen=True)
class DecodedCandidate:
    """One successfully decoded rendering of (part of) the input."""

    decoded_text: str
    encoding_chain: tuple[str, ...]
    depth: int


@lru_cache(maxsize=4)
def _wordlist(path_str: str) -> frozenset[str]:
    words = set()
    for line in Path(path_str).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


def default_signal_words(path: str | Path | None = None) -> frozenset[str]:
    return _wordlist(str(path or data_path("signals", "decoder_wordlist.txt")))


def _printable_fraction(text: str) -> float:
    if not text:
        return 0.0
    ok = sum(1 for ch in text if ch.isprintable() or ch in "\t\n\r ")
    return ok / len(text)


def _decode_base64(text: str, _vocab: frozenset[str]) -> list[str]:
    out = []
    for match in _B64_TOKEN.finditer(text):
        token = match.group()
        if len(token) % 4:
            continue
        try:
            decoded = base64.b64decode(token, validate=True).decode("utf-8")
        except (ValueError, binascii.Error, UnicodeDecodeError):
            continue
        if len(decoded) >= 4 and _printable_fraction(decoded) >= 0.75:
            out.append(decoded)
    return out


def _decode_rot13(text: str, vocab: frozenset[str]) -> list[str]:
    decoded = codecs.decode(text, "rot_13")
    if decoded == text:
        return []
    # ROT13 of ordinary English is noise; keep the candidate only when
    # decoding surfaces more signal vocabulary than the input had.
    if signal_hits(decoded, vocab) > signal_hits(text, vocab):
        return [decoded]
    return []


def _decode_percent(text: str, _vocab: frozenset[str]) -> list[str]:
    if len(_PCT_SEQ.findall(text)) < 2:
        return []
    try:
        decoded = urllib.parse.unquote(text, errors="strict")
    except UnicodeDecodeError:
        return []
    return [decoded] if decoded != text else []


def _sub_runs(text: str, run_re: re.Pattern, decode_run) -> list[str]:
    changed = False

    def repl(match: re.Match) -> str:
        nonlocal changed
        try:
            decoded = decode_run(match.group())
        except (ValueError, UnicodeDecodeError):
            return match.group()
        changed = True
        return decoded

    result = run_re.sub(repl, text)
    return [result] if changed and result != text else []


def _decode_octal(text: str, _vocab: frozenset[str]) -> list[str]:
    def decode_run(run: str) -> str:
        return bytes(int(o, 8) for o in _OCT_SEQ.findall(run)).decode("utf-8")

    return _sub_runs(text, _OCT_RUN, decode_run)


def _decode_html_entity(text: str, _vocab: frozenset[str]) -> list[str]:
    if len(_ENTITY.findall(text)) < 2:
        return []
    decoded = html.unescape(text)
    return [decoded] if decoded != text else []


def _decode_hex(text: str, _vocab: frozenset[str]) -> list[str]:
    def decode_run(run: str) -> str:
        return bytes(int(h, 16) for h in _HEX_SEQ.findall(run)).decode("utf-8")

    out = _sub_runs(text, _HEX_RUN, decode_run)
    # Bare hex dumps (no \x prefix) of at least 16 digits.
    for match in _HEX_BARE.finditer(text):
        token = match.group()
        if len(token) % 2:
            continue
        try:
            decoded = bytes.fromhex(token).decode("utf-8")
        except (ValueError, UnicodeDecodeError):
            continue
        if len(decoded) >= 4 and _printable_fraction(decoded) >= 0.75:
            out.append(decoded)
    return out


def _decode_unicode_escape(text: str, _vocab: frozenset[str]) -> list[str]:
    def decode_run(run: str) -> str:
        points = [int(h, 16) for h in _UNI_SEQ.findall(run)]
        if any(0xD800 <= p <= 0xDFFF for p in points):
            raise ValueError("lone surrogate")
        return "".join(chr(p) for p in points)

    return _sub_runs(text, _UNI_RUN, decode_run)


DECODERS: tuple[tuple[str, object], ...] = (
    ("base64", _decode_base64),
    ("rot13", _decode_rot13),
    ("percent", _decode_percent),
    ("octal", _decode_octal),
    ("html_entity", _decode_html_entity),
    ("hex", _decode_hex),
    ("unicode_escape", _decode_unicode_escape),
)


def decode_obfuscations(
    text: str,
    *,
    max_depth: int = DEFAULT_MAX_DECODE_DEPTH,
    signal_words: frozenset[str] | None = None,
) -> list[DecodedCandidate]:
    """All decodable renderings of `text`, recursing up to `max_depth`."""
    vocab = signal_words if signal_words is not None else default_signal_words()
    candidates: list[DecodedCandidate] = []
    explored = {text}
    frontier: list[tuple[str, tuple[str, ...]]] = [(text, ())]
    for depth in range(1, max_depth + 1):
        next_frontier: list[tuple[str, tuple[str, ...]]] = []
        for source, chain in frontier:
            for name, decode in DECODERS:
                for decoded in decode(source, vocab):
                    if decoded == source:
                        continue
                    candidates.append(DecodedCandidate(decoded, chain + (name,), depth))
                    if len(candidates) >= _MAX_CANDIDATES:
                        return candidates
                    if decoded not in explored:
                        explored.add(decoded)
                        next_frontier.append((decoded, chain + (name,)))
        frontier = next_frontier
    return candidates
