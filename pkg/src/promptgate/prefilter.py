"""Rule-based pre-filter: pattern registry, injection-mode detection, and
the 0-100 risk score.

Every rule is executed across the four analysis views plus each decoded
candidate.  An input is blocked when its score exceeds the threshold or an
injection mode (direct / indirect / hybrid) is detected.
"""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .config import DEFAULT_BASE_SCORES, DEFAULT_L1_THRESHOLD, DEFAULT_MAX_DECODE_DEPTH, \
    DEFAULT_MAX_INPUT_BYTES, default_rule_files, default_signal_files
from .decoders import DecodedCandidate, decode_obfuscations
from .errors import InputTooLarge, RegistryLoadError, RegistryValidationError
from .normalize import AnalysisViews, build_views, high_entropy_tokens, normalize


class Category(str, enum.Enum):
    DIRECT_INJECTION = "direct_injection"
    HIGH_RISK_INDIRECT = "high_risk_indirect"
    LOW_RISK_INDIRECT = "low_risk_indirect"
    PROMPT_LEAKAGE = "prompt_leakage"
    TOOL_ABUSE = "tool_abuse"
    DATA_EXFILTRATION = "data_exfiltration"
    JAILBREAK = "jailbreak"
    SEMANTIC_SIGNAL = "semantic_signal"


class RuleKind(str, enum.Enum):
    REGEX = "regex"
    PHRASE = "phrase"


class InjectionMode(str, enum.Enum):
    DIRECT = "direct"
    INDIRECT = "indirect"
    HYBRID = "hybrid"
    NONE = "none"


# Categories whose rules are regex patterns (semantic signals are phrases).
REGEX_CATEGORIES = tuple(c for c in Category if c is not Category.SEMANTIC_SIGNAL)

# Per-category minimum rule counts the shipped registry must meet.
MIN_RULE_COUNTS: dict[Category, int] = {
    Category.DIRECT_INJECTION: 19,
    Category.HIGH_RISK_INDIRECT: 17,
    Category.LOW_RISK_INDIRECT: 5,
    Category.PROMPT_LEAKAGE: 14,
    Category.TOOL_ABUSE: 11,
    Category.DATA_EXFILTRATION: 11,
    Category.JAILBREAK: 15,
    Category.SEMANTIC_SIGNAL: 43,
}
MIN_TOTAL_REGEX_RULES = 100

PHRASE_BONUS_CAP = 10.0
ENTROPY_BONUS = 10.0


@dataclass(frozen=True)
class PatternRule:
    id: str
    category: Category
    kind: RuleKind
    pattern: str
    weight: float
    compiled: re.Pattern = field(repr=False, compare=False)


@dataclass(frozen=True)
class PatternMatch:
    rule_id: str
    category: Category
    view: str  # original | normalized | squashed | lowercase | decoded
    span: tuple[int, int]
    matched_text: str


@dataclass
class PatternRegistry:
    rules: list[PatternRule]
    base_scores: dict[str, int]

    def __post_init__(self):
        self._by_id = {rule.id: rule for rule in self.rules}

    def rule(self, rule_id: str) -> PatternRule:
        return self._by_id[rule_id]

    def count(self, category: Category, kind: RuleKind | None = None) -> int:
        return sum(
            1
            for r in self.rules
            if r.category is category and (kind is None or r.kind is kind)
        )


def _rule_id(category: str, kind: str, pattern: str) -> str:
    digest = hashlib.sha1(pattern.encode("utf-8")).hexdigest()[:10]
    return f"{category}/{kind}/{digest}"


def _compile_rule(path: str, line_no: int, category: str, kind: str, weight: str,
                  pattern: str) -> PatternRule:
    try:
        cat = Category(category)
    except ValueError:
        raise RegistryLoadError(path, line_no, f"unknown category {category!r}")
    try:
        rule_kind = RuleKind(kind)
    except ValueError:
        raise RegistryLoadError(path, line_no, f"unknown kind {kind!r}")
    try:
        w = float(weight)
    except ValueError:
        raise RegistryLoadError(path, line_no, f"bad weight {weight!r}")
    if not 0 < w <= 1:
        raise RegistryLoadError(path, line_no, f"weight must be in (0, 1], got {w}")
    if not pattern:
        raise RegistryLoadError(path, line_no, "empty pattern")
    if rule_kind is RuleKind.PHRASE:
        source = r"\b" + re.escape(pattern) + r"\b"
    else:
        source = pattern
    try:
        compiled = re.compile(source, re.IGNORECASE)
    except re.error as exc:
        raise RegistryLoadError(path, line_no, f"regex does not compile: {exc}")
    return PatternRule(
        id=_rule_id(category, kind, pattern),
        category=cat,
        kind=rule_kind,
        pattern=pattern,
        weight=w,
        compiled=compiled,
    )


def load_registry(
    rule_files: Iterable[str | Path] | None = None,
    *,
    base_scores: dict[str, int] | None = None,
    enforce_minimums: bool = True,
) -> PatternRegistry:
    """Parse rule files into a validated registry.

    Files are UTF-8, one rule per line: category<TAB>kind<TAB>weight<TAB>pattern,
    with `#` comments.  Duplicate rules (same category, kind and pattern) are
    rejected; with `enforce_minimums` the per-category Table minimums and the
    100-regex floor are enforced.
    """
    paths = [Path(p) for p in rule_files] if rule_files is not None else default_rule_files()
    rules: list[PatternRule] = []
    seen: set[str] = set()
    for path in paths:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise RegistryLoadError(str(path), 0, f"cannot read: {exc}")
        for line_no, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise RegistryLoadError(
                    str(path), line_no, f"expected 4 tab-separated fields, got {len(parts)}"
                )
            rule = _compile_rule(str(path), line_no, *parts)
            if rule.id in seen:
                raise RegistryLoadError(str(path), line_no, f"duplicate rule id {rule.id}")
            seen.add(rule.id)
            rules.append(rule)

    scores = dict(DEFAULT_BASE_SCORES)
    if base_scores:
        scores.update(base_scores)
    registry = PatternRegistry(rules=rules, base_scores=scores)

    missing = [c.value for c in Category if c.value not in scores]
    if missing:
        raise RegistryValidationError(f"base_scores missing categories: {missing}")
    if enforce_minimums:
        for category, minimum in MIN_RULE_COUNTS.items():
            have = registry.count(category)
            if have < minimum:
                raise RegistryValidationError(
                    f"category {category.value} has {have} rules, needs >= {minimum}"
                )
        total_regex = sum(registry.count(c, RuleKind.REGEX) for c in REGEX_CATEGORIES)
        if total_regex < MIN_TOTAL_REGEX_RULES:
            raise RegistryValidationError(
                f"{total_regex} regex rules across {len(REGEX_CATEGORIES)} categories, "
                f"needs >= {MIN_TOTAL_REGEX_RULES}"
            )
    return registry


def scan_views(
    views: AnalysisViews,
    decoded: Sequence[DecodedCandidate],
    registry: PatternRegistry,
) -> list[PatternMatch]:
    """Run every rule against all four views and each decoded candidate.

    At most one match is reported per (rule, view) pair; all decoded
    candidates share the `decoded` pseudo-view.
    """
    matches: list[PatternMatch] = []
    targets: list[tuple[str, str]] = views.named()
    for candidate in decoded:
        try:
            text = normalize(candidate.decoded_text)
        except InputTooLarge:
            text = candidate.decoded_text
        targets.append(("decoded", text))

    reported: set[tuple[str, str]] = set()
    for view_name, text in targets:
        for rule in registry.rules:
            if (rule.id, view_name) in reported:
                continue
            found = rule.compiled.search(text)
            if found:
                reported.add((rule.id, view_name))
                matches.append(
                    PatternMatch(
                        rule_id=rule.id,
                        category=rule.category,
                        view=view_name,
                        span=found.span(),
                        matched_text=found.group(),
                    )
                )
    return matches


@dataclass(frozen=True)
class SignalGroups:
    """The four phrase sets behind injection-mode detection."""

    control_intent: frozenset[str]
    sensitive_context: frozenset[str]
    governance_context: frozenset[str]
    benign_workflow: frozenset[str]

    def __post_init__(self):
        named = {
            "control_intent": self.control_intent,
            "sensitive_context": self.sensitive_context,
            "governance_context": self.governance_context,
            "benign_workflow": self.benign_workflow,
        }
        for name, group in named.items():
            if not group:
                raise ValueError(f"signal group {name} is empty")
        names = list(named)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                overlap = named[a] & named[b]
                if overlap:
                    raise ValueError(f"signal groups {a} and {b} overlap: {sorted(overlap)}")


def _load_phrases(path: str | Path) -> frozenset[str]:
    phrases = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            phrases.add(line)
    return frozenset(phrases)


def load_signals(paths: dict[str, str | Path] | None = None) -> SignalGroups:
    files = dict(default_signal_files())
    if paths:
        files.update(paths)
    return SignalGroups(
        control_intent=_load_phrases(files["control_intent"]),
        sensitive_context=_load_phrases(files["sensitive_context"]),
        governance_context=_load_phrases(files["governance_context"]),
        benign_workflow=_load_phrases(files["benign_workflow"]),
    )


_WORD = re.compile(r"[a-z0-9_]+")
_FENCED = re.compile(r"```.*?```", re.DOTALL)
_QUOTED = (
    re.compile(r'"([^"\n]{2,}?)"'),
    re.compile(r"“([^“”\n]{2,}?)”"),
    re.compile(r"`([^`\n]{2,}?)`"),
    re.compile(r"(?<!\w)'([^'\n]{2,}?)'(?!\w)"),
)


def _split_embedded(text: str) -> tuple[str, list[str]]:
    """Separate top-level text from quoted/fenced segments."""
    segments: list[str] = []

    def capture(match: re.Match) -> str:
        segments.append(match.group(match.lastindex or 0))
        return " "

    top = _FENCED.sub(capture, text)
    for pattern in _QUOTED:
        top = pattern.sub(capture, top)
    return top, segments


def _hits(text: str, phrases: frozenset[str]) -> bool:
    tokens = set(_WORD.findall(text.lower()))
    for phrase in phrases:
        if " " in phrase:
            if phrase in text.lower():
                return True
        elif phrase in tokens:
            return True
    return False


def detect_injection_mode(
    views: AnalysisViews,
    decoded: Sequence[DecodedCandidate],
    signals: SignalGroups,
) -> InjectionMode:
    """Classify the input as direct, indirect, hybrid, or none.

    Direct requires control-intent and governance-context terms together in
    the top-level text; indirect requires control intent confined to
    quoted/fenced segments or decoded candidates.  A weak single-group
    signal is suppressed when benign workflow terms are present.
    """
    top, segments = _split_embedded(views.lowercase)
    embedded = segments + [c.decoded_text.lower() for c in decoded]

    control_top = _hits(top, signals.control_intent)
    governance_top = _hits(top, signals.governance_context)
    control_embedded = any(_hits(seg, signals.control_intent) for seg in embedded)

    direct_cond = control_top and governance_top
    indirect_cond = control_embedded

    if direct_cond and indirect_cond:
        mode = InjectionMode.HYBRID
    elif direct_cond:
        mode = InjectionMode.DIRECT
    elif indirect_cond and not control_top:
        mode = InjectionMode.INDIRECT
    else:
        mode = InjectionMode.NONE

    if mode is InjectionMode.INDIRECT and _hits(views.lowercase, signals.benign_workflow):
        whole = views.lowercase + " " + " ".join(embedded)
        groups_hit = sum(
            1
            for group in (signals.control_intent, signals.sensitive_context,
                          signals.governance_context)
            if _hits(whole, group)
        )
        if groups_hit <= 1:
            mode = InjectionMode.NONE
    return mode


def compute_risk_score(
    matches: Sequence[PatternMatch],
    mode: InjectionMode,
    entropy_flag: bool,
    registry: PatternRegistry,
) -> int:
    """Max category base score plus bounded additive bonuses, clamped to 0-100.

    Monotone: adding a match can only raise the score.  The phrase bonus is
    capped so weak signals cannot cross the blocking threshold on their own.
    """
    base = max(
        (registry.base_scores[m.category.value] for m in matches),
        default=0,
    )
    phrase_rules = {m.rule_id for m in matches if registry.rule(m.rule_id).kind is RuleKind.PHRASE}
    phrase_bonus = min(
        PHRASE_BONUS_CAP,
        sum(10.0 * registry.rule(rid).weight for rid in phrase_rules),
    )
    entropy_bonus = ENTROPY_BONUS if entropy_flag else 0.0
    return int(max(0.0, min(100.0, base + phrase_bonus + entropy_bonus)))


@dataclass(frozen=True)
class L1Verdict:
    action: str  # "block" | "pass"
    risk_score: int
    mode: InjectionMode
    matches: tuple[PatternMatch, ...]
    entropy_flag: bool


def l1_evaluate(
    text: str,
    registry: PatternRegistry,
    signals: SignalGroups,
    *,
    threshold: int = DEFAULT_L1_THRESHOLD,
    max_decode_depth: int = DEFAULT_MAX_DECODE_DEPTH,
    max_input_bytes: int = DEFAULT_MAX_INPUT_BYTES,
    decoder_signal_words: frozenset[str] | None = None,
) -> L1Verdict:
    """Full pre-filter pass; blocks iff score > threshold or a mode fires."""
    views = build_views(text, max_input_bytes=max_input_bytes)
    decoded = decode_obfuscations(
        text, max_depth=max_decode_depth, signal_words=decoder_signal_words
    )
    matches = scan_views(views, decoded, registry)
    mode = detect_injection_mode(views, decoded, signals)
    entropy_flag = bool(
        high_entropy_tokens(views.original) or high_entropy_tokens(views.normalized)
    )
    score = compute_risk_score(matches, mode, entropy_flag, registry)
    blocked = score > threshold or mode is not InjectionMode.NONE
    return L1Verdict(
        action="block" if blocked else "pass",
        risk_score=score,
        mode=mode,
        matches=tuple(matches),
        entropy_flag=entropy_flag,
    )
