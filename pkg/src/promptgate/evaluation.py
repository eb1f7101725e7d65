"""Evaluation harness: labeled datasets in, confusion matrix and the seven
derived metrics out, with per-category recall and tier bucketing.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import DatasetError, ValidationError
from .pipeline import Action, Pipeline

logger = logging.getLogger(__name__)

CATEGORIES = (
    "semantic_attack",
    "tool_poisoning",
    "data_exfiltration",
    "prompt_injection",
    "tool_shadowing",
    "benign",
)

REVIEW_AS_FLAGGED = "review_as_flagged"
REVIEW_AS_BENIGN = "review_as_benign"

# Tier k covers recalls in [lower, upper); tier 1 is exactly 1.0.
TIER_BOUNDS = (
    (2, 0.80, 1.00),
    (3, 0.60, 0.80),
    (4, 0.40, 0.60),
    (5, 0.20, 0.40),
    (6, 0.00, 0.20),
)


@dataclass(frozen=True)
class EvalRecord:
    text: str
    label: str  # benign | malicious
    category: str
    attack_type: str | None = None
    source: str | None = None


def load_dataset(path: str | Path) -> list[EvalRecord]:
    """Line-delimited JSON records with text/label/category[/attack_type/source]."""
    source = Path(path)
    records: list[EvalRecord] = []
    text = source.read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(line_no, f"bad JSON: {exc}")
        for field_name in ("text", "label", "category"):
            if field_name not in raw:
                raise DatasetError(line_no, f"missing field {field_name!r}")
        if raw["label"] not in ("benign", "malicious"):
            raise DatasetError(line_no, f"label must be benign|malicious, got {raw['label']!r}")
        if raw["category"] not in CATEGORIES:
            raise DatasetError(line_no, f"unknown category {raw['category']!r}")
        if (raw["label"] == "benign") != (raw["category"] == "benign"):
            raise DatasetError(
                line_no, f"label {raw['label']!r} inconsistent with category {raw['category']!r}"
            )
        records.append(
            EvalRecord(
                text=raw["text"],
                label=raw["label"],
                category=raw["category"],
                attack_type=raw.get("attack_type"),
                source=raw.get("source"),
            )
        )
    if not records:
        logger.warning("dataset %s is empty", source)
    return records


@dataclass
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class EvalResult:
    matrix: ConfusionMatrix
    per_category: dict[str, dict[str, int]]  # category -> {"tp": n, "fn": n} / benign fp/tn
    per_type: dict[str, dict[str, int]]
    review_count: int = 0


def run_eval(
    records: Sequence[EvalRecord],
    pipeline: Pipeline,
    review_policy: str = REVIEW_AS_FLAGGED,
) -> EvalResult:
    """Score every record with check_input.

    Predicted-malicious means BLOCK, plus REVIEW under the flagged policy.
    """
    if review_policy not in (REVIEW_AS_FLAGGED, REVIEW_AS_BENIGN):
        raise ValueError(f"unknown review policy {review_policy!r}")
    result = EvalResult(ConfusionMatrix(), {}, {})
    for record in records:
        decision = pipeline.check_input(record.text)
        if decision.action is Action.REVIEW:
            result.review_count += 1
        flagged = decision.action is Action.BLOCK or (
            decision.action is Action.REVIEW and review_policy == REVIEW_AS_FLAGGED
        )
        cat = result.per_category.setdefault(record.category, {"tp": 0, "fn": 0, "fp": 0, "tn": 0})
        if record.attack_type:
            typ = result.per_type.setdefault(record.attack_type, {"tp": 0, "fn": 0})
        if record.label == "malicious":
            key = "tp" if flagged else "fn"
            setattr(result.matrix, key, getattr(result.matrix, key) + 1)
            cat[key] += 1
            if record.attack_type:
                typ[key] += 1
        else:
            key = "fp" if flagged else "tn"
            setattr(result.matrix, key, getattr(result.matrix, key) + 1)
            cat[key] += 1
    return result


@dataclass
class MetricsReport:
    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    specificity: float | None
    fpr: float | None
    fnr: float | None
    absent: dict[str, str] = field(default_factory=dict)
    per_category_recall: dict[str, float] = field(default_factory=dict)
    per_type_recall: dict[str, float] = field(default_factory=dict)
    tiers: dict[str, int] = field(default_factory=dict)
    matrix: ConfusionMatrix | None = None


def compute_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """The seven standard ratios; impossible divisions come back absent with
    a reason instead of NaN."""
    absent: dict[str, str] = {}

    def ratio(name: str, num: int, den: int) -> float | None:
        if den == 0:
            absent[name] = f"denominator is zero ({name})"
            return None
        return num / den

    accuracy = ratio("accuracy", cm.tp + cm.tn, cm.total)
    precision = ratio("precision", cm.tp, cm.tp + cm.fp)
    recall = ratio("recall", cm.tp, cm.tp + cm.fn)
    specificity = ratio("specificity", cm.tn, cm.tn + cm.fp)
    fpr = ratio("fpr", cm.fp, cm.tn + cm.fp)
    fnr = ratio("fnr", cm.fn, cm.tp + cm.fn)
    if precision is None or recall is None or precision + recall == 0:
        absent.setdefault("f1", "precision/recall unavailable or both zero")
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        specificity=specificity,
        fpr=fpr,
        fnr=fnr,
        absent=absent,
        matrix=cm,
    )


def recall_map(counts: dict[str, dict[str, int]]) -> dict[str, float]:
    out = {}
    for name, c in counts.items():
        positives = c.get("tp", 0) + c.get("fn", 0)
        if positives:
            out[name] = c.get("tp", 0) / positives
    return out


def tier_for(recall: float) -> int:
    if not 0.0 <= recall <= 1.0:
        raise ValidationError(f"recall must be in [0, 1], got {recall}")
    if recall == 1.0:
        return 1
    for tier, low, high in TIER_BOUNDS:
        if low <= recall < high:
            return tier
    raise ValidationError(f"no tier for recall {recall}")  # unreachable


def tier_report(per_type_recall: dict[str, float]) -> dict[str, int]:
    return {name: tier_for(r) for name, r in per_type_recall.items()}


def build_report(result: EvalResult) -> MetricsReport:
    report = compute_metrics(result.matrix)
    report.per_category_recall = recall_map(
        {k: v for k, v in result.per_category.items() if k != "benign"}
    )
    report.per_type_recall = recall_map(result.per_type)
    report.tiers = tier_report(report.per_type_recall)
    return report


def _fmt(value: float | None, digits: int = 4) -> str:
    return "absent" if value is None else f"{value:.{digits}f}"


def report_to_dict(report: MetricsReport, result: EvalResult | None = None) -> dict[str, Any]:
    data: dict[str, Any] = {
        "metrics": {
            "accuracy": report.accuracy,
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
            "specificity": report.specificity,
            "fpr": report.fpr,
            "fnr": report.fnr,
        },
        "absent": report.absent,
        "confusion_matrix": None,
        "per_category_recall": report.per_category_recall,
        "per_type_recall": report.per_type_recall,
        "tiers": report.tiers,
    }
    if report.matrix is not None:
        data["confusion_matrix"] = {
            "tp": report.matrix.tp,
            "fp": report.matrix.fp,
            "tn": report.matrix.tn,
            "fn": report.matrix.fn,
        }
    if result is not None:
        data["per_category_counts"] = result.per_category
        data["review_count"] = result.review_count
    return data


def render_markdown(report: MetricsReport, result: EvalResult | None = None) -> str:
    lines = ["# Evaluation report", "", "## Overall metrics", ""]
    lines += ["| Metric | Value |", "| --- | --- |"]
    for name in ("accuracy", "precision", "recall", "f1", "specificity", "fpr", "fnr"):
        lines.append(f"| {name} | {_fmt(getattr(report, name))} |")
    if report.matrix is not None:
        cm = report.matrix
        lines += [
            "",
            "## Confusion matrix",
            "",
            "| | Predicted malicious | Predicted benign |",
            "| --- | --- | --- |",
            f"| Actual malicious | {cm.tp} (TP) | {cm.fn} (FN) |",
            f"| Actual benign | {cm.fp} (FP) | {cm.tn} (TN) |",
        ]
    lines += ["", "## Per-category performance", ""]
    lines += ["| Category | TP | FP | FN | Recall |", "| --- | --- | --- | --- | --- |"]
    counts = result.per_category if result is not None else {}
    for cat in sorted(set(counts) | set(report.per_category_recall)):
        c = counts.get(cat, {})
        recall = report.per_category_recall.get(cat)
        recall_s = f"{recall:.4f}" if recall is not None else "-"
        lines.append(
            f"| {cat} | {c.get('tp', 0)} | {c.get('fp', 0)} | {c.get('fn', 0)} | {recall_s} |"
        )
    lines += ["", "## Attack-type tiers", ""]
    lines += ["| Type | Recall | Tier |", "| --- | --- | --- |"]
    for name in sorted(report.per_type_recall):
        lines.append(
            f"| {name} | {report.per_type_recall[name]:.4f} | {report.tiers[name]} |"
        )
    lines.append("")
    return "\n".join(lines)


def emit_report(
    report: MetricsReport,
    path: str | Path,
    fmt: str = "json",
    result: EvalResult | None = None,
) -> None:
    """Deterministic serialization of the full report."""
    target = Path(path)
    if fmt == "json":
        target.write_text(
            json.dumps(report_to_dict(report, result), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    elif fmt == "markdown":
        target.write_text(render_markdown(report, result), encoding="utf-8")
    else:
        raise ValueError(f"unknown format {fmt!r}")
