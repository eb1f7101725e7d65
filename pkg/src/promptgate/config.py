"""Gateway configuration: defaults, JSON loading, env overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

DEFAULT_L1_THRESHOLD = 50           # block when risk score is strictly greater
DEFAULT_L2_BLOCK_THRESHOLD = 0.54   # similarity >= block -> block
DEFAULT_L2_REVIEW_THRESHOLD = 0.37  # [review, block) -> fallback band
DEFAULT_ENTROPY_THRESHOLD = 4.5     # bits/char, strict greater-than
DEFAULT_ENTROPY_MIN_LEN = 24
DEFAULT_MAX_DECODE_DEPTH = 3
DEFAULT_MAX_INPUT_BYTES = 1 << 20   # 1 MiB
DEFAULT_EMBEDDING_MODEL = "BAAI/bge-small-en-v1.5"
DEFAULT_EMBEDDING_DIM = 384
DEFAULT_LLM_BASE_URL = "http://localhost:11434"
DEFAULT_LLM_MODEL = "llama3:8b"
DEFAULT_LLM_TIMEOUT = 10.0
DEFAULT_LLM_CONTEXT_TOKENS = 8192

# Per-category base scores on the 0-100 risk scale.  The three published
# anchors are prompt injection 90, tool abuse 85, data exfiltration 84; the
# rest are assigned so that low-risk categories alone cannot cross the
# blocking threshold.
DEFAULT_BASE_SCORES: dict[str, int] = {
    "direct_injection": 90,
    "high_risk_indirect": 80,
    "low_risk_indirect": 35,
    "prompt_leakage": 86,
    "tool_abuse": 85,
    "data_exfiltration": 84,
    "jailbreak": 88,
    "semantic_signal": 40,
}


def data_path(*parts: str) -> Path:
    """Path to a bundled data file inside the installed package."""
    root = resources.files("promptgate").joinpath("data")
    return Path(str(root.joinpath(*parts)))


def default_rule_files() -> list[Path]:
    rules_dir = data_path("rules")
    return sorted(rules_dir.glob("*.rules"))


def default_signal_files() -> dict[str, Path]:
    return {
        "control_intent": data_path("signals", "control_intent.txt"),
        "sensitive_context": data_path("signals", "sensitive_context.txt"),
        "governance_context": data_path("signals", "governance_context.txt"),
        "benign_workflow": data_path("signals", "benign_workflow.txt"),
    }


@dataclass
class GatewayConfig:
    """Everything the gateway needs to start, with working defaults.

    Thresholds mirror the shipped parameter sheet: L1 risk >50 blocks,
    L2 blocks at similarity >=0.54 and defers to the fallback judge in
    [0.37, 0.54), L3 flags base64 runs whose entropy exceeds 4.5 bits/char.
    """

    listen_host: str = "127.0.0.1"
    listen_port: int = 8848

    rule_files: list[str] = field(default_factory=list)     # empty -> bundled
    signal_files: dict[str, str] = field(default_factory=dict)
    homoglyph_file: str | None = None
    leet_file: str | None = None
    decoder_wordlist_file: str | None = None

    l1_threshold: int = DEFAULT_L1_THRESHOLD
    base_scores: dict[str, int] = field(default_factory=dict)  # overrides
    max_decode_depth: int = DEFAULT_MAX_DECODE_DEPTH
    max_input_bytes: int = DEFAULT_MAX_INPUT_BYTES

    l2_block_threshold: float = DEFAULT_L2_BLOCK_THRESHOLD
    l2_review_threshold: float = DEFAULT_L2_REVIEW_THRESHOLD
    embedding_provider: str = "stub"          # stub | http | sentence-transformers
    embedding_model: str = DEFAULT_EMBEDDING_MODEL
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    embedding_url: str | None = None          # for the http provider
    attack_corpus_file: str | None = None
    corpus_cache_dir: str | None = None

    llm_enabled: bool = False
    llm_base_url: str = DEFAULT_LLM_BASE_URL
    llm_model: str = DEFAULT_LLM_MODEL
    llm_timeout: float = DEFAULT_LLM_TIMEOUT
    llm_context_tokens: int = DEFAULT_LLM_CONTEXT_TOKENS

    secret_patterns_file: str | None = None
    keywords_file: str | None = None
    entropy_threshold: float = DEFAULT_ENTROPY_THRESHOLD
    entropy_min_len: int = DEFAULT_ENTROPY_MIN_LEN

    review_log_path: str = "review_queue.log"
    api_token: str | None = None

    def validate(self) -> None:
        if not 0 <= self.l1_threshold <= 100:
            raise ValueError(f"l1_threshold must be in [0, 100], got {self.l1_threshold}")
        if not 0 <= self.l2_review_threshold < self.l2_block_threshold <= 1:
            raise ValueError(
                "l2 thresholds must satisfy 0 <= review < block <= 1, got "
                f"review={self.l2_review_threshold} block={self.l2_block_threshold}"
            )
        if self.max_input_bytes <= 0:
            raise ValueError("max_input_bytes must be positive")
        if self.entropy_min_len < 16:
            raise ValueError(f"entropy_min_len must be >= 16, got {self.entropy_min_len}")
        for cat, score in self.base_scores.items():
            if cat not in DEFAULT_BASE_SCORES:
                raise ValueError(f"unknown category in base_scores: {cat!r}")
            if not 0 <= score <= 100:
                raise ValueError(f"base score for {cat} must be in [0, 100], got {score}")

    def effective_base_scores(self) -> dict[str, int]:
        merged = dict(DEFAULT_BASE_SCORES)
        merged.update(self.base_scores)
        return merged


def load_config(path: str | Path | None = None) -> GatewayConfig:
    """Build a config from an optional JSON file plus env overrides.

    Env overrides: PROMPTGATE_LISTEN (host:port), PROMPTGATE_TOKEN.
    """
    cfg = GatewayConfig()
    if path is not None:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(GatewayConfig)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = GatewayConfig(**raw)

    listen = os.environ.get("PROMPTGATE_LISTEN")
    if listen:
        host, _, port = listen.rpartition(":")
        cfg.listen_host = host or cfg.listen_host
        cfg.listen_port = int(port)
    token = os.environ.get("PROMPTGATE_TOKEN")
    if token:
        cfg.api_token = token

    cfg.validate()
    return cfg
