"""Orchestration: L1 then L2 on input, L3 on output, with layer-attributed
decisions and the review queue.

Fail-closed throughout: an oversized input or an unexpected layer failure
becomes BLOCK (or REVIEW), never a silent ALLOW.  L1 blocks short-circuit;
the L2 providers are not touched.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import logging
import time
import uuid
from dataclasses import dataclass
from typing import Any

from .config import GatewayConfig
from .decoders import default_signal_words
from .errors import InputTooLarge, ProviderUnavailable
from .output_filter import OutputFilter
from .prefilter import PatternRegistry, SignalGroups, l1_evaluate, load_registry, load_signals
from .providers import CompletionProvider, EmbeddingProvider, HashEmbedder, HttpEmbedder, \
    OllamaProvider
from .review_queue import ReviewQueue
from .semantic import AttackCorpus, embed_corpus, l2_evaluate, load_corpus_entries
from .normalize import signal_hits  # noqa: F401  (re-exported for callers)

logger = logging.getLogger(__name__)


class Action(str, enum.Enum):
    ALLOW = "ALLOW"
    REVIEW = "REVIEW"
    BLOCK = "BLOCK"


class Layer(str, enum.Enum):
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"
    NONE = "none"


@dataclass(frozen=True)
class Decision:
    request_id: str
    action: Action
    layer: Layer
    timestamp: float
    evidence: dict[str, Any]
    input_digest: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "request_id": self.request_id,
            "action": self.action.value,
            "layer": self.layer.value,
            "timestamp": self.timestamp,
            "evidence": self.evidence,
            "input_digest": self.input_digest,
        }


def _snapshot(verdict: Any) -> dict[str, Any]:
    """Dataclass verdict -> JSON-safe dict (enums to values, tuples to lists)."""

    def convert(value: Any) -> Any:
        if isinstance(value, enum.Enum):
            return value.value
        if isinstance(value, (list, tuple)):
            return [convert(v) for v in value]
        if isinstance(value, dict):
            return {k: convert(v) for k, v in value.items()}
        if dataclasses.is_dataclass(value) and not isinstance(value, type):
            return {f.name: convert(getattr(value, f.name)) for f in dataclasses.fields(value)}
        return value

    return convert(verdict)


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class _TrackedJudge:
    """Wraps the LLM provider so the gateway can report dependency health."""

    def __init__(self, inner: CompletionProvider, health: dict[str, str], name: str):
        self._inner = inner
        self._health = health
        self._name = name

    def generate(self, prompt: str) -> str:
        try:
            out = self._inner.generate(prompt)
        except ProviderUnavailable:
            self._health[self._name] = "unreachable"
            raise
        self._health[self._name] = "ok"
        return out


class Pipeline:
    def __init__(
        self,
        registry: PatternRegistry,
        signals: SignalGroups,
        embedder: EmbeddingProvider,
        corpus: AttackCorpus,
        llm: CompletionProvider | None = None,
        output_filter: OutputFilter | None = None,
        review_queue: ReviewQueue | None = None,
        config: GatewayConfig | None = None,
    ):
        self.config = config or GatewayConfig()
        self.registry = registry
        self.signals = signals
        self.embedder = embedder
        self.corpus = corpus
        self.dependencies: dict[str, str] = {}
        self.llm = _TrackedJudge(llm, self.dependencies, "llm_fallback") if llm else None
        if llm:
            self.dependencies["llm_fallback"] = "unknown"
        self.output_filter = output_filter or OutputFilter(
            entropy_min_len=self.config.entropy_min_len,
            entropy_threshold=self.config.entropy_threshold,
        )
        self.review_queue = review_queue or ReviewQueue(self.config.review_log_path)
        self._decoder_words = default_signal_words(self.config.decoder_wordlist_file)

    @classmethod
    def from_config(cls, config: GatewayConfig, llm: CompletionProvider | None = None) -> "Pipeline":
        config.validate()
        registry = load_registry(
            config.rule_files or None, base_scores=config.base_scores or None
        )
        signals = load_signals({k: v for k, v in config.signal_files.items()} or None)
        embedder = _build_embedder(config)
        corpus = embed_corpus(
            load_corpus_entries(config.attack_corpus_file),
            embedder,
            cache_dir=config.corpus_cache_dir,
        )
        if llm is None and config.llm_enabled:
            llm = OllamaProvider(config.llm_base_url, config.llm_model, config.llm_timeout)
        return cls(
            registry=registry,
            signals=signals,
            embedder=embedder,
            corpus=corpus,
            llm=llm,
            review_queue=ReviewQueue(config.review_log_path),
            config=config,
        )

    def check_input(self, text: str) -> Decision:
        """L1 -> (short-circuit) -> L2; REVIEW decisions are enqueued."""
        request_id = uuid.uuid4().hex
        now = time.time()
        digest = _digest(text)
        try:
            l1 = l1_evaluate(
                text,
                self.registry,
                self.signals,
                threshold=self.config.l1_threshold,
                max_decode_depth=self.config.max_decode_depth,
                max_input_bytes=self.config.max_input_bytes,
                decoder_signal_words=self._decoder_words,
            )
        except InputTooLarge as exc:
            return Decision(
                request_id, Action.BLOCK, Layer.L1, now,
                {"error": "input_too_large", "size": exc.size, "limit": exc.limit},
                digest,
            )
        except Exception:
            logger.exception("L1 failed; blocking fail-closed")
            return Decision(
                request_id, Action.BLOCK, Layer.L1, now, {"error": "l1_internal_failure"}, digest
            )

        evidence: dict[str, Any] = {"l1": _snapshot(l1)}
        if l1.action == "block":
            return Decision(request_id, Action.BLOCK, Layer.L1, now, evidence, digest)

        try:
            l2 = l2_evaluate(
                text,
                self.embedder,
                self.corpus,
                self.llm,
                block_threshold=self.config.l2_block_threshold,
                review_threshold=self.config.l2_review_threshold,
                context_tokens=self.config.llm_context_tokens,
            )
        except Exception:
            # l2_evaluate is total by contract; if it still breaks, fail to review.
            logger.exception("L2 failed; degrading to review")
            decision = Decision(
                request_id, Action.REVIEW, Layer.L2, now,
                {**evidence, "error": "l2_internal_failure"}, digest,
            )
            self.review_queue.enqueue(request_id, text, decision.to_dict(), now)
            return decision

        evidence["l2"] = _snapshot(l2)
        if l2.action == "block":
            return Decision(request_id, Action.BLOCK, Layer.L2, now, evidence, digest)
        if l2.action == "review":
            decision = Decision(request_id, Action.REVIEW, Layer.L2, now, evidence, digest)
            self.review_queue.enqueue(request_id, text, decision.to_dict(), now)
            return decision
        return Decision(request_id, Action.ALLOW, Layer.NONE, now, evidence, digest)

    def check_output(self, text: str) -> Decision:
        request_id = uuid.uuid4().hex
        now = time.time()
        digest = _digest(text)
        try:
            verdict = self.output_filter.evaluate(text)
        except Exception:
            logger.exception("L3 failed; blocking fail-closed")
            return Decision(
                request_id, Action.BLOCK, Layer.L3, now, {"error": "l3_internal_failure"}, digest
            )
        evidence = {"l3": _snapshot(verdict)}
        if verdict.action == "block":
            return Decision(request_id, Action.BLOCK, Layer.L3, now, evidence, digest)
        return Decision(request_id, Action.ALLOW, Layer.NONE, now, evidence, digest)


def _build_embedder(config: GatewayConfig) -> EmbeddingProvider:
    if config.embedding_provider == "stub":
        return HashEmbedder(dimension=config.embedding_dim)
    if config.embedding_provider == "http":
        if not config.embedding_url:
            raise ValueError("embedding_provider=http requires embedding_url")
        return HttpEmbedder(
            config.embedding_url, config.embedding_model, config.embedding_dim
        )
    if config.embedding_provider == "sentence-transformers":
        from .providers import SentenceTransformerEmbedder

        return SentenceTransformerEmbedder(config.embedding_model)
    raise ValueError(f"unknown embedding provider {config.embedding_provider!r}")
