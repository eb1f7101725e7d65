"""Semantic layer: nearest-exemplar similarity with an LLM fallback.

The input is embedded and scored against the attack corpus.  Similarity at
or above the block threshold blocks; below the review threshold passes; the
band in between (or any embedding failure) goes to the fallback judge, and
if that is unavailable the verdict is review - the layer never fails open.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import (
    DEFAULT_L2_BLOCK_THRESHOLD,
    DEFAULT_L2_REVIEW_THRESHOLD,
    DEFAULT_LLM_CONTEXT_TOKENS,
    data_path,
)
from .errors import CorpusEmpty, DegenerateVector, DimensionError, ProviderUnavailable
from .providers import CompletionProvider, EmbeddingProvider

logger = logging.getLogger(__name__)

_VERDICT_TOKEN = re.compile(r"\b(MALICIOUS|UNSURE|SAFE)\b", re.IGNORECASE)

# Review-band mapping from judge verdict to action; deployments wanting a
# stricter posture can map "safe" to "review" instead.
DEFAULT_FALLBACK_ACTIONS = {"malicious": "block", "safe": "pass", "unsure": "review"}

_CHARS_PER_TOKEN = 4  # coarse budget estimate; errs on the safe side


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """dot(a, b) / (|a||b|); raises on dimension mismatch or zero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shapes differ: {a.shape} vs {b.shape}")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateVector("cosine of a zero vector is undefined")
    return float(np.dot(a, b) / (norm_a * norm_b))


@dataclass(frozen=True)
class AttackExemplar:
    id: str
    category: str
    text: str


class AttackCorpus:
    """Exemplar texts plus their unit vectors under one embedding model."""

    def __init__(self, exemplars: Sequence[AttackExemplar], vectors: np.ndarray, model_id: str):
        if len(exemplars) != len(vectors):
            raise ValueError("exemplar/vector count mismatch")
        if len(exemplars) and not np.isfinite(vectors).all():
            raise DegenerateVector("corpus vectors contain NaN/Inf")
        self.exemplars = list(exemplars)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.model_id = model_id

    def __len__(self) -> int:
        return len(self.exemplars)

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1] if len(self.exemplars) else 0


def load_corpus_entries(path: str | Path | None = None) -> list[AttackExemplar]:
    """Read `id<TAB>category<TAB>text` exemplar lines."""
    source = Path(path) if path else data_path("l2", "attack_corpus.tsv")
    entries: list[AttackExemplar] = []
    for line_no, line in enumerate(source.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t", 2)
        if len(parts) != 3:
            raise ValueError(f"{source}:{line_no}: expected id<TAB>category<TAB>text")
        entries.append(AttackExemplar(id=parts[0], category=parts[1], text=parts[2]))
    return entries


def _cache_file(cache_dir: Path, model_id: str) -> Path:
    safe = re.sub(r"[^A-Za-z0-9._-]", "_", model_id)
    return cache_dir / f"corpus-{safe}.npz"


def embed_corpus(
    entries: Sequence[AttackExemplar],
    embedder: EmbeddingProvider,
    cache_dir: str | Path | None = None,
) -> AttackCorpus:
    """Embed all exemplars, reusing the on-disk cache when it matches."""
    ids = [e.id for e in entries]
    if cache_dir is not None:
        cache = _cache_file(Path(cache_dir), embedder.model_id)
        if cache.exists():
            stored = np.load(cache, allow_pickle=False)
            if (
                str(stored["model_id"]) == embedder.model_id
                and list(stored["ids"]) == ids
            ):
                return AttackCorpus(entries, stored["vectors"], embedder.model_id)
    vectors = np.stack([embedder.embed(e.text) for e in entries]) if entries else \
        np.zeros((0, embedder.dimension))
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        np.savez(
            _cache_file(Path(cache_dir), embedder.model_id),
            model_id=np.asarray(embedder.model_id),
            ids=np.asarray(ids),
            vectors=vectors,
        )
    return AttackCorpus(entries, vectors, embedder.model_id)


def max_attack_similarity(vector: np.ndarray, corpus: AttackCorpus) -> tuple[float, str]:
    """Highest similarity across the corpus; ties go to the lowest exemplar id.

    Corpus vectors and query vectors are unit length by construction, so the
    similarity reduces to a dot product.
    """
    if len(corpus) == 0:
        raise CorpusEmpty("attack corpus has no exemplars")
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (corpus.dimension,):
        raise DimensionError(
            f"query dimension {vector.shape} does not match corpus ({corpus.dimension},)"
        )
    if not np.isfinite(vector).all():
        raise DegenerateVector("query vector contains NaN/Inf")
    scores = corpus.vectors @ vector
    best = float(scores.max())
    best_id = min(corpus.exemplars[i].id for i in np.flatnonzero(scores == best))
    return best, best_id


def load_judge_template(path: str | Path | None = None) -> str:
    source = Path(path) if path else data_path("l2", "judge_prompt_v1.txt")
    return source.read_text(encoding="utf-8")


def llm_fallback_judge(
    text: str,
    provider: CompletionProvider,
    *,
    template: str | None = None,
    context_tokens: int = DEFAULT_LLM_CONTEXT_TOKENS,
) -> str:
    """Ask the fallback judge for a one-token verdict.

    Returns "malicious", "unsure", or "safe"; free-form answers with no
    verdict token count as "unsure".  Transport failures raise
    ProviderUnavailable for the caller to map to review.
    """
    prompt_template = template if template is not None else load_judge_template()
    budget = max(0, context_tokens * _CHARS_PER_TOKEN - len(prompt_template))
    prompt = prompt_template.replace("{input}", text[:budget])
    response = provider.generate(prompt)
    found = _VERDICT_TOKEN.search(response or "")
    return found.group(1).lower() if found else "unsure"


@dataclass(frozen=True)
class L2Verdict:
    action: str  # "block" | "review" | "pass"
    similarity: float | None
    nearest_exemplar: str | None
    fallback_used: bool
    fallback_verdict: str | None


def l2_evaluate(
    text: str,
    embedder: EmbeddingProvider,
    corpus: AttackCorpus,
    llm: CompletionProvider | None = None,
    *,
    block_threshold: float = DEFAULT_L2_BLOCK_THRESHOLD,
    review_threshold: float = DEFAULT_L2_REVIEW_THRESHOLD,
    fallback_actions: dict[str, str] | None = None,
    judge_template: str | None = None,
    context_tokens: int = DEFAULT_LLM_CONTEXT_TOKENS,
) -> L2Verdict:
    """Score the text; never raises - every failure degrades to a verdict."""
    actions = fallback_actions or DEFAULT_FALLBACK_ACTIONS
    similarity: float | None = None
    nearest: str | None = None
    try:
        vector = embedder.embed(text)
        similarity, nearest = max_attack_similarity(vector, corpus)
    except Exception as exc:  # any embedding failure falls through to the judge
        logger.warning("embedding failed, using fallback judge: %s", exc)

    if similarity is not None:
        if similarity >= block_threshold:
            return L2Verdict("block", similarity, nearest, False, None)
        if similarity < review_threshold:
            return L2Verdict("pass", similarity, nearest, False, None)

    if llm is None:
        return L2Verdict("review", similarity, nearest, False, None)
    try:
        verdict = llm_fallback_judge(
            text, llm, template=judge_template, context_tokens=context_tokens
        )
    except ProviderUnavailable as exc:
        logger.warning("fallback judge unavailable: %s", exc)
        return L2Verdict("review", similarity, nearest, False, None)
    return L2Verdict(actions.get(verdict, "review"), similarity, nearest, True, verdict)
