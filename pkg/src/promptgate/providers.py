"""Embedding and LLM-judge providers.

Three embedding backends share one contract: `model_id`, `dimension`, and
`embed(text) -> unit vector`.  The hash stub keeps the whole test suite
runnable with no model downloads; the HTTP and in-process backends serve
live deployments.  LLM providers only do transport; prompt construction and
verdict parsing live in the semantic layer.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, runtime_checkable

import httpx
import numpy as np

from .errors import ProviderUnavailable


@runtime_checkable
class EmbeddingProvider(Protocol):
    model_id: str
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class HashEmbedder:
    """Deterministic stand-in: a unit vector seeded from the text digest.

    Carries no semantics; unrelated texts land near-orthogonal, identical
    texts embed identically.
    """

    def __init__(self, dimension: int = 384, model_id: str = "hash-stub-v1"):
        self.dimension = dimension
        self.model_id = model_id

    def embed(self, text: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.model_id}\x00{text}".encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "big")
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(self.dimension)
        return vec / np.linalg.norm(vec)


class HttpEmbedder:
    """Client for a local embedding server.

    Protocol: POST {base_url}/embed with {"model": ..., "text": ...},
    response {"embedding": [float, ...]}.
    """

    def __init__(self, base_url: str, model_id: str, dimension: int, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.dimension = dimension
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        try:
            resp = httpx.post(
                f"{self.base_url}/embed",
                json={"model": self.model_id, "text": text},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            values = resp.json()["embedding"]
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise ProviderUnavailable(f"embedding server: {exc}") from exc
        vec = np.asarray(values, dtype=np.float64)
        norm = np.linalg.norm(vec)
        return vec / norm if norm else vec


class SentenceTransformerEmbedder:
    """In-process model runtime; requires the optional live-embeddings extra."""

    def __init__(self, model_id: str = "BAAI/bge-small-en-v1.5"):
        from sentence_transformers import SentenceTransformer  # deferred: heavy

        self.model_id = model_id
        self._model = SentenceTransformer(model_id)
        self.dimension = self._model.get_sentence_embedding_dimension()

    def embed(self, text: str) -> np.ndarray:
        vec = np.asarray(self._model.encode(text), dtype=np.float64)
        norm = np.linalg.norm(vec)
        return vec / norm if norm else vec


@runtime_checkable
class CompletionProvider(Protocol):
    def generate(self, prompt: str) -> str: ...


class OllamaProvider:
    """Ollama-compatible /api/generate client, temperature pinned to 0."""

    def __init__(
        self,
        base_url: str = "http://localhost:11434",
        model: str = "llama3:8b",
        timeout: float = 10.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.timeout = timeout

    def generate(self, prompt: str) -> str:
        try:
            resp = httpx.post(
                f"{self.base_url}/api/generate",
                json={
                    "model": self.model,
                    "prompt": prompt,
                    "stream": False,
                    "options": {"temperature": 0},
                },
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return resp.json().get("response", "")
        except (httpx.HTTPError, ValueError) as exc:
            raise ProviderUnavailable(f"llm endpoint: {exc}") from exc
