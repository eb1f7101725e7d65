from __future__ import annotations

import math

import numpy as np
import pytest

from promptgate.errors import ProviderUnavailable
from promptgate.prefilter import load_registry, load_signals
from promptgate.providers import HashEmbedder
from promptgate.semantic import AttackCorpus, AttackExemplar


@pytest.fixture(scope="session")
def registry():
    return load_registry()


@pytest.fixture(scope="session")
def signals():
    return load_signals()


class FixedSimilarityEmbedder:
    """Embeds every text to a unit vector whose dot product with the single
    corpus exemplar [1, 0] is exactly the configured similarity."""

    model_id = "fixed-test"
    dimension = 2

    def __init__(self, similarity: float = 0.0):
        self.similarity = similarity
        self.calls = 0

    def embed(self, text: str) -> np.ndarray:
        self.calls += 1
        s = self.similarity
        return np.array([s, math.sqrt(max(0.0, 1.0 - s * s))])


def single_exemplar_corpus(model_id: str = "fixed-test") -> AttackCorpus:
    return AttackCorpus(
        [AttackExemplar(id="ex-1", category="direct_injection", text="exemplar")],
        np.array([[1.0, 0.0]]),
        model_id,
    )


class CountingEmbedder(HashEmbedder):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.calls = 0

    def embed(self, text: str) -> np.ndarray:
        self.calls += 1
        return super().embed(text)


class BrokenEmbedder:
    model_id = "broken"
    dimension = 2

    def embed(self, text: str) -> np.ndarray:
        raise RuntimeError("embedding backend crashed")


class ScriptedJudge:
    """Completion provider returning a canned response."""

    def __init__(self, response: str):
        self.response = response
        self.calls = 0
        self.prompts: list[str] = []

    def generate(self, prompt: str) -> str:
        self.calls += 1
        self.prompts.append(prompt)
        return self.response


class FailingJudge:
    def __init__(self):
        self.calls = 0

    def generate(self, prompt: str) -> str:
        self.calls += 1
        raise ProviderUnavailable("judge endpoint timed out")


@pytest.fixture
def fixed_embedder():
    return FixedSimilarityEmbedder()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "skipped"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid:
                name = nodeid.split("::", 1)[-1]
                lines.append((name, outcome.upper()))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, outcome in sorted(set(lines)):
            terminalreporter.write_line(f"{outcome:7s} {name}")
