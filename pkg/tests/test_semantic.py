from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from promptgate.errors import CorpusEmpty, DegenerateVector, DimensionError, ProviderUnavailable
from promptgate.providers import HashEmbedder
from promptgate.semantic import (
    AttackCorpus,
    AttackExemplar,
    cosine_similarity,
    embed_corpus,
    l2_evaluate,
    llm_fallback_judge,
    load_corpus_entries,
    max_attack_similarity,
)
from conftest import (
    BrokenEmbedder,
    CountingEmbedder,
    FailingJudge,
    FixedSimilarityEmbedder,
    ScriptedJudge,
    single_exemplar_corpus,
)

finite_vec = arrays(
    np.float64,
    3,
    elements=st.floats(min_value=-10, max_value=10, allow_nan=False),
).filter(lambda v: np.linalg.norm(v) > 1e-6)


class TestCosine:
    def test_self_similarity(self):
        v = np.array([0.3, -1.2, 2.0])
        assert cosine_similarity(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_hand_computed(self):
        # cos between (1,1) and (1,0) is 1/sqrt(2)
        got = cosine_similarity(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
        assert got == pytest.approx(1 / math.sqrt(2), abs=1e-4)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0]))

    def test_zero_vector(self):
        with pytest.raises(DegenerateVector):
            cosine_similarity(np.zeros(3), np.ones(3))

    @given(a=finite_vec, b=finite_vec)
    @settings(max_examples=50)
    def test_symmetric(self, a, b):
        assert cosine_similarity(a, b) == pytest.approx(cosine_similarity(b, a), abs=1e-12)

    @given(a=finite_vec, b=finite_vec, lam=st.floats(min_value=0.01, max_value=100))
    @settings(max_examples=50)
    def test_scale_invariant(self, a, b, lam):
        assert cosine_similarity(lam * a, b) == pytest.approx(
            cosine_similarity(a, b), abs=1e-9
        )

    @given(a=finite_vec, b=finite_vec)
    @settings(max_examples=50)
    def test_range(self, a, b):
        assert -1.0 - 1e-12 <= cosine_similarity(a, b) <= 1.0 + 1e-12


def random_corpus(rng: np.random.Generator, n: int, dim: int = 8) -> AttackCorpus:
    vectors = rng.standard_normal((n, dim))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    exemplars = [AttackExemplar(f"ex-{i:03d}", "jailbreak", f"text {i}") for i in range(n)]
    return AttackCorpus(exemplars, vectors, "test-model")


class TestMaxSimilarity:
    def test_exact_exemplar_match(self):
        corpus = single_exemplar_corpus()
        score, exemplar_id = max_attack_similarity(np.array([1.0, 0.0]), corpus)
        assert score == 1.0 and exemplar_id == "ex-1"

    def test_singleton_corpus(self):
        corpus = single_exemplar_corpus()
        score, _ = max_attack_similarity(np.array([0.0, 1.0]), corpus)
        assert score == 0.0

    def test_empty_corpus(self):
        corpus = AttackCorpus([], np.zeros((0, 2)), "test")
        with pytest.raises(CorpusEmpty):
            max_attack_similarity(np.array([1.0, 0.0]), corpus)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            max_attack_similarity(np.ones(3), single_exemplar_corpus())

    def test_tie_breaks_to_lowest_id(self):
        vectors = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        exemplars = [
            AttackExemplar("ex-b", "jailbreak", "b"),
            AttackExemplar("ex-a", "jailbreak", "a"),
            AttackExemplar("ex-c", "jailbreak", "c"),
        ]
        corpus = AttackCorpus(exemplars, vectors, "test")
        _, exemplar_id = max_attack_similarity(np.array([1.0, 0.0]), corpus)
        assert exemplar_id == "ex-a"

    @given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 100))
    @settings(max_examples=30, deadline=None)
    def test_agrees_with_loop_oracle(self, seed, n):
        rng = np.random.default_rng(seed)
        corpus = random_corpus(rng, n)
        query = rng.standard_normal(8)
        query /= np.linalg.norm(query)
        score, _ = max_attack_similarity(query, corpus)
        oracle = max(
            cosine_similarity(query, corpus.vectors[i]) for i in range(len(corpus))
        )
        assert score == pytest.approx(oracle, abs=1e-9)


class TestFallbackJudge:
    def test_mock_malicious(self):
        assert llm_fallback_judge("x", ScriptedJudge("MALICIOUS")) == "malicious"

    def test_mock_safe_with_prose(self):
        assert llm_fallback_judge("x", ScriptedJudge("I think this is SAFE overall")) == "safe"

    def test_unparseable_maps_to_unsure(self):
        judge = ScriptedJudge("cannot really say either way")
        assert llm_fallback_judge("x", judge) == "unsure"

    def test_unsafe_does_not_parse_as_safe(self):
        assert llm_fallback_judge("x", ScriptedJudge("UNSAFE")) == "unsure"

    def test_timeout_propagates(self):
        with pytest.raises(ProviderUnavailable):
            llm_fallback_judge("x", FailingJudge())

    def test_input_truncated_to_context_budget(self):
        judge = ScriptedJudge("SAFE")
        llm_fallback_judge("y" * 100_000, judge, context_tokens=1024)
        assert len(judge.prompts[0]) <= 1024 * 4

    def test_prompt_contains_input(self):
        judge = ScriptedJudge("SAFE")
        llm_fallback_judge("marker-text-here", judge)
        assert "marker-text-here" in judge.prompts[0]


class TestL2Evaluate:
    def verdict(self, similarity, llm=None):
        embedder = FixedSimilarityEmbedder(similarity)
        return l2_evaluate("text", embedder, single_exemplar_corpus(), llm)

    def test_block_at_060(self):
        v = self.verdict(0.60)
        assert v.action == "block" and not v.fallback_used

    def test_pass_at_036(self):
        v = self.verdict(0.36)
        assert v.action == "pass" and not v.fallback_used

    def test_band_with_safe_judge(self):
        v = self.verdict(0.40, ScriptedJudge("SAFE"))
        assert v.action == "pass" and v.fallback_used and v.fallback_verdict == "safe"

    def test_band_with_malicious_judge(self):
        v = self.verdict(0.40, ScriptedJudge("MALICIOUS"))
        assert v.action == "block" and v.fallback_used

    def test_band_with_unsure_judge(self):
        v = self.verdict(0.40, ScriptedJudge("hmm"))
        assert v.action == "review" and v.fallback_used

    def test_band_judge_unreachable(self):
        v = self.verdict(0.40, FailingJudge())
        assert v.action == "review" and not v.fallback_used

    def test_band_no_judge_reviews(self):
        assert self.verdict(0.40).action == "review"

    @pytest.mark.parametrize(
        "similarity,expected_fallback",
        [(0.3699, False), (0.37, True), (0.5399, True), (0.54, False)],
    )
    def test_threshold_boundaries(self, similarity, expected_fallback):
        judge = ScriptedJudge("UNSURE")
        embedder = FixedSimilarityEmbedder(similarity)
        v = l2_evaluate("text", embedder, single_exemplar_corpus(), judge)
        assert v.fallback_used == expected_fallback

    def test_embedding_failure_uses_judge(self):
        v = l2_evaluate("text", BrokenEmbedder(), single_exemplar_corpus(), ScriptedJudge("SAFE"))
        assert v.action == "pass" and v.fallback_used and v.similarity is None

    def test_embedding_failure_no_judge_reviews(self):
        v = l2_evaluate("text", BrokenEmbedder(), single_exemplar_corpus())
        assert v.action == "review"

    def test_never_raises(self):
        v = l2_evaluate("text", BrokenEmbedder(), single_exemplar_corpus(), FailingJudge())
        assert v.action == "review"

    def test_mapping_override(self):
        v = l2_evaluate(
            "text",
            FixedSimilarityEmbedder(0.40),
            single_exemplar_corpus(),
            ScriptedJudge("SAFE"),
            fallback_actions={"malicious": "block", "safe": "review", "unsure": "review"},
        )
        assert v.action == "review"

    def test_nearest_exemplar_reported(self):
        v = self.verdict(0.60)
        assert v.nearest_exemplar == "ex-1"
        assert v.similarity == 0.60


class TestCorpus:
    def test_shipped_corpus_size(self):
        assert len(load_corpus_entries()) >= 200

    def test_embed_corpus_dimensions(self):
        entries = load_corpus_entries()[:10]
        corpus = embed_corpus(entries, HashEmbedder(dimension=16))
        assert corpus.vectors.shape == (10, 16)
        assert np.allclose(np.linalg.norm(corpus.vectors, axis=1), 1.0)

    def test_cache_round_trip(self, tmp_path):
        entries = load_corpus_entries()[:8]
        first = CountingEmbedder(dimension=16)
        corpus1 = embed_corpus(entries, first, cache_dir=tmp_path)
        assert first.calls == 8
        second = CountingEmbedder(dimension=16)
        corpus2 = embed_corpus(entries, second, cache_dir=tmp_path)
        assert second.calls == 0  # vectors came from the cache
        assert np.array_equal(corpus1.vectors, corpus2.vectors)

    def test_cache_keyed_by_model(self, tmp_path):
        entries = load_corpus_entries()[:4]
        embed_corpus(entries, CountingEmbedder(dimension=16, model_id="model-a"), cache_dir=tmp_path)
        other = CountingEmbedder(dimension=16, model_id="model-b")
        embed_corpus(entries, other, cache_dir=tmp_path)
        assert other.calls == 4  # different model id, cache not reused

    def test_bad_corpus_line(self, tmp_path):
        bad = tmp_path / "corpus.tsv"
        bad.write_text("id-only-no-tabs\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_corpus_entries(bad)
