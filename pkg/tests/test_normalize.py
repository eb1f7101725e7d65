from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from promptgate.config import data_path
from promptgate.errors import EmptyInput, InputTooLarge
from promptgate.normalize import (
    AnalysisViews,
    build_views,
    high_entropy_tokens,
    homoglyph_table,
    leet_table,
    load_mapping_table,
    normalize,
    shannon_entropy,
    squash,
)


def table_oracle(text: str) -> str:
    """Independent rendering of the normalize contract: NFKD, drop marks and
    format chars, then per-character dictionary lookup in the shipped tables."""
    homoglyphs = load_mapping_table(data_path("homoglyphs.tsv"))
    leet = load_mapping_table(data_path("leet.tsv"))
    out = []
    for ch in unicodedata.normalize("NFKD", text):
        if unicodedata.category(ch) in ("Mn", "Cf"):
            continue
        ch = homoglyphs.get(ord(ch), ch)
        ch = leet.get(ord(ch), ch)
        out.append(ch)
    return "".join(out)


class TestNormalize:
    def test_cyrillic_homoglyph(self):
        assert normalize("dаta") == "data"

    def test_leet_word(self):
        # expected value derived by per-character table lookup
        assert table_oracle("1gn0r3") == "ignore"
        assert normalize("1gn0r3") == "ignore"

    def test_plain_ascii_identity(self):
        assert normalize("ignore") == "ignore"

    def test_zero_width_stripped(self):
        assert normalize("ig​nore") == "ignore"

    def test_oversized_input(self):
        with pytest.raises(InputTooLarge):
            normalize("x" * 32, max_input_bytes=16)

    @given(st.text(max_size=300))
    def test_idempotent(self, text):
        once = normalize(text)
        assert normalize(once) == once

    @given(st.text(max_size=300))
    def test_matches_table_oracle(self, text):
        assert normalize(text) == table_oracle(text)


class TestSquash:
    def test_run_compression(self):
        assert squash("iiignoreee") == "iignoree"

    def test_no_runs(self):
        assert squash("abc") == "abc"

    def test_empty(self):
        assert squash("") == ""

    def test_pairs_untouched(self):
        assert squash("aabbcc") == "aabbcc"

    def test_newline_runs(self):
        assert squash("a\n\n\n\nb") == "a\n\nb"

    @given(st.text(max_size=300))
    def test_never_leaves_triple_runs(self, text):
        assert re.search(r"(.)\1\1", squash(text), re.DOTALL) is None

    @given(st.text(max_size=300))
    def test_preserves_short_runs(self, text):
        # squashing twice is the same as once
        assert squash(squash(text)) == squash(text)


class TestBuildViews:
    def test_lowercase_view(self):
        assert build_views("IGNORE Previous").lowercase == "ignore previous"

    def test_leet_normalized_view(self):
        assert build_views("1gn0r3").normalized == "ignore"

    def test_fixed_point(self):
        views = build_views("hi")
        assert views == AnalysisViews("hi", "hi", "hi", "hi")

    def test_pure_function(self):
        text = "Ignore ALL of it ае"
        assert build_views(text) == build_views(text)

    def test_composition(self):
        text = "IIIgnore аll"
        views = build_views(text)
        assert views.original == text
        assert views.normalized == normalize(text)
        assert views.squashed == squash(normalize(text))
        assert views.lowercase == normalize(text).lower()

    @given(st.text(max_size=300))
    def test_lowercase_has_no_uppercase_ascii(self, text):
        assert not any("A" <= ch <= "Z" for ch in build_views(text).lowercase)

    def test_oversized_propagates(self):
        with pytest.raises(InputTooLarge):
            build_views("y" * 64, max_input_bytes=8)


def entropy_oracle(text: str) -> float:
    counts = Counter(text)
    total = len(text)
    h = 0.0
    for k in counts.values():
        p = k / total
        h -= p * math.log(p, 2)
    return h


class TestShannonEntropy:
    def test_single_symbol(self):
        assert shannon_entropy("aaaa") == 0.0

    def test_two_equiprobable(self):
        assert shannon_entropy("ab") == 1.0

    def test_eight_distinct(self):
        assert shannon_entropy("abcdefgh") == 3.0

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            shannon_entropy("")

    @given(st.text(min_size=1, max_size=200))
    def test_matches_frequency_oracle(self, text):
        assert shannon_entropy(text) == pytest.approx(entropy_oracle(text), abs=1e-9)

    @given(st.text(min_size=1, max_size=200))
    def test_bounds(self, text):
        h = shannon_entropy(text)
        assert 0.0 <= h <= math.log2(len(set(text))) + 1e-9


class TestHighEntropyTokens:
    def test_random_base64_token_flagged(self):
        token = "kJ8xQ2mZvR5tLwY3nB7cD1fG9hPaSdUe"  # 32 distinct-ish chars
        assert shannon_entropy(token) > 4.5
        assert high_entropy_tokens(f"prefix {token} suffix") == [token]

    def test_short_tokens_ignored(self):
        assert high_entropy_tokens("short words only here") == []

    def test_repetitive_long_token_ignored(self):
        assert high_entropy_tokens("a" * 40) == []


class TestMappingTables:
    def test_leet_has_thirty_mappings(self):
        assert len(leet_table()) >= 30

    def test_cyrillic_set_present(self):
        table = homoglyph_table()
        for ch in "аеорсх":  # а е о р с х
            assert ord(ch) in table

    def test_mapping_idempotent(self):
        table = {**homoglyph_table(), **leet_table()}
        once = "dаtа1gn0r3".translate(table)
        assert once.translate(table) == once

    def test_rejects_malformed_line(self, tmp_path):
        bad = tmp_path / "bad.tsv"
        bad.write_text("toolong\tx\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_mapping_table(bad)
