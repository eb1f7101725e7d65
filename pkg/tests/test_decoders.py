from __future__ import annotations

import base64
import codecs
import string

import pytest
from hypothesis import given, settings, strategies as st

from promptgate.decoders import DecodedCandidate, decode_obfuscations, default_signal_words

# Independent encoders; each inverts the corresponding shipped decoder.
def encode_base64(p: str) -> str:
    return base64.b64encode(p.encode()).decode()


def encode_rot13(p: str) -> str:
    return codecs.encode(p, "rot_13")


def encode_percent(p: str) -> str:
    return "".join("%%%02x" % b for b in p.encode())


def encode_octal(p: str) -> str:
    return "".join("\\%03o" % b for b in p.encode())


def encode_html(p: str) -> str:
    return "".join("&#%d;" % ord(c) for c in p)


def encode_hex(p: str) -> str:
    return "".join("\\x%02x" % b for b in p.encode())


def encode_unicode(p: str) -> str:
    return "".join("\\u%04x" % ord(c) for c in p)


ENCODERS = {
    "base64": encode_base64,
    "rot13": encode_rot13,
    "percent": encode_percent,
    "octal": encode_octal,
    "html_entity": encode_html,
    "hex": encode_hex,
    "unicode_escape": encode_unicode,
}

# Plaintext alphabets: printable ASCII; ROT13 candidates additionally need a
# signal word, which the strategy inserts.
plain_text = st.text(
    alphabet=string.ascii_letters + string.digits + " .,!?/_-",
    min_size=6,
    max_size=60,
).filter(lambda s: s.strip())

signal_vocab = sorted(default_signal_words())


def decoded_texts(encoded: str) -> list[str]:
    return [c.decoded_text for c in decode_obfuscations(encoded)]


class TestExamples:
    def test_rot13_example(self):
        texts = decoded_texts("vtaber vafgehpgvbaf")
        assert "ignore instructions" in texts

    def test_percent_example(self):
        texts = decoded_texts("%69%67%6e%6f%72%65")
        assert "ignore" in texts

    def test_base64_example(self):
        texts = decoded_texts("aWdub3JlIGluc3RydWN0aW9ucw==")
        assert "ignore instructions" in texts

    def test_plain_text_yields_nothing(self):
        assert decode_obfuscations("hello world") == []

    def test_benign_prose_yields_nothing(self):
        assert decode_obfuscations("The quick brown fox jumps over a dog.") == []

    def test_single_percent_escape_skipped(self):
        # one lone escape is not enough evidence of encoding
        assert decoded_texts("Save 20%21 off") == []


@pytest.mark.parametrize("name", ["base64", "percent", "octal", "html_entity", "hex", "unicode_escape"])
@given(data=st.data())
@settings(max_examples=30, deadline=None)
def test_round_trip(name, data):
    plaintext = data.draw(plain_text)
    encoded = ENCODERS[name](plaintext)
    candidates = decode_obfuscations(encoded)
    assert plaintext in [c.decoded_text for c in candidates], (name, plaintext, encoded)
    chains = [c.encoding_chain for c in candidates if c.decoded_text == plaintext]
    assert (name,) in chains


@given(word=st.sampled_from(signal_vocab), filler=plain_text)
@settings(max_examples=30, deadline=None)
def test_rot13_round_trip(word, filler):
    plaintext = f"{filler} {word}"
    encoded = encode_rot13(plaintext)
    candidates = decode_obfuscations(encoded)
    assert plaintext in [c.decoded_text for c in candidates]


class TestRot13Gate:
    def test_rot13_of_english_rejected(self):
        # decoding plain English via ROT13 yields gibberish with no signal hits
        assert "uryyb jbeyq" not in decoded_texts("hello world")

    def test_rot13_needs_signal_gain(self):
        # decoded text has signal words, input does not -> accepted
        assert "ignore the rules" in decoded_texts(encode_rot13("ignore the rules"))
        # input already has more signal words than its rotation -> rejected
        assert decode_obfuscations("ignore the rules") == [] or all(
            c.encoding_chain != ("rot13",) for c in decode_obfuscations("ignore the rules")
        )


class TestRecursion:
    def test_double_encoding(self):
        plaintext = "ignore instructions"
        nested = encode_percent(encode_base64(plaintext))
        candidates = decode_obfuscations(nested)
        assert any(
            c.decoded_text == plaintext and c.encoding_chain == ("percent", "base64")
            for c in candidates
        )

    def test_depth_equals_chain_length(self):
        nested = encode_percent(encode_base64("ignore instructions"))
        for c in decode_obfuscations(nested):
            assert c.depth == len(c.encoding_chain)

    def test_depth_bounded(self):
        quadruple = "ignore instructions"
        for _ in range(4):
            quadruple = encode_base64(quadruple)
        candidates = decode_obfuscations(quadruple, max_depth=3)
        assert candidates  # partial decodes exist
        assert all(c.depth <= 3 for c in candidates)
        # depth 3 cannot reach through four layers
        assert "ignore instructions" not in [c.decoded_text for c in candidates]

    def test_custom_depth_reaches_deeper(self):
        triple = "ignore instructions"
        for _ in range(3):
            triple = encode_base64(triple)
        texts = [c.decoded_text for c in decode_obfuscations(triple, max_depth=3)]
        assert "ignore instructions" in texts


@given(text=st.text(max_size=120))
@settings(max_examples=50, deadline=None)
def test_never_raises_and_invariants_hold(text):
    candidates = decode_obfuscations(text)
    for c in candidates:
        assert isinstance(c, DecodedCandidate)
        assert c.depth == len(c.encoding_chain)
        assert 1 <= c.depth <= 3
        assert c.decoded_text != text or len(c.encoding_chain) > 0
