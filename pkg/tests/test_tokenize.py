import pytest
from hypothesis import given
from hypothesis import strategies as st

from lexrationale.tokenize import Snippet, TokenSeq, snippet_tokens, tokenize, window_snippets, window_starts


def test_tokenize_lowercases_and_splits_on_non_alphanumerics():
    assert tokenize("Re: Q3 earnings--CALL me_now!").tokens == ("re", "q3", "earnings", "call", "me", "now")


def test_tokenize_keeps_unicode_letters_and_doc_id():
    seq = tokenize("Café  Über\tnaïve", doc_id="d1")
    assert seq.tokens == ("café", "über", "naïve")
    assert seq.doc_id == "d1"


def test_tokenize_empty():
    assert tokenize("  ... !! ").tokens == ()


@given(st.text(max_size=200))
def test_tokenize_is_idempotent_on_joined_output(text):
    tokens = tokenize(text).tokens
    assert tokenize(" ".join(tokens)).tokens == tokens
    assert all(t and t == t.lower() for t in tokens)


def _seq(n, doc_id="d"):
    return TokenSeq(tuple(f"t{i}" for i in range(n)), doc_id)


def test_windows_exact_fit():
    snippets = window_snippets(_seq(100), 50)
    assert [(s.start, s.length) for s in snippets] == [(0, 50), (25, 50), (50, 50)]


def test_windows_end_anchored_tail():
    snippets = window_snippets(_seq(110), 50)
    assert [s.start for s in snippets] == [0, 25, 50, 60]
    assert snippets[-1].end == 110


def test_short_document_is_one_snippet():
    snippets = window_snippets(_seq(30), 50)
    assert len(snippets) == 1
    assert (snippets[0].start, snippets[0].length) == (0, 30)
    assert snippets[0].tokens == _seq(30).tokens


def test_snippet_tokens_match_window():
    seq = _seq(80)
    for s in window_snippets(seq, 20):
        assert snippet_tokens(seq, s) == s.tokens == seq.tokens[s.start : s.end]


@pytest.mark.parametrize("size", [0, 1, 3, 51])
def test_odd_or_tiny_sizes_rejected(size):
    with pytest.raises(ValueError, match="even"):
        window_snippets(_seq(100), size)


def test_odd_size_allowed_on_request():
    assert window_starts(300, 125, allow_odd=True) == [0, 62, 124, 175]


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        window_snippets(_seq(0), 50)


def test_snippet_equality_ignores_cached_tokens():
    assert Snippet("d", 0, 5, ("a",)) == Snippet("d", 0, 5)
    assert Snippet("d", 3, 5).key == ("d", 3, 5)
