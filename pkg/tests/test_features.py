import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lexrationale.features import (
    FeatureSpace,
    extract_ngrams,
    gram_count,
    information_gain,
    information_gain_array,
    select_top_k,
    to_matrix,
    vectorize,
    vectorize_many,
)


def test_ngrams_up_to_three():
    grams = extract_ngrams(["a", "b", "c"])
    assert grams == {"a": 1, "b": 1, "c": 1, "a_b": 1, "b_c": 1, "a_b_c": 1}


def test_ngram_counts_repeat():
    assert extract_ngrams(["x", "x", "x"], ngram_max=2) == {"x": 3, "x_x": 2}


@pytest.mark.parametrize("n", [0, 4])
def test_ngram_order_validated(n):
    with pytest.raises(ValueError):
        extract_ngrams(["a"], ngram_max=n)


@pytest.mark.parametrize("length,n,expected", [(0, 3, 0), (1, 3, 1), (2, 3, 3), (5, 3, 12), (5, 1, 5)])
def test_gram_count(length, n, expected):
    assert gram_count(length, n) == expected
    assert sum(extract_ngrams([f"w{i}" for i in range(length)], n).values()) == expected


def test_relative_frequency_value():
    space = FeatureSpace(("x",), ngram_max=1)
    assert vectorize(["x", "x", "y"], space).entries == {0: pytest.approx(2 / 3)}


def test_vectorize_many_matches_vectorize():
    space = FeatureSpace(("a", "a_b", "c", "b_c_a"))
    units = [["a", "b", "c", "a"], [], ["c"], ["z", "z"]]
    X = vectorize_many(units, space)
    assert X.shape == (4, 4)
    dense = to_matrix([vectorize(u, space) for u in units], 4).toarray()
    np.testing.assert_array_equal(X.toarray(), dense)
    # 4 tokens: 4 unigrams + 3 bigrams + 2 trigrams
    np.testing.assert_allclose(X.toarray()[0], [2 / 9, 1 / 9, 1 / 9, 1 / 9])


def test_to_matrix_rejects_out_of_range_column():
    space = FeatureSpace(("a",))
    vec = vectorize(["a"], space)
    with pytest.raises(IndexError):
        to_matrix([vec], 0)


def _mi_oracle(a, b, P, N):
    """I(class; presence) in bits from the joint table, written out cell by cell."""
    n = P + N
    cells = [(a, P, a + b), (P - a, P, n - a - b), (b, N, a + b), (N - b, N, n - a - b)]
    total = 0.0
    for joint, row, col in cells:
        if joint:
            total += joint / n * math.log2(joint * n / (row * col))
    return total


def test_information_gain_small_table():
    # feature present in every positive and no negative: IG = H(class)
    assert information_gain(5, 0, 5, 5) == pytest.approx(1.0, abs=1e-12)
    assert information_gain(3, 3, 6, 6) == pytest.approx(0.0, abs=1e-12)


@given(st.integers(1, 40), st.integers(1, 40), st.data())
def test_information_gain_matches_mutual_information(P, N, data):
    a = data.draw(st.integers(0, P))
    b = data.draw(st.integers(0, N))
    assert information_gain(a, b, P, N) == pytest.approx(_mi_oracle(a, b, P, N), abs=1e-10)


@given(st.integers(1, 30), st.integers(1, 30), st.data())
def test_information_gain_symmetric_in_presence(P, N, data):
    a = data.draw(st.integers(0, P))
    b = data.draw(st.integers(0, N))
    ig = information_gain(a, b, P, N)
    assert ig >= 0
    assert ig == pytest.approx(information_gain(P - a, N - b, P, N), abs=1e-12)
    assert ig == pytest.approx(information_gain(b, a, N, P), abs=1e-12)


def test_information_gain_array_matches_scalar():
    a = np.array([0, 1, 4, 7])
    b = np.array([3, 0, 2, 7])
    got = information_gain_array(a, b, 7, 9)
    np.testing.assert_allclose(got, [information_gain(int(x), int(y), 7, 9) for x, y in zip(a, b)], atol=1e-15)


def test_information_gain_rejects_bad_counts():
    with pytest.raises(ValueError):
        information_gain(6, 0, 5, 5)
    with pytest.raises(ValueError):
        information_gain(0, 0, 0, 0)
    with pytest.raises(ValueError):
        information_gain(-1, 0, 3, 3)


def test_select_top_k_prefers_class_indicative_grams():
    pos = [["good", "x"], ["good", "y"], ["good", "z"]]
    neg = [["bad", "x"], ["bad", "y"], ["bad", "z"]]
    space = select_top_k(pos, neg, k=2, ngram_max=1)
    assert space.features == ("bad", "good")


def test_select_top_k_ties_broken_lexicographically():
    pos = [["b", "a", "c"], ["b", "a", "c"]]
    neg = [["d"], ["d"]]
    space = select_top_k(pos, neg, k=3, ngram_max=1)
    # a, b, c and d all separate perfectly; alphabetical order decides
    assert space.features == ("a", "b", "c")


def test_select_top_k_drops_singletons():
    pos = [["rare", "p"], ["p"]]
    neg = [["n"], ["n"]]
    space = select_top_k(pos, neg, k=10, ngram_max=1)
    assert "rare" not in space.index
    assert set(space.features) == {"p", "n"}


def test_select_top_k_is_input_order_independent():
    rng = np.random.default_rng(3)
    vocab = [f"w{i}" for i in range(30)]
    pos = [list(rng.choice(vocab, 12)) for _ in range(10)]
    neg = [list(rng.choice(vocab[10:], 12)) for _ in range(10)]
    s1 = select_top_k(pos, neg, k=25)
    s2 = select_top_k(pos[::-1], neg[::-1], k=25)
    assert s1.features == s2.features


def test_feature_space_rejects_duplicates():
    with pytest.raises(ValueError):
        FeatureSpace(("a", "a"))
