import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cipherchain.cipher import Alphabet, SubstitutionKey, normalize
from cipherchain.langmodel import (
    BigramModel,
    bigram_counts,
    build_model,
    score_delta_on_swap,
    score_log_pi,
    swap_delta,
)

from .oracles import decrypt_by_lookup, pi_product, smoothed_frequencies

AB = Alphabet(("A", "B"))


def random_model(rng, size=26, corpus_len=3000, delta=1.0):
    alphabet = Alphabet(tuple(chr(ord("A") + i) for i in range(size)))
    corpus = rng.integers(0, size, corpus_len)
    # skew the corpus so that log-frequencies differ noticeably
    corpus = np.where(rng.random(corpus_len) < 0.3, corpus % 5, corpus)
    return build_model(corpus, alphabet, delta), corpus


def test_counts_from_abab():
    model = build_model(normalize("ABAB", AB), AB, delta=0.0)
    r = np.exp(model.log_r)
    assert r[0, 1] == pytest.approx(2 / 3)
    assert r[1, 0] == pytest.approx(1 / 3)
    assert r[0, 0] == 0 and r[1, 1] == 0
    assert not model.is_smoothed


def test_uniform_smoothing_of_empty_corpus():
    alphabet = Alphabet()
    model = build_model(np.zeros(0, dtype=np.int64), alphabet, delta=1.0)
    assert np.allclose(np.exp(model.log_r), 1 / 676)
    assert model.is_smoothed


def test_rejects_all_zero_unsmoothed_model():
    with pytest.raises(ValueError):
        build_model(normalize("A", AB), AB, delta=0.0)
    with pytest.raises(ValueError):
        build_model(normalize("ABAB", AB), AB, delta=-1.0)


def test_th_is_a_top_bigram(english_model):
    counts = english_model.counts
    top = np.argsort(counts, axis=None)[::-1][:5]
    pairs = {(int(k) // 26, int(k) % 26) for k in top}
    assert (19, 7) in pairs  # T, H


def test_model_normalisation(english_model, rng):
    assert math.isclose(np.exp(english_model.log_r).sum(), 1.0, abs_tol=1e-9)
    for delta in (0.01, 0.5, 3.0):
        model, _ = random_model(rng, delta=delta)
        assert math.isclose(np.exp(model.log_r).sum(), 1.0, abs_tol=1e-9)
        assert (model.counts >= 0).all()


def test_counts_sum_is_length_minus_one(rng):
    for n in (0, 1, 2, 17):
        text = rng.integers(0, 26, n)
        assert bigram_counts(text, 26).sum() == max(n - 1, 0)


def test_score_of_empty_and_single_symbol(english_model):
    key = SubstitutionKey.identity(26)
    assert score_log_pi(np.zeros(0, dtype=np.int64), key, english_model) == 0.0
    assert score_log_pi(np.asarray([3]), key, english_model) == 0.0


def test_score_single_pair():
    model = build_model(normalize("ABBA", AB), AB, delta=1.0)  # AB, BB, BA -> r(A,B) = 2/7
    r_ab = math.exp(model.log_r[0, 1])
    assert r_ab == pytest.approx(2 / 7)
    assert score_log_pi(normalize("AB", AB), SubstitutionKey.identity(2), model) == pytest.approx(math.log(r_ab))


def test_score_matches_direct_product(rng):
    model, corpus = random_model(rng)
    freqs = smoothed_frequencies(corpus.tolist(), 26, 1.0)
    for _ in range(200):
        text = rng.integers(0, 26, int(rng.integers(0, 12)))
        perm = tuple(int(v) for v in rng.permutation(26))
        expected = pi_product(decrypt_by_lookup(text.tolist(), perm), freqs)
        got = math.exp(score_log_pi(text, SubstitutionKey(perm), model))
        assert math.isclose(got, expected, rel_tol=1e-9)


def test_score_is_additive_up_to_boundary(rng):
    model, _ = random_model(rng)
    key = SubstitutionKey(tuple(int(v) for v in rng.permutation(26)))
    inv = key.inverse()
    for _ in range(50):
        text = rng.integers(0, 26, 60)
        cut = int(rng.integers(1, 59))
        whole = score_log_pi(text, key, model)
        parts = score_log_pi(text[:cut], key, model) + score_log_pi(text[cut:], key, model)
        boundary = model.log_r[inv[text[cut - 1]], inv[text[cut]]]
        assert math.isclose(whole, parts + boundary, abs_tol=1e-9)


def test_incremental_matches_full_rescore(rng):
    model, _ = random_model(rng)
    for _ in range(1000):
        text = rng.integers(0, 26, int(rng.integers(2, 300)))
        key = SubstitutionKey(tuple(int(v) for v in rng.permutation(26)))
        i, j = (int(v) for v in rng.choice(26, 2, replace=False))
        full = score_log_pi(text, key.swapped(i, j), model) - score_log_pi(text, key, model)
        assert abs(score_delta_on_swap(text, key, model, (i, j)) - full) <= 1e-9


def test_swap_then_swap_back_cancels(rng):
    model, _ = random_model(rng)
    text = rng.integers(0, 26, 400)
    key = SubstitutionKey(tuple(int(v) for v in rng.permutation(26)))
    d1 = score_delta_on_swap(text, key, model, (4, 9))
    d2 = score_delta_on_swap(text, key.swapped(4, 9), model, (4, 9))
    assert abs(d1 + d2) <= 1e-9


def test_swap_of_absent_symbols_is_zero(rng):
    model, _ = random_model(rng)
    key = SubstitutionKey.identity(26)
    text = rng.integers(0, 20, 300)  # plaintext symbols 20..25 never occur
    assert score_delta_on_swap(text, key, model, (21, 24)) == 0.0


def test_swap_rejects_equal_indices(english_model):
    with pytest.raises(ValueError):
        score_delta_on_swap(np.asarray([0, 1]), SubstitutionKey.identity(26), english_model, (3, 3))


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(0, 5), min_size=0, max_size=60),
    st.permutations(list(range(6))),
    st.tuples(st.integers(0, 5), st.integers(0, 5)).filter(lambda t: t[0] != t[1]),
)
def test_swap_delta_property_small_alphabet(text, perm, swap):
    alphabet = Alphabet(tuple("ABCDEF"))
    model = build_model(np.asarray([0, 1, 2, 3, 1, 1, 4, 5, 0, 0, 2]), alphabet, delta=0.5)
    key = SubstitutionKey(perm)
    text = np.asarray(text, dtype=np.int64)
    full = score_log_pi(text, key.swapped(*swap), model) - score_log_pi(text, key, model)
    assert abs(score_delta_on_swap(text, key, model, swap) - full) <= 1e-9
    counts = bigram_counts(text, 6)
    assert swap_delta(counts, model.log_r, swap[0], swap[0]) == 0.0


def test_csv_round_trip(english_model):
    data = english_model.to_csv()
    lines = data.strip().split("\n")
    assert lines[0] == "sym1,sym2,count"
    assert len(lines) == 1 + 26 * 26
    back = BigramModel.from_csv(data, delta=1.0)
    assert back.alphabet == english_model.alphabet
    assert (back.counts == english_model.counts).all()
    assert np.allclose(back.log_r, english_model.log_r)


def test_csv_with_space_symbol():
    alphabet = Alphabet.english(with_space=True)
    model = build_model(normalize("the cat sat on the mat", alphabet), alphabet)
    back = BigramModel.from_csv(model.to_csv())
    assert back.alphabet == alphabet
    assert (back.counts == model.counts).all()


def test_csv_rejects_wrong_row_count():
    with pytest.raises(ValueError):
        BigramModel.from_csv("sym1,sym2,count\nA,A,1\nA,B,2\nB,A,3\n")
