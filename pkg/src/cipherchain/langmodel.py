"""Reference bigram model and the log-space key score.

For a candidate key ``x`` the score is

    log pi(x) = sum over (b1, b2) of f_x(b1, b2) * log r(b1, b2)

where ``f_x`` counts adjacent pairs in the text decrypted with ``x`` and ``r``
is the additively smoothed bigram frequency of the reference corpus.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .cipher import Alphabet, Key, decrypt


@dataclass(frozen=True, eq=False)
class BigramModel:
    alphabet: Alphabet
    counts: np.ndarray
    log_r: np.ndarray
    smoothing_delta: float
    corpus_len: int

    @property
    def size(self) -> int:
        return len(self.alphabet)

    @property
    def is_smoothed(self) -> bool:
        return bool(np.isfinite(self.log_r).all())

    def unigram_counts(self) -> np.ndarray:
        """Per-symbol frequency proxy (row sums of the pair counts)."""
        return self.counts.sum(axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sym1", "sym2", "count"])
        syms = self.alphabet.symbols
        for a in range(self.size):
            for b in range(self.size):
                writer.writerow([syms[a], syms[b], int(self.counts[a, b])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, data: str, delta: float = 1.0) -> "BigramModel":
        rows = list(csv.reader(io.StringIO(data)))
        if rows and rows[0] == ["sym1", "sym2", "count"]:
            rows = rows[1:]
        symbols: list[str] = []
        for sym1, _, _ in rows:
            if sym1 not in symbols:
                symbols.append(sym1)
        alphabet = Alphabet(tuple(symbols))
        n = len(alphabet)
        if len(rows) != n * n:
            raise ValueError(f"expected {n * n} count rows, found {len(rows)}")
        counts = np.zeros((n, n), dtype=np.int64)
        for sym1, sym2, count in rows:
            counts[alphabet.index(sym1), alphabet.index(sym2)] = int(count)
        if (counts < 0).any():
            raise ValueError("bigram counts must be non-negative")
        return model_from_counts(alphabet, counts, delta, corpus_len=int(counts.sum()) + 1)


def bigram_counts(text, size: int) -> np.ndarray:
    """|A| x |A| matrix of adjacent-pair counts of ``text``."""
    text = np.asarray(text, dtype=np.int64)
    if text.size < 2:
        return np.zeros((size, size), dtype=np.int64)
    flat = np.bincount(text[:-1] * size + text[1:], minlength=size * size)
    return flat.reshape(size, size)


def model_from_counts(alphabet: Alphabet, counts: np.ndarray, delta: float, corpus_len: int) -> BigramModel:
    if delta < 0:
        raise ValueError("smoothing delta must be >= 0")
    n = len(alphabet)
    total = counts.sum()
    denom = total + delta * n * n
    if denom <= 0:
        raise ValueError("corpus has no bigrams and no smoothing; model would be all zero")
    with np.errstate(divide="ignore"):
        log_r = np.log((counts + delta) / denom)
    log_r.setflags(write=False)
    counts = counts.copy()
    counts.setflags(write=False)
    return BigramModel(alphabet, counts, log_r, float(delta), int(corpus_len))


def build_model(corpus, alphabet: Alphabet | None = None, delta: float = 1.0) -> BigramModel:
    """Count adjacent pairs in a normalised corpus and smooth them.

    ``r = (count + delta) / (total + delta * |A|**2)``; logs are stored.
    """
    alphabet = alphabet or Alphabet()
    corpus = np.asarray(corpus, dtype=np.int64)
    return model_from_counts(alphabet, bigram_counts(corpus, len(alphabet)), delta, corpus.size)


def log_pi_of_plaintext(text, model: BigramModel) -> float:
    text = np.asarray(text, dtype=np.int64)
    if text.size < 2:
        return 0.0
    return float(model.log_r[text[:-1], text[1:]].sum())


def score_log_pi(text, key: Key | None, model: BigramModel) -> float:
    """Log-score of ``text`` decrypted under ``key`` (``None`` = no decryption)."""
    plain = np.asarray(text, dtype=np.int64) if key is None else decrypt(text, key)
    return log_pi_of_plaintext(plain, model)


def swap_delta(counts: np.ndarray, log_r: np.ndarray, i: int, j: int) -> float:
    """Score change when plaintext symbols ``i`` and ``j`` trade places.

    ``counts`` are the bigram counts of the *decrypted* text.  Only rows and
    columns ``i`` and ``j`` contribute.
    """
    if i == j:
        return 0.0
    gi, gj = counts[i], counts[j]
    li, lj = log_r[i], log_r[j]
    ci, cj = counts[:, i], counts[:, j]
    ki, kj = log_r[:, i], log_r[:, j]
    row = float(np.dot(gi - gj, lj - li))
    col = float(np.dot(ci - cj, kj - ki))
    # the k in {i, j} terms of row/col are wrong; replace them with the corner
    over = (
        (gi[i] - gj[i]) * (lj[i] - li[i])
        + (gi[j] - gj[j]) * (lj[j] - li[j])
        + (ci[i] - cj[i]) * (kj[i] - ki[i])
        + (ci[j] - cj[j]) * (kj[j] - ki[j])
    )
    corner = (counts[i, i] - counts[j, j]) * (log_r[j, j] - log_r[i, i]) + (counts[i, j] - counts[j, i]) * (
        log_r[j, i] - log_r[i, j]
    )
    return row + col - float(over) + float(corner)


def score_delta_on_swap(text, key, model: BigramModel, swap: tuple[int, int]) -> float:
    """``score(text, key.swapped(i, j)) - score(text, key)`` computed locally."""
    i, j = swap
    if i == j:
        raise ValueError("swap indices must differ")
    plain = decrypt(text, key)
    return swap_delta(bigram_counts(plain, model.size), model.log_r, i, j)
