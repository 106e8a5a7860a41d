"""Metropolis walk over cipher keys with a powered acceptance rule.

Each step proposes a random swap of two key entries, draws ``u`` uniform in
[0, 1) and accepts when ``u < (pi(y) / pi(x)) ** p``.  The random stream is
consumed in the same pattern at every step (pair draw, then ``u``), whatever
the outcome, so a chain is a pure function of its inputs and seed.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .cipher import (
    CombinedKey,
    Key,
    SubstitutionKey,
    TranspositionKey,
    random_permutation,
    sub_decrypt,
    transpose_decrypt,
)
from .langmodel import BigramModel, bigram_counts, log_pi_of_plaintext, score_log_pi, swap_delta
from .prng import RandomSource

EXP_CLAMP = 700.0
CHUNK = 1 << 16
CIPHERS = ("substitution", "transposition", "combined")
INITS = ("random", "frequency", "truth")


@dataclass
class ChainConfig:
    iterations: int = 10_000
    p: float = 1.0
    proposal: str = "random-swap"
    track_best: bool = True
    init: str = "random"
    cipher: str = "substitution"
    period: Optional[int] = None

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.p > 0 or not math.isfinite(self.p):
            raise ValueError("scaling exponent p must be a finite positive number")
        if self.proposal != "random-swap":
            raise ValueError(f"unsupported proposal {self.proposal!r}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if self.cipher not in CIPHERS:
            raise ValueError(f"cipher must be one of {CIPHERS}")
        if self.cipher != "substitution" and self.period is not None and self.period < 2:
            raise ValueError("transposition period must be >= 2 to be searchable")


@dataclass
class ChainTrace:
    log_score: np.ndarray
    accepted: np.ndarray
    delta: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "log_score", "accepted"])
        for n, (s, a) in enumerate(zip(self.log_score, self.accepted), start=1):
            writer.writerow([n, repr(float(s)), int(a)])
        return buf.getvalue()


@dataclass
class ChainState:
    key: Key
    log_score: float
    best_key: Optional[Key]
    best_score: Optional[float]
    n_accepted: int = 0
    n_proposed: int = 0
    trace: Optional[ChainTrace] = field(default=None, repr=False)

    @property
    def answer(self) -> Key:
        return self.best_key if self.best_key is not None else self.key

    @property
    def answer_score(self) -> float:
        return self.best_score if self.best_score is not None else self.log_score


# ---------------------------------------------------------------------------
# elementary steps


@njit(cache=True)
def accept(u, log_score_y, log_score_x, p):
    """``u < exp(p * (log_score_y - log_score_x))`` with the exponent clamped."""
    e = p * (log_score_y - log_score_x)
    if e > EXP_CLAMP:
        e = EXP_CLAMP
    elif e < -EXP_CLAMP:
        e = -EXP_CLAMP
    return u < math.exp(e)


def draw_pair(src: RandomSource, size: int) -> tuple[int, int]:
    """Uniform ordered pair of distinct indices below ``size``."""
    i = src.next_below(size)
    j = src.next_below(size - 1)
    if j >= i:
        j += 1
    return i, j


def propose_swap(key, src: RandomSource):
    size = len(key)
    if size < 2:
        raise ValueError("key space needs at least two entries")
    i, j = draw_pair(src, size)
    return key.swapped(i, j), (i, j)


def frequency_key(ciphertext, model: BigramModel) -> SubstitutionKey:
    """Warm start: match plaintext and ciphertext symbols by frequency rank."""
    n = model.size
    ref_order = np.argsort(-model.unigram_counts(), kind="stable")
    ct_order = np.argsort(-np.bincount(np.asarray(ciphertext, dtype=np.int64), minlength=n), kind="stable")
    perm = [0] * n
    for plain, ciph in zip(ref_order, ct_order):
        perm[int(plain)] = int(ciph)
    return SubstitutionKey(perm)


# ---------------------------------------------------------------------------
# substitution kernel


@njit(cache=True)
def _substitution_walk(counts, log_r, perm, ii, jj, us, p, score, best_perm, best_score, track_best,
                       tr_score, tr_acc, tr_delta, do_trace):
    n = counts.shape[0]
    n_acc = 0
    for step in range(ii.shape[0]):
        i = ii[step]
        j = jj[step]
        d = 0.0
        for k in range(n):
            if k != i and k != j:
                d += (counts[i, k] - counts[j, k]) * (log_r[j, k] - log_r[i, k])
                d += (counts[k, i] - counts[k, j]) * (log_r[k, j] - log_r[k, i])
        d += (counts[i, i] - counts[j, j]) * (log_r[j, j] - log_r[i, i])
        d += (counts[i, j] - counts[j, i]) * (log_r[j, i] - log_r[i, j])
        ok = accept(us[step], score + d, score, p)
        if ok:
            n_acc += 1
            score += d
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
            for k in range(n):
                t = counts[i, k]
                counts[i, k] = counts[j, k]
                counts[j, k] = t
            for k in range(n):
                t = counts[k, i]
                counts[k, i] = counts[k, j]
                counts[k, j] = t
            if track_best and score > best_score:
                best_score = score
                for k in range(n):
                    best_perm[k] = perm[k]
        if do_trace:
            tr_score[step] = score
            tr_acc[step] = ok
            tr_delta[step] = d
    return score, best_score, n_acc


def _draw_swap_block(src: RandomSource, size: int, steps: int):
    ii = np.empty(steps, dtype=np.int64)
    jj = np.empty(steps, dtype=np.int64)
    us = np.empty(steps, dtype=np.float64)
    below = src.next_below
    uniform = src.next_uniform
    for s in range(steps):
        i = below(size)
        j = below(size - 1)
        if j >= i:
            j += 1
        ii[s] = i
        jj[s] = j
        us[s] = uniform()
    return ii, jj, us


def _run_substitution(ciphertext, model, cfg, src, key: SubstitutionKey, trace: bool) -> ChainState:
    n = model.size
    plain = sub_decrypt(ciphertext, key)
    counts = bigram_counts(plain, n).astype(np.int64)
    log_r = np.ascontiguousarray(model.log_r, dtype=np.float64)
    score = float((counts * log_r).sum())
    perm = np.asarray(key.perm, dtype=np.int64)
    best_perm = perm.copy()
    best_score = score
    total = cfg.iterations
    tr = [np.zeros(total), np.zeros(total, dtype=np.bool_), np.zeros(total)] if trace else None
    n_acc = 0
    done = 0
    while done < total:
        steps = min(CHUNK, total - done)
        ii, jj, us = _draw_swap_block(src, n, steps)
        if trace:
            views = [a[done:done + steps] for a in tr]
        else:
            views = [np.zeros(0), np.zeros(0, dtype=np.bool_), np.zeros(0)]
        score, best_score, acc = _substitution_walk(
            counts, log_r, perm, ii, jj, us, float(cfg.p), score, best_perm, best_score,
            cfg.track_best, views[0], views[1], views[2], trace,
        )
        n_acc += int(acc)
        done += steps
    final = SubstitutionKey(tuple(int(v) for v in perm))
    state = ChainState(
        key=final,
        log_score=float(score),
        best_key=SubstitutionKey(tuple(int(v) for v in best_perm)) if cfg.track_best else None,
        best_score=float(best_score) if cfg.track_best else None,
        n_accepted=n_acc,
        n_proposed=total,
    )
    if trace:
        state.trace = ChainTrace(*tr)
    return state


# ---------------------------------------------------------------------------
# transposition / combined (full rescoring on column moves)


def _run_general(ciphertext, model, cfg, src, key: Key, trace: bool) -> ChainState:
    log_r = model.log_r
    n = model.size
    combined = isinstance(key, CombinedKey)
    sub = key.sub if combined else None
    trans = key.trans if combined else key

    def plain_of(tk, sk):
        t = transpose_decrypt(ciphertext, tk)
        return sub_decrypt(t, sk) if sk is not None else t

    plain = plain_of(trans, sub)
    counts = bigram_counts(plain, n) if combined else None
    score = log_pi_of_plaintext(plain, model)
    best = (sub, trans)
    best_score = score
    total = cfg.iterations
    tr_score = np.zeros(total if trace else 0)
    tr_acc = np.zeros(total if trace else 0, dtype=np.bool_)
    tr_delta = np.zeros(total if trace else 0)
    n_acc = 0
    for step in range(total):
        move_sub = combined and src.next_below(2) == 0
        if move_sub:
            i, j = draw_pair(src, n)
            u = src.next_uniform()
            d = swap_delta(counts, log_r, i, j)
            new_sub, new_trans = sub.swapped(i, j), trans
        else:
            i, j = draw_pair(src, trans.k)
            u = src.next_uniform()
            new_sub, new_trans = sub, trans.swapped(i, j)
            new_plain = plain_of(new_trans, new_sub)
            d = log_pi_of_plaintext(new_plain, model) - score
        ok = accept(u, score + d, score, cfg.p)
        if ok:
            n_acc += 1
            sub, trans = new_sub, new_trans
            if combined:
                if move_sub:
                    counts[[i, j]] = counts[[j, i]]
                    counts[:, [i, j]] = counts[:, [j, i]]
                else:
                    counts = bigram_counts(new_plain, n)
            score += d
            if cfg.track_best and score > best_score:
                best, best_score = (sub, trans), score
        if trace:
            tr_score[step], tr_acc[step], tr_delta[step] = score, ok, d

    def pack(s, t):
        return CombinedKey(s, t) if combined else t

    return ChainState(
        key=pack(sub, trans),
        log_score=float(score),
        best_key=pack(*best) if cfg.track_best else None,
        best_score=float(best_score) if cfg.track_best else None,
        n_accepted=n_acc,
        n_proposed=total,
        trace=ChainTrace(tr_score, tr_acc, tr_delta) if trace else None,
    )


# ---------------------------------------------------------------------------


def initial_key(ciphertext, model: BigramModel, cfg: ChainConfig, src: RandomSource) -> Key:
    if cfg.init == "truth":
        raise ValueError("init='truth' needs an explicit initial key")
    sub = None
    if cfg.cipher in ("substitution", "combined"):
        if cfg.init == "frequency":
            sub = frequency_key(ciphertext, model)
        else:
            sub = SubstitutionKey(random_permutation(model.size, src))
    if cfg.cipher == "substitution":
        return sub
    if cfg.period is None:
        raise ValueError("transposition attacks need a period")
    trans = TranspositionKey(random_permutation(cfg.period, src))
    return trans if cfg.cipher == "transposition" else CombinedKey(sub, trans)


def _check_key(key: Key, cfg: ChainConfig, size: int) -> None:
    expected = {"substitution": SubstitutionKey, "transposition": TranspositionKey, "combined": CombinedKey}
    if not isinstance(key, expected[cfg.cipher]):
        raise ValueError(f"initial key does not match cipher {cfg.cipher!r}")
    sub = key if isinstance(key, SubstitutionKey) else getattr(key, "sub", None)
    if sub is not None and len(sub) != size:
        raise ValueError("substitution key size does not match the model alphabet")


def run_chain(ciphertext, model: BigramModel, cfg: ChainConfig, src: RandomSource,
              start: Key | None = None, trace: bool = False) -> ChainState:
    """Run ``cfg.iterations`` Metropolis steps and return the final state.

    ``start`` overrides the configured initial-state rule.  With tracking on,
    ``ChainState.answer`` is the best key seen, otherwise the final key.
    """
    ciphertext = np.asarray(ciphertext, dtype=np.int64)
    if ciphertext.size == 0:
        raise ValueError("ciphertext is empty")
    if not model.is_smoothed:
        raise ValueError("model has zero-probability bigrams; build it with delta > 0")
    if ciphertext.max() >= model.size:
        raise ValueError("ciphertext contains symbols outside the model alphabet")
    key = start if start is not None else initial_key(ciphertext, model, cfg, src)
    _check_key(key, cfg, model.size)
    if cfg.cipher == "substitution":
        return _run_substitution(ciphertext, model, cfg, src, key, trace)
    return _run_general(ciphertext, model, cfg, src, key, trace)


def rescore(ciphertext, model: BigramModel, key: Key) -> float:
    return score_log_pi(ciphertext, key, model)
