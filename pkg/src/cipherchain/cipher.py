"""Alphabets, text normalisation and the two classical cipher families.

Texts are handled as 1-D ``numpy`` integer arrays of alphabet indices.
A substitution key is stored as an encryption permutation: ``perm[i]`` is the
ciphertext index of plaintext symbol ``i``.  A transposition key permutes
positions inside consecutive blocks of length ``k``; a trailing partial block
is left in place.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .prng import RandomSource

SPACE = " "


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...] = tuple(string.ascii_uppercase)

    def __post_init__(self) -> None:
        if len(self.symbols) < 2:
            raise ValueError("alphabet needs at least two symbols")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be distinct")
        if any(len(s) != 1 for s in self.symbols):
            raise ValueError("alphabet symbols must be single characters")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.symbols)})

    @classmethod
    def from_string(cls, letters: str, with_space: bool = False) -> "Alphabet":
        symbols = tuple(letters.upper())
        if with_space and SPACE not in symbols:
            symbols += (SPACE,)
        return cls(symbols)

    @classmethod
    def english(cls, with_space: bool = False) -> "Alphabet":
        return cls.from_string(string.ascii_uppercase, with_space=with_space)

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def has_space(self) -> bool:
        return SPACE in self._index

    def index(self, symbol: str) -> int:
        return self._index[symbol]

    def render(self, text: Sequence[int]) -> str:
        return "".join(self.symbols[i] for i in text)

    def compact(self) -> str:
        """Compact textual form, e.g. ``ABCDEFGHIJKLMNOPQRSTUVWXYZ`` or ``ETAO_``."""
        return "".join("_" if s == SPACE else s for s in self.symbols)


def normalize(raw: str, alphabet: Alphabet | None = None) -> np.ndarray:
    """Uppercase ``raw`` and keep only alphabet members, as indices.

    When the alphabet carries a space symbol, every whitespace run becomes one
    space (leading and trailing runs are dropped).
    """
    alphabet = alphabet or Alphabet()
    text = raw.upper()
    if alphabet.has_space:
        text = re.sub(r"\s+", SPACE, text).strip(SPACE)
    idx = alphabet._index
    out = [idx[ch] for ch in text if ch in idx]
    if alphabet.has_space:
        # dropping punctuation can leave doubled spaces behind
        sp = idx[SPACE]
        out = [c for k, c in enumerate(out) if c != sp or (k > 0 and out[k - 1] != sp)]
        while out and out[-1] == sp:
            out.pop()
    return np.asarray(out, dtype=np.int64)


def _check_perm(values: Sequence[int], what: str) -> tuple[int, ...]:
    values = tuple(int(v) for v in values)
    if sorted(values) != list(range(len(values))):
        raise ValueError(f"{what} is not a permutation of 0..{len(values) - 1}")
    return values


@dataclass(frozen=True)
class SubstitutionKey:
    perm: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "perm", _check_perm(self.perm, "substitution key"))

    @classmethod
    def identity(cls, size: int) -> "SubstitutionKey":
        return cls(tuple(range(size)))

    def __len__(self) -> int:
        return len(self.perm)

    def inverse(self) -> tuple[int, ...]:
        inv = [0] * len(self.perm)
        for plain, ciph in enumerate(self.perm):
            inv[ciph] = plain
        return tuple(inv)

    def swapped(self, i: int, j: int) -> "SubstitutionKey":
        perm = list(self.perm)
        perm[i], perm[j] = perm[j], perm[i]
        return SubstitutionKey(perm)

    def to_line(self) -> str:
        return " ".join(map(str, self.perm))

    @classmethod
    def from_line(cls, line: str) -> "SubstitutionKey":
        return cls(tuple(int(v) for v in line.split()))


@dataclass(frozen=True)
class TranspositionKey:
    order: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.order:
            raise ValueError("transposition period must be >= 1")
        object.__setattr__(self, "order", _check_perm(self.order, "transposition key"))

    @property
    def k(self) -> int:
        return len(self.order)

    @classmethod
    def identity(cls, k: int) -> "TranspositionKey":
        return cls(tuple(range(k)))

    def __len__(self) -> int:
        return len(self.order)

    def swapped(self, i: int, j: int) -> "TranspositionKey":
        order = list(self.order)
        order[i], order[j] = order[j], order[i]
        return TranspositionKey(order)

    def to_line(self) -> str:
        return " ".join(map(str, self.order))

    @classmethod
    def from_line(cls, line: str) -> "TranspositionKey":
        return cls(tuple(int(v) for v in line.split()))


@dataclass(frozen=True)
class CombinedKey:
    """Substitution followed by columnar transposition."""

    sub: SubstitutionKey
    trans: TranspositionKey

    def to_lines(self) -> str:
        return self.sub.to_line() + "\n" + self.trans.to_line()


Key = Union[SubstitutionKey, TranspositionKey, CombinedKey]


def _as_text(text) -> np.ndarray:
    return np.asarray(text, dtype=np.int64)


def sub_encrypt(pt, key: SubstitutionKey, alphabet_size: int | None = None) -> np.ndarray:
    pt = _as_text(pt)
    if alphabet_size is not None and alphabet_size != len(key):
        raise ValueError("key size does not match alphabet")
    if pt.size and pt.max() >= len(key):
        raise ValueError("text contains symbols outside the key's alphabet")
    return np.asarray(key.perm, dtype=np.int64)[pt]


def sub_decrypt(ct, key: SubstitutionKey, alphabet_size: int | None = None) -> np.ndarray:
    ct = _as_text(ct)
    if alphabet_size is not None and alphabet_size != len(key):
        raise ValueError("key size does not match alphabet")
    if ct.size and ct.max() >= len(key):
        raise ValueError("text contains symbols outside the key's alphabet")
    return np.asarray(key.inverse(), dtype=np.int64)[ct]


def _block_index(n: int, order: tuple[int, ...]) -> np.ndarray:
    k = len(order)
    full = (n // k) * k
    pos = np.arange(full)
    return np.concatenate([(pos // k) * k + np.asarray(order)[pos % k], np.arange(full, n)]).astype(np.int64)


def transpose_encrypt(pt, key: TranspositionKey) -> np.ndarray:
    pt = _as_text(pt)
    return pt[_block_index(pt.size, key.order)]


def transpose_decrypt(ct, key: TranspositionKey) -> np.ndarray:
    ct = _as_text(ct)
    out = np.empty_like(ct)
    out[_block_index(ct.size, key.order)] = ct
    return out


def encrypt(pt, key: Key) -> np.ndarray:
    if isinstance(key, SubstitutionKey):
        return sub_encrypt(pt, key)
    if isinstance(key, TranspositionKey):
        return transpose_encrypt(pt, key)
    return transpose_encrypt(sub_encrypt(pt, key.sub), key.trans)


def decrypt(ct, key: Key) -> np.ndarray:
    if isinstance(key, SubstitutionKey):
        return sub_decrypt(ct, key)
    if isinstance(key, TranspositionKey):
        return transpose_decrypt(ct, key)
    return sub_decrypt(transpose_decrypt(ct, key.trans), key.sub)


def random_permutation(size: int, src: RandomSource) -> tuple[int, ...]:
    """Fisher-Yates shuffle of ``range(size)`` driven by ``src.next_below``."""
    perm = list(range(size))
    for i in range(size - 1, 0, -1):
        j = src.next_below(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return tuple(perm)


def random_key(space: str, src: RandomSource, size: int) -> Key:
    """Uniform random key.

    ``space`` is ``"substitution"`` (``size`` = alphabet size) or
    ``"transposition"`` (``size`` = period k).
    """
    if space == "substitution":
        return SubstitutionKey(random_permutation(size, src))
    if space == "transposition":
        return TranspositionKey(random_permutation(size, src))
    raise ValueError(f"unknown key space {space!r}")


def parse_key(text: str, cipher: str) -> Key:
    """Read a key file body: one line per permutation (two for ``combined``)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if cipher == "substitution" and len(lines) == 1:
        return SubstitutionKey.from_line(lines[0])
    if cipher == "transposition" and len(lines) == 1:
        return TranspositionKey.from_line(lines[0])
    if cipher == "combined" and len(lines) == 2:
        return CombinedKey(SubstitutionKey.from_line(lines[0]), TranspositionKey.from_line(lines[1]))
    raise ValueError(f"malformed {cipher} key file")


def format_key(key: Key) -> str:
    if isinstance(key, CombinedKey):
        return key.to_lines() + "\n"
    return key.to_line() + "\n"
