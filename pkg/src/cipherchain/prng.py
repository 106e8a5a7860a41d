"""Seedable, bit-exact pseudo-random number generators.

Three generators share one interface (:class:`RandomSource`):

* ``lcg48``       -- the 48-bit drand48 linear congruential generator,
* ``xorshift128`` -- Marsaglia's xor128 on four 32-bit words,
* ``ci``          -- a chaotic-iteration generator that flips bits of an
  N-bit state array, driven by two independent xorshift128 streams.

Every generator is a plain mutable object.  Each concurrent consumer must own
its own instance.

Seeding goes through SplitMix64 (:func:`splitmix64_stream`) so that streams
are reproducible from a single 64-bit seed::

    state  = (state + 0x9E3779B97F4A7C15) mod 2**64
    z      = state
    z      = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z      = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    output = z ^ (z >> 31)
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator

MASK32 = 0xFFFFFFFF
MASK48 = (1 << 48) - 1
MASK64 = (1 << 64) - 1

DRAND48_A = 0x5DEECE66D
DRAND48_C = 0xB
DRAND48_LOW = 0x330E

XORSHIFT_DEFAULT = (123456789, 362436069, 521288629, 88675123)


class PrngKind(str, Enum):
    LCG48 = "lcg48"
    XORSHIFT128 = "xorshift128"
    CI = "ci"

    @classmethod
    def parse(cls, name: "str | PrngKind") -> "PrngKind":
        if isinstance(name, PrngKind):
            return name
        key = name.strip().lower()
        aliases = {
            "drand48": cls.LCG48,
            "lcg": cls.LCG48,
            "xorshift": cls.XORSHIFT128,
            "xor128": cls.XORSHIFT128,
            "chaotic": cls.CI,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown PRNG kind {name!r}") from None


def splitmix64_stream(seed: int) -> Iterator[int]:
    state = seed & MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        yield z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Fold integers into one 64-bit seed via SplitMix64 finalisation."""
    h = 0x6A09E667F3BCC908
    for part in parts:
        h = next(splitmix64_stream(h ^ (part & MASK64)))
    return h


# ---------------------------------------------------------------------------
# states and raw steps


@dataclass
class Lcg48State:
    x: int
    a: int = DRAND48_A
    c: int = DRAND48_C
    m_bits: int = 48

    def __post_init__(self) -> None:
        if self.m_bits != 48:
            raise ValueError("only the 48-bit modulus is supported")
        self.x &= MASK48


@dataclass
class Xorshift128State:
    x: int
    y: int
    z: int
    w: int

    def __post_init__(self) -> None:
        self.x &= MASK32
        self.y &= MASK32
        self.z &= MASK32
        self.w &= MASK32
        if not (self.x | self.y | self.z | self.w):
            raise ValueError("xorshift128 state must not be all zero")

    def words(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.z, self.w)


@dataclass
class CiState:
    bits: int
    gen1: Xorshift128State
    gen2: Xorshift128State
    n_bits: int = 32
    c_iter: int = 1

    def __post_init__(self) -> None:
        if self.n_bits < 1:
            raise ValueError("n_bits must be positive")
        if self.c_iter < 0:
            raise ValueError("c_iter must be non-negative")
        if self.gen1 is self.gen2:
            raise ValueError("gen1 and gen2 must be distinct state objects")
        self.bits &= (1 << self.n_bits) - 1

    def bit_array(self) -> list[int]:
        """State as a list of N bits, index 0 = least significant."""
        return [(self.bits >> i) & 1 for i in range(self.n_bits)]


def lcg48_next(s: Lcg48State) -> int:
    """Advance ``s`` in place by ``x <- (a*x + c) mod 2**48``; return the new x."""
    s.x = (s.a * s.x + s.c) & MASK48
    return s.x


def xorshift128_next(s: Xorshift128State) -> int:
    t = s.x ^ ((s.x << 11) & MASK32)
    s.x, s.y, s.z = s.y, s.z, s.w
    s.w = s.w ^ (s.w >> 19) ^ (t ^ (t >> 8))
    return s.w


def ci_next(s: CiState) -> int:
    """One chaotic-iteration output.

    Draw ``a`` from gen1, set ``m = a mod 2 + c_iter`` and perform the flip
    step for ``i = 0..m`` inclusive (m + 1 flips).  Each flip draws ``b`` from
    gen2 and toggles bit ``b mod N``.  Returns the state read as an N-bit
    integer.
    """
    a = xorshift128_next(s.gen1)
    m = (a & 1) + s.c_iter
    bits = s.bits
    n = s.n_bits
    for _ in range(m + 1):
        bits ^= 1 << (xorshift128_next(s.gen2) % n)
    s.bits = bits
    return bits


# ---------------------------------------------------------------------------
# uniform interface


class RandomSource:
    """Common interface: raw words, uniforms in [0, 1) and bounded integers."""

    kind: PrngKind
    word_bits: int

    def next_word(self) -> int:
        raise NotImplementedError

    def next_uniform(self) -> float:
        return self.next_word() / (1 << self.word_bits)

    def next_below(self, bound: int) -> int:
        """Unbiased integer in ``[0, bound)``.

        Multiply-shift with rejection (Lemire): the result comes from the high
        bits of ``word * bound`` and draws are rejected only in the biased
        low zone.  The high bits matter for drand48, whose low bits have
        short periods.
        """
        if bound < 1:
            raise ValueError("bound must be >= 1")
        if bound == 1:
            return 0
        words = 1
        while bound > (1 << (words * self.word_bits)):
            words += 1
        width = words * self.word_bits
        mask = (1 << width) - 1
        prod = self._wide(words) * bound
        low = prod & mask
        if low < bound:
            threshold = (1 << width) % bound
            while low < threshold:
                prod = self._wide(words) * bound
                low = prod & mask
        return prod >> width

    def _wide(self, words: int) -> int:
        value = self.next_word()
        for _ in range(words - 1):
            value = (value << self.word_bits) | self.next_word()
        return value

    def getstate(self):
        raise NotImplementedError


class Lcg48(RandomSource):
    kind = PrngKind.LCG48
    word_bits = 48

    def __init__(self, state: Lcg48State) -> None:
        self.state = state

    @classmethod
    def from_seed(cls, seed: int) -> "Lcg48":
        return cls(Lcg48State(((seed & MASK32) << 16) | DRAND48_LOW))

    def next_word(self) -> int:
        return lcg48_next(self.state)

    def getstate(self) -> tuple:
        return (self.state.x, self.state.a, self.state.c)


class Xorshift128(RandomSource):
    kind = PrngKind.XORSHIFT128
    word_bits = 32

    def __init__(self, state: Xorshift128State) -> None:
        self.state = state

    @classmethod
    def from_seed(cls, seed: int) -> "Xorshift128":
        if seed & MASK64 == 0:
            return cls(Xorshift128State(*XORSHIFT_DEFAULT))
        return cls(_xorshift_state_from(splitmix64_stream(seed)))

    def next_word(self) -> int:
        return xorshift128_next(self.state)

    def getstate(self) -> tuple:
        return self.state.words()


class ChaoticIteration(RandomSource):
    kind = PrngKind.CI

    def __init__(self, state: CiState) -> None:
        self.state = state
        self.word_bits = state.n_bits

    @classmethod
    def from_seed(cls, seed: int, n_bits: int = 32, c_iter: int = 1) -> "ChaoticIteration":
        stream = splitmix64_stream(seed)
        gen1 = _xorshift_state_from(stream)
        gen2 = _xorshift_state_from(stream)
        while gen2.words() == gen1.words():
            gen2 = _xorshift_state_from(stream)
        bits = 0
        for shift in range(0, n_bits, 64):
            bits |= next(stream) << shift
        return cls(CiState(bits=bits, gen1=gen1, gen2=gen2, n_bits=n_bits, c_iter=c_iter))

    def next_word(self) -> int:
        return ci_next(self.state)

    def getstate(self) -> tuple:
        s = self.state
        return (s.bits, s.gen1.words(), s.gen2.words(), s.n_bits, s.c_iter)


def _xorshift_state_from(stream: Iterator[int]) -> Xorshift128State:
    while True:
        v1, v2 = next(stream), next(stream)
        words = (v1 & MASK32, v1 >> 32, v2 & MASK32, v2 >> 32)
        if any(words):
            return Xorshift128State(*words)


def seed_source(kind: "PrngKind | str", seed: int, **options) -> RandomSource:
    """Build a freshly seeded generator of the given kind.

    ``options`` is only used by the CI generator (``n_bits``, ``c_iter``).
    """
    kind = PrngKind.parse(kind)
    if kind is PrngKind.LCG48:
        return Lcg48.from_seed(seed)
    if kind is PrngKind.XORSHIFT128:
        return Xorshift128.from_seed(seed)
    return ChaoticIteration.from_seed(seed, **options)
