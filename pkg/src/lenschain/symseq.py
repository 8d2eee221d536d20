"""Finite symbol sequences over the alphabet {L, R}.

Words are indexed modulo their length throughout: negative and
out-of-range indices wrap.  The three permutation operators (cyclic,
flip, multiplication), rotational sequences built from a rotation
number, and the necklace-counting formulas all live here.  Everything
is exact integer/string arithmetic; no floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "SymbolSequence",
    "RotationalParams",
    "NotCoprimeError",
    "LeftCountError",
    "cyclic",
    "flip",
    "mult_perm",
    "concat",
    "power",
    "is_primitive",
    "cyclic_equal",
    "canonical_rotation",
    "mod_inverse",
    "rotational",
    "rotational_params",
    "mobius",
    "totient",
    "count_primitive",
    "count_rotational",
]


class NotCoprimeError(ValueError):
    """The operation needs gcd(m, n) = 1 and the arguments are not coprime."""


class LeftCountError(ValueError):
    """The left-symbol count l is outside the valid range [1, n-1]."""


@dataclass(frozen=True)
class SymbolSequence:
    """An ordered word over {L, R} with modular index arithmetic.

    >>> s = SymbolSequence("LRLRR")
    >>> s[6], s[-1], len(s)
    ('R', 'R', 5)

    ``invertible`` is metadata set by :func:`mult_perm`: it records
    whether the multiplication index was coprime to the length.  It does
    not participate in equality or hashing.
    """

    word: str
    invertible: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if not self.word:
            raise ValueError("empty symbol sequence")
        bad = set(self.word) - {"L", "R"}
        if bad:
            raise ValueError(f"symbols outside {{L, R}}: {sorted(bad)}")

    @property
    def n(self) -> int:
        return len(self.word)

    def __len__(self) -> int:
        return len(self.word)

    def __getitem__(self, i: int) -> str:
        return self.word[i % len(self.word)]

    def __iter__(self):
        return iter(self.word)

    def __str__(self) -> str:
        return self.word

    def count(self, symbol: str) -> int:
        return self.word.count(symbol)


def as_sequence(s: SymbolSequence | str) -> SymbolSequence:
    """Coerce a plain string to a SymbolSequence."""
    return s if isinstance(s, SymbolSequence) else SymbolSequence(s)


def cyclic(s: SymbolSequence | str, i: int) -> SymbolSequence:
    """Left cyclic permutation: element j of the result is s[i + j].

    >>> str(cyclic("LRLRR", 2))
    'LRRLR'
    """
    s = as_sequence(s)
    i %= len(s)
    return SymbolSequence(s.word[i:] + s.word[:i])


def flip(s: SymbolSequence | str, i: int) -> SymbolSequence:
    """Swap L and R at index i (mod n), an involution at fixed i.

    >>> str(flip("LRLRR", 3))
    'LRLLR'
    """
    s = as_sequence(s)
    i %= len(s)
    other = "R" if s.word[i] == "L" else "L"
    return SymbolSequence(s.word[:i] + other + s.word[i + 1 :])


def mult_perm(s: SymbolSequence | str, i: int) -> SymbolSequence:
    """Multiplication permutation: element j of the result is s[i * j].

    Invertible only when gcd(i, n) = 1; the result's ``invertible``
    flag records this, non-coprime i is not an error.
    """
    s = as_sequence(s)
    n = len(s)
    word = "".join(s.word[(i * j) % n] for j in range(n))
    return SymbolSequence(word, invertible=math.gcd(i, n) == 1)


def concat(s: SymbolSequence | str, t: SymbolSequence | str) -> SymbolSequence:
    return SymbolSequence(as_sequence(s).word + as_sequence(t).word)


def power(s: SymbolSequence | str, k: int) -> SymbolSequence:
    if k < 1:
        raise ValueError(f"power requires k >= 1, got {k}")
    return SymbolSequence(as_sequence(s).word * k)


def is_primitive(s: SymbolSequence | str) -> bool:
    """True iff no nontrivial cyclic permutation fixes the word."""
    w = as_sequence(s).word
    return all(w != w[i:] + w[:i] for i in range(1, len(w)))


def cyclic_equal(s: SymbolSequence | str, t: SymbolSequence | str) -> bool:
    """True iff t is some cyclic permutation of s."""
    s, t = as_sequence(s), as_sequence(t)
    return len(s) == len(t) and t.word in (s.word + s.word)


def canonical_rotation(s: SymbolSequence | str) -> SymbolSequence:
    """Lexicographically smallest cyclic permutation (class representative)."""
    w = as_sequence(s).word
    return SymbolSequence(min(w[i:] + w[:i] for i in range(len(w))))


def mod_inverse(m: int, n: int) -> int:
    """The unique d in [1, n-1] with d*m = 1 (mod n).

    >>> mod_inverse(2, 7)
    4
    """
    if not 0 < m < n:
        raise ValueError(f"need 0 < m < n, got m={m}, n={n}")
    if math.gcd(m, n) != 1:
        raise NotCoprimeError(f"gcd({m}, {n}) = {math.gcd(m, n)} != 1")
    return pow(m, -1, n)


@dataclass(frozen=True)
class RotationalParams:
    """Parameters (l, m, n) of a rotational sequence plus d = m^-1 mod n."""

    l: int
    m: int
    n: int
    d: int

    def __post_init__(self):
        if not 1 <= self.l <= self.n - 1:
            raise LeftCountError(f"l={self.l} outside [1, {self.n - 1}]")
        if math.gcd(self.m, self.n) != 1:
            raise NotCoprimeError(f"gcd({self.m}, {self.n}) != 1")
        if (self.d * self.m) % self.n != 1 % self.n:
            raise ValueError(f"d={self.d} is not the inverse of m={self.m} mod {self.n}")

    @classmethod
    def make(cls, l: int, m: int, n: int) -> "RotationalParams":
        return cls(l, m, n, mod_inverse(m, n))

    @property
    def rotation_number(self) -> str:
        return f"{self.m}/{self.n}"


def rotational(l: int, m: int, n: int) -> SymbolSequence:
    """The length-n word with L exactly at indices i*d (mod n), i = 0..l-1.

    Here d is the multiplicative inverse of m mod n, so the word is the
    itinerary of a rigid rotation by m/n with l points left of the
    switching manifold.

    >>> str(rotational(3, 2, 7))
    'LLRRLRR'
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got n={n}")
    if not 1 <= l <= n - 1:
        raise LeftCountError(f"l={l} outside [1, {n - 1}]")
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    d = mod_inverse(m, n)
    out = ["R"] * n
    for i in range(l):
        out[(i * d) % n] = "L"
    return SymbolSequence("".join(out))


def rotational_params(s: SymbolSequence | str) -> RotationalParams | None:
    """Recover (l, m, n, d) if s is cyclically equal to some rotational word.

    Returns the canonical representative with m < n/2 (for n > 2);
    m and n - m generate cyclically equal words so only one is reported.
    Length-1 words are not considered rotational.  Returns None for
    non-rotational input.
    """
    s = as_sequence(s)
    n = len(s)
    l = s.count("L")
    if n < 2 or l == 0 or l == n:
        return None
    if n == 2:
        return RotationalParams(1, 1, 2, 1)
    for m in range(1, (n + 1) // 2):
        if math.gcd(m, n) != 1:
            continue
        if cyclic_equal(rotational(l, m, n), s):
            return RotationalParams(l, m, n, mod_inverse(m, n))
    return None


def _factorize(n: int) -> dict[int, int]:
    factors: dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            factors[p] = factors.get(p, 0) + 1
            n //= p
        p += 1
    if n > 1:
        factors[n] = factors.get(n, 0) + 1
    return factors


def mobius(n: int) -> int:
    """Mobius function: 0 if n has a squared prime factor, else (-1)^#primes."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if n == 1:
        return 1
    factors = _factorize(n)
    if any(e > 1 for e in factors.values()):
        return 0
    return -1 if len(factors) % 2 else 1


def totient(n: int) -> int:
    """Euler totient: count of 1 <= k <= n coprime to n (totient(1) = 1)."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    result = n
    for p in _factorize(n):
        result -= result // p
    return result


def _divisors(n: int) -> list[int]:
    divs = [d for d in range(1, n + 1) if n % d == 0]
    return divs


def count_primitive(n: int) -> int:
    """Number of primitive length-n binary words up to cyclic permutation.

    >>> [count_primitive(k) for k in (1, 7, 12)]
    [2, 18, 335]
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    total = sum(mobius(n // a) * 2**a for a in _divisors(n))
    assert total % n == 0
    return total // n


def count_rotational(n: int) -> int:
    """Number of distinct rotational words of length n up to cyclic permutation.

    n = 1 and n = 2 are special cases (0 and 1); for n >= 3 the count is
    2 + (n - 3) * totient(n) / 2.

    >>> [count_rotational(k) for k in (1, 2, 7, 12)]
    [0, 1, 14, 20]
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if n == 1:
        return 0
    if n == 2:
        return 1
    prod = (n - 3) * totient(n)
    assert prod % 2 == 0
    return 2 + prod // 2
