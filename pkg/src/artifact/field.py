"""Arithmetic in GF(q) with q = 2^61 - 1.

Field elements are plain Python ints held in canonical form ``0 <= x < q``.
Reduction modulo a Mersenne prime needs only shifts, masks and additions:
``x mod q == (x & q) + (x >> 61)`` up to one final subtraction.
"""

from __future__ import annotations

import random

Q = (1 << 61) - 1
BITS = 61
ELEMENT_BYTES = 8


def reduce(x: int) -> int:
    """Reduce a non-negative integer below 2^122 into [0, q)."""
    x = (x & Q) + (x >> BITS)
    x = (x & Q) + (x >> BITS)
    if x >= Q:
        x -= Q
    return x


def add(a: int, b: int) -> int:
    s = a + b
    return s - Q if s >= Q else s


def sub(a: int, b: int) -> int:
    return a - b if a >= b else a + Q - b


def neg(a: int) -> int:
    return Q - a if a else 0


def mul(a: int, b: int) -> int:
    """(a*b) mod q via the double-width product and two Mersenne folds."""
    return reduce(a * b)


def power(a: int, e: int) -> int:
    """a^e by square-and-multiply (e >= 0)."""
    result = 1
    base = a
    while e:
        if e & 1:
            result = mul(result, base)
        base = mul(base, base)
        e >>= 1
    return result


def inv(a: int) -> int:
    """Multiplicative inverse a^(q-2) (Fermat)."""
    if a % Q == 0:
        raise ZeroDivisionError("no inverse of zero")
    return pow(a % Q, Q - 2, Q)


def encode_signed(d: int) -> int:
    """Map a signed integer with |d| < q to its field representative."""
    if not -Q < d < Q:
        raise ValueError(f"|{d}| >= q cannot be encoded")
    return d + Q if d < 0 else d


def decode_signed(x: int) -> int:
    """Inverse of encode_signed for values in the lower/upper half of the field."""
    return x - Q if x > Q // 2 else x


def random_element(rng: random.Random) -> int:
    """Uniform element of [0, q) by rejection sampling on 61-bit draws."""
    while True:
        x = rng.getrandbits(BITS)
        if x < Q:
            return x


def random_nonzero(rng: random.Random) -> int:
    """Uniform element of [1, q)."""
    while True:
        x = rng.getrandbits(BITS)
        if 0 < x < Q:
            return x


def is_canonical(x) -> bool:
    return isinstance(x, int) and 0 <= x < Q


def to_bytes(a: int) -> bytes:
    return a.to_bytes(ELEMENT_BYTES, "little")


def from_bytes(data: bytes) -> int:
    """Parse one canonical element; non-canonical encodings raise ValueError."""
    if len(data) != ELEMENT_BYTES:
        raise ValueError("field element must be 8 bytes")
    x = int.from_bytes(data, "little")
    if x >= Q:
        raise ValueError("non-canonical field element")
    return x


def interpolate_at(evals, r: int) -> int:
    """Evaluate the polynomial given by values at 0..len(evals)-1 at the point r.

    Standard Lagrange interpolation over the nodes {0, 1, ..., deg}; the
    denominators are small factorials so the whole thing is O(deg^2).
    """
    n = len(evals)
    if n == 0:
        return 0
    if r < n:
        return evals[r] % Q
    # prefix/suffix products of (r - j)
    pre = [1] * (n + 1)
    for j in range(n):
        pre[j + 1] = mul(pre[j], sub(r, j))
    suf = [1] * (n + 1)
    for j in range(n - 1, -1, -1):
        suf[j] = mul(suf[j + 1], sub(r, j))
    dens = _inverse_denominators(n)
    total = 0
    for i in range(n):
        term = mul(mul(evals[i], mul(pre[i], suf[i + 1])), dens[i])
        total = add(total, term)
    return total


_DEN_CACHE: dict[int, list[int]] = {}


def _inverse_denominators(n: int) -> list[int]:
    """1 / prod_{j != i}(i - j) for the nodes 0..n-1, cached per n."""
    dens = _DEN_CACHE.get(n)
    if dens is None:
        dens = []
        for i in range(n):
            den = mul(_fact(i), _fact(n - 1 - i))
            if (n - 1 - i) & 1:
                den = neg(den)
            dens.append(inv(den))
        _DEN_CACHE[n] = dens
    return dens


_FACT = [1]


def _fact(k: int) -> int:
    while len(_FACT) <= k:
        _FACT.append(mul(_FACT[-1], len(_FACT)))
    return _FACT[k]
