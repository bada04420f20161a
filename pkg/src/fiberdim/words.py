"""Symbolic words over positive-digit alphabets and the base coordinate maps.

Points of the coding spaces are handled through finite prefixes: a digit word
is a tuple of integers >= 1 and a pair word is a tuple of (m, n) digit pairs,
ordered lexicographically by m then n.  The base dynamics is the family of
decreasing contractions x -> 1/(x + d) on [0, 1]; composing a digit word
inside out yields the cylinder image of [0, 1].

Cylinder enclosures are computed with exact rational endpoints (stdlib
fractions), because depth-30 cylinders are far narrower than one double
spacing and float endpoints would collapse them.  Digit extraction likewise
runs on exact rationals; a float Gauss iteration loses the word after roughly
a dozen steps.  Float fast paths for bulk numerics live in
:func:`cf_value_float`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (DomainError, EnumerationCapExceeded, InvalidWord,
                     RationalTermination)

#: Gauss iterates below this are treated as exactly rational.
RATIONAL_EPS = Fraction(1, 10**12)

#: Hard cap on enumerated pair words.
ENUMERATION_CAP = 10_000_000


# ---------------------------------------------------------------------------
# word validation and alphabets

def check_digit(d) -> int:
    if not isinstance(d, (int, np.integer)) or isinstance(d, bool) or d < 1:
        raise InvalidWord(f"digit must be an integer >= 1, got {d!r}")
    return int(d)


def check_digit_word(word) -> tuple[int, ...]:
    return tuple(check_digit(d) for d in word)


def check_pair_symbol(sym) -> tuple[int, int]:
    try:
        m, n = sym
    except (TypeError, ValueError):
        raise InvalidWord(f"pair symbol must be a (m, n) pair, got {sym!r}")
    return (check_digit(m), check_digit(n))


def check_pair_word(word) -> tuple[tuple[int, int], ...]:
    return tuple(check_pair_symbol(s) for s in word)


def check_max_digit(max_digit) -> int:
    if not isinstance(max_digit, (int, np.integer)) or max_digit < 1:
        raise InvalidWord(f"digit truncation must be an integer >= 1, got {max_digit!r}")
    return int(max_digit)


def pair_alphabet(max_digit: int) -> tuple[tuple[int, int], ...]:
    """All (m, n) pairs with digits <= max_digit, lexicographic by m then n."""
    M = check_max_digit(max_digit)
    return tuple((m, n) for m in range(1, M + 1) for n in range(1, M + 1))


def split_pair_word(word):
    """Component digit words (first coordinates, second coordinates)."""
    w = check_pair_word(word)
    return tuple(s[0] for s in w), tuple(s[1] for s in w)


def pair_word_count(max_digit: int, depth: int) -> int:
    return (check_max_digit(max_digit) ** 2) ** depth


def enumerate_pair_words(max_digit: int, depth: int, cap: int = ENUMERATION_CAP):
    """Iterate all pair words of the given depth in lexicographic order.

    Raises EnumerationCapExceeded before yielding anything if the total count
    (max_digit^2)^depth exceeds ``cap``.
    """
    if depth < 0:
        raise InvalidWord("depth must be >= 0")
    total = pair_word_count(max_digit, depth)
    if total > cap:
        raise EnumerationCapExceeded(
            f"{total} pair words at depth {depth} exceed cap {cap}")
    return itertools.product(pair_alphabet(max_digit), repeat=depth)


# ---------------------------------------------------------------------------
# exact interval enclosures

@dataclass(frozen=True)
class Interval:
    """Closed interval with exact rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def width_float(self) -> float:
        return float(self.hi - self.lo)

    @property
    def mid(self) -> float:
        return float((self.lo + self.hi) / 2)

    @property
    def mid_exact(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        x = Fraction(x)
        return self.lo <= x <= self.hi

    def subset_of(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def overlaps_interior(self, other: "Interval") -> bool:
        return max(self.lo, other.lo) < min(self.hi, other.hi)


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in the plane, exact rational edges."""

    re: Interval
    im: Interval

    @property
    def mid(self) -> complex:
        return complex(self.re.mid, self.im.mid)

    @property
    def width_float(self) -> float:
        return max(self.re.width_float, self.im.width_float)

    def contains(self, z: complex) -> bool:
        return self.re.contains(z.real) and self.im.contains(z.imag)


# ---------------------------------------------------------------------------
# base contraction family

def cf_map(digit: int, x) -> float:
    """One branch of the base family, x -> 1/(x + digit) on [0, 1)."""
    d = check_digit(digit)
    if isinstance(x, Fraction):
        if not (0 <= x < 1):
            raise DomainError(f"argument {x} outside [0, 1)")
        return 1 / (x + d)
    xf = float(x)
    if not (0.0 <= xf < 1.0):
        raise DomainError(f"argument {xf} outside [0, 1)")
    return 1.0 / (xf + d)


def cf_map_derivative_mod(digit: int, x) -> float:
    """Modulus of the branch derivative, 1/(x + digit)^2."""
    d = check_digit(digit)
    if isinstance(x, Fraction):
        if not (0 <= x < 1):
            raise DomainError(f"argument {x} outside [0, 1)")
        return 1 / (x + d) ** 2
    xf = float(x)
    if not (0.0 <= xf < 1.0):
        raise DomainError(f"argument {xf} outside [0, 1)")
    return 1.0 / (xf + d) ** 2


def orbit_derivative_product(word, x0: float = 0.0):
    """Chain-rule product of branch derivative moduli along a composition.

    The word is applied inside out to ``x0``; returns (product, final point).
    Used to compare cylinder widths against contraction products.
    """
    w = check_digit_word(word)
    y = float(x0)
    prod = 1.0
    for d in reversed(w):
        prod *= cf_map_derivative_mod(d, y)
        y = cf_map(d, y)
    return prod, y


def rho0_value(word) -> Interval:
    """Exact image of [0, 1] under the digit word's branch composition.

    The empty word returns [0, 1].  Endpoints are exact rationals; the
    enclosure width is bounded by the product of per-step derivative sups.
    """
    w = check_digit_word(word)
    lo, hi = Fraction(0), Fraction(1)
    for d in reversed(w):
        # each branch is decreasing, so the image endpoints swap
        lo, hi = 1 / (hi + d), 1 / (lo + d)
    return Interval(lo, hi)


def rho0_digits(x, depth: int) -> tuple[int, ...]:
    """First ``depth`` digits of the continued-fraction expansion of x.

    Runs exact rational Gauss steps on the input (floats are taken at their
    exact binary value).  Raises RationalTermination, carrying the digits
    found so far, when an iterate drops below RATIONAL_EPS.
    """
    if depth < 1:
        raise InvalidWord("depth must be >= 1")
    r = Fraction(x)
    if not (0 < r < 1):
        raise DomainError(f"argument {float(r)} outside (0, 1)")
    digits = []
    for _ in range(depth):
        inv = 1 / r
        d = inv.numerator // inv.denominator
        digits.append(int(d))
        r = inv - d
        if r < RATIONAL_EPS:
            raise RationalTermination(digits)
    return tuple(digits)


def pi_tilde(word) -> Box:
    """Enclosure of the paired continued-fraction point over a pair cylinder.

    The first coordinate is m0 + 1/(m1 + 1/(...)) with the unknown tail
    ranging over [0, 1]; same for the second coordinate.  A length-1 word
    therefore gives the unit box anchored at its digits.
    """
    w = check_pair_word(word)
    if not w:
        raise InvalidWord("pair word must be nonempty")
    m_digits, n_digits = split_pair_word(w)
    tail_m = rho0_value(m_digits[1:])
    tail_n = rho0_value(n_digits[1:])
    return Box(
        Interval(m_digits[0] + tail_m.lo, m_digits[0] + tail_m.hi),
        Interval(n_digits[0] + tail_n.lo, n_digits[0] + tail_n.hi),
    )


def cf_value_float(digits: np.ndarray, tail: float = 0.5) -> np.ndarray:
    """Vectorised float evaluation of continued fractions with a fixed tail.

    ``digits[..., i]`` is the i-th digit; the returned value lies inside the
    cylinder of the digit word whenever ``tail`` is in [0, 1].
    """
    digits = np.asarray(digits)
    if digits.ndim == 0:
        raise InvalidWord("digits must have a word axis")
    x = np.full(digits.shape[:-1], float(tail))
    for i in range(digits.shape[-1] - 1, -1, -1):
        x = 1.0 / (digits[..., i] + x)
    return x


# ---------------------------------------------------------------------------
# induced uniformly-contracting composites

@dataclass(frozen=True)
class ComposedMap:
    """A branch composition with a certified derivative supremum on [0, 1].

    ``kind`` records how the composite was formed: ``outer_power`` is the
    unit branch applied k times after branch j, ``inner_power`` applies the
    unit branch k times first.
    """

    digits: tuple[int, ...]
    kind: str
    power: int
    branch: int
    derivative_sup: float
    contraction_ok: bool

    def __call__(self, x) -> float:
        y = x
        for d in reversed(self.digits):
            y = cf_map(d, y)
        return y

    def derivative_mod(self, x) -> float:
        prod, _ = orbit_derivative_product(self.digits, x)
        return prod


def certify_derivative_sup(word, subdivisions: int = 256) -> Fraction:
    """Exact upper bound for the composite derivative modulus on [0, 1].

    Splits [0, 1] into equal cells and propagates interval images through the
    branches; each branch derivative 1/(x+d)^2 is decreasing, so its cell
    supremum sits at the left endpoint.  All arithmetic is rational, so the
    bound is rigorous.
    """
    w = check_digit_word(word)
    if not w:
        raise InvalidWord("word must be nonempty")
    best = Fraction(0)
    n = int(subdivisions)
    for i in range(n):
        lo, hi = Fraction(i, n), Fraction(i + 1, n)
        bound = Fraction(1)
        for d in reversed(w):
            bound *= Fraction(1, 1) / (lo + d) ** 2
            lo, hi = 1 / (hi + d), 1 / (lo + d)
        if bound > best:
            best = bound
    return best


def induced_ifs_maps(max_digit: int, k_max: int,
                     subdivisions: int = 256) -> list[ComposedMap]:
    """Unit-branch/other-branch composites with certified uniform contraction.

    Returns 2 * (k_max + 1) * (max_digit - 1) composites: for every power
    k in 0..k_max and branch j in 2..max_digit, both orderings of "k unit
    branches and one branch j".  The k = 0 entries of the two families
    coincide as maps but are listed separately.
    """
    M = check_max_digit(max_digit)
    if k_max < 0:
        raise InvalidWord("k_max must be >= 0")
    maps = []
    for k in range(k_max + 1):
        for j in range(2, M + 1):
            for kind, digits in (
                ("outer_power", (1,) * k + (j,)),
                ("inner_power", (j,) + (1,) * k),
            ):
                sup = certify_derivative_sup(digits, subdivisions)
                maps.append(ComposedMap(
                    digits=digits, kind=kind, power=k, branch=j,
                    derivative_sup=float(sup), contraction_ok=sup < 1))
    return maps
