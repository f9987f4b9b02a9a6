"""Exact p-adic and root-of-unity arithmetic.

Everything here is a pure function of immutable values. Sums of p^L-th
roots of unity are kept as integer counts per exponent residue
(:class:`CyclotomicTally`); floats only appear in :func:`tally_magnitude`.
"""
import enum
import hashlib
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import factorint, isprime, mod_inverse
from sympy.ntheory import multiplicity
from sympy.ntheory.modular import solve_congruence

from .exceptions import InvalidInput, NotInvertible

logger = logging.getLogger("klsp4.padic")

# Moduli must stay below 2**63; larger cells are rejected.
MAX_MODULUS = 2 ** 63

INFINITE_VALUATION = math.inf


class Unsolvable(enum.Enum):
    NO_SOLUTION = "NoSolution"

    def __bool__(self) -> bool:
        return False

    def __repr__(self) -> str:
        return "NoSolution"


NoSolution = Unsolvable.NO_SOLUTION


@lru_cache(maxsize=256)
def check_prime(p: int) -> int:
    """Return ``p`` unchanged, raising InvalidInput unless it is prime."""
    if not isinstance(p, int) or isinstance(p, bool) or not isprime(p):
        raise InvalidInput(f"{p!r} is not a prime")
    return p


@dataclass(frozen=True, slots=True)
class PrimePower:
    p: int
    k: int

    def __post_init__(self):
        check_prime(self.p)
        if self.k < 0:
            raise InvalidInput(f"exponent must be non-negative, got {self.k}")
        if self.p ** self.k >= MAX_MODULUS:
            raise InvalidInput(f"modulus {self.p}^{self.k} exceeds 2^63")

    @property
    def value(self) -> int:
        return self.p ** self.k

    def __repr__(self) -> str:
        return f"{self.p}^{self.k}"


@dataclass(frozen=True, slots=True)
class Residue:
    value: int
    modulus: PrimePower

    def __post_init__(self):
        object.__setattr__(self, "value", int(self.value) % self.modulus.value)

    def _coerce(self, other: Union["Residue", int]) -> int:
        if isinstance(other, Residue):
            if other.modulus != self.modulus:
                raise InvalidInput(f"modulus mismatch: {self.modulus} vs {other.modulus}")
            return other.value
        return other

    def __add__(self, other):
        return Residue(self.value + self._coerce(other), self.modulus)

    def __sub__(self, other):
        return Residue(self.value - self._coerce(other), self.modulus)

    def __mul__(self, other):
        return Residue(self.value * self._coerce(other), self.modulus)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return Residue(-self.value, self.modulus)

    @property
    def is_unit(self) -> bool:
        return self.modulus.k == 0 or self.value % self.modulus.p != 0

    def __repr__(self) -> str:
        return f"{self.value} mod {self.modulus!r}"


@dataclass(frozen=True, slots=True)
class FractionModOne:
    """numerator / p^level taken mod 1, always stored in lowest terms."""
    numerator: int
    level: int
    p: int

    def __post_init__(self):
        level = int(self.level)
        numerator = int(self.numerator) % (self.p ** level)
        while level > 0 and numerator % self.p == 0:
            numerator //= self.p
            level -= 1
        if numerator == 0:
            level = 0
        object.__setattr__(self, "numerator", numerator)
        object.__setattr__(self, "level", level)

    @classmethod
    def zero(cls, p: int) -> "FractionModOne":
        return cls(0, 0, p)

    @classmethod
    def from_fraction(cls, x: Fraction, p: int) -> "FractionModOne":
        """The p-adic fractional part of a rational number."""
        x = Fraction(x)
        e = int(multiplicity(p, x.denominator))
        if e == 0:
            return cls.zero(p)
        modulus = p ** e
        cofactor = x.denominator // modulus
        return cls(x.numerator * inverse_mod(cofactor, modulus), e, p)

    def lifted(self, level: int) -> int:
        """Numerator of the same value written over p^level."""
        if level < self.level:
            raise InvalidInput(f"cannot write level {self.level} phase at level {level}")
        return self.numerator * self.p ** (level - self.level)

    def __add__(self, other: "FractionModOne") -> "FractionModOne":
        if other.p != self.p:
            raise InvalidInput(f"prime mismatch: {self.p} vs {other.p}")
        level = max(self.level, other.level)
        return FractionModOne(self.lifted(level) + other.lifted(level), level, self.p)

    def scaled(self, k: int) -> "FractionModOne":
        return FractionModOne(self.numerator * k, self.level, self.p)

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, self.p ** self.level)

    def is_zero(self) -> bool:
        return self.numerator == 0

    def __repr__(self) -> str:
        return f"e({self.numerator}/{self.p}^{self.level})"


def is_p_integral(x: Fraction, p: int) -> bool:
    return Fraction(x).denominator % p != 0


def p_integral_part(x: Fraction, p: int) -> Fraction:
    """x minus its p-adic fractional part; lies in Z_p."""
    return Fraction(x) - FractionModOne.from_fraction(x, p).as_fraction()


def valuation(n: int, p: int) -> Union[int, float]:
    """p-adic valuation of a nonzero integer.

    Args:
        n (int): The integer.
        p (int): A prime.

    Returns:
        The largest v with p^v | n, or INFINITE_VALUATION when n == 0.
    """
    check_prime(p)
    if n == 0:
        return INFINITE_VALUATION
    return int(multiplicity(p, abs(n)))


def unit_part(n: int, p: int) -> int:
    if n == 0:
        raise InvalidInput("0 has no unit part")
    return n // p ** valuation(n, p)


def units(p: int, k: int) -> List[int]:
    """Unit representatives mod p^k; for k == 0 the single class is represented by 1."""
    return [x for x in range(1, p ** k + 1) if x % p]


def inverse_mod(x: int, q: int) -> int:
    """x^-1 mod q as a Python int (sympy may return gmpy2 integers); 0 when q == 1."""
    return int(mod_inverse(x, q)) if q > 1 else 0


def as_prime_power(q: Union[PrimePower, int]) -> PrimePower:
    """Accept p^k either as a PrimePower or as the integer it equals.

    Raises:
        InvalidInput: For 1, composite moduli and non-integers; tallies only carry p-power conductors.
    """
    if isinstance(q, PrimePower):
        return q
    if isinstance(q, bool) or not isinstance(q, int) or q < 2:
        raise InvalidInput(f"modulus must be a prime power p^k with k >= 1, got {q!r}")
    factors = factorint(q)
    if len(factors) != 1:
        raise InvalidInput(f"{q} is not a prime power")
    ((p, k),) = factors.items()
    return PrimePower(int(p), int(k))


def inv_mod(a: Residue) -> Residue:
    if not a.is_unit:
        raise NotInvertible(f"{a!r} is not invertible")
    if a.modulus.k == 0:
        return Residue(0, a.modulus)
    return Residue(inverse_mod(a.value, a.modulus.value), a.modulus)


@dataclass(frozen=True, slots=True)
class LinearSolution:
    """All x ≡ x0 (mod period)."""
    x0: int
    period: int

    def solutions(self, modulus: int) -> List[int]:
        return list(range(self.x0, modulus, self.period))


def solve_scaled_linear(a: Residue, b: Residue) -> Union[LinearSolution, Unsolvable]:
    """Solve a·x ≡ b modulo the shared prime power.

    Args:
        a (Residue): Coefficient.
        b (Residue): Right-hand side, same modulus as ``a``.

    Returns:
        LinearSolution(x0, p^(k - v)) with v = ord_p(a), or NoSolution when p^v does not divide b.
    """
    if a.modulus != b.modulus:
        raise InvalidInput(f"modulus mismatch: {a.modulus} vs {b.modulus}")
    modulus = a.modulus
    if a.value == 0:
        return LinearSolution(0, 1) if b.value == 0 else NoSolution
    v = valuation(a.value, modulus.p)
    if b.value % modulus.p ** v:
        return NoSolution
    period = modulus.p ** (modulus.k - v)
    if period == 1:
        return LinearSolution(0, 1)
    x0 = (b.value // modulus.p ** v) * inverse_mod(a.value // modulus.p ** v, period) % period
    return LinearSolution(x0, period)


def solve_directed_system(
    eqs: Sequence[Tuple[int, int]], modulus: PrimePower
) -> Union[Residue, Unsolvable]:
    """Smallest nonnegative x with a_i·x ≡ b_i (mod p^k) for every pair, or NoSolution."""
    if not eqs:
        raise InvalidInput("solve_directed_system needs at least one equation")
    progressions = []
    for a, b in eqs:
        sol = solve_scaled_linear(Residue(a, modulus), Residue(b, modulus))
        if sol is NoSolution:
            return NoSolution
        if sol.period > 1:
            progressions.append((sol.x0, sol.period))
    if not progressions:
        return Residue(0, modulus)
    combined = solve_congruence(*progressions)
    if combined is None:
        return NoSolution
    x, period = combined
    return Residue(int(x) % int(period), modulus)


# ── Cyclotomic tallies ──────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class CyclotomicTally:
    """Σ_t counts[t]·e(t/p^level) with integer counts."""
    p: int
    level: int
    counts: Mapping[int, int] = field(default_factory=dict)

    @classmethod
    def integer(cls, value: int, p: int) -> "CyclotomicTally":
        return cls(p, 0, {0: value} if value else {})

    @classmethod
    def from_counter(cls, p: int, level: int, counter: Mapping[int, int]) -> "CyclotomicTally":
        return cls(p, level, {t: c for t, c in counter.items() if c}).canonical()

    def lift(self, level: int) -> "CyclotomicTally":
        if level < self.level:
            raise InvalidInput(f"cannot lower tally level {self.level} to {level}")
        factor = self.p ** (level - self.level)
        return CyclotomicTally(self.p, level, {t * factor: c for t, c in self.counts.items()})

    def canonical(self) -> "CyclotomicTally":
        """Normal form in the integral basis {e(t/p^L) : t < (p-1)·p^(L-1)}, at minimal level.

        Each orbit {b + j·p^(L-1)} sums to zero, so the count on its top
        member is subtracted from every member.
        """
        counts = {int(t): int(c) for t, c in self.counts.items() if c}
        level = self.level
        while level > 0:
            step = self.p ** (level - 1)
            top = (self.p - 1) * step
            for t in [t for t in counts if t >= top]:
                c = counts.pop(t)
                for j in range(self.p - 1):
                    member = t - top + j * step
                    counts[member] = counts.get(member, 0) - c
            counts = {t: c for t, c in counts.items() if c}
            if any(t % self.p for t in counts):
                break
            counts = {t // self.p: c for t, c in counts.items()}
            level -= 1
        return CyclotomicTally(self.p, level, dict(sorted(counts.items())))

    def is_zero(self) -> bool:
        return not self.canonical().counts

    def as_integer(self) -> Optional[int]:
        """The represented value when it is a rational integer, else None."""
        reduced = self.canonical()
        if reduced.level == 0:
            return reduced.counts.get(0, 0)
        return None

    def __repr__(self) -> str:
        return f"CyclotomicTally(p={self.p}, level={self.level}, counts={dict(self.counts)})"


def _phase_residue(t: CyclotomicTally, phase: FractionModOne) -> Tuple[CyclotomicTally, int]:
    if phase.p != t.p:
        raise InvalidInput(f"prime mismatch: tally over {t.p}, phase over {phase.p}")
    if phase.level > t.level:
        t = t.lift(phase.level)
    return t, phase.lifted(t.level)


def tally_add_term(t: CyclotomicTally, phase: FractionModOne, weight: int = 1) -> CyclotomicTally:
    t, residue = _phase_residue(t, phase)
    counts = dict(t.counts)
    counts[residue] = counts.get(residue, 0) + weight
    return CyclotomicTally(t.p, t.level, counts)


def tally_magnitude(t: CyclotomicTally) -> float:
    """|Σ c_t e(t/p^L)| in double precision; absolute error ≤ 1e-9·Σ|c_t|."""
    if not t.counts:
        return 0.0
    residues = np.fromiter(t.counts.keys(), dtype=np.float64)
    weights = np.fromiter(t.counts.values(), dtype=np.float64)
    angles = 2.0 * np.pi * residues / float(t.p ** t.level)
    return float(abs(np.sum(weights * np.exp(1j * angles))))


def _check_same_prime(a: CyclotomicTally, b: CyclotomicTally) -> Tuple[CyclotomicTally, CyclotomicTally]:
    a, b = a.canonical(), b.canonical()
    if a.p != b.p:
        if a.level == 0 and b.level == 0:
            return a, CyclotomicTally(a.p, 0, b.counts)
        raise InvalidInput(f"prime mismatch: {a.p} vs {b.p}")
    return a, b


def tally_equal(a: CyclotomicTally, b: CyclotomicTally) -> bool:
    a, b = _check_same_prime(a, b)
    return a.level == b.level and dict(a.counts) == dict(b.counts)


def tally_scale(t: CyclotomicTally, k: int) -> CyclotomicTally:
    return CyclotomicTally(t.p, t.level, {r: c * k for r, c in t.counts.items() if c * k})


def tally_sum(tallies: Iterable[CyclotomicTally], p: int) -> CyclotomicTally:
    tallies = list(tallies)
    level = max((t.level for t in tallies), default=0)
    total: Counter = Counter()
    for t in tallies:
        if t.p != p and t.level > 0:
            raise InvalidInput(f"prime mismatch: {t.p} vs {p}")
        factor = p ** (level - t.level)
        for r, c in t.counts.items():
            total[r * factor] += c
    return CyclotomicTally.from_counter(p, level, total)


def tally_multiply(a: CyclotomicTally, b: CyclotomicTally) -> CyclotomicTally:
    a, b = _check_same_prime(a, b)
    level = max(a.level, b.level)
    a, b = a.lift(level), b.lift(level)
    modulus = a.p ** level
    product: Counter = Counter()
    for ra, ca in a.counts.items():
        for rb, cb in b.counts.items():
            product[(ra + rb) % modulus] += ca * cb
    return CyclotomicTally.from_counter(a.p, level, product)


def tally_divide_exact(t: CyclotomicTally, d: int) -> Optional[CyclotomicTally]:
    """t / d when every canonical count is divisible by d, otherwise None."""
    reduced = t.canonical()
    if any(c % d for c in reduced.counts.values()):
        return None
    return CyclotomicTally(reduced.p, reduced.level, {r: c // d for r, c in reduced.counts.items()})


def tally_digest(t: CyclotomicTally) -> str:
    reduced = t.canonical()
    payload = json.dumps(
        {"p": reduced.p if reduced.level else 0, "level": reduced.level,
         "counts": [[int(r), int(c)] for r, c in reduced.counts.items()]},
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class TallyBuilder:
    """Mutable accumulator for one tally at a fixed level."""

    def __init__(self, p: int, level: int):
        self.p = p
        self.level = level
        self.modulus = p ** level
        self.counter: Counter = Counter()
        self.terms = 0

    def scale_for(self, k: int) -> int:
        """Factor that writes a numerator over p^k at this builder's level."""
        return self.p ** (self.level - k)

    def add_residue(self, residue: int, weight: int = 1) -> None:
        self.counter[residue % self.modulus] += weight
        self.terms += 1

    def add(self, phase: FractionModOne, weight: int = 1) -> None:
        if phase.p != self.p:
            raise InvalidInput(f"prime mismatch: builder over {self.p}, phase over {phase.p}")
        self.add_residue(phase.lifted(self.level), weight)

    def build(self) -> CyclotomicTally:
        return CyclotomicTally.from_counter(self.p, self.level, self.counter)
