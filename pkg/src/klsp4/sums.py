"""Closed-form evaluators for the local Sp(4) Kloosterman sums, one per Weyl cell.

Each evaluator walks an explicit parametrization of X(n) = U(Z_p)\\U(Q_p)nU(Q_p)/U(Z_p)
∩ K and accumulates the phase of every representative into a
:class:`~klsp4.padic.CyclotomicTally` at level max(r, s).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple, Union

from sympy.ntheory import legendre_symbol

from .exceptions import InadmissibleCell, InvalidInput
from .padic import (
    CyclotomicTally,
    PrimePower,
    Residue,
    TallyBuilder,
    Unsolvable,
    NoSolution,
    as_prime_power,
    check_prime,
    inverse_mod,
    solve_directed_system,
    tally_magnitude,
    units,
)
from .structure import CellParams, CharacterPair, WeylWord

logger = logging.getLogger("klsp4.sums")


@dataclass(frozen=True, slots=True)
class HatSolution:
    """A dual coordinate together with the congruences that pin it down."""
    value: Residue
    constraints_used: Tuple[Tuple[int, int], ...]

    def satisfies_constraints(self) -> bool:
        q = self.value.modulus.value
        return all((a * self.value.value - b) % q == 0 for a, b in self.constraints_used)


@dataclass(frozen=True, slots=True)
class KloostermanValue:
    tally: CyclotomicTally
    term_count: int
    skipped_unsolvable: int = 0

    @property
    def magnitude(self) -> float:
        return tally_magnitude(self.tally)

    def as_dict(self) -> Dict:
        reduced = self.tally.canonical()
        return {
            "level": int(reduced.level),
            "counts": [[int(r), int(c)] for r, c in reduced.counts.items()],
            "magnitude": round(self.magnitude, 9),
            "term_count": self.term_count,
            "skipped_unsolvable": self.skipped_unsolvable,
        }


def solve_hat(eqs: Sequence[Tuple[int, int]], modulus: PrimePower) -> Union[HatSolution, Unsolvable]:
    solution = solve_directed_system(eqs, modulus)
    if solution is NoSolution:
        return NoSolution
    return HatSolution(value=solution, constraints_used=tuple(eqs))


# ── Classical sums ──────────────────────────────────────────────────


def gl2_kloosterman(m: int, n: int, modulus: Union[PrimePower, int]) -> CyclotomicTally:
    """S(m, n; p^k) = Σ_{x unit mod p^k} e((m·x + n·x̄)/p^k).

    ``modulus`` is a PrimePower or an integer prime power; composite moduli raise InvalidInput.
    """
    modulus = as_prime_power(modulus)
    q = modulus.value
    builder = TallyBuilder(modulus.p, modulus.k)
    for x in units(modulus.p, modulus.k):
        builder.add_residue(m * x + n * inverse_mod(x, q))
    return builder.build()


def ramanujan(modulus: Union[PrimePower, int], m: int) -> CyclotomicTally:
    """c_{p^k}(m) = Σ_{x unit mod p^k} e(m·x/p^k)."""
    modulus = as_prime_power(modulus)
    builder = TallyBuilder(modulus.p, modulus.k)
    for x in units(modulus.p, modulus.k):
        builder.add_residue(m * x)
    return builder.build()


def gauss_quadratic(a: int, modulus: Union[PrimePower, int]) -> CyclotomicTally:
    """g(a; p^k) = Σ_{x mod p^k} e(a·x²/p^k)."""
    modulus = as_prime_power(modulus)
    builder = TallyBuilder(modulus.p, modulus.k)
    for x in range(modulus.value):
        builder.add_residue(a * x * x)
    return builder.build()


# ── Cell evaluators ─────────────────────────────────────────────────


def _require_word(c: CellParams, *words: WeylWord) -> None:
    if c.w not in words:
        expected = ", ".join(w.value for w in words)
        raise InadmissibleCell(f"evaluator for {expected} called with {c.label}")


def kl_rank1(c: CellParams, ch: CharacterPair) -> KloostermanValue:
    """The cells id, sα and sβ, where the sum collapses to a GL(2) sum."""
    _require_word(c, WeylWord.ID, WeylWord.S_ALPHA, WeylWord.S_BETA)
    if c.w is WeylWord.ID:
        tally = CyclotomicTally.integer(1, c.p)
        return KloostermanValue(tally=tally, term_count=1)
    if c.w is WeylWord.S_ALPHA:
        modulus, m, n = PrimePower(c.p, c.r), ch.m1, ch.n1
    else:
        modulus, m, n = PrimePower(c.p, c.s), ch.m2, ch.n2
    tally = gl2_kloosterman(m, n, modulus)
    return KloostermanValue(tally=tally, term_count=len(units(modulus.p, modulus.k)))


def kl_ab(c: CellParams, ch: CharacterPair) -> KloostermanValue:
    """sαsβ: Σ_{v4 unit mod p^s} Σ_{v3 mod p^r, (v3, p^(r-s)) = 1} e(m1·v̄3/p^(r-s) + (m2·v̄4·v3² + n2·v4)/p^s)."""
    _require_word(c, WeylWord.S_ALPHA_S_BETA)
    p, r, s = c.p, c.r, c.s
    builder = TallyBuilder(p, max(r, s))
    R, S, D = p ** r, p ** s, p ** (r - s)
    scale_d, scale_s = builder.scale_for(r - s), builder.scale_for(s)
    for v4 in units(p, s):
        v4_inv = inverse_mod(v4, S)
        for v3 in range(R):
            if D > 1 and v3 % p == 0:
                continue
            builder.add_residue(
                ch.m1 * inverse_mod(v3, D) * scale_d + (ch.m2 * v4_inv * v3 * v3 + ch.n2 * v4) * scale_s
            )
    return KloostermanValue(tally=builder.build(), term_count=builder.terms)


def kl_ab_gauss(c: CellParams, ch: CharacterPair) -> KloostermanValue:
    """The r = s case of sαsβ written as Σ_{v4 unit} e(n2·v4/p^s)·g(m2·v̄4; p^s)."""
    _require_word(c, WeylWord.S_ALPHA_S_BETA)
    if c.r != c.s:
        raise InvalidInput(f"Gauss-sum form needs r = s, got {c.label}")
    modulus = PrimePower(c.p, c.s)
    q = modulus.value
    builder = TallyBuilder(c.p, c.s)
    for v4 in units(c.p, c.s):
        g = gauss_quadratic(ch.m2 * inverse_mod(v4, q), modulus).lift(c.s)
        for residue, count in g.counts.items():
            builder.add_residue(residue + ch.n2 * v4, count)
    return KloostermanValue(tally=builder.build(), term_count=q * len(units(c.p, c.s)))


def sasb_vanishes(c: CellParams, ch: CharacterPair) -> bool:
    """Whether the characters force the sαsβ sum to be 0.

    Two cases: s ≥ 2 with p | m2 and p ∤ n2 (the n2·v4 phase averages out
    over v4 mod p^(s-1)), or p odd with p ∤ m1·m2·n2 and s < r ≠ 2s.
    """
    _require_word(c, WeylWord.S_ALPHA_S_BETA)
    p, r, s = c.p, c.r, c.s
    if s >= 2 and ch.m2 % p == 0 and ch.n2 % p:
        return True
    return p != 2 and (ch.m1 * ch.m2 * ch.n2) % p != 0 and 1 <= s < r != 2 * s


def kl_ab_mixed(c: CellParams, ch: CharacterPair) -> KloostermanValue:
    """sαsβ at (r, s) = (2, 1) as a mixed character sum.

    Kl = p·Σ_{a, y mod p} e(a/p)·χ((a·y - m1)² - 4·m2·n2·y⁴) with χ the
    Legendre symbol mod p.

    Raises:
        InvalidInput: Unless (r, s) = (2, 1), p is odd and p ∤ m1·m2·n2.
    """
    _require_word(c, WeylWord.S_ALPHA_S_BETA)
    p = c.p
    if (c.r, c.s) != (2, 1) or p == 2 or (ch.m1 * ch.m2 * ch.n2) % p == 0:
        raise InvalidInput(f"mixed character form needs (r, s) = (2, 1), odd p and p ∤ m1·m2·n2, got {c.label}")
    builder = TallyBuilder(p, 1)
    for a in range(p):
        for y in range(p):
            chi = int(legendre_symbol(((a * y - ch.m1) ** 2 - 4 * ch.m2 * ch.n2 * y ** 4) % p, p))
            if chi:
                builder.add_residue(a, p * chi)
    return KloostermanValue(tally=builder.build(), term_count=p * p)


def kl_ba(c: CellParams, ch: CharacterPair) -> KloostermanValue:
    """sβsα: Σ_{v24 unit mod p^r} Σ_{v34 mod p^s, (v34, p^(s-2r)) = 1} e((m1·v̄24·v34 + n1·v24)/p^r + m2·v̄34/p^(s-2r))."""
    _require_word(c, WeylWord.S_BETA_S_ALPHA)
    p, r, s = c.p, c.r, c.s
    builder = TallyBuilder(p, max(r, s))
    R, S, D = p ** r, p ** s, p ** (s - 2 * r)
    scale_r, scale_d = builder.scale_for(r), builder.scale_for(s - 2 * r)
    for v24 in units(p, r):
        v24_inv = inverse_mod(v24, R)
        for v34 in range(S):
            if D > 1 and v34 % p == 0:
                continue
            builder.add_residue(
                (ch.m1 * v24_inv * v34 + ch.n1 * v24) * scale_r + ch.m2 * inverse_mod(v34, D) * scale_d
            )
    return KloostermanValue(tally=builder.build(), term_count=builder.terms)


def _aba_u(p: int, r: int, s: int, a: int, v2p: int, v3: int, v4: int) -> int:
    S = p ** s
    if 2 * a == s:
        v2p_inv = inverse_mod(v2p, S)
        return (-v2p_inv * v2p_inv * v3 * p ** r + v2p_inv * v4 * p ** (r - a)) % S
    v_prime = (p ** a * v3 + v2p * v4) // p ** (r + a - s)
    return v4 * v4 * inverse_mod(v_prime, S) % S


def kl_aba(c: CellParams, ch: CharacterPair, *, hat_offset: int = 0) -> KloostermanValue:
    """sαsβsα, summed over the strata s-r ≤ a ≤ s/2.

    Args:
        c (CellParams): A cell with w = sαsβsα and s ≤ 2r.
        ch (CharacterPair): The characters ψ and ψ'.
        hat_offset (int): Added to the right-hand side of the first v̂2
            congruence; only used to check that the verification harness
            notices a corrupted hat congruence.

    Returns:
        KloostermanValue: The exact tally together with its term count.
    """
    _require_word(c, WeylWord.S_ALPHA_S_BETA_S_ALPHA)
    p, r, s = c.p, c.r, c.s
    builder = TallyBuilder(p, max(r, s))
    R = p ** r
    modulus_r = PrimePower(p, r)
    scale_r, scale_s = builder.scale_for(r), builder.scale_for(s)
    skipped = 0
    for a in range(max(s - r, 0), s // 2 + 1):
        shift = p ** (r - a)
        stratum_gcd = p ** (r + a - s)
        for v2p in units(p, a):
            v2 = shift * v2p
            for v3 in range(R):
                for v4 in range(R):
                    if math.gcd(v3, v4, shift) != 1:
                        continue
                    if math.gcd(shift, p ** a * v3 + v2p * v4) != stratum_gcd:
                        continue
                    hat = solve_hat(
                        [(v3, -v2p * p ** (s - a) + hat_offset), (v4, p ** s), (v2, 0)], modulus_r
                    )
                    if hat is NoSolution:
                        skipped += 1
                        continue
                    u = _aba_u(p, r, s, a, v2p, v3, v4)
                    builder.add_residue(
                        (ch.m1 * hat.value.value + ch.n1 * v2) * scale_r
                        + ch.m2 * u * scale_s
                    )
    if skipped:
        logger.warning(f"{c.label}: {skipped} tuples with unsolvable v̂2 system")
    return KloostermanValue(tally=builder.build(), term_count=builder.terms, skipped_unsolvable=skipped)


def kl_bab(c: CellParams, ch: CharacterPair, *, hat_offset: int = 0) -> KloostermanValue:
    """sβsαsβ, summed over (v13, v14, v23) mod p^s with v34 = -(v13² + v14·v23)/p^s."""
    _require_word(c, WeylWord.S_BETA_S_ALPHA_S_BETA)
    p, r, s = c.p, c.r, c.s
    builder = TallyBuilder(p, max(r, s))
    S, D = p ** s, p ** (s - r)
    modulus_r, modulus_s = PrimePower(p, r), PrimePower(p, s)
    scale_r, scale_s = builder.scale_for(r), builder.scale_for(s)
    skipped = 0
    for v13 in range(S):
        for v14 in range(S):
            if math.gcd(S, v13, v14) != D:
                continue
            if (v13 * v13) % math.gcd(S, v14):
                continue
            v14_scaled = v14 * p ** (2 * r - s) if 2 * r >= s else v14 // p ** (s - 2 * r)
            for v23 in range(S):
                numerator = v13 * v13 + v14 * v23
                if numerator % S:
                    continue
                v34 = -numerator // S
                if math.gcd(D, v23, v34) != 1:
                    continue
                u = solve_hat([(v13 // D, v23), (v14 // D, -v13)], modulus_r)
                hat = solve_hat([(v23, -p ** (2 * r) + hat_offset), (v34, v14_scaled), (D, 0)], modulus_s)
                if u is NoSolution or hat is NoSolution:
                    skipped += 1
                    continue
                builder.add_residue(
                    ch.m1 * u.value.value * scale_r
                    + (ch.m2 * hat.value.value + ch.n2 * v14) * scale_s
                )
    if skipped:
        logger.warning(f"{c.label}: {skipped} tuples with unsolvable u or v̂14 system")
    return KloostermanValue(tally=builder.build(), term_count=builder.terms, skipped_unsolvable=skipped)


def kl_w0(c: CellParams, ch: CharacterPair, *, hat_offset: int = 0) -> KloostermanValue:
    """The long element.

    Enumerates (v2, v3) mod p^r and (v13, v14) mod p^s. v4 comes from
    p^r·v13 + v2·v14 = p^s·v4, then v23 and v34 from
    p^r·v23 = v2·v13 - v3·p^s and p^r·v34 = v3·v14 - v4·v13; tuples where
    any of these divisions is inexact do not occur in X(n).
    """
    _require_word(c, WeylWord.W0)
    p, r, s = c.p, c.r, c.s
    builder = TallyBuilder(p, max(r, s))
    R, S = p ** r, p ** s
    modulus_r, modulus_s = PrimePower(p, r), PrimePower(p, s)
    scale_r, scale_s = builder.scale_for(r), builder.scale_for(s)
    skipped = 0
    for v2 in range(R):
        for v3 in range(R):
            for v13 in range(S):
                for v14 in range(S):
                    numerator = R * v13 + v2 * v14
                    if numerator % S:
                        continue
                    v4 = numerator // S
                    t23, t34 = v2 * v13 - v3 * S, v3 * v14 - v4 * v13
                    if t23 % R or t34 % R:
                        continue
                    v23, v34 = t23 // R, t34 // R
                    if math.gcd(R, v2, v3, v4) != 1 or math.gcd(S, v13, v14, v23, v34) != 1:
                        continue
                    hat2 = solve_hat([(v2, S + hat_offset), (v3, v13), (v4, v14)], modulus_r)
                    hat14 = solve_hat(
                        [(v13, -v2 * R), (v14, R * R), (v23, -v2 * v2), (v34, v3 * R + v2 * v4)],
                        modulus_s,
                    )
                    if hat2 is NoSolution or hat14 is NoSolution:
                        skipped += 1
                        continue
                    builder.add_residue(
                        (ch.m1 * hat2.value.value + ch.n1 * v2) * scale_r
                        + (ch.m2 * hat14.value.value + ch.n2 * v14) * scale_s
                    )
    if skipped:
        logger.warning(f"{c.label}: {skipped} tuples with unsolvable hat systems")
    return KloostermanValue(tally=builder.build(), term_count=builder.terms, skipped_unsolvable=skipped)


_HAT_EVALUATORS = {
    WeylWord.S_ALPHA_S_BETA_S_ALPHA: kl_aba,
    WeylWord.S_BETA_S_ALPHA_S_BETA: kl_bab,
    WeylWord.W0: kl_w0,
}

_PLAIN_EVALUATORS = {
    WeylWord.ID: kl_rank1,
    WeylWord.S_ALPHA: kl_rank1,
    WeylWord.S_BETA: kl_rank1,
    WeylWord.S_ALPHA_S_BETA: kl_ab,
    WeylWord.S_BETA_S_ALPHA: kl_ba,
}


def estimated_terms(c: CellParams) -> int:
    """Upper bound on the loop iterations of the cell's evaluator."""
    p, r, s = c.p, c.r, c.s
    return {
        WeylWord.ID: 1,
        WeylWord.S_ALPHA: p ** r,
        WeylWord.S_BETA: p ** s,
        WeylWord.S_ALPHA_S_BETA: p ** (r + s),
        WeylWord.S_BETA_S_ALPHA: p ** (r + s),
        WeylWord.S_ALPHA_S_BETA_S_ALPHA: (s // 2 + 1) * p ** (2 * r + s // 2),
        WeylWord.S_BETA_S_ALPHA_S_BETA: p ** (3 * s),
        WeylWord.W0: p ** (2 * r + 2 * s),
    }[c.w]


def kl(c: CellParams, ch: CharacterPair, *, hat_offset: int = 0) -> KloostermanValue:
    """Evaluate Kl_p(n_{w,r,s}, ψ, ψ') with the closed form for the cell's Weyl word."""
    logger.debug(f"evaluating {c.label} with characters {ch.as_tuple()}")
    if c.w in _HAT_EVALUATORS:
        return _HAT_EVALUATORS[c.w](c, ch, hat_offset=hat_offset)
    return _PLAIN_EVALUATORS[c.w](c, ch)


# ── Global sums ─────────────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class GlobalKloosterman:
    """The product over primes of local sums; only the magnitude is a number."""
    local: Dict[int, KloostermanValue] = field(default_factory=dict)

    @property
    def magnitude(self) -> float:
        return math.prod(value.magnitude for value in self.local.values())

    @property
    def term_count(self) -> int:
        return math.prod(value.term_count for value in self.local.values())

    def is_zero(self) -> bool:
        return any(value.tally.is_zero() for value in self.local.values())


def kl_global(cells: Sequence[Tuple[int, CellParams, CharacterPair]]) -> GlobalKloosterman:
    """Evaluate a global sum as its local factors.

    Args:
        cells: (prime, cell, characters) triples, one per distinct prime.

    Raises:
        InvalidInput: If a prime repeats or disagrees with its cell.
    """
    local: Dict[int, KloostermanValue] = {}
    for prime, cell, ch in cells:
        check_prime(prime)
        if prime in local:
            raise InvalidInput(f"prime {prime} appears twice in a global sum")
        if cell.p != prime:
            raise InvalidInput(f"cell {cell.label} listed under prime {prime}")
        local[prime] = kl(cell, ch)
    return GlobalKloosterman(local=local)
