"""Torus orbits on X(n) and the orbit decomposition of Kloosterman sums.

𝒯 = {diag(a1, a2, c/a1, c/a2) : a1, a2, c ∈ Z_p^×} acts on X(n) by
t*x = t·x·s^-1 with s = n^-1·t·n. Summing over 𝒯-orbits gives

    Kl_p(n, ψ, ψ') = |V_w(ℓ)|^-1 · Σ_{x ∈ 𝒯\\X(n)} |𝒯*x| · S_w(θ_x; ℓ)

which :func:`orbit_identity_check` verifies exactly against the closed forms.
"""
import logging
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

from sympy import multiplicity, primitive_root

from .exceptions import IdentityViolation, InvalidInput
from .oracle import (
    DEFAULT_BUDGET,
    OracleCell,
    canonicalize,
    enumerate_X,
    resolve_witness,
)
from .padic import (
    CyclotomicTally,
    FractionModOne,
    PrimePower,
    TallyBuilder,
    check_prime,
    inverse_mod,
    tally_divide_exact,
    tally_equal,
    tally_multiply,
    tally_scale,
    tally_sum,
    units,
)
from .structure import (
    CellParams,
    CharacterPair,
    RationalMatrix,
    Root,
    UnipotentCoords,
    WeylWord,
    build_cell_matrix,
    simple_roots_of,
)
from .sums import gl2_kloosterman, kl

logger = logging.getLogger("klsp4.stratification")


@dataclass(frozen=True, slots=True)
class TorusElement:
    """diag(a1, a2, c/a1, c/a2) with a1, a2, c units."""
    a1: int
    a2: int
    c: int = 1

    def check_units(self, p: int) -> None:
        if any(x % p == 0 for x in (self.a1, self.a2, self.c)):
            raise InvalidInput(f"{self} has a non-unit entry mod {p}")

    def diagonal(self) -> Tuple[Fraction, ...]:
        return (Fraction(self.a1), Fraction(self.a2), Fraction(self.c, self.a1), Fraction(self.c, self.a2))

    def matrix(self) -> RationalMatrix:
        return RationalMatrix.diagonal(self.diagonal())

    def __mul__(self, other: "TorusElement") -> "TorusElement":
        return TorusElement(self.a1 * other.a1, self.a2 * other.a2, self.c * other.c)


@dataclass(frozen=True, slots=True)
class VwElement:
    """(λ1, λ2) with λ' on the simple roots of Δ_w; absent entries are None."""
    lam1: int
    lam2: int
    lam_alpha_prime: Optional[int]
    lam_beta_prime: Optional[int]
    level: int


@dataclass(frozen=True, slots=True)
class ThetaCharacter:
    """θ_x(λ × λ') = e(λ1·m1·κ1 + λ2·m2·κ2 + λ'_α·n1·κ'_α + λ'_β·n2·κ'_β)."""
    alpha: FractionModOne
    beta: FractionModOne
    alpha_prime: FractionModOne
    beta_prime: FractionModOne
    level: int

    def evaluate(self, v: VwElement) -> FractionModOne:
        total = self.alpha.scaled(v.lam1) + self.beta.scaled(v.lam2)
        if v.lam_alpha_prime is not None:
            total = total + self.alpha_prime.scaled(v.lam_alpha_prime)
        if v.lam_beta_prime is not None:
            total = total + self.beta_prime.scaled(v.lam_beta_prime)
        return total

    def numerators(self) -> Tuple[int, int, int, int]:
        """The four phases written over p^level."""
        return tuple(
            phase.lifted(self.level)
            for phase in (self.alpha, self.beta, self.alpha_prime, self.beta_prime)
        )


@dataclass(frozen=True, slots=True)
class Orbit:
    representative: OracleCell
    size: int


# ── The action ──────────────────────────────────────────────────────


@lru_cache(maxsize=64)
def _cell_data(c: CellParams) -> Tuple[RationalMatrix, RationalMatrix]:
    n = build_cell_matrix(c)
    return n, n.inverse()


@lru_cache(maxsize=1024)
def conjugated_torus(t: TorusElement, c: CellParams) -> Tuple[Fraction, ...]:
    """Diagonal of s = n^-1·t·n."""
    n, n_inv = _cell_data(c)
    s = n_inv @ t.matrix() @ n
    return tuple(s[i, i] for i in range(4))


def _conjugate(u: UnipotentCoords, diagonal: Sequence[Fraction]) -> UnipotentCoords:
    d = RationalMatrix.diagonal(diagonal)
    d_inv = RationalMatrix.diagonal([1 / x for x in diagonal])
    return UnipotentCoords.from_matrix(d @ u.matrix() @ d_inv)


def torus_act(t: TorusElement, x: OracleCell, c: CellParams) -> OracleCell:
    """t*x = (t·u·t^-1)·n·(s·u'·s^-1), returned with a freshly resolved witness.

    Raises:
        IdentityViolation: If the acted element leaves Sp(4, Z_p).
    """
    t.check_units(c.p)
    n, _ = _cell_data(c)
    s = conjugated_torus(t, c)
    uprime = canonicalize(_conjugate(x.uprime_coords, s), c.w, c.p)
    acted = resolve_witness(n, uprime, c.p)
    if acted is None:
        raise IdentityViolation(f"{c.label}: torus element {t} moved a cell out of X(n)")
    return acted


def kappa(x: OracleCell, c: CellParams) -> Tuple[FractionModOne, FractionModOne, FractionModOne, FractionModOne]:
    """(κ1, κ2, κ'1, κ'2): simple-root coordinates of u(x) and u'(x) mod Z_p.

    κ'_j is zero unless α_j ∈ Δ_w.
    """
    p = c.p
    delta = simple_roots_of(c.w)
    u, uprime = x.u_coords, x.uprime_coords
    zero = FractionModOne.zero(p)
    return (
        FractionModOne.from_fraction(u.x_alpha, p),
        FractionModOne.from_fraction(u.x_beta, p),
        FractionModOne.from_fraction(uprime.x_alpha, p) if Root.ALPHA in delta else zero,
        FractionModOne.from_fraction(uprime.x_beta, p) if Root.BETA in delta else zero,
    )


# ── V_w(ℓ) ──────────────────────────────────────────────────────────


def unit_generators(p: int, level: int) -> Tuple[int, ...]:
    """Integers generating a dense subgroup of Z_p^×; their images generate (Z/p^level)^×."""
    check_prime(p)
    if p == 2:
        return (-1, 5)
    return (int(primitive_root(p ** max(level, 2))),)


def torus_generators(p: int, level: int) -> List[TorusElement]:
    gens = []
    for g in unit_generators(p, level):
        gens += [TorusElement(g, 1, 1), TorusElement(1, g, 1), TorusElement(1, 1, g)]
    return gens


def _reduce(x: Fraction, q: int) -> int:
    return x.numerator * inverse_mod(x.denominator, q) % q if q > 1 else 0


def _lambda_image(t: TorusElement, w: WeylWord, p: int, level: int) -> VwElement:
    q = p ** level
    s = conjugated_torus(t, CellParams(w, p, 0, 0))
    delta = simple_roots_of(w)
    d = t.diagonal()
    return VwElement(
        lam1=_reduce(d[0] / d[1], q),
        lam2=_reduce(d[1] / d[3], q),
        lam_alpha_prime=_reduce(s[0] / s[1], q) if Root.ALPHA in delta else None,
        lam_beta_prime=_reduce(s[1] / s[3], q) if Root.BETA in delta else None,
        level=level,
    )


def _compose(u: VwElement, v: VwElement, q: int) -> VwElement:
    def mul(x, y):
        return None if x is None else x * y % q
    return VwElement(
        lam1=u.lam1 * v.lam1 % q,
        lam2=u.lam2 * v.lam2 % q,
        lam_alpha_prime=mul(u.lam_alpha_prime, v.lam_alpha_prime),
        lam_beta_prime=mul(u.lam_beta_prime, v.lam_beta_prime),
        level=u.level,
    )


@lru_cache(maxsize=128)
def enumerate_vw(w: WeylWord, level: int, p: int) -> Tuple[VwElement, ...]:
    """V_w(ℓ): the image of 𝒯 under t ↦ (κ-scalings, κ'-scalings) mod p^ℓ.

    Computed by closing the images of the torus generators under
    multiplication, so the relations between λ and λ' come from the
    transformation laws rather than from a table.
    """
    if level < 1:
        raise InvalidInput(f"V_w(ℓ) needs ℓ >= 1, got {level}")
    q = p ** level
    gens = [_lambda_image(t, w, p, level) for t in torus_generators(p, level)]
    identity = _lambda_image(TorusElement(1, 1, 1), w, p, level)
    seen = {identity}
    queue = deque([identity])
    while queue:
        current = queue.popleft()
        for g in gens:
            nxt = _compose(current, g, q)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    elements = tuple(sorted(seen, key=lambda v: (v.lam1, v.lam2, v.lam_alpha_prime or 0, v.lam_beta_prime or 0)))
    expected = len(units(p, level)) ** 2
    if len(elements) != expected:
        raise IdentityViolation(f"|V_{w.value}({level})| = {len(elements)} at p={p}, expected {expected}")
    return elements


def theta_for(x: OracleCell, c: CellParams, ch: CharacterPair, level: int) -> ThetaCharacter:
    """θ_x for a representative; ℓ must bound every κ denominator."""
    k1, k2, kp1, kp2 = kappa(x, c)
    phases = (k1.scaled(ch.m1), k2.scaled(ch.m2), kp1.scaled(ch.n1), kp2.scaled(ch.n2))
    deepest = max(max(phase.level for phase in phases), max(k.level for k in (k1, k2, kp1, kp2)))
    if deepest > level:
        raise InvalidInput(f"{c.label}: level {level} is below the κ denominator exponent {deepest}")
    return ThetaCharacter(*phases, level=level)


def eval_sw(theta: ThetaCharacter, w: WeylWord, level: int, p: int) -> CyclotomicTally:
    """S_w(θ; ℓ) = Σ_{v ∈ V_w(ℓ)} θ(v)."""
    if theta.level != level:
        raise InvalidInput(f"θ is at level {theta.level}, asked for level {level}")
    builder = TallyBuilder(p, level)
    for v in enumerate_vw(w, level, p):
        builder.add(theta.evaluate(v))
    return builder.build()


def _single_phase(p: int, level: int, numerator: int) -> CyclotomicTally:
    return CyclotomicTally(p, level, {numerator % p ** level: 1})


def gl2_factorization(theta: ThetaCharacter, w: WeylWord, p: int) -> CyclotomicTally:
    """S_w(θ; ℓ) rewritten through GL(2) Kloosterman sums.

    w0:      S(A1, B1; p^ℓ)·S(A2, B2; p^ℓ)
    sαsβsα:  Σ_{λ2} e(λ2·A2/p^ℓ)·S(A1, B1·λ̄2; p^ℓ)
    sβsαsβ:  Σ_{λ1} e(λ1·A1/p^ℓ)·S(A2, B2·λ̄1²; p^ℓ)

    where A_i, B_i are the numerators of θ over p^ℓ.
    """
    level = theta.level
    modulus = PrimePower(p, level)
    q = modulus.value
    a1, a2, b1, b2 = theta.numerators()
    if w is WeylWord.W0:
        return tally_multiply(gl2_kloosterman(a1, b1, modulus), gl2_kloosterman(a2, b2, modulus))
    if w is WeylWord.S_ALPHA_S_BETA_S_ALPHA:
        return tally_sum(
            (tally_multiply(_single_phase(p, level, lam * a2), gl2_kloosterman(a1, b1 * inverse_mod(lam, q), modulus))
             for lam in units(p, level)),
            p,
        )
    if w is WeylWord.S_BETA_S_ALPHA_S_BETA:
        return tally_sum(
            (tally_multiply(_single_phase(p, level, lam * a1), gl2_kloosterman(a2, b2 * inverse_mod(lam * lam, q), modulus))
             for lam in units(p, level)),
            p,
        )
    raise InvalidInput(f"no GL(2) factorization recorded for {w.value}")


# ── Orbits and the identity ─────────────────────────────────────────


def decompose_orbits(c: CellParams, cells: Sequence[OracleCell], level: int = 1) -> List[Orbit]:
    """Split X(n) into 𝒯-orbits by breadth-first closure under the torus generators.

    Raises:
        IdentityViolation: If the action leaves the enumerated set or orbit sizes do not add up.
    """
    by_key = {cell.key: cell for cell in cells}
    gens = torus_generators(c.p, level)
    visited = set()
    orbits = []
    for cell in cells:
        if cell.key in visited:
            continue
        component = {cell.key}
        queue = deque([cell])
        while queue:
            current = queue.popleft()
            for t in gens:
                image = torus_act(t, current, c)
                if image.key not in by_key:
                    raise IdentityViolation(f"{c.label}: torus image {image.key} is not an enumerated cell")
                if image.key not in component:
                    component.add(image.key)
                    queue.append(by_key[image.key])
        visited |= component
        orbits.append(Orbit(representative=cell, size=len(component)))
    if sum(orbit.size for orbit in orbits) != len(cells):
        raise IdentityViolation(f"{c.label}: orbit sizes do not sum to |X(n)| = {len(cells)}")
    logger.debug(f"{c.label}: {len(cells)} cells in {len(orbits)} orbits")
    return orbits


def required_level(c: CellParams, cells: Sequence[OracleCell]) -> int:
    """Smallest ℓ ≥ 1 with every entry of u(x), u'(x) in p^-ℓ·Z_p over ``cells``."""
    level = 1
    for cell in cells:
        for coords in (cell.u_coords, cell.uprime_coords):
            for row in coords.matrix().rows:
                level = max(level, max(int(multiplicity(c.p, entry.denominator)) for entry in row))
    return level


def orbit_identity_check(c: CellParams, ch: CharacterPair, level: int, budget: int = DEFAULT_BUDGET) -> bool:
    """Check Kl_p(n, ψ, ψ')·|V_w(ℓ)| = Σ_orbits |𝒯*x|·S_w(θ_x; ℓ) exactly.

    Args:
        c (CellParams): The cell.
        ch (CharacterPair): Characters ψ, ψ'.
        level (int): ℓ; must be at least 1 and bound every κ denominator.
        budget (int): Oracle enumeration budget.

    Returns:
        bool: Whether the orbit sum equals the closed-form value.

    Raises:
        IdentityViolation: If the orbit sum is not divisible by |V_w(ℓ)|.
    """
    if level < 1:
        raise InvalidInput(f"orbit identity needs ℓ >= 1, got {level}")
    cells = enumerate_X(c, budget=budget)
    orbits = decompose_orbits(c, cells, level)
    weighted = [
        tally_scale(eval_sw(theta_for(orbit.representative, c, ch, level), c.w, level, c.p), orbit.size)
        for orbit in orbits
    ]
    total = tally_sum(weighted, c.p)
    order = len(enumerate_vw(c.w, level, c.p))
    quotient = tally_divide_exact(total, order)
    if quotient is None:
        raise IdentityViolation(f"{c.label}: orbit sum is not divisible by |V_w({level})| = {order}")
    return tally_equal(quotient, kl(c, ch).tally)
