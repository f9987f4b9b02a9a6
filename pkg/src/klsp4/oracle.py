"""Brute-force enumeration of X(n) = U(Z_p)\\C(n)/U_n(Z_p).

A double coset is determined by u' ∈ U_n(Q_p)/U_n(Z_p). Representatives are
ordered products x_α(t1)·x_β(t2)·x_{α+β}(t3)·x_{2α+β}(t4) over the roots of
U_n with every t_i in [0, 1); since the product runs in order of height,
distinct tuples are distinct cosets. For each candidate u' the left factor u
is recovered by p-adic row elimination on M = n·u', which either produces
an explicit u with u·M ∈ Sp(4, Z_p) or proves none exists.
"""
import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from .exceptions import BudgetExceeded, IdentityViolation, InvalidInput
from .padic import (
    FractionModOne,
    PrimePower,
    TallyBuilder,
    is_p_integral,
    tally_equal,
    valuation,
)
from .structure import (
    COSET_ORDER,
    CellParams,
    CharacterPair,
    RationalMatrix,
    Root,
    UnipotentCoords,
    WeylWord,
    build_cell_matrix,
    root_element,
    root_subgroup_data,
    torus_matrix,
    twist_character,
)
from .sums import KloostermanValue

logger = logging.getLogger("klsp4.oracle")

DEFAULT_BUDGET = 2_000_000


@dataclass(frozen=True, slots=True)
class DenominatorCap:
    """u' coordinates range over p^-L·Z_p/Z_p."""
    L: int

    def __post_init__(self):
        if self.L < 0:
            raise InvalidInput(f"denominator cap must be >= 0, got {self.L}")

    @classmethod
    def default_for(cls, c: CellParams) -> "DenominatorCap":
        return cls(c.r + c.s)


@dataclass(frozen=True, slots=True)
class OracleCell:
    """One element x = u·n·u' of X(n).

    ``u_coords`` is one left factor; only its coordinates mod Z_p matter.
    ``uprime_coords`` is the canonical representative of u'·U_n(Z_p).
    """
    u_coords: UnipotentCoords
    uprime_coords: UnipotentCoords
    x: RationalMatrix

    @property
    def key(self) -> Tuple[Fraction, ...]:
        """Product coordinates of u' in coset order; identifies the cell."""
        coords = product_coords(self.uprime_coords)
        return tuple(coords[root] for root in COSET_ORDER)


# ── u' parametrization ──────────────────────────────────────────────


def product_coords(u: UnipotentCoords) -> Dict[Root, Fraction]:
    """Inverse of :func:`from_product_coords`."""
    return {
        Root.ALPHA: u.x_alpha,
        Root.BETA: u.x_beta,
        Root.ALPHA_BETA: u.x_alpha_beta,
        Root.TWO_ALPHA_BETA: u.x_2alpha_beta - u.x_alpha * u.x_alpha_beta,
    }


def from_product_coords(values: Dict[Root, Fraction]) -> UnipotentCoords:
    """Matrix coordinates of x_α(t1)·x_β(t2)·x_{α+β}(t3)·x_{2α+β}(t4)."""
    t1 = Fraction(values.get(Root.ALPHA, 0))
    t2 = Fraction(values.get(Root.BETA, 0))
    t3 = Fraction(values.get(Root.ALPHA_BETA, 0))
    t4 = Fraction(values.get(Root.TWO_ALPHA_BETA, 0))
    return UnipotentCoords(x_alpha=t1, x_beta=t2, x_alpha_beta=t3, x_2alpha_beta=t1 * t3 + t4)


def _frac_p(x: Fraction, p: int) -> Fraction:
    return FractionModOne.from_fraction(x, p).as_fraction()


def canonicalize(uprime: UnipotentCoords, w: WeylWord, p: int) -> UnipotentCoords:
    """Canonical representative of u'·U_n(Z_p): every product coordinate in [0, 1).

    Coordinates are reduced in order of height; right multiplication by an
    integral root element only disturbs coordinates of greater height.
    """
    roots = root_subgroup_data(w)[0]
    coords = product_coords(uprime)
    stray = [root for root in COSET_ORDER if root not in roots and coords[root] != 0]
    if stray:
        raise InvalidInput(f"u' has coordinates outside U_n on {[root.label for root in stray]}")
    current = uprime
    for root in COSET_ORDER:
        if root not in roots:
            continue
        t = product_coords(current)[root]
        shift = _frac_p(t, p) - t
        if shift:
            current = UnipotentCoords.from_matrix(current.matrix() @ root_element(root, shift).matrix())
    return current


# ── Denominator caps ────────────────────────────────────────────────


_SYMBOLS = {root: sympy.Symbol(f"t_{root.name.lower()}") for root in COSET_ORDER}


def _symbolic_uprime(roots: Sequence[Root]) -> sympy.Matrix:
    t = {root: (_SYMBOLS[root] if root in roots else sympy.Integer(0)) for root in COSET_ORDER}
    a, b, x4 = t[Root.ALPHA], t[Root.BETA], t[Root.ALPHA_BETA]
    x2 = a * x4 + t[Root.TWO_ALPHA_BETA]
    return sympy.Matrix([[1, a, x2, x4 + a * b], [0, 1, x4, b], [0, 0, 1, 0], [0, 0, -a, 1]])


def _rational_valuation(c: sympy.Rational, p: int) -> int:
    return valuation(int(c.p), p) - valuation(int(c.q), p)


@lru_cache(maxsize=256)
def derived_caps(c: CellParams) -> Dict[Root, int]:
    """Largest denominator exponent each u' coordinate can carry in X(n).

    Row 3 of u·n·u' equals row 3 of n·u', and the 2×2 minors of rows 3 and
    4 are unchanged by u, so all of them must be p-integral. Whenever one
    of them is a monomial c·t^e in a single coordinate t, this bounds the
    denominator of t by p^floor(ord_p(c)/e).
    """
    roots = root_subgroup_data(c.w)[0]
    m = build_cell_matrix(c).to_sympy() * _symbolic_uprime(roots)
    exprs = [m[2, j] for j in range(4)]
    exprs += [m[2, i] * m[3, j] - m[2, j] * m[3, i] for i in range(4) for j in range(i + 1, 4)]
    caps: Dict[Root, int] = {}
    by_symbol = {symbol: root for root, symbol in _SYMBOLS.items()}
    for expr in exprs:
        expr = sympy.expand(expr)
        if expr == 0 or len(expr.free_symbols) != 1 or expr.is_Add:
            continue
        coeff, rest = expr.as_coeff_Mul()
        base, exponent = rest.as_base_exp()
        if base not in by_symbol or not exponent.is_Integer or exponent <= 0:
            continue
        bound = max(0, _rational_valuation(sympy.Rational(coeff), c.p)) // int(exponent)
        root = by_symbol[base]
        caps[root] = min(caps.get(root, bound), bound)
    logger.debug(f"{c.label}: derived caps {({root.label: k for root, k in caps.items()})}")
    return caps


def coordinate_caps(c: CellParams, cap: DenominatorCap) -> Tuple[Tuple[Root, int], ...]:
    """Per-root denominator exponents, the derived ones clipped by ``cap``."""
    derived = derived_caps(c)
    return tuple(
        (root, min(derived.get(root, cap.L), cap.L)) for root in root_subgroup_data(c.w)[0]
    )


# ── Feasibility ─────────────────────────────────────────────────────


def _integral(row: Sequence[Fraction], p: int) -> bool:
    return all(is_p_integral(x, p) for x in row)


def _is_unit(x: Fraction, p: int) -> bool:
    return x != 0 and is_p_integral(x, p) and x.numerator % p != 0


def _combine(*terms: Tuple[Fraction, Sequence[Fraction]]) -> List[Fraction]:
    return [sum((coef * row[j] for coef, row in terms), Fraction(0)) for j in range(4)]


def _monomial_product(n: RationalMatrix, uprime: RationalMatrix) -> List[List[Fraction]]:
    rows = []
    for i, j in enumerate(n.monomial_permutation()):
        scale = n[i, j]
        rows.append([scale * x for x in uprime.rows[j]])
    return rows


def resolve_witness(n: RationalMatrix, uprime: UnipotentCoords, p: int) -> Optional[OracleCell]:
    """Find u ∈ U(Q_p) with u·n·u' ∈ Sp(4, Z_p), or return None if there is none.

    Rows of u·M for M = n·u' are M0 + a·M1 + x2·M2 + x3·M3, M1 + x4·M2 + b·M3,
    M2 and M3 - a·M2. They are solved bottom-up: a from a unit pivot of M2,
    then (x3, b) by Cramer's rule on a unit 2×2 minor of rows 3 and 4, then x2.
    Every step is unique modulo Z_p.

    Raises:
        IdentityViolation: If the recovered x fails integrality or is not symplectic.
    """
    M = _monomial_product(n, uprime.matrix())
    m0, m1, m2, m3 = M
    if not _integral(m2, p):
        return None
    pivots = [j for j in range(4) if _is_unit(m2[j], p)]
    if not pivots:
        return None
    j = pivots[0]
    a = m3[j] / m2[j]
    r3 = _combine((Fraction(1), m3), (-a, m2))
    if not _integral(r3, p):
        return None
    minor = None
    for k, l in itertools.combinations(range(4), 2):
        det = m2[k] * r3[l] - m2[l] * r3[k]
        if _is_unit(det, p):
            minor = (k, l, det)
            break
    if minor is None:
        return None
    k, l, det = minor
    x3 = (-m1[k] * r3[l] + m1[l] * r3[k]) / det
    b = (-m1[l] * m2[k] + m1[k] * m2[l]) / det
    r1 = _combine((Fraction(1), m1), (x3, m2), (b, r3))
    if not _integral(r1, p):
        return None
    partial = _combine((Fraction(1), m0), (a, m1), (x3, m3))
    x2 = -partial[j] / m2[j]
    r0 = _combine((Fraction(1), partial), (x2, m2))
    if not _integral(r0, p):
        return None
    u = UnipotentCoords(x_alpha=a, x_alpha_beta=x3 - a * b, x_2alpha_beta=x2, x_beta=b)
    x = u.matrix() @ RationalMatrix.from_rows(M)
    if not x.is_p_integral(p) or not x.is_symplectic():
        raise IdentityViolation(f"witness for u'={uprime} does not give an integral symplectic x")
    return OracleCell(u_coords=u, uprime_coords=uprime, x=x)


# ── Enumeration ─────────────────────────────────────────────────────


def _candidate_count(p: int, caps: Sequence[Tuple[Root, int]]) -> int:
    return p ** sum(k for _, k in caps)


def _check_budget(c: CellParams, caps: Sequence[Tuple[Root, int]], budget: int) -> None:
    required = _candidate_count(c.p, caps)
    if required > budget:
        raise BudgetExceeded(required, budget, f"{c.label}: oracle needs {required} candidates, budget is {budget}")


@lru_cache(maxsize=128)
def _enumerate(n: RationalMatrix, p: int, caps: Tuple[Tuple[Root, int], ...]) -> Tuple[OracleCell, ...]:
    ranges = [[Fraction(j, p ** k) for j in range(p ** k)] for _, k in caps]
    cells = []
    for values in itertools.product(*ranges):
        uprime = from_product_coords({root: v for (root, _), v in zip(caps, values)})
        cell = resolve_witness(n, uprime, p)
        if cell is not None:
            cells.append(cell)
    return tuple(cells)


def enumerate_X(
    c: CellParams, cap: Optional[DenominatorCap] = None, budget: int = DEFAULT_BUDGET
) -> Tuple[OracleCell, ...]:
    """Enumerate X(n_{w,r,s}).

    Args:
        c (CellParams): The cell.
        cap (DenominatorCap, optional): Denominator cap for u'. Defaults to r + s.
        budget (int): Maximum number of u' candidates to examine.

    Returns:
        Tuple[OracleCell, ...]: One entry per element of X(n), in coset order.

    Raises:
        BudgetExceeded: If the candidate count exceeds ``budget``.
    """
    cap = cap or DenominatorCap.default_for(c)
    caps = coordinate_caps(c, cap)
    _check_budget(c, caps, budget)
    cells = _enumerate(build_cell_matrix(c), c.p, caps)
    logger.debug(f"{c.label}: |X(n)| = {len(cells)} from {_candidate_count(c.p, caps)} candidates")
    return cells


def _phase(cell: OracleCell, ch: CharacterPair, p: int) -> FractionModOne:
    u, uprime = cell.u_coords, cell.uprime_coords
    return FractionModOne.from_fraction(
        ch.m1 * u.x_alpha + ch.m2 * u.x_beta + ch.n1 * uprime.x_alpha + ch.n2 * uprime.x_beta, p
    )


def sum_over_cells(cells: Sequence[OracleCell], ch: CharacterPair, p: int) -> KloostermanValue:
    """Σ ψ(u(x))·ψ'(u'(x)) over the given cells."""
    phases = [_phase(cell, ch, p) for cell in cells]
    builder = TallyBuilder(p, max((phase.level for phase in phases), default=0))
    for phase in phases:
        builder.add(phase)
    return KloostermanValue(tally=builder.build(), term_count=len(cells))


def oracle_kl(
    c: CellParams, ch: CharacterPair, cap: Optional[DenominatorCap] = None, budget: int = DEFAULT_BUDGET
) -> KloostermanValue:
    """Kl_p(n, ψ, ψ') summed directly over the enumerated X(n)."""
    return sum_over_cells(enumerate_X(c, cap, budget), ch, c.p)


def certify_cap_closure(c: CellParams, cap: DenominatorCap, budget: int = DEFAULT_BUDGET) -> bool:
    """True iff raising the cap by one adds no element to X(n)."""
    coarse = {cell.key for cell in enumerate_X(c, cap, budget)}
    fine = {cell.key for cell in enumerate_X(c, DenominatorCap(cap.L + 1), budget)}
    if coarse != fine:
        logger.info(f"{c.label}: cap {cap.L} misses {len(fine - coarse)} cells")
    return coarse == fine


# ── Torus twists and symmetry ───────────────────────────────────────


def _oracle_matrix_kl(
    n: RationalMatrix, c: CellParams, ch: CharacterPair, cap: DenominatorCap, budget: int
) -> KloostermanValue:
    caps = coordinate_caps(c, cap)
    _check_budget(c, caps, budget)
    return sum_over_cells(_enumerate(n, c.p, caps), ch, c.p)


def check_torus_twist(
    c: CellParams,
    ch: CharacterPair,
    t1: int,
    t2: int,
    side: str = "left",
    cap: Optional[DenominatorCap] = None,
    budget: int = DEFAULT_BUDGET,
) -> bool:
    """Compare Kl(t·n, ψ, ψ') with Kl(n, ψ_t, ψ'), or Kl(n·t^-1, ψ, ψ') with Kl(n, ψ, ψ'_t).

    Args:
        c (CellParams): The cell.
        ch (CharacterPair): Characters ψ, ψ'.
        t1, t2: Units; t = diag(t1, t2, 1/t1, 1/t2).
        side (str): "left" or "right".

    Returns:
        bool: Whether both sides agree as exact tallies.
    """
    cap = cap or DenominatorCap.default_for(c)
    p = c.p
    if t1 % p == 0 or t2 % p == 0:
        raise InvalidInput(f"torus entries must be units mod {p}, got ({t1}, {t2})")
    # u and u' coordinates both have denominators at most p^L.
    modulus = PrimePower(p, 2 * cap.L)
    q = modulus.value
    inverse = (lambda x: pow(x, -1, q)) if q > 1 else (lambda x: 0)
    t = (t1, t2, inverse(t1), inverse(t2))
    n = build_cell_matrix(c)
    torus = torus_matrix(t1, t2)
    if side == "left":
        twisted = _oracle_matrix_kl(torus @ n, c, ch, cap, budget)
        m1, m2 = twist_character(t, ch.m1, ch.m2, modulus)
        reference = oracle_kl(c, CharacterPair(m1=m1, m2=m2, n1=ch.n1, n2=ch.n2), cap, budget)
    elif side == "right":
        twisted = _oracle_matrix_kl(n @ torus.inverse(), c, ch, cap, budget)
        n1, n2 = twist_character(t, ch.n1, ch.n2, modulus)
        reference = oracle_kl(c, CharacterPair(m1=ch.m1, m2=ch.m2, n1=n1, n2=n2), cap, budget)
    else:
        raise InvalidInput(f"side must be 'left' or 'right', got {side!r}")
    return tally_equal(twisted.tally, reference.tally)


def check_swap_symmetry(c: CellParams, ch: CharacterPair, budget: int = DEFAULT_BUDGET) -> bool:
    """Kl(n, ψ, ψ') = Kl(n, ψ', ψ) on the long-element cell, by enumeration."""
    if c.w is not WeylWord.W0:
        raise InvalidInput(f"swap symmetry is a property of the w0 cell, got {c.label}")
    forward = oracle_kl(c, ch, budget=budget)
    backward = oracle_kl(c, ch.swapped(), budget=budget)
    return tally_equal(forward.tally, backward.tally)
