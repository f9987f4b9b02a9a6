"""Weyl cells, unipotent coordinates and characters of Sp(4, Q_p)."""
import enum
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Sequence, Tuple

import sympy

from .exceptions import InadmissibleCell, InvalidInput
from .padic import MAX_MODULUS, FractionModOne, PrimePower, check_prime, inverse_mod, is_p_integral

logger = logging.getLogger("klsp4.structure")


class Root(enum.Enum):
    """Positive roots, keyed by the (row, column) they occupy in a unipotent matrix."""
    ALPHA = (0, 1)
    TWO_ALPHA_BETA = (0, 2)
    ALPHA_BETA = (1, 2)
    BETA = (1, 3)

    @property
    def position(self) -> Tuple[int, int]:
        return self.value

    @property
    def is_simple(self) -> bool:
        return self in (Root.ALPHA, Root.BETA)

    @property
    def label(self) -> str:
        return {"ALPHA": "α", "BETA": "β", "ALPHA_BETA": "α+β", "TWO_ALPHA_BETA": "2α+β"}[self.name]


# Root-coordinate order used for coset enumeration and canonical forms.
COSET_ORDER: Tuple[Root, ...] = (Root.ALPHA, Root.BETA, Root.ALPHA_BETA, Root.TWO_ALPHA_BETA)


class WeylWord(enum.Enum):
    ID = "id"
    S_ALPHA = "sa"
    S_BETA = "sb"
    S_ALPHA_S_BETA = "sasb"
    S_BETA_S_ALPHA = "sbsa"
    S_ALPHA_S_BETA_S_ALPHA = "sasbsa"
    S_BETA_S_ALPHA_S_BETA = "sbsasb"
    W0 = "w0"

    @classmethod
    def parse(cls, text: str) -> "WeylWord":
        key = text.strip().lower().replace("_", "").replace(" ", "")
        key = key.replace("α", "a").replace("β", "b").replace("alpha", "a").replace("beta", "b")
        aliases = {"1": "id", "e": "id", "sasbsasb": "w0"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise InvalidInput(f"unknown Weyl word {text!r}") from None

    @property
    def length(self) -> int:
        return {"id": 0, "w0": 4}.get(self.value, len(self.value) // 2)


Matrix = Tuple[Tuple[Fraction, ...], ...]


@dataclass(frozen=True, slots=True)
class RationalMatrix:
    rows: Matrix

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable]) -> "RationalMatrix":
        return cls(tuple(tuple(Fraction(x) for x in row) for row in rows))

    @classmethod
    def identity(cls) -> "RationalMatrix":
        return cls.from_rows([[int(i == j) for j in range(4)] for i in range(4)])

    @classmethod
    def diagonal(cls, entries: Sequence) -> "RationalMatrix":
        return cls.from_rows([[entries[i] if i == j else 0 for j in range(4)] for i in range(4)])

    def __getitem__(self, index: Tuple[int, int]) -> Fraction:
        i, j = index
        return self.rows[i][j]

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        cols = list(zip(*other.rows))
        return RationalMatrix(tuple(
            tuple(sum((a * b for a, b in zip(row, col)), Fraction(0)) for col in cols)
            for row in self.rows
        ))

    def transpose(self) -> "RationalMatrix":
        return RationalMatrix(tuple(zip(*self.rows)))

    def inverse(self) -> "RationalMatrix":
        inv = self.to_sympy().inv()
        return RationalMatrix.from_rows(
            [[Fraction(int(inv[i, j].p), int(inv[i, j].q)) for j in range(4)] for i in range(4)]
        )

    def to_sympy(self) -> sympy.Matrix:
        return sympy.Matrix([[sympy.Rational(x.numerator, x.denominator) for x in row] for row in self.rows])

    def is_symplectic(self) -> bool:
        return self.transpose() @ J @ self == J

    def is_p_integral(self, p: int) -> bool:
        return all(is_p_integral(x, p) for row in self.rows for x in row)

    def monomial_permutation(self) -> Tuple[int, ...]:
        """Column of the single nonzero entry in each row."""
        perm = []
        for row in self.rows:
            support = [j for j, x in enumerate(row) if x != 0]
            if len(support) != 1:
                raise InvalidInput("matrix is not monomial")
            perm.append(support[0])
        return tuple(perm)

    def __repr__(self) -> str:
        body = "; ".join(" ".join(str(x) for x in row) for row in self.rows)
        return f"RationalMatrix[{body}]"


J = RationalMatrix.from_rows([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]])


@dataclass(frozen=True, slots=True)
class UnipotentCoords:
    """Root coordinates of an element of U(Q_p).

    The matrix is [[1, a, x2, x3], [0, 1, x4, b], [0, 0, 1, 0], [0, 0, -a, 1]]
    with a = x_alpha, x2 = x_2alpha_beta, x4 = x_alpha_beta, b = x_beta and
    the symplectic relation x3 = x4 + a·b.
    """
    x_alpha: Fraction = Fraction(0)
    x_alpha_beta: Fraction = Fraction(0)
    x_2alpha_beta: Fraction = Fraction(0)
    x_beta: Fraction = Fraction(0)

    @classmethod
    def from_roots(cls, values: Dict[Root, Fraction]) -> "UnipotentCoords":
        return cls(
            x_alpha=Fraction(values.get(Root.ALPHA, 0)),
            x_alpha_beta=Fraction(values.get(Root.ALPHA_BETA, 0)),
            x_2alpha_beta=Fraction(values.get(Root.TWO_ALPHA_BETA, 0)),
            x_beta=Fraction(values.get(Root.BETA, 0)),
        )

    @classmethod
    def from_matrix(cls, m: RationalMatrix) -> "UnipotentCoords":
        return cls(x_alpha=m[0, 1], x_alpha_beta=m[1, 2], x_2alpha_beta=m[0, 2], x_beta=m[1, 3])

    def coordinate(self, root: Root) -> Fraction:
        return {
            Root.ALPHA: self.x_alpha,
            Root.BETA: self.x_beta,
            Root.ALPHA_BETA: self.x_alpha_beta,
            Root.TWO_ALPHA_BETA: self.x_2alpha_beta,
        }[root]

    def key(self) -> Tuple[Fraction, ...]:
        return tuple(self.coordinate(root) for root in COSET_ORDER)

    def matrix(self) -> RationalMatrix:
        a, b = self.x_alpha, self.x_beta
        x2, x4 = self.x_2alpha_beta, self.x_alpha_beta
        return RationalMatrix.from_rows([
            [1, a, x2, x4 + a * b],
            [0, 1, x4, b],
            [0, 0, 1, 0],
            [0, 0, -a, 1],
        ])


@dataclass(frozen=True, slots=True)
class CellParams:
    w: WeylWord
    p: int
    r: int
    s: int

    def __post_init__(self):
        check_prime(self.p)
        if self.r < 0 or self.s < 0:
            raise InadmissibleCell(f"{self.w.value}: r, s must be >= 0 (got r={self.r}, s={self.s})")
        violated = _ADMISSIBILITY[self.w](self.r, self.s)
        if violated:
            raise InadmissibleCell(f"{self.w.value} requires {violated} (got r={self.r}, s={self.s})")
        if self.p ** (2 * max(self.r, self.s)) >= MAX_MODULUS:
            raise InvalidInput(f"cell {self} needs moduli beyond 2^63")

    @property
    def label(self) -> str:
        return f"{self.w.value}(p={self.p}, r={self.r}, s={self.s})"

    def __repr__(self) -> str:
        return f"CellParams({self.label})"


def _require(condition: bool, text: str) -> str:
    return "" if condition else text


_ADMISSIBILITY = {
    WeylWord.ID: lambda r, s: _require(r == 0 and s == 0, "r = s = 0"),
    WeylWord.S_ALPHA: lambda r, s: _require(s == 0, "s = 0"),
    WeylWord.S_BETA: lambda r, s: _require(r == 0, "r = 0"),
    WeylWord.S_ALPHA_S_BETA: lambda r, s: _require(s <= r, "0 <= s <= r"),
    WeylWord.S_BETA_S_ALPHA: lambda r, s: _require(2 * r <= s, "2r <= s"),
    WeylWord.S_ALPHA_S_BETA_S_ALPHA: lambda r, s: _require(s <= 2 * r, "s <= 2r"),
    WeylWord.S_BETA_S_ALPHA_S_BETA: lambda r, s: _require(r <= s, "r <= s"),
    WeylWord.W0: lambda r, s: "",
}


@dataclass(frozen=True, slots=True)
class CharacterPair:
    """ψ = ψ_{m1,m2} on the left, ψ′ = ψ_{n1,n2} on the right."""
    m1: int = 0
    m2: int = 0
    n1: int = 0
    n2: int = 0

    def swapped(self) -> "CharacterPair":
        return CharacterPair(m1=self.n1, m2=self.n2, n1=self.m1, n2=self.m2)

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.m1, self.m2, self.n1, self.n2)


# (row, column, sign, exponent) for each nonzero entry; exponents are
# linear in (r, s) and given as (coefficient of r, coefficient of s).
_CELL_ENTRIES: Dict[WeylWord, Tuple[Tuple[int, int, int, Tuple[int, int]], ...]] = {
    WeylWord.ID: ((0, 0, 1, (0, 0)), (1, 1, 1, (0, 0)), (2, 2, 1, (0, 0)), (3, 3, 1, (0, 0))),
    WeylWord.S_ALPHA: ((0, 1, 1, (-1, 0)), (1, 0, -1, (1, 0)), (2, 3, 1, (1, 0)), (3, 2, -1, (-1, 0))),
    WeylWord.S_BETA: ((0, 0, 1, (0, 0)), (1, 3, 1, (0, -1)), (2, 2, 1, (0, 0)), (3, 1, -1, (0, 1))),
    WeylWord.S_ALPHA_S_BETA: ((0, 3, -1, (-1, 0)), (1, 0, 1, (1, -1)), (2, 1, 1, (1, 0)), (3, 2, 1, (-1, 1))),
    WeylWord.S_BETA_S_ALPHA: ((0, 1, 1, (-1, 0)), (1, 2, 1, (1, -1)), (2, 3, 1, (1, 0)), (3, 0, -1, (-1, 1))),
    WeylWord.S_ALPHA_S_BETA_S_ALPHA: ((0, 2, -1, (-1, 0)), (1, 1, 1, (1, -1)), (2, 0, 1, (1, 0)), (3, 3, 1, (-1, 1))),
    WeylWord.S_BETA_S_ALPHA_S_BETA: ((0, 3, -1, (-1, 0)), (1, 2, 1, (1, -1)), (2, 1, 1, (1, 0)), (3, 0, -1, (-1, 1))),
    WeylWord.W0: ((0, 2, -1, (-1, 0)), (1, 3, -1, (1, -1)), (2, 0, 1, (1, 0)), (3, 1, 1, (-1, 1))),
}


def cell_entries(w: WeylWord) -> Tuple[Tuple[int, int, int, Tuple[int, int]], ...]:
    return _CELL_ENTRIES[w]


def build_cell_matrix(c: CellParams) -> RationalMatrix:
    """The representative n_{w,r,s} = diag(p^-r, p^(r-s), p^r, p^(s-r))·w of the cell.

    Args:
        c (CellParams): An admissible cell.

    Returns:
        RationalMatrix: A monomial symplectic matrix with entries ±p^k.
    """
    rows = [[Fraction(0)] * 4 for _ in range(4)]
    for i, j, sign, (cr, cs) in _CELL_ENTRIES[c.w]:
        rows[i][j] = sign * Fraction(c.p) ** (cr * c.r + cs * c.s)
    return RationalMatrix.from_rows(rows)


def root_element(root: Root, value=1) -> UnipotentCoords:
    return UnipotentCoords.from_roots({root: Fraction(value)})


# Off-diagonal positions of the transpose group U^T.
_OPPOSITE_POSITIONS = frozenset({(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (2, 3)})


def _in_opposite(m: RationalMatrix) -> bool:
    return all(
        m[i, j] == 0 or (i, j) in _OPPOSITE_POSITIONS
        for i in range(4) for j in range(4) if i != j
    )


def root_subgroup_data(w: WeylWord) -> Tuple[Tuple[Root, ...], Tuple[Root, ...]]:
    """Split the positive roots into those sent negative by w (U_w) and the rest.

    Returns:
        (U_w roots, Ū_w roots), each in coset-coordinate order.
    """
    n = build_cell_matrix(CellParams(w, 2, 0, 0))
    n_inv = n.inverse()
    negative, positive = [], []
    for root in COSET_ORDER:
        conjugate = n @ root_element(root).matrix() @ n_inv
        (negative if _in_opposite(conjugate) else positive).append(root)
    return tuple(negative), tuple(positive)


def simple_roots_of(w: WeylWord) -> Tuple[Root, ...]:
    """Δ_w: simple roots made negative by w."""
    return tuple(root for root in root_subgroup_data(w)[0] if root.is_simple)


def psi_value(u: UnipotentCoords, m1: int, m2: int, p: int) -> FractionModOne:
    """ψ_{m1,m2}(u) = e(m1·x_α + m2·x_β), returned as its argument mod 1."""
    return FractionModOne.from_fraction(m1 * u.x_alpha + m2 * u.x_beta, p)


def twist_character(
    t: Sequence[int], m1: int, m2: int, modulus: PrimePower
) -> Tuple[int, int]:
    """Character data of ψ_t(u) = ψ(t u t^-1) for a diagonal unit t.

    Args:
        t: The four diagonal units (t1, t2, t3, t4), taken mod ``modulus``.
        m1, m2: Character data of ψ.
        modulus: Working precision p^K.

    Returns:
        (m1·t1/t2, m2·t2/t4) reduced mod p^K.

    Raises:
        InvalidInput: If a diagonal entry is not a unit.
    """
    p, q = modulus.p, modulus.value
    if len(t) != 4 or any(x % p == 0 for x in t):
        raise InvalidInput(f"torus element {tuple(t)} must have four unit entries")
    if q == 1:
        return 0, 0
    return (m1 * t[0] * inverse_mod(t[1], q) % q, m2 * t[1] * inverse_mod(t[3], q) % q)


def torus_matrix(t1: int, t2: int) -> RationalMatrix:
    """diag(t1, t2, 1/t1, 1/t2), a symplectic element of T(Z_p) for units t1, t2."""
    return RationalMatrix.diagonal([Fraction(t1), Fraction(t2), Fraction(1, t1), Fraction(1, t2)])
