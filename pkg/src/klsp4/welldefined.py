"""Auxiliary Kloosterman sums and when they are well-defined.

The auxiliary sum weights x = b1·n·b2 by ψ(b1)·ψ'(b2) for characters of the
whole of U. This only depends on x when ψ(n·u·n^-1) = ψ'(u) for every u in
Ū_n = U ∩ n^-1·U·n, and it is zero otherwise.
"""
import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import sympy

from .exceptions import InvalidInput
from .padic import CyclotomicTally, check_prime
from .structure import CellParams, CharacterPair, Root, WeylWord, cell_entries, root_subgroup_data
from .sums import GlobalKloosterman, KloostermanValue, kl

logger = logging.getLogger("klsp4.welldefined")

P, R, S = sympy.symbols("p r s", positive=True)
M1, M2, N1, N2 = sympy.symbols("m1 m2 n1 n2")
TAU = sympy.Symbol("tau")

CHARACTER_SYMBOLS = (M1, M2, N1, N2)


def _symbolic_cell(w: WeylWord) -> sympy.Matrix:
    n = sympy.zeros(4, 4)
    for i, j, sign, (cr, cs) in cell_entries(w):
        n[i, j] = sign * P ** (cr * R + cs * S)
    return n


def _root_matrix(root: Root) -> sympy.Matrix:
    u = sympy.eye(4)
    i, j = root.position
    u[i, j] = TAU
    if root is Root.ALPHA:
        u[3, 2] = -TAU
    elif root is Root.ALPHA_BETA:
        u[0, 3] = TAU
    return u


@lru_cache(maxsize=16)
def symbolic_flows(w: WeylWord) -> Tuple[Tuple[Root, sympy.Expr], ...]:
    """For each root of Ū_n, the form ψ(n·x(τ)·n^-1) - ψ'(x(τ)) as a coefficient of τ.

    Forms that vanish identically are dropped; the criterion is that every
    remaining form is zero.
    """
    n = _symbolic_cell(w)
    n_inv = n.inv()
    flows = []
    for root in root_subgroup_data(w)[1]:
        conj = (n * _root_matrix(root) * n_inv).applyfunc(sympy.expand)
        left = M1 * conj[0, 1].coeff(TAU, 1) + M2 * conj[1, 3].coeff(TAU, 1)
        right = N1 * int(root is Root.ALPHA) + N2 * int(root is Root.BETA)
        form = sympy.powsimp(sympy.expand(left - right), force=True)
        if form != 0:
            flows.append((root, form))
    return tuple(flows)


@dataclass(frozen=True, slots=True)
class LinearForm:
    """c_m1·m1 + c_m2·m2 + c_n1·n1 + c_n2·n2 with rational coefficients."""
    root: Root
    coefficients: Tuple[Fraction, Fraction, Fraction, Fraction]

    def evaluate(self, ch: CharacterPair) -> Fraction:
        return sum((c * x for c, x in zip(self.coefficients, ch.as_tuple())), Fraction(0))


def _to_fraction(value: sympy.Expr) -> Fraction:
    value = sympy.nsimplify(value)
    if not value.is_Rational:
        raise InvalidInput(f"coefficient {value} is not rational")
    return Fraction(int(value.p), int(value.q))


def ubar_root_flows(c: CellParams) -> List[LinearForm]:
    """The linear forms of :func:`symbolic_flows` evaluated at the cell's p, r, s."""
    values = {P: c.p, R: c.r, S: c.s}
    forms = []
    for root, expr in symbolic_flows(c.w):
        specialised = sympy.expand(expr.subs(values))
        coefficients = tuple(_to_fraction(specialised.coeff(symbol, 1)) for symbol in CHARACTER_SYMBOLS)
        forms.append(LinearForm(root=root, coefficients=coefficients))
    return forms


@dataclass(frozen=True, slots=True)
class WellDefinednessCondition:
    """Conjunction of linear equalities in (m1, m2, n1, n2) for one cell."""
    cell: CellParams
    forms: Tuple[LinearForm, ...]

    @classmethod
    def for_cell(cls, c: CellParams) -> "WellDefinednessCondition":
        return cls(cell=c, forms=tuple(ubar_root_flows(c)))

    def holds(self, ch: CharacterPair) -> bool:
        return all(form.evaluate(ch) == 0 for form in self.forms)

    def is_vacuous(self) -> bool:
        return not self.forms


def is_well_defined(c: CellParams, ch: CharacterPair) -> bool:
    return WellDefinednessCondition.for_cell(c).holds(ch)


def aux_kl(c: CellParams, ch: CharacterPair) -> KloostermanValue:
    """The auxiliary sum: Kl_p(n, ψ, ψ') when well-defined, otherwise 0."""
    if not is_well_defined(c, ch):
        logger.debug(f"{c.label}: auxiliary sum not well-defined for {ch.as_tuple()}")
        return KloostermanValue(tally=CyclotomicTally.integer(0, c.p), term_count=0)
    return kl(c, ch)


def aux_kl_global(cells: Sequence[Tuple[int, CellParams, CharacterPair]]) -> GlobalKloosterman:
    """Product of local auxiliary sums; zero as soon as one factor is ill-defined."""
    local: Dict[int, KloostermanValue] = {}
    for prime, cell, ch in cells:
        check_prime(prime)
        if prime in local:
            raise InvalidInput(f"prime {prime} appears twice in a global sum")
        if cell.p != prime:
            raise InvalidInput(f"cell {cell.label} listed under prime {prime}")
        local[prime] = aux_kl(cell, ch)
    return GlobalKloosterman(local=local)


# ── Table emission ──────────────────────────────────────────────────


def _describe(expr: sympy.Expr) -> str:
    free = expr.free_symbols
    for symbol in (N1, N2, M1, M2):
        if symbol in free:
            solution = sympy.solve(sympy.Eq(expr, 0), symbol)[0]
            return f"{symbol} = {sympy.sstr(solution)}"
    raise InvalidInput(f"form {expr} involves no character variable")


def welldefinedness_table() -> List[Dict[str, Union[str, List[str]]]]:
    """One row per Weyl word: readable condition and the machine predicate (expressions = 0)."""
    rows = []
    for w in WeylWord:
        exprs = [expr for _, expr in symbolic_flows(w)]
        conditions = sorted(_describe(expr) for expr in exprs)
        rows.append({
            "w": w.value,
            "condition": ", ".join(conditions) if conditions else "-",
            "predicate": sorted(sympy.sstr(expr) for expr in exprs),
        })
    return rows


def render_table_markdown(rows: Sequence[Dict]) -> str:
    lines = ["| w | well-definedness condition |", "|---|---|"]
    lines += [f"| {row['w']} | {row['condition']} |" for row in rows]
    return "\n".join(lines) + "\n"


def emit_table(path: Union[str, Path], fmt: str = "json") -> Path:
    """Write the table as JSON or markdown and return the path written."""
    rows = welldefinedness_table()
    if fmt == "json":
        text = json.dumps(rows, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    elif fmt in ("md", "markdown"):
        text = render_table_markdown(rows)
    else:
        raise InvalidInput(f"unknown table format {fmt!r}")
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    logger.info(f"wrote well-definedness table to {path}")
    return path
