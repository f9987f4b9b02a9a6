"""Closed-form upper bounds for |Kl_p(n_{w,r,s}, ψ, ψ')|, without implied constants."""
import enum
import logging
from dataclasses import dataclass
from typing import Dict, Optional

from .exceptions import InadmissibleCell
from .padic import valuation
from .structure import CellParams, CharacterPair, WeylWord

logger = logging.getLogger("klsp4.bounds")


class BoundKind(enum.Enum):
    TRIVIAL = "trivial"
    WEIL = "weil"
    SASB = "sasb"
    SBSA = "sbsa"
    SASBSA = "sasbsa"
    SBSASB = "sbsasb"
    W0 = "w0"

    @classmethod
    def for_word(cls, w: WeylWord) -> "BoundKind":
        """The sharpest bound recorded for a cell family."""
        return {
            WeylWord.ID: cls.TRIVIAL,
            WeylWord.S_ALPHA: cls.WEIL,
            WeylWord.S_BETA: cls.WEIL,
            WeylWord.S_ALPHA_S_BETA: cls.SASB,
            WeylWord.S_BETA_S_ALPHA: cls.SBSA,
            WeylWord.S_ALPHA_S_BETA_S_ALPHA: cls.SASBSA,
            WeylWord.S_BETA_S_ALPHA_S_BETA: cls.SBSASB,
            WeylWord.W0: cls.W0,
        }[w]


@dataclass(frozen=True, slots=True)
class BoundValue:
    """``alternate`` holds the adjacent branch on the boundary of a case split."""
    kind: BoundKind
    value: float
    alternate: Optional[float] = None

    def as_dict(self) -> Dict:
        return {"id": self.kind.value, "value": self.value, "alternate": self.alternate}


def saturated_ord(m: int, p: int, cap: int) -> int:
    """ord_p(m), with ord_p(0) read as ``cap`` so that (0, p^cap) = p^cap."""
    if m == 0:
        return cap
    return int(valuation(m, p))


def weil_bound(m: int, n: int, p: int, k: int) -> float:
    """2·p^(k/2)·(m, n, p^k)^(1/2) for S(m, n; p^k)."""
    common = min(saturated_ord(m, p, k), saturated_ord(n, p, k), k)
    return 2 * p ** (k / 2) * p ** (common / 2)


def _sasbsa_cases(p: int, r: int, s: int, o: Dict[str, int]):
    low = r / 3 + 2 * s / 3 + 2 / 3 * min(o["m1"] + s, o["n1"] + r) + o["m2"] / 3
    tail = p ** (r + min(o["m2"], r + o["n1"]))
    middle = tail + p ** (r + min(s / 2 + o["m1"], r - s / 2 + o["n1"]))
    return p ** low, middle, tail


def _sbsasb_cases(p: int, r: int, s: int, o: Dict[str, int]):
    shared = o["m1"] / 2 + min(2 * r + o["m2"], s + o["n2"]) / 2
    low = p ** (s / 2 + r / 2 + shared)
    middle = p ** (s - r / 2 + shared)
    top = p ** (s + min(o["m1"], o["n2"]))
    return low, middle, top


def bound_value(kind: BoundKind, c: CellParams, ch: CharacterPair) -> BoundValue:
    """Evaluate a bound at a cell.

    Args:
        kind (BoundKind): Which bound.
        c (CellParams): The cell; must belong to the bound's family.
        ch (CharacterPair): Characters ψ = ψ_{m1,m2}, ψ' = ψ_{n1,n2}.

    Returns:
        BoundValue: The right-hand side and, on a case boundary, the neighbouring case.

    Raises:
        InadmissibleCell: If ``kind`` does not apply to the cell's Weyl word.
    """
    p, r, s = c.p, c.r, c.s
    o = {
        "m1": saturated_ord(ch.m1, p, r),
        "n1": saturated_ord(ch.n1, p, r),
        "m2": saturated_ord(ch.m2, p, s),
        "n2": saturated_ord(ch.n2, p, s),
    }
    expected = BoundKind.for_word(c.w)
    if kind is not BoundKind.TRIVIAL and kind is not expected:
        raise InadmissibleCell(f"bound {kind.value} does not apply to {c.label}")

    if kind is BoundKind.TRIVIAL:
        return BoundValue(kind, float(p ** (r + s)))
    if kind is BoundKind.WEIL:
        if c.w is WeylWord.S_ALPHA:
            return BoundValue(kind, weil_bound(ch.m1, ch.n1, p, r))
        return BoundValue(kind, weil_bound(ch.m2, ch.n2, p, s))
    if kind is BoundKind.SASB:
        first = p ** (2 * s) * p ** min(o["m1"], r - s)
        second = p ** r * p ** (min(o["m2"], s) / 2) * p ** (min(o["n2"], s) / 2)
        return BoundValue(kind, float(min(first, second)))
    if kind is BoundKind.SBSA:
        first = p ** (3 * r) * p ** min(o["m2"], s - 2 * r)
        second = p ** s * p ** min(o["m1"], o["n1"], r)
        return BoundValue(kind, float(min(first, second)))
    if kind is BoundKind.SASBSA:
        low, middle, tail = _sasbsa_cases(p, r, s, o)
        if s <= r:
            alternate = middle if s == r else None
            if s == 2 * r:
                alternate = tail
            return BoundValue(kind, float(low), alternate)
        if s < 2 * r:
            return BoundValue(kind, float(middle))
        return BoundValue(kind, float(tail), float(middle))
    if kind is BoundKind.SBSASB:
        low, middle, top = _sbsasb_cases(p, r, s, o)
        if 2 * r <= s and r != s:
            return BoundValue(kind, float(low), float(middle) if 2 * r == s else None)
        if r < s:
            return BoundValue(kind, float(middle))
        return BoundValue(kind, float(top), float(middle))
    prefactor = min(p ** ((o["m1"] + o["m2"]) / 2), p ** ((o["n1"] + o["n2"]) / 2))
    return BoundValue(kind, float(prefactor * (s + 1) * p ** (r / 2 + 3 * s / 4 + min(r, s) / 2)))
