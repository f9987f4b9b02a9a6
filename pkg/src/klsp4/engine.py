import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .bounds import BoundKind
from .harness import (
    GridEntry,
    IdentitySummary,
    check_explicit_budget,
    default_identity_grid,
    evaluate_row,
    run_all_identity_checks,
    sweep,
)
from .models import EngineConfig, ReportRow, SweepConfig
from .oracle import DenominatorCap, OracleCell, enumerate_X, sum_over_cells
from .padic import tally_digest, tally_equal
from .structure import CellParams, CharacterPair
from .sums import KloostermanValue, kl
from .welldefined import aux_kl, welldefinedness_table

logger = logging.getLogger("klsp4.engine")


@dataclass(frozen=True, slots=True)
class OracleDiff:
    cell: CellParams
    characters: CharacterPair
    explicit: KloostermanValue
    oracle: KloostermanValue

    @property
    def equal(self) -> bool:
        return tally_equal(self.explicit.tally, self.oracle.tally)

    def as_dict(self) -> Dict:
        return {
            "cell": self.cell.label,
            "characters": list(self.characters.as_tuple()),
            "equal": self.equal,
            "explicit": {**self.explicit.as_dict(), "digest": tally_digest(self.explicit.tally)},
            "oracle": {**self.oracle.as_dict(), "digest": tally_digest(self.oracle.tally)},
        }


class Sp4Engine:
    """Entry point that owns the term budget, the cap policy and the oracle cache."""

    def __init__(self, config: Optional[EngineConfig] = None):
        """Initialize Sp4Engine.

        Args:
            config (Optional[EngineConfig]): Budget and cap settings. If None, loads from environment.
        """
        self.config = config or EngineConfig.from_env()
        self._oracle_cache: Dict[Tuple[CellParams, int], Tuple[OracleCell, ...]] = {}
        logger.debug(f"engine ready with budget {self.config.budget_terms}")

    @property
    def budget(self) -> int:
        return self.config.budget_terms

    def cap_for(self, cell: CellParams) -> DenominatorCap:
        if self.config.default_cap is not None:
            return DenominatorCap(self.config.default_cap)
        return DenominatorCap.default_for(cell)

    def kl(self, cell: CellParams, chars: CharacterPair) -> KloostermanValue:
        check_explicit_budget(cell, self.budget)
        return kl(cell, chars)

    def compute(self, cell: CellParams, chars: CharacterPair, bound: Optional[BoundKind] = None) -> ReportRow:
        """Evaluate one cell and compare it with its bound.

        Raises:
            BudgetExceeded: If the explicit sum is larger than the term budget.
            InadmissibleCell: If ``bound`` does not apply to the cell.
        """
        return evaluate_row(cell, chars, bound=bound, budget=self.budget)

    def enumerate(self, cell: CellParams) -> Tuple[OracleCell, ...]:
        cap = self.cap_for(cell)
        key = (cell, cap.L)
        if key not in self._oracle_cache:
            self._oracle_cache[key] = enumerate_X(cell, cap, self.budget)
        return self._oracle_cache[key]

    def oracle(self, cell: CellParams, chars: CharacterPair) -> KloostermanValue:
        return sum_over_cells(self.enumerate(cell), chars, cell.p)

    def oracle_diff(self, cell: CellParams, chars: CharacterPair) -> OracleDiff:
        """Closed form and enumeration side by side."""
        diff = OracleDiff(cell=cell, characters=chars, explicit=self.kl(cell, chars), oracle=self.oracle(cell, chars))
        if not diff.equal:
            logger.warning(f"{cell.label} {chars.as_tuple()}: explicit sum and oracle disagree")
        return diff

    def aux(self, cell: CellParams, chars: CharacterPair) -> KloostermanValue:
        check_explicit_budget(cell, self.budget)
        return aux_kl(cell, chars)

    def verify(self, grid: Optional[Sequence[GridEntry]] = None, hat_offset: int = 0) -> IdentitySummary:
        """Run the identity suite on ``grid``, or on the default grid when None."""
        grid = default_identity_grid() if grid is None else grid
        return run_all_identity_checks(grid, hat_offset=hat_offset, budget=self.budget)

    def sweep(self, cfg: SweepConfig) -> List[ReportRow]:
        return sweep(cfg, budget=self.budget)

    def table(self) -> List[Dict]:
        return welldefinedness_table()

    def clear_cache(self) -> None:
        self._oracle_cache.clear()
