from typing import Optional, Dict, List, Sequence
from contextlib import contextmanager
from .bounds import BoundKind
from .engine import OracleDiff, Sp4Engine
from .harness import GridEntry, IdentitySummary
from .models import EngineConfig, ReportRow, SweepConfig
from .structure import CellParams, CharacterPair
from .sums import KloostermanValue

@contextmanager
def get_engine(config: Optional[EngineConfig] = None) -> Sp4Engine:
    """Context manager to handle engine creation and cleanup."""
    engine = Sp4Engine(config=config)
    try:
        yield engine
    finally:
        engine.clear_cache()

def kloosterman(cell: CellParams,
                chars: CharacterPair,
                engine: Optional[Sp4Engine] = None) -> KloostermanValue:
    """Exact Kl_p(n_{w,r,s}, ψ, ψ') from the closed form."""
    if engine is None:
        with get_engine() as new_engine:
            return new_engine.kl(cell, chars)
    return engine.kl(cell, chars)

def compute(cell: CellParams,
            chars: CharacterPair,
            bound: Optional[BoundKind] = None,
            engine: Optional[Sp4Engine] = None) -> ReportRow:
    """Evaluate a cell against its bound."""
    if engine is None:
        with get_engine() as new_engine:
            return new_engine.compute(cell, chars, bound)
    return engine.compute(cell, chars, bound)

def oracle(cell: CellParams,
           chars: CharacterPair,
           engine: Optional[Sp4Engine] = None) -> KloostermanValue:
    """Kl_p summed by enumerating the double cosets."""
    if engine is None:
        with get_engine() as new_engine:
            return new_engine.oracle(cell, chars)
    return engine.oracle(cell, chars)

def oracle_diff(cell: CellParams,
                chars: CharacterPair,
                engine: Optional[Sp4Engine] = None) -> OracleDiff:
    """Compare the closed form with the enumeration."""
    if engine is None:
        with get_engine() as new_engine:
            return new_engine.oracle_diff(cell, chars)
    return engine.oracle_diff(cell, chars)

def verify(grid: Optional[Sequence[GridEntry]] = None,
           hat_offset: int = 0,
           engine: Optional[Sp4Engine] = None) -> IdentitySummary:
    """Run the identity suite."""
    if engine is None:
        with get_engine() as new_engine:
            return new_engine.verify(grid, hat_offset)
    return engine.verify(grid, hat_offset)

def sweep(cfg: SweepConfig,
          engine: Optional[Sp4Engine] = None) -> List[ReportRow]:
    """Evaluate a grid of cells and characters."""
    if engine is None:
        with get_engine() as new_engine:
            return new_engine.sweep(cfg)
    return engine.sweep(cfg)

def table(engine: Optional[Sp4Engine] = None) -> List[Dict]:
    """Well-definedness conditions of the auxiliary sums, one row per Weyl word."""
    if engine is None:
        with get_engine() as new_engine:
            return new_engine.table()
    return engine.table()
