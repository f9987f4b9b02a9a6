from typing import List, Optional, Dict, Tuple, Any, Mapping
from dataclasses import dataclass, asdict
from itertools import product
from pathlib import Path
import os
import tomllib

from dotenv import load_dotenv
from dacite import Config as DaciteConfig, DaciteError, from_dict

from .bounds import BoundKind
from .exceptions import ConfigurationException
from .structure import CharacterPair, WeylWord

# Load environment variables from .env file
load_dotenv()

DEFAULT_BUDGET_TERMS = 2_000_000

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(slots=True, kw_only=True)
class EngineConfig:
    budget_terms: int = DEFAULT_BUDGET_TERMS
    default_cap: Optional[int] = None
    log_level: str = "WARNING"

    def __post_init__(self):
        if self.budget_terms <= 0:
            raise ConfigurationException(f"budget_terms must be positive, got {self.budget_terms}")
        if self.default_cap is not None and self.default_cap < 0:
            raise ConfigurationException(f"default_cap must be >= 0, got {self.default_cap}")
        self.log_level = self.log_level.upper()
        if self.log_level not in LOG_LEVELS:
            raise ConfigurationException(f"Unknown log level {self.log_level!r}")

    @classmethod
    def from_env(cls) -> "EngineConfig":
        """Build a config from KLSP4_BUDGET, KLSP4_CAP and KLSP4_LOG_LEVEL.

        Returns:
            EngineConfig: Defaults for every variable that is not set

        Raises:
            ConfigurationException: If a variable is set to an invalid value
        """
        budget = os.getenv("KLSP4_BUDGET")
        cap = os.getenv("KLSP4_CAP")
        log_level = os.getenv("KLSP4_LOG_LEVEL", "WARNING")
        try:
            budget_terms = int(budget) if budget else DEFAULT_BUDGET_TERMS
            default_cap = int(cap) if cap else None
        except ValueError as e:
            raise ConfigurationException(f"Invalid KLSP4_* value: {str(e)}")
        return cls(budget_terms=budget_terms, default_cap=default_cap, log_level=log_level)


@dataclass(slots=True, kw_only=True)
class SweepConfig:
    """A grid of cells and characters to evaluate, as read from TOML."""
    primes: Tuple[int, ...] = ()
    words: Tuple[str, ...] = ()
    r_max: int = 1
    s_max: int = 1
    characters: Tuple[Tuple[int, ...], ...] = ()
    character_values: Tuple[int, ...] = ()
    bound: Optional[str] = None
    budget_terms: Optional[int] = None
    jsonl_path: Optional[str] = None
    csv_path: Optional[str] = None
    include_timing: bool = False

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SweepConfig":
        try:
            config = from_dict(data_class=cls, data=dict(data), config=DACITE_CONFIG)
        except DaciteError as e:
            raise ConfigurationException(f"Invalid sweep config: {str(e)}")
        config.validate()
        return config

    @classmethod
    def from_toml(cls, path: str | Path) -> "SweepConfig":
        try:
            with open(path, "rb") as handle:
                data = tomllib.load(handle)
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise ConfigurationException(f"Cannot read sweep config {path}: {str(e)}")
        return cls.from_mapping(data)

    def validate(self) -> None:
        for word in self.words:
            try:
                WeylWord.parse(word)
            except ValueError as e:
                raise ConfigurationException(str(e))
        for chars in self.characters:
            if len(chars) != 4:
                raise ConfigurationException(f"characters need four entries (m1, m2, n1, n2), got {list(chars)}")
        if self.r_max < 0 or self.s_max < 0:
            raise ConfigurationException("r_max and s_max must be >= 0")
        if self.bound is not None and self.bound not in {kind.value for kind in BoundKind}:
            raise ConfigurationException(f"Unknown bound {self.bound!r}")

    def weyl_words(self) -> List[WeylWord]:
        return [WeylWord.parse(word) for word in self.words]

    def character_pairs(self) -> List[CharacterPair]:
        """Explicit characters followed by the full grid over ``character_values``, deduplicated."""
        tuples = [tuple(chars) for chars in self.characters]
        tuples += list(product(self.character_values, repeat=4))
        return [CharacterPair(*chars) for chars in dict.fromkeys(tuples)]


@dataclass(slots=True, kw_only=True)
class ReportRow:
    cell: str
    w: str
    p: int
    r: int
    s: int
    m1: int
    m2: int
    n1: int
    n2: int
    magnitude: Optional[float] = None
    tally_digest: Optional[str] = None
    term_count: Optional[int] = None
    bound_id: Optional[str] = None
    bound: Optional[float] = None
    bound_alternate: Optional[float] = None
    ratio: Optional[float] = None
    elapsed_ms: Optional[float] = None
    error: Optional[str] = None

    @property
    def sort_key(self) -> Tuple:
        return (self.p, self.w, self.r, self.s, self.m1, self.m2, self.n1, self.n2)

    @property
    def ok(self) -> bool:
        return self.error is None

    def as_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        data = asdict(self)
        if not include_timing:
            data.pop("elapsed_ms")
        return data

    def __repr__(self) -> str:
        if self.error:
            return f"ReportRow({self.cell} {self.m1, self.m2, self.n1, self.n2} error={self.error})"
        return f"ReportRow({self.cell} {self.m1, self.m2, self.n1, self.n2} |Kl|={self.magnitude} ratio={self.ratio})"


REPORT_FIELDS = [name for name in ReportRow.__dataclass_fields__]

DACITE_CONFIG = DaciteConfig(
    cast=[tuple],
    strict=True,
)
