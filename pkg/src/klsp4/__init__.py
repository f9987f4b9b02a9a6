import logging

from .engine import OracleDiff, Sp4Engine
from .models import EngineConfig, ReportRow, SweepConfig
from .structure import CellParams, CharacterPair, WeylWord
from .sums import KloostermanValue, kl, kl_global
from .exceptions import (
    Klsp4Exception,
    ConfigurationException,
    InvalidInput,
    NotInvertible,
    InadmissibleCell,
    BudgetExceeded,
    IdentityViolation,
)
from .api import (
    get_engine,
    kloosterman,
    compute,
    oracle,
    oracle_diff,
    verify,
    sweep,
    table,
)

logging.getLogger("klsp4").addHandler(logging.NullHandler())

__all__ = [
    'Sp4Engine',
    'OracleDiff',
    'EngineConfig',
    'SweepConfig',
    'ReportRow',
    'CellParams',
    'CharacterPair',
    'WeylWord',
    'KloostermanValue',
    'kl',
    'kl_global',
    'Klsp4Exception',
    'ConfigurationException',
    'InvalidInput',
    'NotInvertible',
    'InadmissibleCell',
    'BudgetExceeded',
    'IdentityViolation',
    'get_engine',
    'kloosterman',
    'compute',
    'oracle',
    'oracle_diff',
    'verify',
    'sweep',
    'table',
]
