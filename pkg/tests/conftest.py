import pytest
from klsp4.models import EngineConfig
from klsp4.padic import PrimePower
from klsp4.structure import CellParams, CharacterPair, WeylWord


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep KLSP4_* variables from a local .env out of the tests."""
    for name in ("KLSP4_BUDGET", "KLSP4_CAP", "KLSP4_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def engine_config():
    return EngineConfig(budget_terms=200_000)


@pytest.fixture
def unit_chars():
    return CharacterPair(m1=1, m2=1, n1=1, n2=1)


# ── Small cells used across modules ─────────────────────────────────

@pytest.fixture
def sa_cell():
    return CellParams(WeylWord.S_ALPHA, 5, 1, 0)


@pytest.fixture
def sasb_cell():
    return CellParams(WeylWord.S_ALPHA_S_BETA, 3, 1, 1)


@pytest.fixture
def w0_cell():
    return CellParams(WeylWord.W0, 2, 1, 1)


@pytest.fixture
def mod9():
    return PrimePower(3, 2)
