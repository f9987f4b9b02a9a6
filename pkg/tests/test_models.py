import os

import pytest
from klsp4.exceptions import ConfigurationException
from klsp4.models import (
    DEFAULT_BUDGET_TERMS,
    REPORT_FIELDS,
    EngineConfig,
    ReportRow,
    SweepConfig,
)
from klsp4.structure import CharacterPair, WeylWord

SWEEP_TOML = """
primes = [3, 2]
words = ["sasb", "w0"]
r_max = 2
s_max = 1
characters = [[1, 1, 1, 1]]
character_values = [0, 1]
bound = "trivial"
"""


class TestEngineConfig:
    def test_defaults(self):
        config = EngineConfig()
        assert config.budget_terms == DEFAULT_BUDGET_TERMS
        assert config.default_cap is None
        assert config.log_level == "WARNING"

    def test_log_level_is_normalised(self):
        assert EngineConfig(log_level="debug").log_level == "DEBUG"

    @pytest.mark.parametrize("kwargs", [
        {"budget_terms": 0},
        {"default_cap": -1},
        {"log_level": "chatty"},
    ])
    def test_invalid_values(self, kwargs):
        with pytest.raises(ConfigurationException):
            EngineConfig(**kwargs)

    def test_from_env(self, mocker):
        mocker.patch.dict(os.environ, {"KLSP4_BUDGET": "5000", "KLSP4_CAP": "3", "KLSP4_LOG_LEVEL": "info"})
        config = EngineConfig.from_env()
        assert config.budget_terms == 5000
        assert config.default_cap == 3
        assert config.log_level == "INFO"

    def test_from_env_defaults(self):
        assert EngineConfig.from_env() == EngineConfig()

    def test_from_env_rejects_garbage(self, mocker):
        mocker.patch.dict(os.environ, {"KLSP4_BUDGET": "lots"})
        with pytest.raises(ConfigurationException):
            EngineConfig.from_env()


class TestSweepConfig:
    def test_from_toml(self, tmp_path):
        path = tmp_path / "sweep.toml"
        path.write_text(SWEEP_TOML, encoding="utf-8")
        cfg = SweepConfig.from_toml(path)
        assert cfg.primes == (3, 2)
        assert cfg.characters == ((1, 1, 1, 1),)
        assert cfg.weyl_words() == [WeylWord.S_ALPHA_S_BETA, WeylWord.W0]
        assert cfg.bound == "trivial"
        assert cfg.include_timing is False

    def test_character_pairs(self):
        cfg = SweepConfig(characters=((1, 1, 1, 1), (1, 0, 1, 0)), character_values=(0, 1))
        pairs = cfg.character_pairs()
        assert pairs[:2] == [CharacterPair(1, 1, 1, 1), CharacterPair(1, 0, 1, 0)]
        assert len(pairs) == 16
        assert len(set(pairs)) == 16

    def test_unknown_key(self):
        with pytest.raises(ConfigurationException):
            SweepConfig.from_mapping({"primes": [2], "prime_list": [3]})

    def test_wrong_type(self):
        with pytest.raises(ConfigurationException):
            SweepConfig.from_mapping({"primes": "2, 3"})

    @pytest.mark.parametrize("data", [
        {"words": ["sasa"]},
        {"characters": [[1, 1, 1]]},
        {"r_max": -1},
        {"bound": "sharp"},
    ])
    def test_validation(self, data):
        with pytest.raises(ConfigurationException):
            SweepConfig.from_mapping(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationException):
            SweepConfig.from_toml(tmp_path / "missing.toml")

    def test_malformed_toml(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("primes = [2,", encoding="utf-8")
        with pytest.raises(ConfigurationException):
            SweepConfig.from_toml(path)


class TestReportRow:
    def test_fields(self):
        assert REPORT_FIELDS[:5] == ["cell", "w", "p", "r", "s"]
        assert REPORT_FIELDS[-1] == "error"

    def test_timing_is_optional(self):
        row = ReportRow(cell="id(p=2, r=0, s=0)", w="id", p=2, r=0, s=0, m1=0, m2=0, n1=0, n2=0, elapsed_ms=1.5)
        assert row.as_dict()["elapsed_ms"] == 1.5
        assert "elapsed_ms" not in row.as_dict(include_timing=False)

    def test_sort_key_orders_by_prime_first(self):
        a = ReportRow(cell="a", w="w0", p=2, r=1, s=1, m1=0, m2=0, n1=0, n2=0)
        b = ReportRow(cell="b", w="id", p=3, r=0, s=0, m1=0, m2=0, n1=0, n2=0)
        assert sorted([b, a], key=lambda row: row.sort_key) == [a, b]

    def test_repr(self):
        row = ReportRow(cell="id(p=2, r=0, s=0)", w="id", p=2, r=0, s=0, m1=0, m2=0, n1=0, n2=0, error="boom")
        assert not row.ok
        assert "error=boom" in repr(row)
