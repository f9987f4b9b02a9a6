import itertools
import json
from pathlib import Path

import pytest
import sympy
from klsp4.exceptions import InvalidInput
from klsp4.oracle import enumerate_X, sum_over_cells
from klsp4.padic import tally_equal
from klsp4.structure import CellParams, CharacterPair, WeylWord
from klsp4.sums import kl
from klsp4.welldefined import (
    M1, M2, N1, N2, P, R, S,
    WellDefinednessCondition,
    aux_kl,
    aux_kl_global,
    emit_table,
    is_well_defined,
    render_table_markdown,
    ubar_root_flows,
    welldefinedness_table,
)

FIXTURE = Path(__file__).parent / "fixtures" / "welldefinedness_table.json"

CHARACTER_VALUES = (0, 1, 3)


def _admissible_cells():
    for w in WeylWord:
        for p, r, s in itertools.product((2, 3), range(3), range(3)):
            try:
                yield CellParams(w, p, r, s)
            except InvalidInput:
                continue


@pytest.fixture(scope="module")
def reference_table():
    with open(FIXTURE, encoding="utf-8") as f:
        raw = json.load(f)
    symbols = {"p": P, "r": R, "s": S, "m1": M1, "m2": M2, "n1": N1, "n2": N2}
    return {w: [sympy.sympify(expr, locals=symbols) for expr in exprs] for w, exprs in raw.items()}


class TestWellDefinedness:
    def test_matches_reference_table(self, reference_table):
        for c in _admissible_cells():
            condition = WellDefinednessCondition.for_cell(c)
            exprs = [expr.subs({P: c.p, R: c.r, S: c.s}) for expr in reference_table[c.w.value]]
            for chars in itertools.product(CHARACTER_VALUES, repeat=4):
                ch = CharacterPair(*chars)
                values = {M1: ch.m1, M2: ch.m2, N1: ch.n1, N2: ch.n2}
                expected = all(sympy.simplify(expr.subs(values)) == 0 for expr in exprs)
                assert condition.holds(ch) == expected, f"{c.label} {chars}"

    def test_long_element_is_vacuous(self, w0_cell):
        assert WellDefinednessCondition.for_cell(w0_cell).is_vacuous()

    def test_root_flows(self, w0_cell):
        assert ubar_root_flows(w0_cell) == []
        assert len(ubar_root_flows(CellParams(WeylWord.ID, 3, 0, 0))) == 2

    def test_sasbsa_at_equal_exponents(self):
        c = CellParams(WeylWord.S_ALPHA_S_BETA_S_ALPHA, 3, 1, 1)
        assert is_well_defined(c, CharacterPair(m1=2, m2=1, n1=0, n2=1))
        assert not is_well_defined(c, CharacterPair(m1=2, m2=1, n1=0, n2=2))

    def test_sbsasb_with_fractional_scale(self):
        # s - 2r = -1 asks for n1 = m1 / p
        c = CellParams(WeylWord.S_BETA_S_ALPHA_S_BETA, 3, 1, 1)
        assert is_well_defined(c, CharacterPair(m1=3, n1=1))
        assert not is_well_defined(c, CharacterPair(m1=1, n1=1))


class TestAuxiliarySums:
    def test_ill_defined_sum_is_zero(self, sa_cell):
        value = aux_kl(sa_cell, CharacterPair(m1=1, m2=1, n1=1, n2=0))
        assert value.tally.is_zero()
        assert value.term_count == 0

    def test_well_defined_sum_is_the_kloosterman_sum(self, sa_cell):
        ch = CharacterPair(m1=1, n1=2)
        assert tally_equal(aux_kl(sa_cell, ch).tally, kl(sa_cell, ch).tally)

    @pytest.mark.parametrize("c", [
        c for c in _admissible_cells() if c.p == 2 and c.r <= 1 and c.s <= 1
    ], ids=lambda c: c.label)
    def test_agrees_with_oracle_when_well_defined(self, c):
        cells = enumerate_X(c)
        for chars in itertools.product((0, 1, 2), repeat=4):
            ch = CharacterPair(*chars)
            value = aux_kl(c, ch)
            if is_well_defined(c, ch):
                assert tally_equal(value.tally, sum_over_cells(cells, ch, c.p).tally), chars
            else:
                assert value.tally.is_zero(), chars

    def test_global_product(self, sa_cell, sasb_cell):
        g = aux_kl_global([
            (5, sa_cell, CharacterPair(m1=1, n1=1)),
            (3, sasb_cell, CharacterPair(m1=1, m2=1, n2=1)),
        ])
        assert g.is_zero()
        assert g.local[5].magnitude == pytest.approx(0.381966, abs=1e-6)

    def test_global_repeated_prime(self, sa_cell):
        with pytest.raises(InvalidInput):
            aux_kl_global([(5, sa_cell, CharacterPair()), (5, sa_cell, CharacterPair())])


# ── Table output ────────────────────────────────────────────────────

class TestTable:
    def test_rows(self):
        rows = {row["w"]: row for row in welldefinedness_table()}
        assert list(rows) == [w.value for w in WeylWord]
        assert rows["id"]["condition"] == "n1 = m1, n2 = m2"
        assert rows["sa"]["condition"] == "m2 = 0, n2 = 0"
        assert rows["w0"]["condition"] == "-"
        assert rows["w0"]["predicate"] == []

    def test_markdown(self):
        text = render_table_markdown(welldefinedness_table())
        lines = text.splitlines()
        assert lines[0] == "| w | well-definedness condition |"
        assert "| w0 | - |" in lines
        assert len(lines) == 2 + len(WeylWord)

    def test_emit_json(self, tmp_path):
        path = emit_table(tmp_path / "table.json")
        rows = json.loads(path.read_text(encoding="utf-8"))
        assert [row["w"] for row in rows] == [w.value for w in WeylWord]

    def test_emit_is_deterministic(self, tmp_path):
        first = emit_table(tmp_path / "a.md", fmt="md").read_bytes()
        second = emit_table(tmp_path / "b.md", fmt="md").read_bytes()
        assert first == second

    def test_unknown_format(self, tmp_path):
        with pytest.raises(InvalidInput):
            emit_table(tmp_path / "table.txt", fmt="txt")
