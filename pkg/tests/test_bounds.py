import math

import pytest
from klsp4.bounds import BoundKind, BoundValue, bound_value, saturated_ord, weil_bound
from klsp4.exceptions import InadmissibleCell
from klsp4.structure import CellParams, CharacterPair, WeylWord
from klsp4.sums import kl


class TestHelpers:
    def test_saturated_ord(self):
        assert saturated_ord(0, 3, 4) == 4
        assert saturated_ord(18, 3, 4) == 2

    def test_weil_bound(self):
        assert weil_bound(1, 1, 5, 1) == pytest.approx(2 * math.sqrt(5))
        assert weil_bound(5, 0, 5, 2) == pytest.approx(2 * 5 * math.sqrt(5))

    def test_for_word(self):
        assert BoundKind.for_word(WeylWord.S_BETA) is BoundKind.WEIL
        assert BoundKind.for_word(WeylWord.ID) is BoundKind.TRIVIAL
        assert BoundKind.for_word(WeylWord.W0) is BoundKind.W0


class TestBoundValues:
    def test_trivial_applies_everywhere(self, w0_cell, unit_chars):
        assert bound_value(BoundKind.TRIVIAL, w0_cell, unit_chars).value == 4.0

    def test_kind_must_match_word(self, w0_cell, unit_chars):
        with pytest.raises(InadmissibleCell):
            bound_value(BoundKind.SASB, w0_cell, unit_chars)

    def test_long_element(self, w0_cell, unit_chars):
        bound = bound_value(BoundKind.W0, w0_cell, unit_chars)
        assert bound.value == pytest.approx(2 * 2 ** 1.75)
        assert bound.alternate is None

    def test_sbsa(self, unit_chars):
        c = CellParams(WeylWord.S_BETA_S_ALPHA, 3, 1, 2)
        assert bound_value(BoundKind.SBSA, c, unit_chars).value == 9.0

    def test_sasb_with_trivial_characters(self):
        c = CellParams(WeylWord.S_ALPHA_S_BETA, 3, 2, 1)
        assert bound_value(BoundKind.SASB, c, CharacterPair()).value == pytest.approx(27.0)

    def test_sasb_is_attained(self, sasb_cell):
        ch = CharacterPair(m1=1, m2=1, n1=0, n2=1)
        bound = bound_value(BoundKind.SASB, sasb_cell, ch)
        assert bound.value == 3.0
        assert kl(sasb_cell, ch).magnitude <= bound.value + 1e-9

    def test_sasbsa_boundary_has_alternate(self, unit_chars):
        c = CellParams(WeylWord.S_ALPHA_S_BETA_S_ALPHA, 3, 1, 1)
        assert bound_value(BoundKind.SASBSA, c, unit_chars).alternate is not None

    def test_sasbsa_interior(self, unit_chars):
        c = CellParams(WeylWord.S_ALPHA_S_BETA_S_ALPHA, 3, 2, 3)
        assert bound_value(BoundKind.SASBSA, c, unit_chars).alternate is None

    def test_as_dict(self):
        assert BoundValue(BoundKind.WEIL, 2.0).as_dict() == {"id": "weil", "value": 2.0, "alternate": None}
