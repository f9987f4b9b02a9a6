import json
import math

import pytest
from klsp4.exceptions import InadmissibleCell, InvalidInput
from klsp4.bounds import weil_bound
from klsp4.padic import PrimePower, tally_digest, tally_equal, tally_magnitude, tally_scale
from klsp4.structure import CellParams, CharacterPair, WeylWord
from klsp4.sums import (
    estimated_terms,
    gauss_quadratic,
    gl2_kloosterman,
    kl,
    kl_ab,
    kl_ab_gauss,
    kl_ab_mixed,
    kl_ba,
    kl_global,
    kl_rank1,
    kl_w0,
    ramanujan,
    sasb_vanishes,
    solve_hat,
)


# ── Classical sums ──────────────────────────────────────────────────

class TestClassicalSums:
    def test_kloosterman_with_trivial_characters(self):
        assert gl2_kloosterman(0, 0, PrimePower(5, 1)).as_integer() == 4

    def test_kloosterman_value(self):
        # 2 + e(2/5) + e(3/5)
        assert tally_magnitude(gl2_kloosterman(1, 1, PrimePower(5, 1))) == pytest.approx(0.381966, abs=1e-6)

    def test_modulus_one(self):
        assert gl2_kloosterman(3, 4, PrimePower(7, 0)).as_integer() == 1
        assert ramanujan(PrimePower(7, 0), 3).as_integer() == 1

    @pytest.mark.parametrize("m", range(1, 7))
    @pytest.mark.parametrize("n", range(1, 7))
    def test_weil_bound(self, m, n):
        assert tally_magnitude(gl2_kloosterman(m, n, PrimePower(7, 1))) <= 2 * math.sqrt(7) + 1e-9

    def test_ramanujan(self):
        assert ramanujan(PrimePower(2, 2), 2).as_integer() == -2
        assert ramanujan(PrimePower(5, 1), 0).as_integer() == 4
        assert ramanujan(PrimePower(3, 2), 1).is_zero()

    def test_gauss_sums(self):
        assert gauss_quadratic(0, PrimePower(3, 2)).as_integer() == 9
        assert gauss_quadratic(1, PrimePower(2, 1)).is_zero()
        assert tally_magnitude(gauss_quadratic(1, PrimePower(5, 1))) == pytest.approx(math.sqrt(5))

    def test_integer_prime_power_modulus(self):
        assert tally_equal(gl2_kloosterman(1, 1, 25), gl2_kloosterman(1, 1, PrimePower(5, 2)))
        assert tally_equal(ramanujan(9, 3), ramanujan(PrimePower(3, 2), 3))
        assert tally_equal(gauss_quadratic(1, 8), gauss_quadratic(1, PrimePower(2, 3)))

    @pytest.mark.parametrize("modulus", [6, 12, 1, 0, -4, 2.0, True])
    def test_composite_modulus_is_rejected(self, modulus):
        with pytest.raises(InvalidInput):
            gl2_kloosterman(1, 1, modulus)
        with pytest.raises(InvalidInput):
            ramanujan(modulus, 1)

    @pytest.mark.parametrize("m,n,k,expected", [(3, 3, 6, 22.19), (3, 1, 5, 14.78), (-3, -1, 5, 14.78)])
    def test_weil_bound_fails_at_two(self, m, n, k, expected):
        # 2·2^(k/2)·(m, n, 2^k)^(1/2) is exceeded at p = 2
        magnitude = tally_magnitude(gl2_kloosterman(m, n, PrimePower(2, k)))
        assert magnitude == pytest.approx(expected, abs=0.01)
        assert magnitude > weil_bound(m, n, 2, k)

    @pytest.mark.parametrize("k", range(1, 5))
    @pytest.mark.parametrize("m", range(-4, 5))
    @pytest.mark.parametrize("n", range(-4, 5))
    def test_weil_bound_at_three(self, m, n, k):
        magnitude = tally_magnitude(gl2_kloosterman(m, n, PrimePower(3, k)))
        assert magnitude <= weil_bound(m, n, 3, k) * (1 + 1e-6)


class TestHatSolution:
    def test_solution_satisfies_its_constraints(self, mod9):
        hat = solve_hat([(3, 6), (1, 5)], mod9)
        assert hat.value.value == 5
        assert hat.satisfies_constraints()

    def test_unsolvable(self, mod9):
        assert not solve_hat([(3, 6), (1, 4)], mod9)


# ── Cell evaluators ─────────────────────────────────────────────────

class TestCellEvaluators:
    @pytest.mark.parametrize("w", list(WeylWord))
    def test_trivial_cell_is_one(self, w):
        value = kl(CellParams(w, 3, 0, 0), CharacterPair(m1=1, m2=2, n1=1, n2=2))
        assert value.tally.as_integer() == 1
        assert value.skipped_unsolvable == 0

    def test_rank_one_cells(self, sa_cell):
        value = kl_rank1(sa_cell, CharacterPair(m1=1, n1=1))
        assert value.magnitude == pytest.approx(0.381966, abs=1e-6)
        assert value.term_count == 4

    def test_sasb_value(self, sasb_cell):
        value = kl_ab(sasb_cell, CharacterPair(m1=1, m2=1, n1=0, n2=1))
        assert value.tally.as_integer() == -3
        assert value.term_count == 6

    def test_sasb_gauss_form_agrees(self, sasb_cell):
        ch = CharacterPair(m1=1, m2=1, n1=0, n2=1)
        assert tally_equal(kl_ab_gauss(sasb_cell, ch).tally, kl_ab(sasb_cell, ch).tally)

    def test_sasb_gauss_form_needs_equal_exponents(self):
        with pytest.raises(InvalidInput):
            kl_ab_gauss(CellParams(WeylWord.S_ALPHA_S_BETA, 3, 2, 1), CharacterPair())

    def test_sasb_with_s_zero_is_ramanujan(self):
        c = CellParams(WeylWord.S_ALPHA_S_BETA, 3, 2, 0)
        ch = CharacterPair(m1=3, m2=1, n1=1, n2=1)
        assert tally_equal(kl_ab(c, ch).tally, ramanujan(PrimePower(3, 2), 3))

    def test_sbsa_with_r_zero_is_ramanujan(self):
        c = CellParams(WeylWord.S_BETA_S_ALPHA, 5, 0, 1)
        ch = CharacterPair(m1=2, m2=1, n1=3, n2=4)
        assert tally_equal(kl_ba(c, ch).tally, ramanujan(PrimePower(5, 1), 1))

    @pytest.mark.parametrize("cell,chars,reduced,reduced_chars,factor", [
        ((3, 1), (2, 1, 1, 1), (2, 1), (1, 1, 1, 1), 2),
        ((3, 2), (2, 2, 1, 2), (2, 1), (2, 1, 1, 1), 4),
    ])
    def test_sasb_scaling(self, cell, chars, reduced, reduced_chars, factor):
        big = kl(CellParams(WeylWord.S_ALPHA_S_BETA, 2, *cell), CharacterPair(*chars))
        small = kl(CellParams(WeylWord.S_ALPHA_S_BETA, 2, *reduced), CharacterPair(*reduced_chars))
        assert tally_equal(big.tally, tally_scale(small.tally, factor))

    def test_sasb_scaling_fails_when_coprimality_is_lost(self):
        # c_3(3) = 2, not 3·c_1(1)
        big = kl(CellParams(WeylWord.S_ALPHA_S_BETA, 3, 1, 0), CharacterPair(m1=3))
        small = kl(CellParams(WeylWord.S_ALPHA_S_BETA, 3, 0, 0), CharacterPair(m1=1))
        assert big.tally.as_integer() == 2
        assert not tally_equal(big.tally, tally_scale(small.tally, 3))

    def test_wrong_word(self, w0_cell):
        with pytest.raises(InadmissibleCell):
            kl_ab(w0_cell, CharacterPair())

    def test_dispatch(self, sasb_cell):
        ch = CharacterPair(m1=1, m2=2, n1=0, n2=1)
        assert tally_equal(kl(sasb_cell, ch).tally, kl_ab(sasb_cell, ch).tally)

    def test_as_dict(self, sasb_cell):
        data = kl(sasb_cell, CharacterPair(m1=1, m2=1, n2=1)).as_dict()
        assert data["level"] == 0
        assert data["counts"] == [[0, -3]]
        assert data["magnitude"] == 3.0

    def test_as_dict_is_plain_json(self):
        c = CellParams(WeylWord.S_ALPHA_S_BETA, 3, 2, 1)
        value = kl(c, CharacterPair(m1=1, m2=2, n2=1))
        data = value.as_dict()
        assert type(data["level"]) is int
        assert all(type(x) is int for pair in data["counts"] for x in pair)
        json.dumps(data)
        assert len(tally_digest(value.tally)) == 64

    @pytest.mark.parametrize("w,p,r,s", [
        (WeylWord.S_ALPHA_S_BETA, 3, 2, 1),
        (WeylWord.S_BETA_S_ALPHA, 2, 1, 2),
        (WeylWord.S_ALPHA_S_BETA_S_ALPHA, 3, 1, 2),
        (WeylWord.S_BETA_S_ALPHA_S_BETA, 2, 1, 2),
        (WeylWord.W0, 2, 1, 1),
    ])
    def test_term_count_within_estimate(self, w, p, r, s):
        c = CellParams(w, p, r, s)
        assert kl(c, CharacterPair(m1=1, m2=1, n1=1, n2=1)).term_count <= estimated_terms(c)


# ── Degenerate cells and special sαsβ forms ─────────────────────────

REDUCTION_CHARS = [(1, 1, 1, 1), (2, 1, 0, 3), (0, 2, 1, 0), (4, 3, 2, 1)]

REDUCTION_MODULI = [
    (2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (5, 1),
    pytest.param(3, 3, marks=pytest.mark.slow),
    pytest.param(5, 2, marks=pytest.mark.slow),
]


def _reductions(p, k, ch):
    q = PrimePower(p, k)
    return [
        (CellParams(WeylWord.W0, p, k, 0), gl2_kloosterman(ch.m1, ch.n1, q)),
        (CellParams(WeylWord.W0, p, 0, k), gl2_kloosterman(ch.m2, ch.n2, q)),
        (CellParams(WeylWord.S_ALPHA_S_BETA_S_ALPHA, p, k, 0), ramanujan(q, ch.m1)),
        (CellParams(WeylWord.S_BETA_S_ALPHA_S_BETA, p, 0, k), ramanujan(q, ch.m2)),
        (CellParams(WeylWord.S_ALPHA_S_BETA, p, k, 0), ramanujan(q, ch.m1)),
        (CellParams(WeylWord.S_BETA_S_ALPHA, p, 0, k), ramanujan(q, ch.m2)),
    ]


class TestReductions:
    @pytest.mark.parametrize("chars", REDUCTION_CHARS)
    @pytest.mark.parametrize("p,k", REDUCTION_MODULI)
    def test_degenerate_cells(self, p, k, chars):
        ch = CharacterPair(*chars)
        for c, expected in _reductions(p, k, ch):
            assert tally_equal(kl(c, ch).tally, expected), c.label

    def test_long_element_with_s_zero_is_gl2(self):
        value = kl_w0(CellParams(WeylWord.W0, 5, 1, 0), CharacterPair(1, 0, 1, 0))
        assert value.magnitude == pytest.approx(0.381966, abs=1e-6)
        assert value.term_count == 4


class TestSasbSpecialForms:
    @pytest.mark.parametrize("p,r,s,chars", [
        (2, 2, 2, (1, 2, 0, 1)),
        (3, 3, 2, (1, 3, 0, 1)),
        (3, 3, 1, (1, 1, 0, 1)),
        (3, 3, 2, (1, 1, 0, 1)),
        (5, 3, 1, (2, 1, 0, 3)),
    ])
    def test_vanishing(self, p, r, s, chars):
        c = CellParams(WeylWord.S_ALPHA_S_BETA, p, r, s)
        ch = CharacterPair(*chars)
        assert sasb_vanishes(c, ch)
        assert kl(c, ch).tally.is_zero()

    @pytest.mark.parametrize("p,r,s,chars", [
        (3, 2, 1, (1, 1, 0, 1)),
        (3, 1, 1, (1, 1, 0, 1)),
        (3, 2, 1, (1, 3, 0, 1)),
        (2, 3, 1, (1, 1, 0, 1)),
    ])
    def test_not_forced_to_vanish(self, p, r, s, chars):
        assert not sasb_vanishes(CellParams(WeylWord.S_ALPHA_S_BETA, p, r, s), CharacterPair(*chars))

    def test_vanishing_needs_sasb(self, w0_cell, unit_chars):
        with pytest.raises(InadmissibleCell):
            sasb_vanishes(w0_cell, unit_chars)

    @pytest.mark.parametrize("p", [3, 5, 7])
    @pytest.mark.parametrize("chars", [(1, 1, 0, 1), (2, 1, 0, 1), (1, 2, 5, 2)])
    def test_mixed_character_form(self, p, chars):
        c = CellParams(WeylWord.S_ALPHA_S_BETA, p, 2, 1)
        ch = CharacterPair(*chars)
        assert tally_equal(kl_ab_mixed(c, ch).tally, kl(c, ch).tally)

    @pytest.mark.parametrize("p,r,s,chars", [
        (2, 2, 1, (1, 1, 0, 1)),
        (3, 3, 1, (1, 1, 0, 1)),
        (3, 2, 1, (3, 1, 0, 1)),
        (5, 2, 1, (1, 1, 0, 5)),
    ])
    def test_mixed_character_form_preconditions(self, p, r, s, chars):
        with pytest.raises(InvalidInput):
            kl_ab_mixed(CellParams(WeylWord.S_ALPHA_S_BETA, p, r, s), CharacterPair(*chars))



class TestHatOffset:
    def test_offset_breaks_hat_system(self, w0_cell, unit_chars):
        clean = kl_w0(w0_cell, unit_chars)
        perturbed = kl_w0(w0_cell, unit_chars, hat_offset=1)
        assert clean.skipped_unsolvable == 0
        assert perturbed.skipped_unsolvable > 0

    def test_offset_is_logged(self, w0_cell, unit_chars, caplog):
        kl(w0_cell, unit_chars, hat_offset=1)
        assert "unsolvable" in caplog.text


class TestGlobalSums:
    def test_product_of_local_factors(self, sa_cell, sasb_cell):
        g = kl_global([
            (5, sa_cell, CharacterPair(m1=1, n1=1)),
            (3, sasb_cell, CharacterPair(m1=1, m2=1, n2=1)),
        ])
        assert g.magnitude == pytest.approx(0.381966 * 3, abs=1e-5)
        assert g.term_count == 4 * 6
        assert not g.is_zero()

    def test_repeated_prime(self, sa_cell):
        with pytest.raises(InvalidInput):
            kl_global([(5, sa_cell, CharacterPair()), (5, sa_cell, CharacterPair())])

    def test_mismatched_prime(self, sa_cell):
        with pytest.raises(InvalidInput):
            kl_global([(3, sa_cell, CharacterPair())])
