import itertools

import pytest
from klsp4.exceptions import InvalidInput
from klsp4.oracle import enumerate_X
from klsp4.padic import FractionModOne, tally_equal
from klsp4.stratification import (
    ThetaCharacter,
    TorusElement,
    decompose_orbits,
    enumerate_vw,
    eval_sw,
    gl2_factorization,
    kappa,
    orbit_identity_check,
    required_level,
    theta_for,
    torus_act,
    unit_generators,
)
from klsp4.structure import CellParams, CharacterPair, WeylWord


@pytest.fixture
def theta5():
    return ThetaCharacter(
        FractionModOne(1, 1, 5), FractionModOne(2, 1, 5),
        FractionModOne(3, 1, 5), FractionModOne(1, 1, 5),
        level=1,
    )


class TestTorus:
    def test_units_required(self):
        with pytest.raises(InvalidInput):
            TorusElement(3, 1).check_units(3)

    def test_product(self):
        assert TorusElement(2, 3, 5) * TorusElement(4, 1, 2) == TorusElement(8, 3, 10)

    def test_generators(self):
        assert unit_generators(2, 3) == (-1, 5)
        assert len(unit_generators(7, 1)) == 1

    def test_identity_acts_trivially(self, w0_cell):
        for cell in enumerate_X(w0_cell):
            assert torus_act(TorusElement(1, 1, 1), cell, w0_cell).key == cell.key


class TestVw:
    def test_sizes(self):
        assert len(enumerate_vw(WeylWord.W0, 1, 3)) == 4
        assert len(enumerate_vw(WeylWord.W0, 1, 2)) == 1
        assert len(enumerate_vw(WeylWord.W0, 2, 3)) == 36

    def test_level_must_be_positive(self):
        with pytest.raises(InvalidInput):
            enumerate_vw(WeylWord.W0, 0, 3)

    def test_long_element_relations(self):
        for v in enumerate_vw(WeylWord.W0, 1, 5):
            assert v.lam1 * v.lam_alpha_prime % 5 == 1
            assert v.lam2 * v.lam_beta_prime % 5 == 1

    def test_sasbsa_relation(self):
        elements = enumerate_vw(WeylWord.S_ALPHA_S_BETA_S_ALPHA, 1, 3)
        assert len(elements) == 4
        for v in elements:
            assert v.lam_beta_prime is None
            assert v.lam1 * v.lam2 * v.lam_alpha_prime % 3 == 1

    def test_sbsasb_relation(self):
        for v in enumerate_vw(WeylWord.S_BETA_S_ALPHA_S_BETA, 1, 5):
            assert v.lam_alpha_prime is None
            assert v.lam1 * v.lam1 * v.lam2 * v.lam_beta_prime % 5 == 1


class TestSw:
    def test_trivial_theta_counts_vw(self):
        zero = FractionModOne.zero(5)
        theta = ThetaCharacter(zero, zero, zero, zero, level=1)
        assert eval_sw(theta, WeylWord.W0, 1, 5).as_integer() == 16

    @pytest.mark.parametrize("w", [
        WeylWord.W0, WeylWord.S_ALPHA_S_BETA_S_ALPHA, WeylWord.S_BETA_S_ALPHA_S_BETA,
    ])
    def test_gl2_factorization(self, theta5, w):
        assert tally_equal(gl2_factorization(theta5, w, 5), eval_sw(theta5, w, 1, 5))

    def test_factorization_only_for_long_cells(self, theta5):
        with pytest.raises(InvalidInput):
            gl2_factorization(theta5, WeylWord.S_ALPHA_S_BETA, 5)

    def test_level_mismatch(self, theta5):
        with pytest.raises(InvalidInput):
            eval_sw(theta5, WeylWord.W0, 2, 5)


class TestOrbits:
    def test_orbits_partition_x(self, w0_cell):
        cells = enumerate_X(w0_cell)
        orbits = decompose_orbits(w0_cell, cells)
        assert sum(orbit.size for orbit in orbits) == len(cells)

    def test_kappa_outside_delta_is_zero(self, sa_cell):
        for cell in enumerate_X(sa_cell):
            _, _, kp1, kp2 = kappa(cell, sa_cell)
            assert kp2.is_zero()
            assert not kp1.is_zero()

    def test_theta_level_must_cover_kappa(self):
        c = CellParams(WeylWord.S_ALPHA, 3, 2, 0)
        cells = enumerate_X(c)
        with pytest.raises(InvalidInput):
            theta_for(cells[0], c, CharacterPair(m1=1, n1=1), 1)

    def test_required_level(self, w0_cell):
        assert required_level(w0_cell, enumerate_X(w0_cell)) >= 1

    @pytest.mark.parametrize("w,p,r,s,chars", [
        (WeylWord.W0, 2, 1, 1, (1, 1, 1, 1)),
        (WeylWord.W0, 3, 1, 1, (1, 2, 1, 1)),
        (WeylWord.S_ALPHA_S_BETA_S_ALPHA, 3, 1, 1, (1, 0, 1, 0)),
    ])
    def test_orbit_identity(self, w, p, r, s, chars):
        c = CellParams(w, p, r, s)
        level = max(required_level(c, enumerate_X(c)), r, s)
        assert orbit_identity_check(c, CharacterPair(*chars), level)

    def test_orbit_identity_level(self, w0_cell, unit_chars):
        with pytest.raises(InvalidInput):
            orbit_identity_check(w0_cell, unit_chars, 0)


# ── Acceptance grids ────────────────────────────────────────────────

def _all_thetas(p, level, numerators=None):
    numerators = range(p ** level) if numerators is None else numerators
    for a1, a2, b1, b2 in itertools.product(numerators, repeat=4):
        yield ThetaCharacter(
            FractionModOne(a1, level, p), FractionModOne(a2, level, p),
            FractionModOne(b1, level, p), FractionModOne(b2, level, p),
            level=level,
        )


LONG_WORDS = [WeylWord.W0, WeylWord.S_ALPHA_S_BETA_S_ALPHA, WeylWord.S_BETA_S_ALPHA_S_BETA]


class TestFactorizationGrid:
    @pytest.mark.parametrize("w", LONG_WORDS)
    @pytest.mark.parametrize("p,level", [
        (2, 1), (3, 1), (2, 2),
        pytest.param(5, 1, marks=pytest.mark.slow),
        pytest.param(3, 2, marks=pytest.mark.slow),
    ])
    def test_every_theta(self, w, p, level):
        for theta in _all_thetas(p, level):
            assert tally_equal(gl2_factorization(theta, w, p), eval_sw(theta, w, level, p)), theta.numerators()

    @pytest.mark.slow
    @pytest.mark.parametrize("w", LONG_WORDS)
    def test_representative_thetas_mod_25(self, w):
        for theta in _all_thetas(5, 2, numerators=(0, 1, 2, 5, 7, 10)):
            assert tally_equal(gl2_factorization(theta, w, 5), eval_sw(theta, w, 2, 5)), theta.numerators()


class TestOrbitIdentityLevels:
    @pytest.mark.parametrize("extra", [0, 1])
    @pytest.mark.parametrize("w,p,r,s,chars", [
        (WeylWord.W0, 2, 1, 1, (1, 1, 1, 1)),
        (WeylWord.S_ALPHA, 3, 1, 0, (1, 0, 2, 0)),
        pytest.param(WeylWord.W0, 3, 1, 1, (1, 2, 1, 1), marks=pytest.mark.slow),
        pytest.param(WeylWord.S_ALPHA_S_BETA, 3, 2, 1, (1, 1, 0, 1), marks=pytest.mark.slow),
        pytest.param(WeylWord.S_BETA_S_ALPHA, 2, 1, 2, (1, 1, 1, 0), marks=pytest.mark.slow),
        pytest.param(WeylWord.S_ALPHA_S_BETA_S_ALPHA, 3, 1, 1, (1, 0, 1, 0), marks=pytest.mark.slow),
        pytest.param(WeylWord.S_BETA_S_ALPHA_S_BETA, 2, 1, 2, (1, 2, 0, 1), marks=pytest.mark.slow),
    ])
    def test_base_and_next_level(self, w, p, r, s, chars, extra):
        c = CellParams(w, p, r, s)
        base = max(required_level(c, enumerate_X(c)), r, s)
        assert orbit_identity_check(c, CharacterPair(*chars), base + extra)
