import numpy as np
import pytest

from randboson.combinatorics import SystemShape, m_distribution
from randboson.fock import (ANNIHILATE, CREATE, SectorBasis, apply_monomial,
                            enumerate_sector)


def test_small_sector_contents():
    basis = enumerate_sector(SystemShape(ell=2, n=2), 0)
    assert basis.dim == 3
    assert basis.states == [(0, 0, 2, 0, 0), (0, 1, 0, 1, 0), (1, 0, 0, 0, 1)]


def test_vacuum_sector():
    basis = enumerate_sector(SystemShape(ell=4, n=0), 0)
    assert basis.dim == 1
    assert basis.states == [(0,) * 9]


def test_known_sector_size():
    basis = enumerate_sector(SystemShape(ell=5, n=8), 0)
    assert basis.dim == 1514


def test_extreme_sectors_are_singletons():
    # fully aligned: every boson at m = +-ell
    basis = SectorBasis(SystemShape(ell=2, n=3), 6)
    assert basis.states == [(0, 0, 0, 0, 3)]
    basis = SectorBasis(SystemShape(ell=2, n=3), -6)
    assert basis.states == [(3, 0, 0, 0, 0)]


def test_out_of_range_m_rejected():
    with pytest.raises(ValueError):
        enumerate_sector(SystemShape(ell=2, n=2), 5)


@pytest.mark.slow
def test_sector_sizes_match_m_distribution_sweep():
    for ell in range(1, 7):
        for n in range(0, 11):
            shape = SystemShape(ell=ell, n=n)
            dist = m_distribution(shape)
            for m in range(-shape.j_max, shape.j_max + 1):
                basis = SectorBasis(shape, m)
                assert basis.dim == dist.get(m, 0), (ell, n, m)


@pytest.mark.parametrize("ell,n,m", [(3, 5, 0), (4, 4, 3), (5, 6, -2)])
def test_sector_sizes_match_m_distribution(ell, n, m):
    shape = SystemShape(ell=ell, n=n)
    assert SectorBasis(shape, m).dim == m_distribution(shape).get(m, 0)


def test_enumeration_deterministic_and_sorted():
    shape = SystemShape(ell=3, n=4)
    a = SectorBasis(shape, 1)
    b = SectorBasis(shape, 1)
    assert a.states == b.states
    assert a.states == sorted(a.states)
    assert all(a.position(s) == i for i, s in enumerate(a.states))


def test_enumerate_sector_cached():
    shape = SystemShape(ell=3, n=3)
    assert enumerate_sector(shape, 0) is enumerate_sector(shape, 0)


def test_apply_monomial_ladder_amplitudes():
    vac = (0, 0, 0, 0, 0)
    state, amp = apply_monomial(vac, [(1, CREATE)], ell=2)
    assert state == (0, 0, 0, 1, 0) and amp == 1.0

    state, amp = apply_monomial(vac, [(0, ANNIHILATE)], ell=2)
    assert state is None and amp == 0.0

    # (a+)^2 on the vacuum has squared norm 2
    state, amp = apply_monomial(vac, [(2, CREATE), (2, CREATE)], ell=2)
    assert state == (0, 0, 0, 0, 2)
    assert amp == pytest.approx(np.sqrt(2.0))


def test_apply_monomial_number_identity():
    rng = np.random.default_rng(7)
    shape = SystemShape(ell=3, n=5)
    basis = enumerate_sector(shape, 1)
    for _ in range(20):
        s = basis.states[rng.integers(basis.dim)]
        m = int(rng.integers(-3, 4))
        # <s| a_m a+_m |s> = n_m + 1
        mid, up = apply_monomial(s, [(m, CREATE)], ell=3)
        back, down = apply_monomial(mid, [(m, ANNIHILATE)], ell=3)
        assert back == s
        assert up * down == pytest.approx(s[m + 3] + 1)


def test_apply_monomial_rejects_bad_kind():
    with pytest.raises(ValueError):
        apply_monomial((0,) * 5, [(0, "destroyy")], ell=2)
