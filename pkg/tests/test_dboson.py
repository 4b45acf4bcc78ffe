import math

import numpy as np
import pytest
from scipy import integrate

from randboson.combinatorics import SystemShape, spin_dim
from randboson.dboson import (DBosonParams, dboson_asymptotics, dboson_ground,
                              dboson_levels, joint_density,
                              quadrant_probability, _ground_j_vectorized)
from randboson.fock import enumerate_sector
from randboson.operators import InteractionParams, build_hamiltonian


def test_params_coefficients():
    p = DBosonParams(v0=10.0, v2=0.0, v4=0.0)
    assert p.beta == pytest.approx(1.0)
    assert p.gamma == 0.0
    p = DBosonParams(v0=0.0, v2=1.0, v4=1.0)
    assert p.gamma == 0.0  # equal quadrupole/hexadecapole couplings
    p = DBosonParams(v0=0.3, v2=-0.7, v4=1.4)
    assert p.beta == pytest.approx(0.3 / 10 + 0.7 / 7 + 3 * 1.4 / 70)
    assert p.gamma == pytest.approx(2.1 / 14)


def test_levels_two_particles():
    p = DBosonParams(v0=1.0, v2=0.5, v4=0.5)
    levels = dboson_levels(2, p)
    keys = {(lv.nu, lv.f, lv.j) for lv in levels}
    assert keys == {(0, 0, 0), (2, 2, 2), (2, 2, 4)}


def test_levels_three_particles():
    p = DBosonParams(v0=0.0, v2=0.0, v4=0.0)
    levels = dboson_levels(3, p)
    by_nu = {}
    for lv in levels:
        by_nu.setdefault(lv.nu, set()).add((lv.f, lv.j))
    assert by_nu[3] == {(3, 3), (3, 4), (3, 6), (0, 0)}
    assert by_nu[1] == {(1, 2)}


def test_level_energy_difference_formula():
    rng = np.random.default_rng(8)
    for _ in range(10):
        p = DBosonParams(*rng.standard_normal(3))
        levels = {(lv.nu, lv.j): lv.e_rel for lv in dboson_levels(3, p)}
        want = -14.0 * p.beta - 6.0 * p.gamma
        assert levels[(3, 0)] - levels[(1, 2)] == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("n", range(2, 13))
def test_level_counts_match_exact_spin_dimensions(n):
    p = DBosonParams(v0=0.1, v2=0.2, v4=0.3)
    per_j = {}
    for lv in dboson_levels(n, p):
        per_j[lv.j] = per_j.get(lv.j, 0) + 1
    shape = SystemShape(ell=2, n=n)
    for j in range(0, 2 * n + 1):
        assert per_j.get(j, 0) == spin_dim(shape, j), (n, j)


def test_relative_spectrum_matches_general_solver():
    rng = np.random.default_rng(12)
    n = 7
    basis = enumerate_sector(SystemShape(ell=2, n=n), 0)
    for _ in range(10):
        vs = rng.standard_normal(3)
        h = build_hamiltonian(basis, InteractionParams(ell=2, v=tuple(vs)))
        full = np.sort(np.linalg.eigvalsh(h.toarray()))
        p = DBosonParams(*vs)
        analytic = np.sort([lv.e_rel for lv in dboson_levels(n, p)])
        assert full.size == analytic.size
        assert np.abs((full - full[0]) - (analytic - analytic[0])).max() < 1e-8


def test_beta_gamma_match_solver_regression():
    # recover beta and gamma from general-machinery eigenvalues
    rng = np.random.default_rng(21)
    n = 5
    basis = enumerate_sector(SystemShape(ell=2, n=n), 0)
    vs = rng.standard_normal(3)
    p = DBosonParams(*vs)
    h = build_hamiltonian(basis, InteractionParams(ell=2, v=tuple(vs)))
    full = np.sort(np.linalg.eigvalsh(h.toarray()))
    levels = sorted(dboson_levels(n, p), key=lambda lv: lv.e_rel)
    # regress general eigenvalues against [1, nu(nu+3), J(J+1)]
    design = np.array([[1.0, -lv.nu * (lv.nu + 3), lv.j * (lv.j + 1)]
                       for lv in levels])
    coef, *_ = np.linalg.lstsq(design, full, rcond=None)
    assert coef[1] == pytest.approx(p.beta, abs=1e-8)
    assert coef[2] == pytest.approx(p.gamma, abs=1e-8)


def test_ground_sign_regimes():
    # attractive pairing (beta<0 favors small nu), gamma>0 favors small J
    g = dboson_ground(6, DBosonParams(v0=-10.0, v2=0.0, v4=0.1))
    assert (g.j, g.nu) == (0, 0)
    # repulsive pairing with gamma<0: fully aligned state
    g = dboson_ground(6, DBosonParams(v0=10.0, v2=1.0, v4=-1.0))
    assert (g.j, g.nu) == (12, 6)
    g = dboson_ground(5, DBosonParams(v0=10.0, v2=1.0, v4=-1.0))
    assert (g.j, g.nu) == (10, 5)
    with pytest.raises(ValueError):
        dboson_ground(1, DBosonParams(1.0, 0.0, 0.0))


def test_ground_cross_oracle_with_general_solver():
    rng = np.random.default_rng(33)
    n = 5
    basis = enumerate_sector(SystemShape(ell=2, n=n), 0)
    from randboson.operators import build_j_squared
    from randboson.solver import solve_ground
    j2 = build_j_squared(basis)
    for _ in range(60):
        vs = rng.standard_normal(3)
        sol = solve_ground(build_hamiltonian(
            basis, InteractionParams(ell=2, v=tuple(vs))), j2)
        if sol.degenerate:
            continue
        g = dboson_ground(n, DBosonParams(*vs))
        assert g.j == sol.spin


@pytest.mark.parametrize("n", [3, 4, 9, 14, 23, 57])
def test_reduced_candidates_match_enumeration(n):
    rng = np.random.default_rng(n)
    vs = rng.standard_normal((3, 800))
    beta = vs[0] / 10 - vs[1] / 7 + 3 * vs[2] / 70
    gamma = (vs[2] - vs[1]) / 14
    jv = _ground_j_vectorized(n, beta, gamma)
    for i in range(vs.shape[1]):
        p = DBosonParams(*vs[:, i])
        full = min((lv.e_rel, lv.j) for lv in dboson_levels(n, p))[1]
        assert full == jv[i]


def test_asymptotics_smoke():
    p0, p2, pmax = dboson_asymptotics(0, 50_000)
    assert p2 == 0.0  # a 6k system always reaches J=0 before J=2
    assert p0 + p2 + pmax == pytest.approx(1.0, abs=0.01)
    assert pmax == pytest.approx(0.433, abs=0.01)
    with pytest.raises(ValueError):
        dboson_asymptotics(0, 0)


def test_joint_density_normalized():
    total, _ = integrate.dblquad(lambda g, b: joint_density(b, g),
                                 -np.inf, np.inf, -np.inf, np.inf)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_quadrant_probability_closed_form_and_quadrature():
    value = quadrant_probability(verify=True)
    want = 0.25 + math.atan(13.0 / (7.0 * math.sqrt(3.0))) / (2.0 * math.pi)
    assert value == pytest.approx(want, abs=1e-15)
    # orthant law of the correlated Gaussian agrees
    rho = (13.0 / 980.0) / math.sqrt((79.0 / 2450.0) * (1.0 / 98.0))
    assert value == pytest.approx(0.25 + math.asin(rho) / (2 * math.pi), abs=1e-12)
