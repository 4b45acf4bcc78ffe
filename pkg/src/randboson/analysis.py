"""Downstream statistics over ensemble records.

Ground-spin probabilities, extreme-value (Gumbel) fits of ground energies and
their inversion to an effective dimensionality, the overlap-density Q matrix
and its entropy dimension, linear energy profiles, cluster removal/addition
diagnostics, Venn overlaps of spin-zero ground-state sets, and the sphere
atlas of two-coupling Hamiltonians.  Everything consumes plain record dicts
as produced by the ensemble runner and returns plot-ready numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import special, stats

from .angular import clebsch_gordan
from .combinatorics import SystemShape
from .fock import enumerate_sector
from .operators import (ClusterOperator, cluster_from_state, cluster_matrix,
                        pair_channel_matrices, transition_operator)
from .solver import JBasis, j_subspace_basis

__all__ = [
    "spin_probabilities",
    "ground_energies",
    "GumbelFit",
    "fit_gumbel",
    "GumbelInversion",
    "invert_gumbel",
    "ks_statistic",
    "QAnalysis",
    "q_analysis",
    "components_for",
    "LinearEnergyProfile",
    "linear_energy_profile",
    "ClusterRow",
    "ClusterReport",
    "cluster_report",
    "VennResult",
    "venn_fractions",
    "AtlasPoint",
    "AtlasResult",
    "atlas_curve",
]

MAX_D_EFF = 1e9


def _usable(entry: dict) -> bool:
    return ("failed" not in entry and not entry.get("degenerate", False)
            and entry.get("j", -1) >= 0)


def spin_probabilities(records, n: int):
    """P(J) with binomial error bars over the non-degenerate realizations."""
    js = [rec["results"][n]["j"] for rec in records
          if n in rec["results"] and _usable(rec["results"][n])]
    if not js:
        raise ValueError(f"no usable results for N={n}")
    total = len(js)
    out = {}
    for j in sorted(set(js)):
        p = js.count(j) / total
        out[j] = (p, math.sqrt(p * (1.0 - p) / total))
    return out


def ground_energies(records, n: int, j: int | None = None) -> np.ndarray:
    """Ground energies for one system size, optionally filtered by spin."""
    out = [rec["results"][n]["e0"] for rec in records
           if n in rec["results"] and _usable(rec["results"][n])
           and (j is None or rec["results"][n]["j"] == j)]
    return np.asarray(out, dtype=float)


# --- extreme-value fit and inversion ----------------------------------------


@dataclass(frozen=True)
class GumbelFit:
    a: float  # location
    b: float  # inverse scale


def fit_gumbel(energies, rel_tol: float = 1e-10, max_iter: int = 200) -> GumbelFit:
    """Maximum-likelihood fit of the minimum-Gumbel density
    b*exp[b(E-a) - exp(b(E-a))].

    Newton iteration on the profile equation for b; a is closed-form given b.
    """
    e = np.asarray(energies, dtype=float)
    if e.size < 100:
        raise ValueError(f"need at least 100 samples, got {e.size}")
    std = float(e.std())
    if std == 0.0:
        raise ValueError("energies are all identical")
    mean = float(e.mean())
    b = math.pi / math.sqrt(6.0) / std  # moment estimate as start
    for _ in range(max_iter):
        x = b * e
        shift = x.max()
        w = np.exp(x - shift)
        s0 = float(w.sum())
        r1 = float((e * w).sum()) / s0
        r2 = float((e * e * w).sum()) / s0
        f = 1.0 / b + mean - r1
        fprime = -1.0 / (b * b) - (r2 - r1 * r1)
        step = f / fprime
        b_new = b - step
        if b_new <= 0.0:
            b_new = 0.5 * b
        if abs(b_new - b) < rel_tol * b:
            b = b_new
            break
        b = b_new
    else:
        raise RuntimeError("Gumbel likelihood iteration did not converge")
    x = b * e
    shift = x.max()
    a = (shift + math.log(float(np.exp(x - shift).sum()) / e.size)) / b
    return GumbelFit(a=float(a), b=float(b))


def fit_gumbel_histogram(energies, bins: int = 60) -> GumbelFit:
    """Least-squares fit of the binned density to the minimum-Gumbel form.

    Kept alongside the likelihood fit: for samples far from the Gumbel limit
    (small competing-state counts) the two estimators differ noticeably, and
    the binned fit is the one that reproduces the published calibration
    numbers for minima of a handful of unit normals.
    """
    from scipy.optimize import curve_fit

    e = np.asarray(energies, dtype=float)
    if e.size < 100:
        raise ValueError(f"need at least 100 samples, got {e.size}")
    hist, edges = np.histogram(e, bins=bins, density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])
    start = fit_gumbel(e)

    def density(x, a, b):
        z = b * (x - a)
        return b * np.exp(z - np.exp(z))

    (a, b), _ = curve_fit(density, centers, hist, p0=(start.a, start.b))
    if b <= 0:
        raise RuntimeError("histogram fit collapsed to a non-positive scale")
    return GumbelFit(a=float(a), b=float(b))


def gumbel_cdf(e, a: float, b: float):
    return 1.0 - np.exp(-np.exp(b * (np.asarray(e, dtype=float) - a)))


def ks_statistic(energies, a: float, b: float) -> float:
    """Kolmogorov-Smirnov distance between the sample and the fitted law."""
    res = stats.kstest(np.asarray(energies, dtype=float),
                       lambda e: gumbel_cdf(e, a, b))
    return float(res.statistic)


@dataclass(frozen=True)
class GumbelInversion:
    d_eff: float  # number of states competing for the ground position
    var_e: float  # inferred energy variance of the linear model
    sigma_max: float

    @property
    def ratio(self) -> float:
        return math.sqrt(self.var_e) / self.sigma_max


def _order_statistic_gap(u: float) -> float:
    # b|a| expressed through u = |a|/sqrt(2 var): 2u e^{-u^2}/(sqrt(pi) erfc(u))
    return 2.0 * u * math.exp(-u * u) / (math.sqrt(math.pi) * special.erfc(u))


def invert_gumbel(a: float, b: float, sigma_max: float) -> GumbelInversion:
    """Solve the location/scale relations of the minimum of d_eff normal
    energies for (d_eff, var_e).

    With u = |a|/sqrt(2 var_e) the two relations collapse to the monotone
    scalar equation 2u exp(-u^2)/(sqrt(pi) erfc(u)) = b|a|, after which
    d_eff = 2/erfc(u); safeguarded Newton from the large-d_eff start
    u0 = sqrt(b|a|/2).
    """
    if a >= 0.0:
        raise ValueError("location a must be negative (minima)")
    if b <= 0.0 or sigma_max <= 0.0:
        raise ValueError("b and sigma_max must be positive")
    target = b * abs(a)
    u_hi = float(special.erfcinv(2.0 / MAX_D_EFF))
    lo, hi = 1e-12, u_hi
    if _order_statistic_gap(hi) < target:
        raise ValueError(f"no solution with d_eff below {MAX_D_EFF:g}")
    u = min(max(math.sqrt(target / 2.0), lo), hi)
    for _ in range(200):
        g = _order_statistic_gap(u)
        if g < target:
            lo = u
        else:
            hi = u
        # d(log g)/du = 1/u - 2u + 2 exp(-u^2)/(sqrt(pi) erfc(u))
        dlog = 1.0 / u - 2.0 * u + (2.0 / math.sqrt(math.pi)) \
            * math.exp(-u * u) / special.erfc(u)
        step = (math.log(g) - math.log(target)) / dlog
        u_new = u - step
        if not lo < u_new < hi:
            u_new = 0.5 * (lo + hi)
        if abs(u_new - u) < 1e-13 * max(u, 1.0):
            u = u_new
            break
        u = u_new
    d_eff = 2.0 / float(special.erfc(u))
    var_e = a * a / (2.0 * u * u)
    return GumbelInversion(d_eff=d_eff, var_e=var_e, sigma_max=sigma_max)


def gumbel_ab_from(d_eff: float, var_e: float) -> GumbelFit:
    """Forward map (d_eff, var_e) -> (a, b); inverse of invert_gumbel."""
    if d_eff <= 2.0:
        raise ValueError("d_eff must exceed 2")
    u = float(special.erfinv((d_eff - 2.0) / d_eff))
    a = -math.sqrt(2.0 * var_e) * u
    f_a = math.exp(-a * a / (2.0 * var_e)) / math.sqrt(2.0 * math.pi * var_e)
    return GumbelFit(a=a, b=d_eff * f_a)


# --- overlap-density (Q) analysis --------------------------------------------


@dataclass(frozen=True)
class QAnalysis:
    q: np.ndarray  # eigenvalues, descending
    vectors: np.ndarray  # columns aligned with q, in the J-basis coordinates
    entropy: float
    d_gs: float
    count: int  # number of contributing realizations


def q_analysis(component_lists) -> QAnalysis:
    """Eigen-decomposition of Q = mean_n |phi_n><phi_n| in a fixed J-basis."""
    arr = np.asarray(component_lists, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise ValueError("need component vectors from at least two ground states")
    norms2 = np.sum(arr * arr, axis=1)
    if np.any(np.abs(norms2 - 1.0) > 1e-6):
        worst = float(np.abs(norms2 - 1.0).max())
        raise ValueError(f"component vectors are not unit norm (worst dev {worst:.2e})")
    arr = arr / np.sqrt(norms2)[:, None]
    q_mat = arr.T @ arr / arr.shape[0]
    vals, vecs = np.linalg.eigh(q_mat)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    for i in range(vecs.shape[1]):
        k = int(np.argmax(np.abs(vecs[:, i])))
        if vecs[k, i] < 0:
            vecs[:, i] = -vecs[:, i]
    positive = vals[vals > 0.0]
    entropy = float(-np.sum(positive * np.log(positive)))
    return QAnalysis(q=vals, vectors=vecs, entropy=entropy,
                     d_gs=float(np.exp(entropy)), count=arr.shape[0])


def components_for(records, n: int, j: int):
    """Stored J-projected components of ground states with the given spin."""
    out = []
    for rec in records:
        entry = rec["results"].get(n)
        if entry and _usable(entry) and entry["j"] == j and "components" in entry:
            out.append(entry["components"])
    return out


# --- linear energy profiles ---------------------------------------------------


@dataclass(frozen=True)
class LinearEnergyProfile:
    c: dict  # L -> c_L
    total: float  # sum of c_L, equals N(N-1)/2
    var: float  # sum of c_L^2, the linear-model energy variance

    @property
    def sigma_max(self) -> float:
        return self.total


def linear_energy_profile(vector: np.ndarray, basis) -> LinearEnergyProfile:
    """c_L = <psi| Sum_M P+_LM P_LM |psi> for every even L."""
    nrm = float(np.linalg.norm(vector))
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"state norm {nrm} is not 1")
    channels = pair_channel_matrices(basis)
    c = {}
    for k, mat in enumerate(channels):
        c[2 * k] = float(vector @ (mat @ vector))
    values = np.array(list(c.values()))
    return LinearEnergyProfile(c=c, total=float(values.sum()),
                               var=float((values * values).sum()))


# --- cluster removal/addition diagnostics ------------------------------------


@dataclass(frozen=True)
class ClusterRow:
    rid: int
    removal_overlap: float  # |<phi(lo)| C |phi(hi)>|^2
    removal_norm: float  # <phi(hi)| C+C |phi(hi)>
    addition_overlap: float  # |<phi(hi)| C+ |phi(lo)>|^2
    addition_norm: float  # <phi(lo)| C C+ |phi(lo)>


@dataclass(frozen=True)
class ClusterReport:
    rows: tuple
    number_grid: tuple  # eigenvalues of C+C in the spin-J subspace of N_hi
    n_hi: int
    n_lo: int
    target_j: int


def _sector_vector(components, jbasis: JBasis) -> np.ndarray:
    return jbasis.vectors @ np.asarray(components, dtype=float)


def cluster_report(records, ell: int, n_hi: int, n_lo: int,
                   cluster: ClusterOperator | None = None,
                   target_j: int = 0) -> ClusterReport:
    """Cluster removal/addition overlaps between ground states of two sizes.

    cluster=None builds the operator per realization from the stored ground
    state of the k = n_hi - n_lo particle system (the quartet recipe); a fixed
    operator (e.g. the triplet) is applied to all realizations and also yields
    the eigenvalue grid of its number operator in the spin-J subspace.
    """
    k = n_hi - n_lo
    if k < 2:
        raise ValueError("cluster size n_hi - n_lo must be at least 2")
    shape_hi = SystemShape(ell=ell, n=n_hi)
    shape_lo = SystemShape(ell=ell, n=n_lo)
    basis_hi = enumerate_sector(shape_hi, 0)
    basis_lo = enumerate_sector(shape_lo, 0)
    jb_hi = j_subspace_basis(shape_hi, target_j)
    jb_lo = j_subspace_basis(shape_lo, target_j)

    fixed_mat = None
    grid: tuple = ()
    if cluster is not None:
        if cluster.k != k:
            raise ValueError(f"cluster size {cluster.k} != n_hi - n_lo = {k}")
        fixed_mat = cluster_matrix(cluster, basis_hi, basis_lo)
        restricted = fixed_mat @ jb_hi.vectors
        number_op = restricted.T @ restricted
        grid = tuple(np.linalg.eigvalsh(number_op))
    else:
        shape_k = SystemShape(ell=ell, n=k)
        basis_k = enumerate_sector(shape_k, 0)
        jb_k = j_subspace_basis(shape_k, target_j)

    rows = []
    for rec in records:
        res = rec["results"]
        hi, lo = res.get(n_hi), res.get(n_lo)
        if not (hi and lo and _usable(hi) and _usable(lo)):
            continue
        if hi["j"] != target_j or lo["j"] != target_j:
            continue
        if "components" not in hi or "components" not in lo:
            raise ValueError("records lack stored components; rerun with vectors")
        if fixed_mat is None:
            kk = res.get(k)
            if not (kk and _usable(kk) and kk["j"] == target_j
                    and "components" in kk):
                continue
            op = cluster_from_state(_sector_vector(kk["components"], jb_k), basis_k)
            mat = cluster_matrix(op, basis_hi, basis_lo)
        else:
            mat = fixed_mat
        phi_hi = _sector_vector(hi["components"], jb_hi)
        phi_lo = _sector_vector(lo["components"], jb_lo)
        removed = mat @ phi_hi
        added = mat.T @ phi_lo
        rows.append(ClusterRow(
            rid=rec["id"],
            removal_overlap=float(np.dot(phi_lo, removed) ** 2),
            removal_norm=float(np.dot(removed, removed)),
            addition_overlap=float(np.dot(phi_hi, added) ** 2),
            addition_norm=float(np.dot(added, added)),
        ))
    return ClusterReport(rows=tuple(rows), number_grid=grid,
                         n_hi=n_hi, n_lo=n_lo, target_j=target_j)


# --- Venn overlaps -------------------------------------------------------------


@dataclass(frozen=True)
class VennResult:
    n_set: tuple
    fractions: dict  # tuple of Ns whose ground state has J=0 -> fraction
    total: int  # realizations entering the fractions
    excluded: int  # degenerate / failed realizations left out


def venn_fractions(records, n_set) -> VennResult:
    """Fractions of realizations per spin-zero indicator pattern."""
    n_set = tuple(sorted(n_set))
    counts: dict = {}
    excluded = 0
    total = 0
    for rec in records:
        entries = [rec["results"].get(n) for n in n_set]
        if any(e is None for e in entries):
            raise ValueError(f"records lack some of N={n_set}")
        if not all(_usable(e) for e in entries):
            excluded += 1
            continue
        pattern = tuple(n for n, e in zip(n_set, entries) if e["j"] == 0)
        counts[pattern] = counts.get(pattern, 0) + 1
        total += 1
    if total == 0:
        raise ValueError("no usable realizations")
    from itertools import combinations
    for r in range(len(n_set) + 1):
        for pat in combinations(n_set, r):
            counts.setdefault(pat, 0)
    fractions = {pat: cnt / total for pat, cnt in sorted(counts.items())}
    return VennResult(n_set=n_set, fractions=fractions, total=total,
                      excluded=excluded)


# --- sphere atlas ---------------------------------------------------------------


@dataclass(frozen=True)
class AtlasPoint:
    label: str
    theta: float  # nan for off-circle specials
    overlaps: tuple  # projections on the top Q eigenvectors


@dataclass(frozen=True)
class AtlasResult:
    points: tuple
    specials: tuple


def _restrict(mat, jbasis: JBasis) -> np.ndarray:
    return jbasis.vectors.T @ (mat @ jbasis.vectors)


def _quadrupole_squared(shape: SystemShape) -> sp.csr_matrix:
    """Q.Q on the M=0 sector from one-body quadrupole operators."""
    ell = shape.ell
    basis0 = enumerate_sector(shape, 0)
    total = sp.csr_matrix((basis0.dim, basis0.dim))
    for mu in range(-2, 3):
        basis_mid = enumerate_sector(shape, -mu)

        def coeff(m, _mu=mu):
            return clebsch_gordan(ell, m, 2, -_mu, ell, m - _mu)

        def coeff_back(m, _mu=mu):
            return clebsch_gordan(ell, m, 2, _mu, ell, m + _mu)

        down = transition_operator(basis0, basis_mid, -mu, coeff)
        up = transition_operator(basis_mid, basis0, mu, coeff_back)
        total = total + (-1) ** mu * (up @ down)
    return total.tocsr()


def _lowest_in_subspace(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(matrix)
    return vecs[:, 0]


def atlas_curve(shape: SystemShape, q_vectors: np.ndarray, n_theta: int = 360,
                target_j: int = 0) -> AtlasResult:
    """Trace the two-coupling (V0, V2) circle of spin-J ground states.

    For each theta the lowest state of cos(theta)*C0 + sin(theta)*C2 inside
    the spin-J subspace is projected onto the leading Q eigenvectors; the
    phase makes the first overlap non-negative.  Marked specials: attractive
    pairing, the single attractive V2 coupling, and the attractive
    quadrupole-quadrupole Hamiltonian.
    """
    if q_vectors.ndim != 2 or q_vectors.shape[1] < 3:
        raise ValueError("need at least three Q eigenvectors")
    top = q_vectors[:, :3]
    basis = enumerate_sector(shape, 0)
    jb = j_subspace_basis(shape, target_j)
    channels = pair_channel_matrices(basis)
    c0 = _restrict(channels[0], jb)
    c2 = _restrict(channels[1], jb)

    def project(coords: np.ndarray) -> tuple:
        ov = top.T @ coords
        if ov[0] < 0.0:
            ov = -ov
        return tuple(float(x) for x in ov)

    points = []
    for i in range(n_theta):
        theta = 2.0 * math.pi * i / n_theta
        coords = _lowest_in_subspace(math.cos(theta) * c0 + math.sin(theta) * c2)
        points.append(AtlasPoint(label="curve", theta=theta,
                                 overlaps=project(coords)))

    specials = [
        AtlasPoint(label="pairing", theta=math.pi,
                   overlaps=project(_lowest_in_subspace(-c0))),
        AtlasPoint(label="v2_attractive", theta=1.5 * math.pi,
                   overlaps=project(_lowest_in_subspace(-c2))),
        AtlasPoint(label="quadrupole", theta=float("nan"),
                   overlaps=project(_lowest_in_subspace(
                       -_restrict(_quadrupole_squared(shape), jb)))),
    ]
    return AtlasResult(points=tuple(points), specials=tuple(specials))
