"""Second-quantized matrices: the two-body Hamiltonian, J^2, cluster operators.

The interaction in each (N, M) sector decomposes into one matrix per even
pair spin L,

    H = Sum_L V_L * C_L,   C_L = Sum_M  P+_LM P_LM,

and the C_L depend only on the sector, not on the couplings.  They are built
once per sector (vectorized over basis states) and cached; a realization's
Hamiltonian is then a cheap weighted sum.  HamiltonianFamily aligns all
channels on one sparsity pattern so ensemble runs assemble H with a single
matrix-vector product over the coupling vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .angular import clebsch_gordan, pair_coefficients
from .combinatorics import CapacityError, SystemShape, spin_dim_three
from .fock import SectorBasis, enumerate_sector

__all__ = [
    "InteractionParams",
    "special_interaction",
    "pair_channel_matrices",
    "build_hamiltonian",
    "build_j_squared",
    "HamiltonianFamily",
    "ClusterOperator",
    "triplet_state",
    "cluster_from_state",
    "cluster_matrix",
    "apply_cluster",
    "transition_operator",
]

# Guard on the raw entry count accumulated during a channel build.
MAX_BUILD_ENTRIES = 120_000_000


@dataclass(frozen=True)
class InteractionParams:
    """Couplings V_L of one Hamiltonian realization, keyed by even L."""

    ell: int
    v: tuple  # V_L for L = 0, 2, ..., 2*ell

    def __post_init__(self):
        if len(self.v) != self.ell + 1:
            raise ValueError(
                f"expected {self.ell + 1} couplings for ell={self.ell}, got {len(self.v)}")

    @classmethod
    def from_mapping(cls, ell: int, mapping: dict) -> "InteractionParams":
        expected = set(range(0, 2 * ell + 1, 2))
        if set(mapping) != expected:
            raise ValueError(f"coupling keys must be exactly {sorted(expected)}")
        return cls(ell=ell, v=tuple(float(mapping[ll]) for ll in sorted(mapping)))

    @property
    def ls(self) -> tuple:
        return tuple(range(0, 2 * self.ell + 1, 2))

    def as_mapping(self) -> dict:
        return {ll: self.v[ll // 2] for ll in self.ls}

    def as_array(self) -> np.ndarray:
        return np.asarray(self.v, dtype=float)


def special_interaction(kind: str, ell: int) -> InteractionParams:
    """The analytically solvable couplings: monopole, pairing, rotational."""
    ls = range(0, 2 * ell + 1, 2)
    if kind == "monopole":
        v = [1.0 for _ in ls]
    elif kind == "pairing":
        v = [1.0 if ll == 0 else 0.0 for ll in ls]
    elif kind == "rotational":
        v = [float(ll * (ll + 1) - 2 * ell * (ell + 1)) for ll in ls]
    else:
        raise ValueError(f"unknown special interaction {kind!r}")
    return InteractionParams(ell=ell, v=tuple(v))


def _pair_list(ell: int):
    """Ordered multisets (m1 <= m2) over the substates, with an index map."""
    pairs = []
    for m1 in range(-ell, ell + 1):
        for m2 in range(m1, ell + 1):
            pairs.append((m1, m2))
    return pairs, {p: i for i, p in enumerate(pairs)}


def _pair_amplitude_table(ell: int) -> np.ndarray:
    """f[pair, k] with f = (2 - delta) * CG(l m1 l m2 | L m1+m2) / sqrt(2).

    This is the weight of the unordered multiset {m1 <= m2} in the normalized
    pair operator of spin L = 2k.
    """
    pairs, _ = _pair_list(ell)
    n_ch = ell + 1
    table = np.zeros((len(pairs), n_ch))
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for p, (m1, m2) in enumerate(pairs):
        mult = 1.0 if m1 == m2 else 2.0
        for k in range(n_ch):
            ll = 2 * k
            table[p, k] = mult * inv_sqrt2 * clebsch_gordan(ell, m1, ell, m2, ll, m1 + m2)
    return table


_CHANNEL_CACHE: dict = {}


def pair_channel_matrices(basis: SectorBasis) -> list:
    """CSR matrices C_L = Sum_M P+_LM P_LM per even L, cached per sector."""
    key = (basis.shape.ell, basis.shape.n, basis.m_total)
    mats = _CHANNEL_CACHE.get(key)
    if mats is None:
        mats = _build_channels(basis)
        _CHANNEL_CACHE[key] = mats
    return mats


def clear_channel_cache() -> None:
    _CHANNEL_CACHE.clear()


def _build_channels(basis: SectorBasis) -> list:
    ell = basis.shape.ell
    n = basis.shape.n
    dim = basis.dim
    n_sub = basis.shape.n_substates
    n_ch = ell + 1
    if dim == 0:
        return [sp.csr_matrix((0, 0)) for _ in range(n_ch)]

    pairs, pair_idx = _pair_list(ell)
    ftab = _pair_amplitude_table(ell)
    by_sum: dict = {}
    for p, (m1, m2) in enumerate(pairs):
        by_sum.setdefault(m1 + m2, []).append(p)

    # pack states into int64 codes; lexicographic order == numeric order
    radix = n + 1
    if radix ** n_sub > 2 ** 62:
        raise CapacityError(f"sector (ell={ell}, n={n}) too large to index")
    powers = radix ** np.arange(n_sub - 1, -1, -1, dtype=np.int64)
    occ = basis.array.astype(np.int64)
    codes = occ @ powers
    # canonical order guarantees searchsorted found-positions are exact
    if dim > 1 and not np.all(np.diff(codes) > 0):
        raise AssertionError("basis codes not strictly increasing")

    rows_parts, cols_parts, w_parts, g_parts = [], [], [], []
    total_entries = 0
    col_ids = np.arange(dim, dtype=np.int64)
    occ_f = occ.astype(np.float64)

    for sigma, plist in by_sum.items():
        for p_rem in plist:
            m1, m2 = pairs[p_rem]
            i1, i2 = m1 + ell, m2 + ell
            n1 = occ[:, i1]
            n2 = occ[:, i2]
            if i1 == i2:
                mask = n1 >= 2
            else:
                mask = (n1 >= 1) & (n2 >= 1)
            if not mask.any():
                continue
            sel = np.nonzero(mask)[0]
            amp_rem2 = occ_f[sel, i1] * (occ_f[sel, i2] - (1.0 if i1 == i2 else 0.0))
            base_code = codes[sel] - powers[i1] - powers[i2]
            for p_add in plist:
                g = ftab[p_rem] * ftab[p_add]
                if not np.any(np.abs(g) > 1e-300):
                    continue
                m3, m4 = pairs[p_add]
                i3, i4 = m3 + ell, m4 + ell
                t3 = occ_f[sel, i3] - (i3 == i1) - (i3 == i2)
                t4 = occ_f[sel, i4] - (i4 == i1) - (i4 == i2)
                amp_add2 = (t3 + 1.0) * (t4 + 1.0 + (1.0 if i3 == i4 else 0.0))
                target = base_code + powers[i3] + powers[i4]
                pos = np.searchsorted(codes, target)
                if not np.all(codes[pos] == target):
                    raise AssertionError("two-body move left the sector")
                rows_parts.append(pos)
                cols_parts.append(col_ids[sel])
                w_parts.append(np.sqrt(amp_rem2 * amp_add2))
                g_parts.append(g)
                total_entries += sel.size
                if total_entries > MAX_BUILD_ENTRIES:
                    raise CapacityError(
                        f"channel build for (ell={ell}, n={n}, M={basis.m_total}) "
                        f"exceeds {MAX_BUILD_ENTRIES} raw entries")

    if not rows_parts:
        # fewer than two particles: every channel matrix is zero
        return [sp.csr_matrix((dim, dim)) for _ in range(n_ch)]
    rows = np.concatenate(rows_parts)
    cols = np.concatenate(cols_parts)
    w = np.concatenate(w_parts)
    gmat = np.array(g_parts)  # (n_combos, n_ch)
    lengths = [len(part) for part in w_parts]

    mats = []
    for k in range(n_ch):
        data = w * np.repeat(gmat[:, k], lengths)
        mat = sp.coo_matrix((data, (rows, cols)), shape=(dim, dim)).tocsr()
        # summation order differs across the diagonal; symmetrize exactly
        mat = (mat + mat.T) * 0.5
        mat.sort_indices()
        mats.append(mat)
    return mats


def build_hamiltonian(basis: SectorBasis, params: InteractionParams) -> sp.csr_matrix:
    """H = Sum_L V_L C_L in the sector basis."""
    if basis.dim == 0:
        raise ValueError("empty sector basis")
    if params.ell != basis.shape.ell:
        raise ValueError("coupling ell does not match basis ell")
    mats = pair_channel_matrices(basis)
    out = None
    for vk, mat in zip(params.v, mats):
        term = mat * vk
        out = term if out is None else out + term
    return out.tocsr()


def build_j_squared(basis: SectorBasis) -> sp.csr_matrix:
    """J^2 = l(l+1) N + H_rot, with the rotational coupling set."""
    shape = basis.shape
    rot = special_interaction("rotational", shape.ell)
    j2 = build_hamiltonian(basis, rot)
    shift = shape.ell * (shape.ell + 1) * shape.n
    return (j2 + shift * sp.identity(basis.dim, format="csr")).tocsr()


class HamiltonianFamily:
    """Channel matrices aligned on one sparsity pattern for fast assembly."""

    def __init__(self, basis: SectorBasis):
        self.basis = basis
        dim = basis.dim
        channels = pair_channel_matrices(basis)
        union = None
        for mat in channels:
            marker = mat.copy()
            marker.data = np.ones_like(marker.data)
            union = marker if union is None else union + marker
        union = union.tocsr()
        union.sort_indices()
        # scatter each channel's data onto the union pattern via sorted
        # (row, col) keys; CSR canonical order makes the keys monotonic
        u_keys = (np.repeat(np.arange(dim, dtype=np.int64), np.diff(union.indptr))
                  * dim + union.indices)
        cols = []
        for mat in channels:
            mat.sort_indices()
            m_keys = (np.repeat(np.arange(dim, dtype=np.int64), np.diff(mat.indptr))
                      * dim + mat.indices)
            pos = np.searchsorted(u_keys, m_keys)
            if not np.array_equal(u_keys[pos], m_keys):
                raise AssertionError("channel alignment failed")
            data = np.zeros(union.nnz)
            data[pos] = mat.data
            cols.append(data)
        self._indptr = union.indptr
        self._indices = union.indices
        self._data = np.column_stack(cols)
        self._dim = dim
        self._j2 = None

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def nnz(self) -> int:
        return self._indices.size

    def hamiltonian(self, params: InteractionParams) -> sp.csr_matrix:
        data = self._data @ params.as_array()
        return sp.csr_matrix((data, self._indices, self._indptr),
                             shape=(self._dim, self._dim), copy=False)

    def j_squared(self) -> sp.csr_matrix:
        if self._j2 is None:
            self._j2 = build_j_squared(self.basis)
        return self._j2


# ---------------------------------------------------------------------------
# cluster (pair / triplet / quartet) operators


@dataclass(frozen=True)
class ClusterOperator:
    """Creation operator of a fixed k-boson spin-0 state.

    terms holds (occupation tuple, coefficient) with the monomial convention
    C+ = Sum_s c_s Prod_m (a+_m)^{n_m} / sqrt(n_m!), so C+|0> = Sum c_s |s>.
    """

    ell: int
    k: int
    terms: tuple  # ((occupation, coeff), ...)

    def as_vector(self, basis: SectorBasis) -> np.ndarray:
        vec = np.zeros(basis.dim)
        for occ, coeff in self.terms:
            vec[basis.position(occ)] = coeff
        return vec


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(vec)))
    return -vec if vec[i] < 0 else vec


def pair_state(ell: int) -> ClusterOperator:
    """The normalized two-boson J=0 pair as a creation operator."""
    basis = enumerate_sector(SystemShape(ell=ell, n=2), 0)
    coeffs = pair_coefficients(ell, 0, 0)
    vec = np.zeros(basis.dim)
    for (m1, m2), c in coeffs.items():
        occ = [0] * (2 * ell + 1)
        occ[m1 + ell] += 1
        occ[m2 + ell] += 1
        # both orderings of (m, -m) hit the same state; a double occupation
        # carries the bosonic sqrt(2)
        amp = math.sqrt(2.0) if m1 == m2 else 1.0
        vec[basis.position(tuple(occ))] += c * amp
    return cluster_from_state(vec, basis)


def triplet_state(ell: int) -> ClusterOperator:
    """The unique J=0 three-boson state for even ell, as a creation operator."""
    if ell % 2:
        raise ValueError(f"no J=0 triplet exists for odd boson spin ell={ell}")
    if spin_dim_three(ell, 0) != 1:
        raise AssertionError(f"J=0 triplet count is not 1 for ell={ell}")
    basis = enumerate_sector(SystemShape(ell=ell, n=3), 0)
    j2 = build_j_squared(basis).toarray()
    vals, vecs = np.linalg.eigh(j2)
    kernel = np.nonzero(vals < 0.5)[0]
    if kernel.size != 1:
        raise AssertionError(f"J^2 kernel dimension {kernel.size} != 1 for ell={ell}")
    vec = _fix_phase(vecs[:, kernel[0]])
    return cluster_from_state(vec, basis)


def cluster_from_state(vector: np.ndarray, basis: SectorBasis) -> ClusterOperator:
    """Promote a normalized J=0 k-particle state to a creation operator."""
    if basis.m_total != 0:
        raise ValueError("cluster states live in the M=0 sector")
    norm = float(np.linalg.norm(vector))
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"input state norm {norm} is not 1")
    j2 = build_j_squared(basis)
    j2_expect = float(vector @ (j2 @ vector))
    if j2_expect > 1e-8:
        raise ValueError(f"input state is not spin zero: <J^2>={j2_expect:.3e}")
    terms = tuple((basis.states[i], float(c))
                  for i, c in enumerate(vector) if c != 0.0)
    return ClusterOperator(ell=basis.shape.ell, k=basis.shape.n, terms=terms)


def cluster_matrix(op: ClusterOperator, basis_hi: SectorBasis,
                   basis_lo: SectorBasis) -> sp.csr_matrix:
    """Matrix of the annihilator C mapping the N sector to the N-k sector.

    The adjoint (creation) map is just the transpose.
    """
    if basis_hi.shape.n - basis_lo.shape.n != op.k:
        raise ValueError("sector particle numbers do not differ by the cluster size")
    if basis_hi.shape.ell != op.ell or basis_lo.shape.ell != op.ell:
        raise ValueError("cluster and bases disagree on ell")
    rows, cols, vals = [], [], []
    for j, state in enumerate(basis_hi.states):
        for occ, coeff in op.terms:
            amp2 = 1
            ok = True
            for n_m, t_m in zip(state, occ):
                if t_m == 0:
                    continue
                if n_m < t_m:
                    ok = False
                    break
                amp2 *= math.comb(n_m, t_m)
            if not ok:
                continue
            target = tuple(n_m - t_m for n_m, t_m in zip(state, occ))
            rows.append(basis_lo.position(target))
            cols.append(j)
            vals.append(coeff * math.sqrt(amp2))
    return sp.coo_matrix((vals, (rows, cols)),
                         shape=(basis_lo.dim, basis_hi.dim)).tocsr()


def apply_cluster(op: ClusterOperator, direction: str, vector: np.ndarray,
                  basis_from: SectorBasis, basis_to: SectorBasis) -> np.ndarray:
    """Apply C or C+ to a sector vector, landing in the N-+k sector."""
    if direction == "annihilate":
        if basis_from.shape.n - op.k < 0:
            raise ValueError("cannot remove a cluster from so few particles")
        mat = cluster_matrix(op, basis_hi=basis_from, basis_lo=basis_to)
        return mat @ vector
    if direction == "create":
        mat = cluster_matrix(op, basis_hi=basis_to, basis_lo=basis_from)
        return mat.T @ vector
    raise ValueError(f"direction must be 'create' or 'annihilate', got {direction!r}")


def transition_operator(basis_from: SectorBasis, basis_to: SectorBasis,
                        mu: int, coeff_fn) -> sp.csr_matrix:
    """One-body operator Sum_m c(m) a+_{m+mu} a_m between M sectors."""
    ell = basis_from.shape.ell
    if basis_to.m_total - basis_from.m_total != mu:
        raise ValueError("sector projections do not differ by mu")
    rows, cols, vals = [], [], []
    for j, state in enumerate(basis_from.states):
        for m in range(-ell, ell + 1):
            if not -ell <= m + mu <= ell:
                continue
            i_lo, i_hi = m + ell, m + mu + ell
            if state[i_lo] == 0:
                continue
            c = coeff_fn(m)
            if c == 0.0:
                continue
            occ = list(state)
            amp = math.sqrt(occ[i_lo])
            occ[i_lo] -= 1
            amp *= math.sqrt(occ[i_hi] + 1)
            occ[i_hi] += 1
            rows.append(basis_to.position(tuple(occ)))
            cols.append(j)
            vals.append(c * amp)
    return sp.coo_matrix((vals, (rows, cols)),
                         shape=(basis_to.dim, basis_from.dim)).tocsr()
