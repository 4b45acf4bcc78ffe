"""Lowest eigenpairs, spin assignment, and deterministic fixed-J bases."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .combinatorics import SystemShape, spin_dim
from .fock import enumerate_sector
from .operators import build_j_squared

__all__ = [
    "SolverError",
    "SpinImpurityError",
    "GroundSolution",
    "JBasis",
    "lowest_eigenpair",
    "assign_spin",
    "solve_ground",
    "j_subspace_basis",
    "project_onto_j",
]

DENSE_THRESHOLD = 600
JBASIS_DENSE_LIMIT = 9000
DEGENERACY_RTOL = 1e-8
SPIN_TOLERANCE = 0.2


class SolverError(Exception):
    """Eigensolver failed to converge; carries the best residual seen."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class SpinImpurityError(Exception):
    """<J^2> sits too far from any J(J+1); the state mixes spins."""

    def __init__(self, j2_expect: float):
        super().__init__(f"<J^2>={j2_expect:.6f} is not close to an integer J(J+1)")
        self.j2_expect = j2_expect


@dataclass
class GroundSolution:
    energy: float
    vector: np.ndarray
    spin: int
    gap: float
    degenerate: bool


@dataclass(frozen=True)
class JBasis:
    """Deterministic orthonormal basis of the spin-J subspace at M=0."""

    shape: SystemShape
    j: int
    vectors: np.ndarray  # (sector_dim, D) orthonormal columns

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(vec)))
    return -vec if vec[i] < 0 else vec


def lowest_eigenpair(matrix, k: int = 1, dense_threshold: int = DENSE_THRESHOLD):
    """The k algebraically smallest eigenpairs of a symmetric matrix.

    Dense LAPACK below dense_threshold, implicitly restarted Lanczos above.
    Residuals are verified against 1e-8 times the matrix scale.
    """
    dim = matrix.shape[0]
    if not 1 <= k <= dim:
        raise ValueError(f"need 1 <= k <= dim, got k={k}, dim={dim}")
    if dim == 1:
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
        return [(float(dense[0, 0]), np.array([1.0]))]

    if dim <= dense_threshold:
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
        vals, vecs = np.linalg.eigh(dense)
        pairs = [(float(vals[i]), vecs[:, i].copy()) for i in range(k)]
    else:
        mat = matrix.tocsr() if sp.issparse(matrix) else sp.csr_matrix(matrix)
        try:
            vals, vecs = spla.eigsh(mat, k=k, which="SA", tol=1e-10,
                                    maxiter=40 * dim, v0=_start_vector(dim))
        except spla.ArpackNoConvergence as exc:
            if len(exc.eigenvalues) >= k:
                vals, vecs = exc.eigenvalues, exc.eigenvectors
            else:
                raise SolverError(f"Lanczos did not converge: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        pairs = [(float(vals[i]), vecs[:, i].copy()) for i in range(k)]

    scale = _matrix_scale(matrix)
    for val, vec in pairs:
        resid = float(np.linalg.norm(matrix @ vec - val * vec))
        if resid > 1e-8 * max(scale, 1.0):
            raise SolverError(
                f"residual {resid:.3e} exceeds 1e-8 * scale ({scale:.3e})",
                residual=resid)
    return [(val, vec / np.linalg.norm(vec)) for val, vec in pairs]


def _matrix_scale(matrix) -> float:
    if sp.issparse(matrix):
        return float(np.abs(matrix.data).max()) if matrix.nnz else 0.0
    return float(np.abs(matrix).max())


def _start_vector(dim: int) -> np.ndarray:
    # fixed unstructured Lanczos start: records must reproduce bit-identically
    gen = np.random.Generator(np.random.Philox(key=[0x5EED, 0], counter=[0, 0, 0, dim]))
    v0 = gen.standard_normal(dim)
    return v0 / np.linalg.norm(v0)


def assign_spin(vector: np.ndarray, j2) -> int:
    """Label a unit vector by J from <J^2> = J(J+1)."""
    expect = float(vector @ (j2 @ vector))
    j = int(round((-1.0 + np.sqrt(max(0.0, 1.0 + 4.0 * expect))) / 2.0))
    if abs(expect - j * (j + 1)) > SPIN_TOLERANCE:
        raise SpinImpurityError(expect)
    return j


def solve_ground(hamiltonian, j2, dense_threshold: int = DENSE_THRESHOLD,
                 track_gap: bool = True) -> GroundSolution:
    """Lowest eigenpair with spin label, gap, and a degeneracy flag.

    track_gap=False skips the second eigenpair (gap becomes NaN, no
    degeneracy detection); spin-impurity flagging still applies.
    """
    dim = hamiltonian.shape[0]
    k = min(2, dim) if track_gap else 1
    pairs = lowest_eigenpair(hamiltonian, k=k, dense_threshold=dense_threshold)
    energy, vector = pairs[0]
    if k == 2:
        gap = pairs[1][0] - energy
        degenerate = gap < DEGENERACY_RTOL * max(1.0, abs(energy))
    else:
        gap = float("inf") if dim == 1 else float("nan")
        degenerate = False
    try:
        spin = assign_spin(vector, j2)
    except SpinImpurityError:
        # an unlabelable vector means the level is effectively degenerate;
        # spin -1 marks the realization for exclusion from analyses
        spin = -1
        degenerate = True
    return GroundSolution(energy=energy, vector=vector, spin=spin,
                          gap=max(gap, 0.0), degenerate=degenerate)


_JBASIS_CACHE: dict = {}


def j_subspace_basis(shape: SystemShape, j: int,
                     dense_limit: int = JBASIS_DENSE_LIMIT) -> JBasis:
    """Deterministic orthonormal basis of the spin-J states in the M=0 sector.

    The J^2 eigencluster at J(J+1) is extracted densely, then re-orthonormalized
    by projecting coordinate directions in basis order (Gram-Schmidt) so that
    the columns do not depend on eigensolver internals; each column's phase is
    fixed by its largest-magnitude entry.
    """
    d_j = spin_dim(shape, j)
    if d_j < 1:
        raise ValueError(f"no spin-{j} states for {shape}")
    key = (shape.ell, shape.n, j)
    cached = _JBASIS_CACHE.get(key)
    if cached is not None:
        return cached

    basis = enumerate_sector(shape, 0)
    if basis.dim > dense_limit:
        raise MemoryError(
            f"sector dim {basis.dim} exceeds the dense J-basis limit {dense_limit}")
    j2 = build_j_squared(basis).toarray()
    target = float(j * (j + 1))
    vals, vecs = sla.eigh(j2, subset_by_value=(target - 0.5, target + 0.5))
    if not np.all(np.abs(vals - target) < 1e-6 * max(1.0, target)):
        raise AssertionError("J^2 eigencluster drifted from J(J+1)")
    if vecs.shape[1] != d_j:
        raise AssertionError(
            f"J^2 cluster size {vecs.shape[1]} != spin_dim {d_j} at J={j}")

    columns = _canonical_span(vecs)
    out = JBasis(shape=shape, j=j, vectors=columns)
    _JBASIS_CACHE[key] = out
    return out


def _canonical_span(vecs: np.ndarray) -> np.ndarray:
    """Rotation-invariant orthonormal columns spanning span(vecs).

    Coordinate directions are chosen by QR column pivoting on the projections
    (the pivot choice depends only on the subspace, not on the eigensolver's
    internal rotation), then orthonormalized by Householder QR.  Plain
    Gram-Schmidt over coordinate projections is not usable here: nearly
    dependent directions leave fake residuals at the rounding floor and the
    resulting columns can lose orthogonality completely.
    """
    dim, d_j = vecs.shape
    _, _, pivots = sla.qr(vecs.T, mode="economic", pivoting=True)
    sel = np.sort(pivots[:d_j])
    projected = vecs @ vecs[sel, :].T  # projector columns P e_i, i in sel
    q, r = np.linalg.qr(projected)
    if np.abs(np.diag(r)).min() < 1e-10:
        raise AssertionError("pivoted coordinate projections are rank deficient")
    columns = np.empty_like(q)
    for k in range(d_j):
        columns[:, k] = _fix_phase(q[:, k])
    gram_dev = float(np.abs(columns.T @ columns - np.eye(d_j)).max())
    if gram_dev > 1e-9:
        raise AssertionError(f"J-basis columns lost orthonormality ({gram_dev:.2e})")
    span_dev = float(np.abs(vecs - columns @ (columns.T @ vecs)).max())
    if span_dev > 1e-8:
        raise AssertionError(f"J-basis columns do not span the cluster ({span_dev:.2e})")
    return columns


def clear_jbasis_cache() -> None:
    _JBASIS_CACHE.clear()


def project_onto_j(vector: np.ndarray, basis: JBasis) -> np.ndarray:
    """Overlaps of a sector vector with each J-basis column."""
    return basis.vectors.T @ vector
