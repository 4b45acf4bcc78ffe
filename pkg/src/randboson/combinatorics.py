"""Exact counting of many-boson spin states.

A system of N identical bosons of integer spin ell occupies the 2*ell+1
magnetic substates m = -ell..ell.  Everything here is exact integer
arithmetic: the distribution of the total projection M is accumulated by
dynamic programming over substates (never by a Gaussian surrogate), and the
number of spin-J multiplets is the staircase difference

    D(J) = D'(M=J) - D'(M=J+1).

The Gaussian profile beta*(2J+1)*exp(-beta*J*(J+1)) is exposed only as a
diagnostic, with beta fixed by the exact second moment of M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

__all__ = [
    "CapacityError",
    "SystemShape",
    "SpinDistribution",
    "hilbert_dim",
    "m_distribution",
    "spin_dim",
    "spin_distribution",
    "spin_dim_three",
    "spin_fraction",
]

# DP tables stay comfortably bounded below these; larger requests fail loudly
# instead of silently grinding or overflowing downstream consumers.
MAX_ELL = 12
MAX_N = 30


class CapacityError(Exception):
    """A request exceeds the supported (ell, N) range."""


@dataclass(frozen=True)
class SystemShape:
    """N identical bosons, each of integer spin ell."""

    ell: int
    n: int

    def __post_init__(self) -> None:
        if self.ell < 1:
            raise ValueError(f"boson spin must be a positive integer, got ell={self.ell}")
        if self.n < 0:
            raise ValueError(f"particle number must be non-negative, got n={self.n}")
        if self.ell > MAX_ELL or self.n > MAX_N:
            raise CapacityError(
                f"(ell={self.ell}, n={self.n}) exceeds supported range "
                f"(ell<={MAX_ELL}, n<={MAX_N})"
            )

    @property
    def n_substates(self) -> int:
        return 2 * self.ell + 1

    @property
    def j_max(self) -> int:
        return self.n * self.ell


@dataclass(frozen=True)
class SpinDistribution:
    """Exact multiplet counts per total spin J, plus the M-profile."""

    shape: SystemShape
    counts: dict  # J -> number of spin-J multiplets
    total: int  # sum over J
    m_counts: dict  # M -> number of occupation states with that projection
    beta_fit: float  # width of the Gaussian diagnostic, 1/(2<M^2>)


def hilbert_dim(shape: SystemShape) -> int:
    """Total number of symmetric N-boson states, (2l+N)! / ((2l)! N!)."""
    return math.comb(2 * shape.ell + shape.n, shape.n)


@lru_cache(maxsize=None)
def _m_counts(ell: int, n: int) -> dict:
    """Exact count of occupation vectors per total projection M.

    DP over substates: table[k][M] = number of ways to place k bosons on the
    substates processed so far with projection sum M.  Python integers keep
    the counts exact at any size.
    """
    table = [dict() for _ in range(n + 1)]
    table[0][0] = 1
    for m in range(-ell, ell + 1):
        new = [dict() for _ in range(n + 1)]
        for k in range(n + 1):
            for proj, ways in table[k].items():
                kk, pp = k, proj
                while kk <= n:
                    acc = new[kk]
                    acc[pp] = acc.get(pp, 0) + ways
                    kk += 1
                    pp += m
        table = new
    return dict(sorted(table[n].items()))


def m_distribution(shape: SystemShape) -> dict:
    """Map M -> exact number of occupation vectors with Sum(m*n_m) = M."""
    return dict(_m_counts(shape.ell, shape.n))


def spin_dim(shape: SystemShape, j: int) -> int:
    """Number of spin-J multiplets, D'(M=J) - D'(M=J+1)."""
    if not 0 <= j <= shape.j_max:
        raise ValueError(f"J={j} outside [0, {shape.j_max}] for {shape}")
    counts = _m_counts(shape.ell, shape.n)
    return counts.get(j, 0) - counts.get(j + 1, 0)


def spin_distribution(shape: SystemShape) -> SpinDistribution:
    """Assemble the full exact J-table for a shape."""
    m_counts = _m_counts(shape.ell, shape.n)
    counts = {}
    for j in range(0, shape.j_max + 1):
        d = m_counts.get(j, 0) - m_counts.get(j + 1, 0)
        if d:
            counts[j] = d
    total = sum(counts.values())
    dim = hilbert_dim(shape)
    m2 = sum(m * m * c for m, c in m_counts.items())
    beta = math.inf if m2 == 0 else dim / (2 * m2)
    return SpinDistribution(shape=shape, counts=counts, total=total,
                            m_counts=dict(m_counts), beta_fit=beta)


def spin_dim_three(ell: int, j: int) -> int:
    """Three-boson multiplet count from the step-2 recurrence in ell.

    The count at spin ell descends to the ell-2 system plus one extra
    multiplet for every J in [ell, 3*ell] except 3*ell-1.  Base cases are the
    closed ell=1 ladder (J = 3, 1) and the ell=2 pair/triplet set
    (J = 0, 2, 3, 4, 6).
    """
    if ell < 1:
        raise ValueError(f"boson spin must be positive, got {ell}")
    if not 0 <= j <= 3 * ell:
        raise ValueError(f"J={j} outside [0, {3 * ell}] for three ell={ell} bosons")
    if ell == 1:
        return int(j in (1, 3))
    if ell == 2:
        return int(j in (0, 2, 3, 4, 6))
    below = spin_dim_three(ell - 2, j) if j <= 3 * (ell - 2) else 0
    return below + int(ell <= j <= 3 * ell and j != 3 * ell - 1)


def spin_fraction(shape: SystemShape, j: int, mode: str = "exact") -> float:
    """Fraction of multiplets with spin J.

    "exact" returns D(J)/D_total; "gaussian" evaluates the diagnostic profile
    beta*(2J+1)*exp(-beta*J*(J+1)) with beta matched to the exact <M^2>.
    """
    dist = spin_distribution(shape)
    if mode == "exact":
        return dist.counts.get(j, 0) / dist.total
    if mode == "gaussian":
        beta = dist.beta_fit
        if not math.isfinite(beta):
            return 1.0 if j == 0 else 0.0
        return beta * (2 * j + 1) * math.exp(-beta * j * (j + 1))
    raise ValueError(f"mode must be 'exact' or 'gaussian', got {mode!r}")
