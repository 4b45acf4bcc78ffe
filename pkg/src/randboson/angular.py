"""Exact Clebsch-Gordan coefficients and normalized pair-operator tables.

Coefficients are evaluated with the Racah factorial-sum formula carried out
in exact rational arithmetic (the coefficient is sign * sqrt(rational)), so
no cancellation error survives to the single float rounding at the boundary.
Condon-Shortley phases throughout.  Only integer spins appear here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

__all__ = [
    "clebsch_gordan",
    "pair_coefficients",
    "CouplingTable",
    "coupling_table",
]


def _triangle_ok(j1: int, j2: int, j3: int) -> bool:
    return abs(j1 - j2) <= j3 <= j1 + j2


@lru_cache(maxsize=None)
def _cg_exact(j1: int, m1: int, j2: int, m2: int, jj: int, mm: int):
    """(sign, squared value as Fraction) of <j1 m1 j2 m2 | jj mm>."""
    f = math.factorial
    pref = Fraction(2 * jj + 1)
    pref *= Fraction(f(j1 + j2 - jj) * f(j1 - j2 + jj) * f(-j1 + j2 + jj),
                     f(j1 + j2 + jj + 1))
    pref *= Fraction(f(jj + mm) * f(jj - mm) * f(j1 - m1) * f(j1 + m1)
                     * f(j2 - m2) * f(j2 + m2))
    total = Fraction(0)
    k_min = max(0, j2 - jj - m1, j1 + m2 - jj)
    k_max = min(j1 + j2 - jj, j1 - m1, j2 + m2)
    for k in range(k_min, k_max + 1):
        den = (f(k) * f(j1 + j2 - jj - k) * f(j1 - m1 - k) * f(j2 + m2 - k)
               * f(jj - j2 + m1 + k) * f(jj - j1 - m2 + k))
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0, Fraction(0)
    sign = 1 if total > 0 else -1
    return sign, pref * total * total


def clebsch_gordan(j1: int, m1: int, j2: int, m2: int, jj: int, mm: int) -> float:
    """<j1 m1; j2 m2 | jj mm> for integer spins; 0.0 on any selection-rule miss."""
    if m1 + m2 != mm:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(mm) > jj:
        return 0.0
    if not _triangle_ok(j1, j2, jj):
        return 0.0
    sign, square = _cg_exact(j1, m1, j2, m2, jj, mm)
    return sign * math.sqrt(float(square))


@lru_cache(maxsize=None)
def pair_coefficients(ell: int, ll: int, mm: int) -> dict:
    """Expansion of the normalized pair creation operator over ordered (m1, m2).

    Returns {(m1, m2): c} so that the pair operator is
    Sum c_{m1 m2} a+_{m1} a+_{m2}, with c = CG/sqrt(2).  With this factor the
    pair state built on the vacuum has unit norm for every even L.
    """
    if ll % 2:
        raise ValueError(f"identical bosons forbid odd pair spin, got L={ll}")
    if not 0 <= ll <= 2 * ell:
        raise ValueError(f"pair spin L={ll} outside [0, {2 * ell}]")
    if abs(mm) > ll:
        raise ValueError(f"|M|={abs(mm)} exceeds L={ll}")
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    out = {}
    for m1 in range(max(-ell, mm - ell), min(ell, mm + ell) + 1):
        m2 = mm - m1
        c = clebsch_gordan(ell, m1, ell, m2, ll, mm)
        if c != 0.0:
            out[(m1, m2)] = c * inv_sqrt2
    return out


@dataclass(frozen=True)
class CouplingTable:
    """All pair-operator coefficient sets for one boson spin."""

    ell: int
    entries: dict  # (L, M) -> {(m1, m2): coefficient}

    def pairs(self, ll: int, mm: int) -> dict:
        return self.entries[(ll, mm)]


@lru_cache(maxsize=None)
def coupling_table(ell: int) -> CouplingTable:
    """Memoized coefficient tables over every even L in [0, 2*ell] and all M."""
    entries = {}
    for ll in range(0, 2 * ell + 1, 2):
        for mm in range(-ll, ll + 1):
            entries[(ll, mm)] = pair_coefficients(ell, ll, mm)
    return CouplingTable(ell=ell, entries=entries)
