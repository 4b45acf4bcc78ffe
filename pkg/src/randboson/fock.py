"""Occupation-number bases for fixed (N, M) sectors.

States are tuples of 2*ell+1 occupations indexed by m = -ell..ell, listed in
ascending lexicographic order.  That ordering is part of the persisted-vector
file contract, so it must never change.
"""

from __future__ import annotations

import math

import numpy as np

from .combinatorics import SystemShape

__all__ = ["SectorBasis", "enumerate_sector", "apply_monomial", "CREATE", "ANNIHILATE"]

CREATE = "create"
ANNIHILATE = "annihilate"


class SectorBasis:
    """All occupation vectors with Sum(n)=N and Sum(m*n_m)=M, lexicographic."""

    def __init__(self, shape: SystemShape, m_total: int):
        self.shape = shape
        self.m_total = m_total
        self.states = _enumerate_states(shape, m_total)
        self.index = {s: i for i, s in enumerate(self.states)}
        self.array = np.array(self.states, dtype=np.int16).reshape(
            len(self.states), shape.n_substates)

    @property
    def dim(self) -> int:
        return len(self.states)

    def position(self, state: tuple) -> int:
        return self.index[state]

    def __repr__(self) -> str:
        return (f"SectorBasis(ell={self.shape.ell}, n={self.shape.n}, "
                f"M={self.m_total}, dim={self.dim})")


_SECTOR_CACHE: dict = {}


def enumerate_sector(shape: SystemShape, m_total: int) -> SectorBasis:
    """Deterministic basis for the (N, M) sector; cached per (ell, N, M)."""
    if abs(m_total) > shape.j_max:
        raise ValueError(f"|M|={abs(m_total)} exceeds N*ell={shape.j_max}")
    key = (shape.ell, shape.n, m_total)
    basis = _SECTOR_CACHE.get(key)
    if basis is None:
        basis = SectorBasis(shape, m_total)
        _SECTOR_CACHE[key] = basis
    return basis


def clear_sector_cache() -> None:
    _SECTOR_CACHE.clear()


def _enumerate_states(shape: SystemShape, m_total: int) -> list:
    """All occupation tuples in ascending lexicographic order.

    Recursion assigns n_{-ell} first, counting upward, which yields the
    canonical order directly.  Branches are pruned by the reachable-projection
    window of the remaining substates.
    """
    ell, n = shape.ell, shape.n
    ms = list(range(-ell, ell + 1))
    out = []
    occ = [0] * len(ms)

    def rec(i: int, left: int, need: int) -> None:
        if i == len(ms) - 1:
            # last substate is m=ell: all remaining particles land here
            if need == left * ms[-1]:
                occ[i] = left
                out.append(tuple(occ))
                occ[i] = 0
            return
        m = ms[i]
        for take in range(0, left + 1):
            rest = left - take
            rem = need - take * m
            # remaining substates span [m+1, ell]
            if rest * (m + 1) <= rem <= rest * ell:
                occ[i] = take
                rec(i + 1, rest, rem)
        occ[i] = 0

    rec(0, n, m_total)
    return out


def apply_monomial(state: tuple, ops: list, ell: int):
    """Apply a sequence of ladder operators (m, CREATE|ANNIHILATE) to a state.

    Returns (new_state, amplitude); amplitude 0.0 signals annihilation of an
    empty substate (new_state is then None).
    """
    occ = list(state)
    amp2 = 1  # squared amplitude stays integer-exact
    for m, kind in ops:
        i = m + ell
        if kind == CREATE:
            amp2 *= occ[i] + 1
            occ[i] += 1
        elif kind == ANNIHILATE:
            if occ[i] == 0:
                return None, 0.0
            amp2 *= occ[i]
            occ[i] -= 1
        else:
            raise ValueError(f"unknown ladder kind {kind!r}")
    return tuple(occ), math.sqrt(amp2)
