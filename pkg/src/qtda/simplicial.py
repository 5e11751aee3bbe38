"""Bitmask simplices and the Vietoris-Rips filtration.

A simplex on ``n`` vertices is an ``int`` whose set bits are its vertices;
vertex order is ascending bit order. Mask ``0`` is never a simplex: it is the
null-result sentinel of the simulated search.
"""

from __future__ import annotations

from itertools import combinations
from math import comb

import numpy as np

from .ingest import DistanceMatrix

DEFAULT_MAX_VERTICES = 16
WORD_BITS = 64
NULL_MASK = 0


class ComplexError(ValueError):
    pass


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def order(mask: int) -> int:
    """Simplex order k (number of vertices minus one)."""
    return popcount(mask) - 1


def vertices(mask: int) -> list[int]:
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return out


def from_vertices(vs) -> int:
    mask = 0
    for v in vs:
        mask |= 1 << int(v)
    return mask


def boundary_faces(s: int) -> list[tuple[int, int]]:
    """Signed faces of ``s``: the l-th vertex (by rank) removed with sign (-1)**l."""
    vs = vertices(s)
    if len(vs) < 2:
        raise ComplexError("a vertex has no boundary faces")
    return [(1 if ell % 2 == 0 else -1, s & ~(1 << v)) for ell, v in enumerate(vs)]


class FiltrationContext:
    """Vietoris-Rips filtration over a fixed distance matrix.

    A simplex is a member at scale ``eps`` iff every pairwise distance among its
    vertices is ``<= eps``.
    """

    def __init__(self, dm: DistanceMatrix, max_vertices: int = DEFAULT_MAX_VERTICES):
        if max_vertices > WORD_BITS - 1:
            raise ComplexError(f"vertex cap {max_vertices} exceeds the word width")
        if dm.n > max_vertices:
            raise ComplexError(f"{dm.n} vertices exceeds the cap of {max_vertices}")
        self.dm = dm
        self.n = dm.n
        self._dist = dm.dist
        self._cache: dict[tuple[int, float], tuple[int, ...]] = {}
        self._order_table: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def __repr__(self):
        return f"FiltrationContext(n={self.n})"

    def membership(self, s: int, eps: float) -> bool:
        vs = vertices(s)
        d = self._dist
        for a in range(len(vs)):
            for b in range(a + 1, len(vs)):
                if d[vs[a], vs[b]] > eps:
                    return False
        return True

    def birth_scale(self, s: int) -> float:
        vs = vertices(s)
        if len(vs) < 2:
            return 0.0
        return float(self._dist[np.ix_(vs, vs)].max())

    def _births(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        # (masks ascending, birth scales) over all candidate simplices of order k
        hit = self._order_table.get(k)
        if hit is None:
            d = self._dist
            masks, births = [], []
            for vs in combinations(range(self.n), k + 1):
                masks.append(from_vertices(vs))
                births.append(max((d[a, b] for a, b in combinations(vs, 2)), default=0.0))
            masks_arr = np.array(masks, dtype=np.int64)
            idx = np.argsort(masks_arr, kind="stable")
            hit = (masks_arr[idx], np.array(births, dtype=float)[idx])
            self._order_table[k] = hit
        return hit

    def candidates(self, k: int) -> tuple[int, ...]:
        """All C(n, k+1) masks of order k, ascending."""
        self._check_order(k)
        return tuple(int(m) for m in self._births(k)[0])

    def enumerate_simplices(self, k: int, eps: float) -> tuple[int, ...]:
        """Members of order ``k`` at scale ``eps`` in ascending mask order."""
        if not 0 <= k < self.n:
            return ()
        key = (k, float(eps))
        hit = self._cache.get(key)
        if hit is None:
            masks, births = self._births(k)
            hit = tuple(int(m) for m in masks[births <= eps])
            self._cache[key] = hit
        return hit

    def count(self, k: int, eps: float) -> int:
        return len(self.enumerate_simplices(k, eps))

    def fill_fraction(self, k: int, eps: float) -> float:
        self._check_order(k)
        return self.count(k, eps) / comb(self.n, k + 1)

    def top_order(self, eps: float) -> int:
        """Largest k with a nonempty k-simplex set (vertices always exist)."""
        k = 0
        while k + 1 < self.n and self.count(k + 1, eps) > 0:
            k += 1
        return k

    def max_distance(self) -> float:
        return float(self._dist.max())

    def _check_order(self, k: int) -> None:
        if not 0 <= k < self.n:
            raise ComplexError(f"order k={k} outside [0, {self.n - 1}]")
