"""Exact classical homology over the reals.

This is the reference the simulated quantum estimators are checked against.
Ranks come from a dense SVD; small integer operators are re-ranked with exact
rational elimination and any disagreement is resolved in favour of the exact
value.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .chains import SparseOperator, boundary_matrix, laplacian
from .ingest import ScaleGrid
from .simplicial import FiltrationContext

RANK_RTOL = 1e-9
EXACT_MAX_DIM = 64
# singular values within this factor of the cutoff are reported as ill-conditioned
_CONDITIONING_BAND = 1e3


class HomologyInconsistency(RuntimeError):
    """Two routes to the same Betti number disagree; always a bug."""


@dataclass
class RankReport:
    rank: int
    kernel_dim: int
    kernel_basis: np.ndarray | None = None  # shape (kernel_dim, cols), orthonormal rows
    exact_rank: int | None = None
    float_rank: int | None = None
    warnings: list[str] = field(default_factory=list)


def exact_rank(matrix) -> int:
    """Rank over the rationals by fraction-free (Bareiss) elimination.

    Every intermediate entry is a minor of the input, so integer division by the
    previous pivot is exact. Non-integer inputs are scaled to integers first.
    """
    a = np.asarray(matrix)
    if a.size == 0:
        return 0
    if np.issubdtype(a.dtype, np.integer):
        m = np.array([[int(v) for v in row] for row in a.tolist()], dtype=object)
    else:
        fr = [[Fraction(v) for v in row] for row in a.tolist()]
        den = 1
        for row in fr:
            for v in row:
                den = den * v.denominator // gcd(den, v.denominator)
        m = np.array([[int(v * den) for v in row] for row in fr], dtype=object)
    n_rows, n_cols = m.shape
    rank, prev = 0, 1
    for col in range(n_cols):
        if rank == n_rows:
            break
        nz = np.flatnonzero(m[rank:, col] != 0)
        if nz.size == 0:
            continue
        piv = rank + int(nz[0])
        if piv != rank:
            m[[rank, piv]] = m[[piv, rank]]
        p = m[rank, col]
        below = m[rank + 1:]
        if below.shape[0]:
            m[rank + 1:] = (below * p - np.outer(below[:, col], m[rank])) // prev
        prev = p
        rank += 1
    return rank


def _dense(a) -> np.ndarray:
    if isinstance(a, SparseOperator):
        return a.dense()
    if hasattr(a, "toarray"):
        return a.toarray()
    return np.asarray(a)


def rank_and_kernel(a, tol: float = RANK_RTOL, want_basis: bool = False,
                    exact_limit: int = EXACT_MAX_DIM) -> RankReport:
    """Numerical rank, nullity and optionally an orthonormal kernel basis.

    The rank counts singular values above ``tol`` times the largest one.
    """
    dense = _dense(a)
    n_rows, n_cols = dense.shape
    if dense.size == 0:
        basis = np.eye(n_cols) if want_basis else None
        return RankReport(0, n_cols, basis, exact_rank=0, float_rank=0)

    fdense = dense.astype(float)
    if want_basis:
        _, s, vh = np.linalg.svd(fdense, full_matrices=True)
    else:
        s = np.linalg.svd(fdense, compute_uv=False)
        vh = None
    smax = float(s[0]) if s.size else 0.0
    cutoff = tol * smax
    rank = int(np.count_nonzero(s > cutoff)) if smax > 0 else 0

    warnings = []
    if smax > 0:
        near = s[(s > cutoff / _CONDITIONING_BAND) & (s < cutoff * _CONDITIONING_BAND)]
        if near.size:
            warnings.append(f"{near.size} singular value(s) within {_CONDITIONING_BAND:g}x "
                            f"of the rank cutoff {cutoff:.3g}")

    float_rank = rank
    ex = None
    integral = np.issubdtype(dense.dtype, np.integer) or np.all(np.mod(fdense, 1) == 0)
    if integral and max(n_rows, n_cols) <= exact_limit:
        ex = exact_rank(dense)
        if ex != rank:
            warnings.append(f"floating rank {rank} overridden by exact rank {ex}")
            rank = ex

    basis = None
    if want_basis:
        basis = vh[rank:].copy()
    return RankReport(rank, n_cols - rank, basis, exact_rank=ex, float_rank=float_rank,
                      warnings=warnings)


@dataclass(frozen=True)
class BettiDetail:
    """All the numbers that enter the Betti number at one (k, eps)."""

    k: int
    epsilon: float
    n_simplices: int
    n_simplices_up: int
    kernel_dim: int       # dim Ker of the order-k restricted boundary
    kernel_dim_up: int    # dim Ker of the order-(k+1) restricted boundary
    image_dim_up: int     # rank of the order-(k+1) restricted boundary
    laplacian_kernel: int
    betti: int


class _RankCache:
    def __init__(self, ctx: FiltrationContext, eps: float, tol: float):
        self.ctx, self.eps, self.tol = ctx, eps, tol
        self._boundary: dict[int, int] = {}
        self.warnings: list[str] = []

    def boundary_rank(self, k: int) -> int:
        if k < 1 or k > self.ctx.n - 1 or self.ctx.count(k, self.eps) == 0:
            return 0
        if k not in self._boundary:
            rep = rank_and_kernel(boundary_matrix(self.ctx, k, self.eps), self.tol)
            self.warnings.extend(f"boundary k={k}: {w}" for w in rep.warnings)
            self._boundary[k] = rep.rank
        return self._boundary[k]

    def laplacian_kernel(self, k: int) -> int:
        size = self.ctx.count(k, self.eps)
        if size == 0:
            return 0
        lap = laplacian(self.ctx, k, self.eps)
        rep = rank_and_kernel(lap, self.tol)
        self.warnings.extend(f"laplacian k={k}: {w}" for w in rep.warnings)
        return rep.kernel_dim

    def detail(self, k: int) -> BettiDetail:
        ctx, eps = self.ctx, self.eps
        size = ctx.count(k, eps) if 0 <= k < ctx.n else 0
        size_up = ctx.count(k + 1, eps) if k + 1 < ctx.n else 0
        # the order-0 boundary is the zero map, so its kernel is everything
        ker = size - self.boundary_rank(k)
        img_up = self.boundary_rank(k + 1)
        ker_up = size_up - img_up
        first = ker - img_up
        second = ker + ker_up - size_up
        hodge = self.laplacian_kernel(k)
        if not first == second == hodge:
            raise HomologyInconsistency(
                f"k={k}, eps={eps}: kernel-minus-image {first}, kernel-sum {second}, "
                f"Laplacian kernel {hodge}")
        if first < 0:
            raise HomologyInconsistency(f"k={k}, eps={eps}: negative Betti number {first}")
        return BettiDetail(k, float(eps), size, size_up, ker, ker_up, img_up, hodge, first)


def betti_detail(ctx: FiltrationContext, k: int, eps: float, tol: float = RANK_RTOL) -> BettiDetail:
    if not 0 <= k <= ctx.n - 1:
        raise ValueError(f"order k={k} outside [0, {ctx.n - 1}]")
    return _RankCache(ctx, eps, tol).detail(k)


def betti(ctx: FiltrationContext, k: int, eps: float, tol: float = RANK_RTOL) -> int:
    """Betti number of order ``k`` at scale ``eps``, cross-checked three ways."""
    return betti_detail(ctx, k, eps, tol).betti


def betti_numbers(ctx: FiltrationContext, eps: float, kmax: int | None = None,
                  tol: float = RANK_RTOL) -> list[int]:
    kmax = ctx.n - 1 if kmax is None else kmax
    cache = _RankCache(ctx, eps, tol)
    return [cache.detail(k).betti for k in range(kmax + 1)]


def betti_details(ctx: FiltrationContext, eps: float, kmax: int | None = None,
                  tol: float = RANK_RTOL) -> tuple[list[BettiDetail], list[str]]:
    """Details for k = 0..kmax sharing rank computations, plus conditioning warnings."""
    kmax = ctx.n - 1 if kmax is None else kmax
    cache = _RankCache(ctx, eps, tol)
    details = [cache.detail(k) for k in range(kmax + 1)]
    return details, cache.warnings


@dataclass(frozen=True)
class BettiCurve:
    k: int
    samples: tuple[tuple[float, int], ...]

    @property
    def scales(self) -> list[float]:
        return [e for e, _ in self.samples]

    @property
    def values(self) -> list[int]:
        return [b for _, b in self.samples]


def betti_curve(ctx: FiltrationContext, k: int, grid: ScaleGrid | Sequence[float]) -> BettiCurve:
    scales = grid.scales if isinstance(grid, ScaleGrid) else ScaleGrid(tuple(grid)).scales
    return BettiCurve(k, tuple((eps, betti(ctx, k, eps)) for eps in scales))


def write_betti_csv(curves: Iterable[BettiCurve], path: str | Path) -> None:
    rows = sorted((eps, c.k, b) for c in curves for eps, b in c.samples)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "k", "betti"])
        for eps, k, b in rows:
            w.writerow([repr(float(eps)), k, b])


def harmonic_basis(ctx: FiltrationContext, k: int, eps: float,
                   tol: float = RANK_RTOL) -> list[np.ndarray]:
    """Orthonormal basis of the Laplacian kernel over the order-k simplices at ``eps``.

    Each vector is sign-fixed so its first non-negligible entry is positive.
    """
    size = ctx.count(k, eps)
    if size == 0:
        return []
    lap = laplacian(ctx, k, eps).dense().astype(float)
    w, v = np.linalg.eigh(lap)
    scale = max(1.0, float(np.abs(w).max()))
    kernel = v[:, np.abs(w) <= tol * scale]
    expected = betti(ctx, k, eps, tol)
    if kernel.shape[1] != expected:
        raise HomologyInconsistency(
            f"k={k}, eps={eps}: eigen-kernel has {kernel.shape[1]} vectors, Betti number is {expected}")
    out = []
    for col in kernel.T:
        lead = np.flatnonzero(np.abs(col) > 1e-12)
        if lead.size and col[lead[0]] < 0:
            col = -col
        out.append(col.copy())
    return out


def connected_components(ctx: FiltrationContext, eps: float) -> int:
    """Union-find count of components of the graph with edges of length <= eps."""
    parent = list(range(ctx.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    dist = ctx.dm.dist
    components = ctx.n
    for i in range(ctx.n):
        for j in range(i + 1, ctx.n):
            if dist[i, j] <= eps:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
                    components -= 1
    return components


def euler_check(ctx: FiltrationContext, eps: float, kmax: int | None = None) -> tuple[int, int]:
    """Alternating sums of simplex counts and of Betti numbers up to the top order."""
    top = ctx.top_order(eps)
    kmax = top if kmax is None else min(kmax, top)
    chi_simplex = sum((-1) ** k * ctx.count(k, eps) for k in range(kmax + 1))
    chi_betti = sum((-1) ** k * b for k, b in enumerate(betti_numbers(ctx, eps, kmax)))
    return chi_simplex, chi_betti
