"""Boundary, Dirac and Laplacian operators with explicit simplex bases.

Operators hold signed integers; conversion to floating point happens only when
a caller asks for a spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .simplicial import ComplexError, FiltrationContext, boundary_faces, popcount


def _basis_key(mask: int) -> tuple[int, int]:
    return popcount(mask), mask


@dataclass(frozen=True)
class BasisMap:
    """Ordered simplex basis: ascending order k, then ascending mask.

    Within a single order this is plain ascending mask order.
    """

    masks: tuple[int, ...]
    index_of: dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        masks = tuple(int(m) for m in self.masks)
        keys = [_basis_key(m) for m in masks]
        if any(b <= a for a, b in zip(keys, keys[1:])):
            raise ValueError("basis masks must be strictly increasing in (order, mask)")
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "index_of", {m: i for i, m in enumerate(masks)})

    def __len__(self) -> int:
        return len(self.masks)

    def __contains__(self, mask: int) -> bool:
        return mask in self.index_of

    def __add__(self, other: "BasisMap") -> "BasisMap":
        return BasisMap(self.masks + other.masks)


@dataclass(frozen=True)
class SparseOperator:
    """Integer sparse matrix between two simplex bases.

    ``kind`` / ``k`` / ``epsilon`` label the operator for reports.
    """

    matrix: sp.csr_matrix
    row_basis: BasisMap
    col_basis: BasisMap
    kind: str = "operator"
    k: int | None = None
    epsilon: float | None = None

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=np.int64)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        if m.shape != (len(self.row_basis), len(self.col_basis)):
            raise ValueError(f"matrix shape {m.shape} does not match bases "
                             f"({len(self.row_basis)}, {len(self.col_basis)})")
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def entries(self) -> list[tuple[int, int, int]]:
        coo = self.matrix.tocoo()
        return sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def is_symmetric(self) -> bool:
        return self.row_basis == self.col_basis and (self.matrix != self.matrix.T).nnz == 0

    def transpose(self) -> "SparseOperator":
        return SparseOperator(self.matrix.T.tocsr(), self.col_basis, self.row_basis,
                              kind=self.kind + "_T", k=self.k, epsilon=self.epsilon)

    def dump(self, path: str | Path) -> None:
        """Coordinate-list text: header ``rows cols nnz`` then ``row col value`` lines."""
        with Path(path).open("w") as fh:
            fh.write(f"{self.rows} {self.cols} {self.nnz}\n")
            for r, c, v in self.entries():
                fh.write(f"{r} {c} {v}\n")


def load_operator_dump(path: str | Path) -> sp.csr_matrix:
    lines = Path(path).read_text().split("\n")
    rows, cols, nnz = (int(t) for t in lines[0].split())
    data = [tuple(int(t) for t in ln.split()) for ln in lines[1:1 + nnz]]
    if len(data) != nnz:
        raise ValueError(f"{path}: header promises {nnz} entries, found {len(data)}")
    if not data:
        return sp.csr_matrix((rows, cols), dtype=np.int64)
    r, c, v = zip(*data)
    return sp.csr_matrix((v, (r, c)), shape=(rows, cols), dtype=np.int64)


def _basis(ctx: FiltrationContext, k: int, eps: float, restricted: bool) -> BasisMap:
    if k < 0 or k >= ctx.n:
        return BasisMap(())
    return BasisMap(ctx.enumerate_simplices(k, eps) if restricted else ctx.candidates(k))


def _boundary_block(rows: BasisMap, cols: BasisMap) -> sp.csr_matrix:
    r_idx, c_idx, vals = [], [], []
    for j, s in enumerate(cols.masks):
        for sign, face in boundary_faces(s):
            i = rows.index_of.get(face)
            if i is None:
                # unreachable for flag complexes; guards against a broken basis
                raise ComplexError(f"face {face:#x} of {s:#x} missing from row basis")
            r_idx.append(i)
            c_idx.append(j)
            vals.append(sign)
    return sp.csr_matrix((vals, (r_idx, c_idx)), shape=(len(rows), len(cols)), dtype=np.int64)


def boundary_matrix(ctx: FiltrationContext, k: int, eps: float | None = None,
                    restricted: bool = True) -> SparseOperator:
    """The order-k boundary map from k-simplices to (k-1)-simplices.

    Unrestricted uses every candidate simplex (``eps`` is ignored); restricted
    keeps only simplices present at ``eps``.
    """
    if not 1 <= k <= ctx.n - 1:
        raise ComplexError(f"boundary order k={k} outside [1, {ctx.n - 1}]")
    if restricted and eps is None:
        raise ComplexError("restricted boundary needs a scale")
    rows = _basis(ctx, k - 1, eps, restricted)
    cols = _basis(ctx, k, eps, restricted)
    return SparseOperator(_boundary_block(rows, cols), rows, cols,
                          kind="boundary", k=k, epsilon=eps if restricted else None)


def dirac_pair(ctx: FiltrationContext, k: int, eps: float | None = None,
               restricted: bool = True) -> SparseOperator:
    """Symmetric block embedding [[0, d_k], [d_k^T, 0]] on (k-1) ⊕ k simplices."""
    d = boundary_matrix(ctx, k, eps, restricted)
    basis = d.row_basis + d.col_basis
    mat = _assemble(basis, [(d.row_basis, d.col_basis, d.matrix),
                            (d.col_basis, d.row_basis, d.matrix.T)])
    return SparseOperator(mat, basis, basis, kind="dirac_pair", k=k, epsilon=d.epsilon)


def full_basis(ctx: FiltrationContext, eps: float) -> BasisMap:
    masks: list[int] = []
    for k in range(ctx.top_order(eps) + 1):
        masks.extend(ctx.enumerate_simplices(k, eps))
    return BasisMap(tuple(masks))


def _assemble(basis: BasisMap, blocks: Iterable[tuple[BasisMap, BasisMap, sp.spmatrix]]) -> sp.csr_matrix:
    r_all, c_all, v_all = [], [], []
    for rows, cols, block in blocks:
        coo = block.tocoo()
        if coo.nnz == 0:
            continue
        r_off = basis.index_of[rows.masks[0]]
        c_off = basis.index_of[cols.masks[0]]
        r_all.append(coo.row + r_off)
        c_all.append(coo.col + c_off)
        v_all.append(coo.data)
    size = len(basis)
    if not r_all:
        return sp.csr_matrix((size, size), dtype=np.int64)
    return sp.csr_matrix((np.concatenate(v_all), (np.concatenate(r_all), np.concatenate(c_all))),
                         shape=(size, size), dtype=np.int64)


def dirac_full(ctx: FiltrationContext, eps: float) -> SparseOperator:
    """Full restricted Dirac operator on every simplex present at ``eps``.

    Block (k-1, k) is the restricted order-k boundary map, block (k, k-1) its
    transpose; basis is ordered by k then mask.
    """
    basis = full_basis(ctx, eps)
    blocks = []
    for k in range(1, ctx.top_order(eps) + 1):
        d = boundary_matrix(ctx, k, eps)
        blocks.append((d.row_basis, d.col_basis, d.matrix))
        blocks.append((d.col_basis, d.row_basis, d.matrix.T))
    return SparseOperator(_assemble(basis, blocks), basis, basis, kind="dirac_full", epsilon=eps)


def laplacian(ctx: FiltrationContext, k: int, eps: float) -> SparseOperator:
    """Combinatorial Laplacian d_k^T d_k + d_{k+1} d_{k+1}^T on k-simplices at ``eps``.

    The first term is absent for k = 0 and the second once no (k+1)-simplices exist.
    """
    if not 0 <= k <= ctx.n - 1:
        raise ComplexError(f"Laplacian order k={k} outside [0, {ctx.n - 1}]")
    basis = _basis(ctx, k, eps, True)
    size = len(basis)
    lap = sp.csr_matrix((size, size), dtype=np.int64)
    if k >= 1:
        down = boundary_matrix(ctx, k, eps).matrix
        lap = lap + down.T @ down
    if k + 1 <= ctx.n - 1:
        up = boundary_matrix(ctx, k + 1, eps).matrix
        lap = lap + up @ up.T
    return SparseOperator(lap, basis, basis, kind="laplacian", k=k, epsilon=eps)
