"""Local dof renumbering and hybrid sliced-ELL / CSR stencil storage.

Rows with the standard stencil cardinality are stored in a sliced-ELL region
(slice length = lane width k, column indices interleaved k rows at a time);
all remaining rows fall back to CSR.  The numbering markers satisfy
N_e <= N_i <= N_lo <= N_lr: exported regular rows first, then the rest of
the SIMD-friendly regular block (N_i is a multiple of k), then irregular and
leftover owned rows, then ghost rows.

A per-nnz transpose table maps every stored (i, j) position to the position
of (j, i), which the solver uses for mirroring the viscosity matrix and for
the symmetrized limiter factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

__all__ = [
    "LocalNumbering",
    "SparsityPattern",
    "StencilMatrix",
    "PaddedView",
    "renumber",
    "build_pattern",
    "transpose_position",
]


@dataclass
class LocalNumbering:
    """Permutation old->new with the range markers of the hybrid layout."""

    perm: np.ndarray
    inv: np.ndarray
    n_e: int
    n_i: int
    n_lo: int
    n_lr: int
    k: int
    standard_card: int


def renumber(
    connectivity: sp.spmatrix,
    k: int,
    export_set=(),
    n_owned: Optional[int] = None,
    standard_card: Optional[int] = None,
) -> LocalNumbering:
    """Cuthill-McKee order, then regular/irregular and export partitioning.

    Rows at indices >= n_owned (ghost rows) keep their relative order and are
    placed after all owned rows.  N_i is the number of regular rows rounded
    down to a multiple of k; regular rows beyond N_i spill into the remainder
    range together with the irregular rows.
    """
    conn = sp.csr_matrix(connectivity)
    n_total = conn.shape[0]
    n_owned = n_total if n_owned is None else n_owned
    card = np.diff(conn.indptr)[:n_owned]
    if standard_card is None:
        vals, counts = np.unique(card, return_counts=True)
        standard_card = int(vals[np.argmax(counts)])

    owned_graph = conn[:n_owned, :n_owned]
    owned_graph = (owned_graph + owned_graph.T).tocsr()
    rcm = reverse_cuthill_mckee(owned_graph, symmetric_mode=True)
    cm = np.asarray(rcm[::-1], dtype=np.int64)

    regular = card == standard_card
    order = np.concatenate([cm[regular[cm]], cm[~regular[cm]]])
    n_reg = int(regular.sum())
    n_i = (n_reg // k) * k

    exported = np.zeros(n_owned, dtype=bool)
    export_list = np.fromiter(export_set, dtype=np.int64, count=-1) if len(export_set) else []
    if len(export_list):
        exported[export_list] = True
    head = order[:n_i]
    head = np.concatenate([head[exported[head]], head[~exported[head]]])
    order = np.concatenate([head, order[n_i:]])
    n_e = int(exported[head].sum())

    inv = np.concatenate([order, np.arange(n_owned, n_total, dtype=np.int64)])
    perm = np.empty(n_total, dtype=np.int64)
    perm[inv] = np.arange(n_total)
    return LocalNumbering(
        perm=perm,
        inv=inv,
        n_e=n_e,
        n_i=n_i,
        n_lo=n_owned,
        n_lr=n_total,
        k=k,
        standard_card=standard_card,
    )


@dataclass
class SparsityPattern:
    """Hybrid sliced-ELL + CSR pattern over renumbered local rows."""

    numbering: LocalNumbering
    k: int
    standard_card: int
    sell_cols: np.ndarray      # interleaved, len = (n_i//k) * standard_card * k
    csr_indptr: np.ndarray     # rows n_i..n_lr, offsets into csr_cols
    csr_cols: np.ndarray
    transpose: np.ndarray = field(default=None)  # per-position transpose position

    @property
    def n_rows(self) -> int:
        return self.numbering.n_lr

    @property
    def sell_size(self) -> int:
        return len(self.sell_cols)

    @property
    def nnz(self) -> int:
        return self.sell_size + len(self.csr_cols)

    def row_length(self, i: int) -> int:
        n_i = self.numbering.n_i
        if i < n_i:
            return self.standard_card
        return int(self.csr_indptr[i - n_i + 1] - self.csr_indptr[i - n_i])

    def position(self, i: int, slot: int) -> int:
        """Storage position of the given (row, slot)."""
        n_i = self.numbering.n_i
        if i < n_i:
            s, lane = divmod(i, self.k)
            return s * self.standard_card * self.k + slot * self.k + lane
        return self.sell_size + int(self.csr_indptr[i - n_i]) + slot

    def row_columns(self, i: int) -> np.ndarray:
        n_i = self.numbering.n_i
        if i < n_i:
            s, lane = divmod(i, self.k)
            base = s * self.standard_card * self.k
            return self.sell_cols[base + lane : base + self.standard_card * self.k : self.k]
        lo = self.sell_size + self.csr_indptr[i - n_i]
        hi = self.sell_size + self.csr_indptr[i - n_i + 1]
        return self.csr_cols[lo - self.sell_size : hi - self.sell_size]

    def row_positions(self, i: int) -> np.ndarray:
        length = self.row_length(i)
        return np.array([self.position(i, s) for s in range(length)], dtype=np.int64)

    def find(self, i: int, j: int) -> int:
        cols = self.row_columns(i)
        slots = np.nonzero(cols == j)[0]
        if len(slots) != 1:
            raise KeyError((i, j))
        return self.position(i, int(slots[0]))

    def padded(self, pad_to: Optional[int] = None) -> "PaddedView":
        return _build_padded(self, pad_to)


def build_pattern(
    connectivity: sp.spmatrix,
    numbering: LocalNumbering,
    col_key: Optional[np.ndarray] = None,
) -> SparsityPattern:
    """Build the hybrid pattern; within each row, slots are ordered by col_key.

    connectivity is given in old local ids; col_key maps a *new* local id to
    its sort key (typically the global node id), defaulting to the new id.
    """
    conn = sp.csr_matrix(connectivity)
    k = numbering.k
    n_lr = numbering.n_lr
    if col_key is None:
        col_key = np.arange(n_lr, dtype=np.int64)

    rows_cols = []
    for i_new in range(n_lr):
        old = numbering.inv[i_new]
        cols_old = conn.indices[conn.indptr[old] : conn.indptr[old + 1]]
        cols_new = numbering.perm[cols_old]
        order = np.argsort(col_key[cols_new], kind="stable")
        rows_cols.append(cols_new[order].astype(np.int64))

    n_i = numbering.n_i
    card = numbering.standard_card
    for i in range(n_i):
        if len(rows_cols[i]) != card:
            raise ValueError(f"row {i} in the SIMD region has cardinality {len(rows_cols[i])}")

    sell_cols = np.zeros(((n_i // k) if k else 0) * card * k, dtype=np.int64)
    for i in range(n_i):
        s, lane = divmod(i, k)
        base = s * card * k
        sell_cols[base + lane : base + card * k : k] = rows_cols[i]

    csr_indptr = np.zeros(n_lr - n_i + 1, dtype=np.int64)
    csr_chunks = []
    for idx, i in enumerate(range(n_i, n_lr)):
        csr_chunks.append(rows_cols[i])
        csr_indptr[idx + 1] = csr_indptr[idx] + len(rows_cols[i])
    csr_cols = (
        np.concatenate(csr_chunks) if csr_chunks else np.zeros(0, dtype=np.int64)
    )

    pattern = SparsityPattern(
        numbering=numbering,
        k=k,
        standard_card=card,
        sell_cols=sell_cols,
        csr_indptr=csr_indptr,
        csr_cols=csr_cols,
    )
    pattern.transpose = _build_transpose(pattern)
    return pattern


def _build_transpose(pattern: SparsityPattern) -> np.ndarray:
    pos_of = {}
    for i in range(pattern.n_rows):
        cols = pattern.row_columns(i)
        for slot, j in enumerate(cols):
            pos_of[(i, int(j))] = pattern.position(i, slot)
    table = np.full(pattern.nnz, -1, dtype=np.int64)
    for (i, j), p in pos_of.items():
        q = pos_of.get((j, i))
        if q is None:
            raise ValueError(f"stored entry ({i},{j}) has no stored transpose")
        table[p] = q
    return table


def transpose_position(pattern: SparsityPattern, position: int) -> int:
    """Storage position of (j, i) for the entry (i, j) stored at position."""
    return int(pattern.transpose[position])


@dataclass
class PaddedView:
    """Dense (n_rows, width) slot view of a pattern for vectorized kernels.

    Padding slots reference the row itself (their transpose is the slot
    itself), so gathered state differences and zero-filled matrix values
    contribute exactly zero.
    """

    width: int
    cols: np.ndarray       # (n, width) column ids, pad -> row id
    valid: np.ndarray      # (n, width) bool
    pos: np.ndarray        # (n, width) storage position, pad -> diagonal position
    diag_slot: np.ndarray  # (n,)
    trans_row: np.ndarray  # (n, width)
    trans_slot: np.ndarray  # (n, width)


def _build_padded(pattern: SparsityPattern, pad_to: Optional[int]) -> PaddedView:
    n = pattern.n_rows
    width = max((pattern.row_length(i) for i in range(n)), default=0)
    if pad_to is not None:
        if pad_to < width:
            raise ValueError("pad_to smaller than the widest row")
        width = pad_to
    cols = np.empty((n, width), dtype=np.int64)
    valid = np.zeros((n, width), dtype=bool)
    pos = np.empty((n, width), dtype=np.int64)
    diag_slot = np.full(n, -1, dtype=np.int64)
    slot_of = {}
    for i in range(n):
        rc = pattern.row_columns(i)
        length = len(rc)
        cols[i, :length] = rc
        cols[i, length:] = i
        valid[i, :length] = True
        for s, j in enumerate(rc):
            slot_of[(i, int(j))] = s
            pos[i, s] = pattern.position(i, s)
            if j == i:
                diag_slot[i] = s
        pos[i, length:] = pos[i, diag_slot[i]]
    if np.any(diag_slot < 0):
        raise ValueError("every stencil must contain its own row")

    trans_row = cols.copy()
    trans_slot = np.empty((n, width), dtype=np.int64)
    for i in range(n):
        length = len(pattern.row_columns(i))
        for s in range(width):
            if s < length:
                j = int(cols[i, s])
                trans_slot[i, s] = slot_of[(j, i)]
            else:
                trans_row[i, s] = i
                trans_slot[i, s] = s
    return PaddedView(
        width=width,
        cols=cols,
        valid=valid,
        pos=pos,
        diag_slot=diag_slot,
        trans_row=trans_row,
        trans_slot=trans_slot,
    )


class StencilMatrix:
    """Per-nnz values (scalar or fixed-size vector) over a hybrid pattern."""

    def __init__(self, pattern: SparsityPattern, ncomp: int = 1, dtype=np.float64):
        self.pattern = pattern
        self.ncomp = ncomp
        shape = (pattern.nnz,) if ncomp == 1 else (pattern.nnz, ncomp)
        self.values = np.zeros(shape, dtype=dtype)

    def get(self, i: int, j: int):
        return self.values[self.pattern.find(i, j)]

    def set(self, i: int, j: int, value):
        self.values[self.pattern.find(i, j)] = value

    def fill_from_dense(self, dense: np.ndarray):
        for i in range(self.pattern.n_rows):
            cols = self.pattern.row_columns(i)
            for slot, j in enumerate(cols):
                self.values[self.pattern.position(i, slot)] = dense[i, j]

    def to_dense(self) -> np.ndarray:
        n = self.pattern.n_rows
        shape = (n, n) if self.ncomp == 1 else (n, n, self.ncomp)
        out = np.zeros(shape, dtype=self.values.dtype)
        for i in range(n):
            cols = self.pattern.row_columns(i)
            for slot, j in enumerate(cols):
                out[i, j] = self.values[self.pattern.position(i, slot)]
        return out
