"""Simulated-rank partitioning, ghost synchronization and overlap helpers.

Ranks are simulated in-process: the index range (in Cuthill-McKee order) is
split into contiguous owned ranges, each rank additionally holding one ghost
layer of locally relevant indices.  Synchronization copies owner values into
ghost slots through in-memory staging buffers, mirroring the semantics of a
message-passing backend without network transport.  Volumes are counted for
the performance report.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

__all__ = [
    "Partition",
    "partition",
    "GhostPlan",
    "Communicator",
    "allreduce_min",
    "overlapped_loop",
]


@dataclass
class Partition:
    """Contiguous split of the Cuthill-McKee order into simulated ranks.

    All index sets are expressed in the permuted (CM) numbering; cm_perm maps
    original ids to CM ids.
    """

    n: int
    n_ranks: int
    cm_perm: np.ndarray                 # original -> cm id
    cm_inv: np.ndarray                  # cm id -> original
    ranges: List[tuple]                 # per rank (start, end) in cm ids
    ghosts: List[np.ndarray]            # per rank, sorted ascending cm ids
    exports: List[Dict[int, np.ndarray]]  # per rank: dest rank -> owned cm ids

    def owner_of(self, cm_ids: np.ndarray) -> np.ndarray:
        starts = np.array([s for s, _ in self.ranges])
        return np.searchsorted(starts, cm_ids, side="right") - 1


def partition(connectivity: sp.spmatrix, n_ranks: int) -> Partition:
    """Balanced contiguous split of the CM order with one ghost layer."""
    if n_ranks < 1:
        raise ValueError("rank count must be >= 1")
    conn = sp.csr_matrix(connectivity)
    n = conn.shape[0]
    sym = (conn + conn.T).tocsr()
    rcm = reverse_cuthill_mckee(sym, symmetric_mode=True)
    cm_inv = np.asarray(rcm[::-1], dtype=np.int64)
    cm_perm = np.empty(n, dtype=np.int64)
    cm_perm[cm_inv] = np.arange(n)

    base, extra = divmod(n, n_ranks)
    ranges = []
    start = 0
    for r in range(n_ranks):
        size = base + (1 if r < extra else 0)
        ranges.append((start, start + size))
        start += size

    # connectivity in cm ids
    perm_mat = sp.csr_matrix(
        (np.ones(n, dtype=np.int8), (cm_perm, np.arange(n))), shape=(n, n)
    )
    conn_cm = (perm_mat @ conn @ perm_mat.T).tocsr()

    ghosts = []
    for r, (s, e) in enumerate(ranges):
        cols = np.unique(conn_cm.indices[conn_cm.indptr[s] : conn_cm.indptr[e]])
        ghosts.append(cols[(cols < s) | (cols >= e)])

    exports: List[Dict[int, np.ndarray]] = [dict() for _ in range(n_ranks)]
    for r in range(n_ranks):
        gh = ghosts[r]
        if len(gh) == 0:
            continue
        owners = Partition(
            n=n, n_ranks=n_ranks, cm_perm=cm_perm, cm_inv=cm_inv,
            ranges=ranges, ghosts=[], exports=[],
        ).owner_of(gh)
        for owner in np.unique(owners):
            ids = gh[owners == owner]
            exports[int(owner)].setdefault(r, ids)
            exports[int(owner)][r] = ids
    return Partition(
        n=n,
        n_ranks=n_ranks,
        cm_perm=cm_perm,
        cm_inv=cm_inv,
        ranges=ranges,
        ghosts=ghosts,
        exports=exports,
    )


@dataclass
class GhostPlan:
    """Precomputed gather/scatter indices for one synchronized quantity.

    For every rank: a list of (src_rank, src_index_arrays, dst_index_arrays)
    where indices address rank-local storage (rows, or (row, slot) pairs for
    stencil matrices).
    """

    copies: List[List[tuple]]


class Communicator:
    """Phase-counted collective sync over simulated ranks.

    All collectives must be entered in the same order by the driving loop; a
    phase counter guards against mismatched schedules.  Staged sends support
    the communication-hiding loop split: `stage` snapshots the exported
    values, `deliver` copies them into ghost storage.
    """

    def __init__(self, n_ranks: int):
        self.n_ranks = n_ranks
        self.phase = 0
        self.sync_count = 0
        self.sync_volume = 0
        self._staged: Dict[int, list] = {}
        self._lock = threading.Lock()

    def _check_phase(self, tag: int):
        if tag != self.phase - 1:
            raise RuntimeError("collective entered out of order")

    def begin_collective(self) -> int:
        tag = self.phase
        self.phase += 1
        return tag

    def stage(self, rank: int, items: list):
        """Snapshot exported values of one rank (the 'send')."""
        with self._lock:
            self._staged[rank] = items

    def deliver(self, apply_fn: Callable[[int, list], int]):
        """Apply all staged sends; apply_fn returns the copied element count."""
        for rank in range(self.n_ranks):
            items = self._staged.pop(rank, None)
            if items is None:
                continue
            self.sync_volume += apply_fn(rank, items)
        self.sync_count += 1


def allreduce_min(values) -> float:
    """Minimum over per-rank values, identical on every rank."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("allreduce over empty value set")
    return float(arr.min())


def overlapped_loop(
    n_e: int,
    n_i: int,
    n_lo: int,
    body: Callable[[int, int], None],
    start_sync: Optional[Callable[[], None]],
    workers: int = 1,
    chunk_size: int = 2048,
) -> int:
    """Row loop with communication hiding.

    Processes [n_i, n_lo) and [0, n_e) first; the worker completing the last
    chunk of that export phase triggers start_sync exactly once; the interior
    [n_e, n_i) follows.  Returns the number of times start_sync fired (always
    0 or 1), so callers can assert the contract.
    """

    def chunks(lo, hi):
        return [(s, min(s + chunk_size, hi)) for s in range(lo, hi, chunk_size)]

    pre = chunks(n_i, n_lo) + chunks(0, n_e)
    post = chunks(n_e, n_i)

    fired = [0]
    remaining = [len(pre)]
    lock = threading.Lock()

    def run_pre(rng):
        body(*rng)
        this_thread_ready = False
        with lock:
            remaining[0] -= 1
            if remaining[0] == 0 and not this_thread_ready:
                this_thread_ready = True
                fired[0] += 1
                if start_sync is not None:
                    start_sync()

    if not pre:
        fired[0] += 1
        if start_sync is not None:
            start_sync()

    if workers <= 1:
        for rng in pre:
            run_pre(rng)
        for rng in post:
            body(*rng)
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_pre, pre))
            list(pool.map(lambda rng: body(*rng), post))
    return fired[0]
