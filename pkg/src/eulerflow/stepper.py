"""Invariant-domain-preserving collocation update with convex limiting.

One forward-Euler step proceeds in phases over the stencil graph: nodal
entropies and fluxes, the low-order graph viscosity from the two-rarefaction
wavespeed bound together with the entropy-commutator indicator, the viscosity
mirroring and time-step bound, the low-order update with its bar-state
bounds, the antisymmetric high-order correction fluxes, and finally one or
more symmetrized limiter passes.  Three such steps with a shared time step
form the strong-stability-preserving RK3 update.

Ranks are simulated in-process over a contiguous Cuthill-McKee split of the
nodes.  Every rank stores one ghost layer; the viscosity rows of ghost nodes
are recomputed redundantly instead of being synchronized, so only per-node
quantities (alpha, R, U) and limiter rows travel between ranks.  All row
kernels pad stencils to one global width and order slots by global node id,
which makes results bitwise independent of the rank count, the worker count,
and the communication-hiding loop split.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sp

from . import exchange, limiter, physics, riemann, sparsity
from .assembly import PrecomputedMatrices
from .indicator import IndicatorAccumulator
from .physics import AIR, AdmissibilityError, GasConstants

__all__ = ["BoundaryConditions", "Solver", "compute_tau"]

STEP_NAMES = ["step0", "step1", "step2", "step3", "step4", "step5", "step6"]


@dataclass
class BoundaryConditions:
    """Strong boundary data applied after each stage update.

    Slip walls remove the normal momentum component using the given outward
    unit normals; supersonic inflow nodes are reset to the farfield state.
    Node ids refer to the original mesh numbering.
    """

    inflow_nodes: Optional[np.ndarray] = None
    farfield: Optional[np.ndarray] = None
    slip_nodes: Optional[np.ndarray] = None
    slip_normals: Optional[np.ndarray] = None


def compute_tau(d_diag: np.ndarray, m_i: np.ndarray, c_cfl: float) -> float:
    """CFL time step c_cfl * min_i m_i / (-2 d_ii).

    Raises on a globally constant field, where the bound is unbounded.
    """
    mask = d_diag < 0.0
    if not mask.any():
        raise ValueError("constant field, the time step bound is unbounded")
    return c_cfl * float(np.min(m_i[mask] / (-2.0 * d_diag[mask])))


def _tau_local(d_diag: np.ndarray, m_i: np.ndarray) -> float:
    mask = d_diag < 0.0
    if not mask.any():
        return np.inf
    return float(np.min(m_i[mask] / (-2.0 * d_diag[mask])))


class _RankData:
    """Per-rank renumbered stencil data and work arrays."""

    # populated by Solver._build_rank; listed here for readability
    __slots__ = [
        "numbering", "pattern", "padded", "width", "cols", "valid", "gcols",
        "upper", "lower", "trans_row", "trans_slot", "diag_slot", "card",
        "lam", "c_slot", "cT_slot", "b_slot", "bT_slot", "m_i", "inv_m",
        "cm_of_new", "orig_of_new", "U", "U_next", "f", "eor", "phi", "d",
        "alpha", "R", "P", "l", "l_next", "rho_min", "rho_max", "phi_min",
        "inflow_idx", "slip_idx", "slip_n",
    ]


class Solver:
    """Time integrator over simulated ranks with hybrid stencil storage."""

    def __init__(
        self,
        matrices: PrecomputedMatrices,
        c_cfl: float = 0.9,
        limiter_passes: int = 2,
        newton_steps: int = 2,
        lanes: int = 4,
        workers: int = 1,
        ranks: int = 1,
        overlap: bool = True,
        chunk_size: int = 2048,
        boundary: Optional[BoundaryConditions] = None,
        gas: GasConstants = AIR,
    ):
        if not 0.0 < c_cfl <= 1.0:
            raise ValueError("c_cfl must lie in (0, 1]")
        if limiter_passes < 0:
            raise ValueError("limiter_passes must be >= 0")
        self.matrices = matrices
        self.gas = gas
        self.c_cfl = c_cfl
        self.limiter_passes = limiter_passes
        self.newton_steps = newton_steps
        self.lanes = lanes
        self.workers = workers
        self.overlap = overlap
        self.chunk_size = chunk_size
        self.bc = boundary
        self.n = matrices.n
        self.dim = matrices.dim
        self.nvar = physics.n_variables(matrices.dim)

        conn = matrices.connectivity()
        self.part = exchange.partition(conn, ranks)
        self.comm = exchange.Communicator(ranks)

        # global matrices permuted to CM node ids on one shared pattern
        self._permute_matrices()
        card = np.diff(self.indptr_cm)
        self.pad_width = int(card.max())
        vals, counts = np.unique(card, return_counts=True)
        self.standard_card = int(vals[np.argmax(counts)])

        self.ranks: List[_RankData] = [self._build_rank(r) for r in range(ranks)]
        self._build_row_sends()
        self._build_l_sends()

        self.timers: Dict[str, float] = {name: 0.0 for name in STEP_NAMES}
        self.n_euler_steps = 0
        self.tau_last = None

    # ----- setup ---------------------------------------------------------

    def _permute_matrices(self):
        mat = self.matrices
        part = self.part
        row_orig = np.repeat(np.arange(self.n), mat.card)
        tag = sp.csr_matrix(
            (
                np.arange(mat.nnz, dtype=np.int64) + 1,
                (part.cm_perm[row_orig], part.cm_perm[mat.indices]),
            ),
            shape=(self.n, self.n),
        )
        tag.sort_indices()
        src = tag.data - 1
        self.indptr_cm = tag.indptr.astype(np.int64)
        self.indices_cm = tag.indices.astype(np.int64)
        self.m_cm = mat.m[src]
        self.c_cm = mat.c[src]
        self.m_lumped_cm = mat.m_lumped[part.cm_inv]
        self.inv_m_cm = mat.inv_m[part.cm_inv]

    def _build_rank(self, r: int) -> _RankData:
        part = self.part
        s, e = part.ranges[r]
        n_owned = e - s
        gh = part.ghosts[r]
        local_cm = np.concatenate([np.arange(s, e, dtype=np.int64), gh])
        n_local = len(local_cm)
        lut = np.full(self.n, -1, dtype=np.int64)
        lut[local_cm] = np.arange(n_local)

        indptr_l = np.zeros(n_local + 1, dtype=np.int64)
        chunks = []
        for pre in range(n_local):
            g = local_cm[pre]
            cols = self.indices_cm[self.indptr_cm[g] : self.indptr_cm[g + 1]]
            loc = lut[cols]
            loc = loc[loc >= 0]  # ghost rows see a truncated stencil
            chunks.append(loc)
            indptr_l[pre + 1] = indptr_l[pre] + len(loc)
        conn_local = sp.csr_matrix(
            (np.ones(indptr_l[-1], dtype=np.int8), np.concatenate(chunks), indptr_l),
            shape=(n_local, n_local),
        )

        export_pre = set()
        for ids in part.exports[r].values():
            export_pre.update((ids - s).tolist())
        numbering = sparsity.renumber(
            conn_local, self.lanes, sorted(export_pre),
            n_owned=n_owned, standard_card=self.standard_card,
        )
        cm_of_new = local_cm[numbering.inv]
        pattern = sparsity.build_pattern(conn_local, numbering, col_key=cm_of_new)
        padded = pattern.padded(pad_to=self.pad_width)

        rk = _RankData()
        rk.numbering = numbering
        rk.pattern = pattern
        rk.padded = padded
        rk.width = padded.width
        rk.cols = padded.cols
        rk.valid = padded.valid
        rk.diag_slot = padded.diag_slot
        rk.trans_row = padded.trans_row
        rk.trans_slot = padded.trans_slot
        rk.cm_of_new = cm_of_new
        rk.orig_of_new = part.cm_inv[cm_of_new]
        rk.gcols = cm_of_new[padded.cols]
        rk.upper = padded.valid & (rk.gcols > cm_of_new[:, None])
        rk.lower = padded.valid & (rk.gcols < cm_of_new[:, None])
        rk.card = padded.valid.sum(axis=1)
        lam_den = np.maximum(rk.card[: numbering.n_lo] - 1, 1)
        rk.lam = 1.0 / lam_den

        N, L, d = n_local, padded.width, self.dim
        rk.c_slot = np.zeros((N, L, d))
        m_slot = np.zeros((N, L))
        for i in range(N):
            g = cm_of_new[i]
            lo, hi = self.indptr_cm[g], self.indptr_cm[g + 1]
            seg = self.indices_cm[lo:hi]
            nv = int(rk.card[i])
            offs = lo + np.searchsorted(seg, rk.gcols[i, :nv])
            if not np.array_equal(self.indices_cm[offs], rk.gcols[i, :nv]):
                raise AssertionError("local stencil column missing in global pattern")
            m_slot[i, :nv] = self.m_cm[offs]
            rk.c_slot[i, :nv] = self.c_cm[offs]
        rk.cT_slot = rk.c_slot[padded.trans_row, padded.trans_slot]
        rk.m_i = self.m_lumped_cm[cm_of_new]
        rk.inv_m = self.inv_m_cm[cm_of_new]

        delta = (padded.cols == np.arange(N)[:, None]).astype(np.float64)
        rk.b_slot = delta - m_slot * rk.inv_m[padded.cols]
        rk.bT_slot = delta - m_slot * rk.inv_m[:, None]

        nvar = self.nvar
        n_lo = numbering.n_lo
        rk.U = np.zeros((N, nvar))
        rk.U_next = np.zeros((N, nvar))
        rk.f = np.zeros((N, nvar, d))
        rk.eor = np.zeros(N)
        rk.phi = np.zeros(N)
        rk.d = np.zeros((N, L))
        rk.alpha = np.zeros(N)
        rk.R = np.zeros((N, nvar))
        rk.P = np.zeros((n_lo, L, nvar))
        rk.l = np.zeros((N, L))
        rk.l_next = np.zeros((N, L))
        rk.rho_min = np.zeros(n_lo)
        rk.rho_max = np.zeros(n_lo)
        rk.phi_min = np.zeros(n_lo)

        rk.inflow_idx = np.zeros(0, dtype=np.int64)
        rk.slip_idx = np.zeros(0, dtype=np.int64)
        rk.slip_n = np.zeros((0, d))
        if self.bc is not None:
            def to_owned(orig_ids):
                cm = part.cm_perm[np.asarray(orig_ids, dtype=np.int64)]
                sel = (cm >= s) & (cm < e)
                return numbering.perm[cm[sel] - s], sel
            if self.bc.inflow_nodes is not None and len(self.bc.inflow_nodes):
                rk.inflow_idx, _ = to_owned(self.bc.inflow_nodes)
            if self.bc.slip_nodes is not None and len(self.bc.slip_nodes):
                rk.slip_idx, sel = to_owned(self.bc.slip_nodes)
                rk.slip_n = np.asarray(self.bc.slip_normals)[sel]
        return rk

    def _build_row_sends(self):
        part = self.part
        self.sends_rows: List[list] = [[] for _ in range(part.n_ranks)]
        for r in range(part.n_ranks):
            s_r, _ = part.ranges[r]
            gh = part.ghosts[r]
            n_owned = part.ranges[r][1] - s_r
            for o in range(part.n_ranks):
                ids = part.exports[o].get(r)
                if ids is None or len(ids) == 0:
                    continue
                s_o = part.ranges[o][0]
                src_new = self.ranks[o].numbering.perm[ids - s_o]
                pre_dst = n_owned + np.searchsorted(gh, ids)
                dst_new = self.ranks[r].numbering.perm[pre_dst]
                self.sends_rows[o].append((r, src_new, dst_new))

    def _build_l_sends(self):
        part = self.part
        grouped: Dict[tuple, list] = {}
        for r in range(part.n_ranks):
            rk = self.ranks[r]
            nb = rk.numbering
            for i in range(nb.n_lo, nb.n_lr):
                g = int(rk.cm_of_new[i])
                o = int(part.owner_of(np.array([g]))[0])
                s_o = part.ranges[o][0]
                ork = self.ranks[o]
                orow = int(ork.numbering.perm[g - s_o])
                nv = int(rk.card[i])
                gc = rk.gcols[i, :nv]
                o_gc = ork.gcols[orow, : int(ork.card[orow])]
                oslots = np.searchsorted(o_gc, gc)
                if not np.array_equal(o_gc[oslots], gc):
                    raise AssertionError("ghost row stencil not contained in owner row")
                grouped.setdefault((o, r), []).append(
                    (np.full(nv, orow, dtype=np.int64), oslots,
                     np.full(nv, i, dtype=np.int64), np.arange(nv, dtype=np.int64))
                )
        self.sends_l: List[list] = [[] for _ in range(part.n_ranks)]
        for (o, r), entries in sorted(grouped.items()):
            src_rows = np.concatenate([t[0] for t in entries])
            src_slots = np.concatenate([t[1] for t in entries])
            dst_rows = np.concatenate([t[2] for t in entries])
            dst_slots = np.concatenate([t[3] for t in entries])
            self.sends_l[o].append((r, src_rows, src_slots, dst_rows, dst_slots))

    # ----- state ---------------------------------------------------------

    def set_state(self, U: np.ndarray):
        """Load states given in original node order; ghosts are consistent."""
        U = np.asarray(U, dtype=np.float64)
        if U.shape != (self.n, self.nvar):
            raise ValueError("state array has the wrong shape")
        if not physics.is_admissible(U).all():
            raise AdmissibilityError("initial state is not admissible")
        for rk in self.ranks:
            rk.U[:] = U[rk.orig_of_new]
            rk.U_next[:] = rk.U

    def get_state(self) -> np.ndarray:
        """Gather owned states back into original node order."""
        out = np.empty((self.n, self.nvar))
        for rk in self.ranks:
            n_lo = rk.numbering.n_lo
            out[rk.orig_of_new[:n_lo]] = rk.U[:n_lo]
        return out

    # ----- sync plumbing --------------------------------------------------

    def _stage_rows(self, rank: int, name: str):
        rk = self.ranks[rank]
        items = [
            ("rows", name, dst, dst_idx, getattr(rk, name)[src_idx].copy())
            for dst, src_idx, dst_idx in self.sends_rows[rank]
        ]
        self.comm.stage(rank, items)

    def _stage_l(self, rank: int, name: str = "l"):
        rk = self.ranks[rank]
        items = [
            ("slots", "l", dst, dst_rows, dst_slots,
             getattr(rk, name)[src_rows, src_slots].copy())
            for dst, src_rows, src_slots, dst_rows, dst_slots in self.sends_l[rank]
        ]
        self.comm.stage(rank, items)

    def _deliver(self):
        def apply(_rank, items):
            count = 0
            for item in items:
                if item[0] == "rows":
                    _, name, dst, dst_idx, vals = item
                    getattr(self.ranks[dst], name)[dst_idx] = vals
                else:
                    _, name, dst, dst_rows, dst_slots, vals = item
                    getattr(self.ranks[dst], name)[dst_rows, dst_slots] = vals
                count += vals.size
            return count
        self.comm.deliver(apply)

    # ----- row loop drivers ------------------------------------------------

    def _run(self, body, lo, hi):
        ranges = [
            (a, min(a + self.chunk_size, hi)) for a in range(lo, hi, self.chunk_size)
        ]
        if self.workers <= 1 or len(ranges) <= 1:
            for a, b in ranges:
                body(a, b)
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                list(pool.map(lambda rng: body(*rng), ranges))

    def _run_owned_staged(self, rank, body, stage_fn):
        nb = self.ranks[rank].numbering
        if self.overlap:
            fired = exchange.overlapped_loop(
                nb.n_e, nb.n_i, nb.n_lo, body, stage_fn,
                workers=self.workers, chunk_size=self.chunk_size,
            )
            if fired != 1:
                raise RuntimeError("communication start fired more than once")
        else:
            self._run(body, 0, nb.n_lo)
            stage_fn()

    # ----- phase kernels ---------------------------------------------------

    def _k_entropies(self, rk, lo, hi):
        U = rk.U[lo:hi]
        rho = U[..., 0]
        eps = physics.internal_energy(U)
        rk.eor[lo:hi] = physics.power(rho * eps, self.gas.gp1_inv) / rho
        rk.phi[lo:hi] = eps * physics.power(rho, -self.gas.gamma)
        rk.f[lo:hi] = physics.flux(U, self.gas)

    def _k_viscosity(self, rk, lo, hi, with_alpha):
        sl = slice(lo, hi)
        cols = rk.cols[sl]
        U_i = rk.U[sl]
        U_j = rk.U[cols]
        c = rk.c_slot[sl]
        cT = rk.cT_slot[sl]
        d_full = riemann.d_ij_low(U_i[:, None], U_j, c, cT, self.gas)
        rk.d[sl] = np.where(rk.upper[sl], d_full, 0.0)
        if with_alpha:
            acc = IndicatorAccumulator(self.gas)
            acc.reset(U_i, eta_over_rho_i=rk.eor[sl], f_i=rk.f[sl])
            for s in range(rk.width):
                js = cols[:, s]
                acc.accumulate(
                    U_j[:, s], c[:, s],
                    eta_over_rho_j=rk.eor[js], f_j=rk.f[js],
                )
            rk.alpha[sl] = acc.result()

    def _k_mirror(self, rk, lo, hi):
        sl = slice(lo, hi)
        dT = rk.d[rk.trans_row[sl], rk.trans_slot[sl]]
        dd = np.where(rk.lower[sl], dT, rk.d[sl])
        rowsum = dd.sum(axis=1)
        rows = np.arange(lo, hi)
        dd[rows - lo, rk.diag_slot[sl]] = -rowsum
        rk.d[sl] = dd

    def _k_low_order(self, rk, tau, lo, hi):
        sl = slice(lo, hi)
        cols = rk.cols[sl]
        U_i = rk.U[sl]
        U_j = rk.U[cols]
        dU = U_j - U_i[:, None]
        fdc = ((rk.f[cols] - rk.f[sl][:, None]) * rk.c_slot[sl][:, :, None, :]).sum(axis=-1)
        d = rk.d[sl]
        rk.U_next[sl] = U_i + (tau * rk.inv_m[sl])[:, None] * (
            (d[..., None] * dU - fdc).sum(axis=1)
        )
        dH = d * (0.5 * (rk.alpha[sl][:, None] + rk.alpha[cols]))
        rk.R[sl] = (dH[..., None] * dU - fdc).sum(axis=1)
        d_safe = np.where(d != 0.0, d, 1.0)
        corr = np.where(d[..., None] != 0.0, fdc / (2.0 * d_safe[..., None]), 0.0)
        Ubar = 0.5 * (U_i[:, None] + U_j) - corr
        rk.rho_min[sl] = Ubar[..., 0].min(axis=1)
        rk.rho_max[sl] = Ubar[..., 0].max(axis=1)
        rk.phi_min[sl] = rk.phi[cols].min(axis=1)

    def _k_correction(self, rk, tau, lo, hi):
        sl = slice(lo, hi)
        cols = rk.cols[sl]
        d = rk.d[sl]
        dH = d * (0.5 * (rk.alpha[sl][:, None] + rk.alpha[cols]))
        dU = rk.U[cols] - rk.U[sl][:, None]
        K = (
            rk.b_slot[sl][..., None] * rk.R[cols]
            - rk.bT_slot[sl][..., None] * rk.R[sl][:, None]
            + (dH - d)[..., None] * dU
        )
        factor = tau * rk.inv_m[sl] * (rk.card[sl] - 1)
        rk.P[sl] = factor[:, None, None] * K
        rk.l[sl] = limiter.limiter_compute(
            rk.U_next[sl][:, None, :], rk.P[sl],
            rk.rho_min[sl][:, None], rk.rho_max[sl][:, None],
            rk.phi_min[sl][:, None],
            max_newton=self.newton_steps, gas=self.gas,
        )

    def _k_limited_update(self, rk, lo, hi, last):
        sl = slice(lo, hi)
        lT = rk.l[rk.trans_row[sl], rk.trans_slot[sl]]
        minl = np.minimum(rk.l[sl], lT)
        upd = (minl[..., None] * rk.P[sl]).sum(axis=1)
        rk.U_next[sl] += rk.lam[sl][:, None] * upd
        if last:
            self._k_boundary(rk, lo, hi)
        else:
            rk.P[sl] *= (1.0 - minl)[..., None]
            rk.l_next[sl] = limiter.limiter_compute(
                rk.U_next[sl][:, None, :], rk.P[sl],
                rk.rho_min[sl][:, None], rk.rho_max[sl][:, None],
                rk.phi_min[sl][:, None],
                max_newton=self.newton_steps, gas=self.gas,
            )

    def _k_boundary(self, rk, lo, hi):
        if len(rk.slip_idx):
            in_range = (rk.slip_idx >= lo) & (rk.slip_idx < hi)
            idx = rk.slip_idx[in_range]
            if len(idx):
                nrm = rk.slip_n[in_range]
                mom = rk.U_next[idx, 1:-1]
                rk.U_next[idx, 1:-1] = mom - (mom * nrm).sum(axis=1)[:, None] * nrm
        if len(rk.inflow_idx):
            idx = rk.inflow_idx[(rk.inflow_idx >= lo) & (rk.inflow_idx < hi)]
            if len(idx):
                rk.U_next[idx] = np.asarray(self.bc.farfield, dtype=np.float64)

    # ----- stepping --------------------------------------------------------

    def euler_step(self, tau: Optional[float] = None, tau_max: float = np.inf) -> float:
        """One forward-Euler step; returns the time step used.

        When tau is None the CFL bound is computed and capped by tau_max;
        otherwise the given step is used unchanged (RK stages 2 and 3).
        """
        R = self.part.n_ranks
        t0 = time.perf_counter()
        for rk in self.ranks:
            self._run(lambda a, b, rk=rk: self._k_entropies(rk, a, b), 0, rk.numbering.n_lr)
        t1 = time.perf_counter()
        self.timers["step0"] += t1 - t0

        for r in range(R):
            rk = self.ranks[r]
            self._run_owned_staged(
                r,
                lambda a, b, rk=rk: self._k_viscosity(rk, a, b, with_alpha=True),
                lambda r=r: self._stage_rows(r, "alpha"),
            )
            self._run(
                lambda a, b, rk=rk: self._k_viscosity(rk, a, b, with_alpha=False),
                rk.numbering.n_lo, rk.numbering.n_lr,
            )
        self._deliver()
        t2 = time.perf_counter()
        self.timers["step1"] += t2 - t1

        for rk in self.ranks:
            self._run(lambda a, b, rk=rk: self._k_mirror(rk, a, b), 0, rk.numbering.n_lo)
        if tau is None:
            locs = []
            for rk in self.ranks:
                n_lo = rk.numbering.n_lo
                rows = np.arange(n_lo)
                d_diag = rk.d[rows, rk.diag_slot[:n_lo]]
                locs.append(_tau_local(d_diag, rk.m_i[:n_lo]))
            tau_min = exchange.allreduce_min(locs)
            if not np.isfinite(tau_min):
                raise ValueError("constant field, the time step bound is unbounded")
            tau = min(self.c_cfl * tau_min, tau_max)
        tau = float(tau)
        self.tau_last = tau
        t3 = time.perf_counter()
        self.timers["step2"] += t3 - t2

        for r in range(R):
            rk = self.ranks[r]
            self._run_owned_staged(
                r,
                lambda a, b, rk=rk: self._k_low_order(rk, tau, a, b),
                lambda r=r: self._stage_rows(r, "R"),
            )
        self._deliver()
        t4 = time.perf_counter()
        self.timers["step3"] += t4 - t3

        if self.limiter_passes == 0:
            for r in range(R):
                rk = self.ranks[r]
                self._run_owned_staged(
                    r,
                    lambda a, b, rk=rk: self._k_boundary(rk, a, b),
                    lambda r=r: self._stage_rows(r, "U_next"),
                )
            self._deliver()
            self._finish_step()
            self.timers["step6"] += time.perf_counter() - t4
            return tau

        for r in range(R):
            rk = self.ranks[r]
            self._run_owned_staged(
                r,
                lambda a, b, rk=rk: self._k_correction(rk, tau, a, b),
                lambda r=r: self._stage_l(r, "l"),
            )
        self._deliver()
        t5 = time.perf_counter()
        self.timers["step4"] += t5 - t4

        for p in range(self.limiter_passes):
            last = p == self.limiter_passes - 1
            for r in range(R):
                rk = self.ranks[r]
                if last:
                    stage = lambda r=r: self._stage_rows(r, "U_next")
                else:
                    stage = lambda r=r: self._stage_l(r, "l_next")
                self._run_owned_staged(
                    r,
                    lambda a, b, rk=rk, last=last: self._k_limited_update(rk, a, b, last),
                    stage,
                )
            if not last:
                for rk in self.ranks:
                    rk.l, rk.l_next = rk.l_next, rk.l
            self._deliver()
            t6 = time.perf_counter()
            self.timers["step6" if last else "step5"] += t6 - t5
            t5 = t6
        self._finish_step()
        return tau

    def _finish_step(self):
        for rk in self.ranks:
            rk.U, rk.U_next = rk.U_next, rk.U
        for rk in self.ranks:
            n_lo = rk.numbering.n_lo
            ok = physics.is_admissible(rk.U[:n_lo])
            if not ok.all():
                bad = int(np.argmin(ok))
                gid = int(rk.orig_of_new[bad])
                raise AdmissibilityError(f"inadmissible state at node {gid}")
        self.n_euler_steps += 1

    def ssp_rk3_step(self, tau: Optional[float] = None, tau_max: float = np.inf) -> float:
        """One SSP-RK3 step; the first stage's time step is reused by all stages."""
        U0 = [rk.U.copy() for rk in self.ranks]
        tau = self.euler_step(tau, tau_max)
        self.euler_step(tau)
        # incremental form of the convex combinations: a vanishing stage
        # update leaves the state bitwise unchanged
        for rk, u0 in zip(self.ranks, U0):
            rk.U[:] = u0 + 0.25 * (rk.U - u0)
        self.euler_step(tau)
        for rk, u0 in zip(self.ranks, U0):
            rk.U[:] = u0 + (2.0 / 3.0) * (rk.U - u0)
        return tau

    def advance(self, t_final: float, use_rk3: bool = True, on_step=None) -> float:
        """March from t = 0 to t_final; returns the number of steps taken."""
        t = 0.0
        steps = 0
        while t < t_final - 1e-14:
            step = self.ssp_rk3_step if use_rk3 else self.euler_step
            tau = step(tau_max=t_final - t)
            t += tau
            steps += 1
            if on_step is not None:
                on_step(steps, t)
        return steps
