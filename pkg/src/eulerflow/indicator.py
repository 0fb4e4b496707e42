"""Normalized entropy-viscosity commutator driving the high-order viscosity.

The indicator measures local production of the Harten entropy relative to a
worst-case bound and returns a per-node factor alpha in [0, 1].  Constant or
smooth data yields alpha close to zero; strong shocks yield alpha close to
one.
"""

from __future__ import annotations

import numpy as np

from . import physics
from .physics import AIR, GasConstants

__all__ = ["IndicatorAccumulator", "DENOMINATOR_FLOOR"]

# Below this denominator the field is locally constant to machine precision
# and no viscosity is needed.
DENOMINATOR_FLOOR = 1e-300


class IndicatorAccumulator:
    """Accumulates the commutator sums for one node (or a batch of nodes).

    All arrays broadcast over leading axes, so a batch of rows can be
    processed with one accumulator.  Every j in the stencil must be visited
    exactly once, including j = i (which contributes zero).
    """

    def __init__(self, gas: GasConstants = AIR):
        self.gas = gas
        self._ready = False

    def reset(self, U_i: np.ndarray, eta_over_rho_i=None, f_i=None):
        eta_i = physics.harten_entropy(U_i, self.gas)
        self.eor_i = eta_i / U_i[..., 0] if eta_over_rho_i is None else eta_over_rho_i
        self.etaprime_i = physics.harten_entropy_derivative(U_i, self.gas)
        self.f_i = physics.flux(U_i, self.gas) if f_i is None else f_i
        self.a = np.zeros(U_i.shape[:-1], dtype=U_i.dtype)
        self.b = np.zeros(U_i.shape, dtype=U_i.dtype)
        self._ready = True

    def accumulate(
        self, U_j: np.ndarray, c_ij: np.ndarray, beta_ij=None, eta_over_rho_j=None, f_j=None
    ):
        """Add the contribution of stencil neighbor j.

        The beta_ij argument is accepted for call-signature compatibility but
        not used by the commutator formulas.  Precomputed per-node quantities
        can be passed to avoid recomputation in hot loops.
        """
        if not self._ready:
            raise RuntimeError("accumulate called before reset")
        if eta_over_rho_j is None:
            eta_over_rho_j = physics.harten_entropy(U_j, self.gas) / U_j[..., 0]
        mom_j = U_j[..., 1:-1]
        self.a += (eta_over_rho_j - self.eor_i) * (mom_j * c_ij).sum(axis=-1)
        if f_j is None:
            f_j = physics.flux(U_j, self.gas)
        self.b += ((f_j - self.f_i) * c_ij[..., None, :]).sum(axis=-1)

    def result(self) -> np.ndarray:
        """Normalized ratio alpha = N / D clamped to [0, 1]; 0 when D vanishes."""
        numer = np.abs(
            self.a - (self.etaprime_i * self.b).sum(axis=-1) + self.eor_i * self.b[..., 0]
        )
        weights = np.abs(self.etaprime_i.copy())
        weights[..., 0] = np.abs(self.etaprime_i[..., 0] - self.eor_i)
        denom = np.abs(self.a) + (weights * np.abs(self.b)).sum(axis=-1)
        safe = np.where(denom > DENOMINATOR_FLOOR, denom, 1.0)
        alpha = np.clip(numer / safe, 0.0, 1.0)
        return np.where(denom > DENOMINATOR_FLOOR, alpha, 0.0)
