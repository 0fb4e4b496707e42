"""Convex limiting on density bounds and a specific-entropy minimum.

Given a base state U and an update direction P, the limiter returns the
largest step t in [0, 1] (up to a fixed number of bracketing quadratic
Newton iterations) such that U + t P stays inside the local density interval
and above the local specific-entropy bound.  The constraint function

    Psi(U) = rho * eps - phi_min * rho^(gamma+1)

is 3-convex along rays (third derivative of fixed negative sign), which the
quadratic Newton update exploits to keep a valid bracket at all times.

All operations are vectorized with masked selects so batches of lanes run
with identical control flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .physics import AIR, GasConstants, power

__all__ = [
    "Bounds",
    "accumulate_bounds",
    "psi_entropy",
    "dpsi_dt",
    "quadratic_newton_step",
    "limiter_compute",
    "PSI_SIGN",
    "TOL_SCALE",
]

# Psi is concave-cubic along rays where the entropy constraint activates.
PSI_SIGN = -1.0
# Relative tolerance on Psi, scaled by the magnitude of Psi at t = 0.
TOL_SCALE = 1e-10
_TINY = float(np.finfo(np.float64).tiny)


@dataclass
class Bounds:
    """Per-row limiter bounds: density interval and entropy floor."""

    rho_min: np.ndarray
    rho_max: np.ndarray
    phi_min: np.ndarray

    @classmethod
    def fresh(cls, shape, dtype=np.float64) -> "Bounds":
        return cls(
            rho_min=np.full(shape, np.inf, dtype=dtype),
            rho_max=np.full(shape, -np.inf, dtype=dtype),
            phi_min=np.full(shape, np.inf, dtype=dtype),
        )


def accumulate_bounds(
    acc: Bounds,
    U_i: np.ndarray,
    U_j: np.ndarray,
    Ubar_ij: np.ndarray,
    gas: GasConstants = AIR,
) -> Bounds:
    """Fold one stencil neighbor into the running bounds.

    Tracks min/max of the bar-state density and the minimum of the scaled
    specific entropy of the neighbor states.
    """
    rho_bar = Ubar_ij[..., 0]
    np.minimum(acc.rho_min, rho_bar, out=acc.rho_min)
    np.maximum(acc.rho_max, rho_bar, out=acc.rho_max)
    rho_j = U_j[..., 0]
    eps_j = U_j[..., -1] - 0.5 * (U_j[..., 1:-1] ** 2).sum(axis=-1) / rho_j
    np.minimum(acc.phi_min, eps_j * power(rho_j, -gas.gamma), out=acc.phi_min)
    return acc


def _rho_eps(U: np.ndarray) -> np.ndarray:
    rho = U[..., 0]
    mom = U[..., 1:-1]
    E = U[..., -1]
    return rho * E - 0.5 * (mom * mom).sum(axis=-1)


def psi_entropy(U: np.ndarray, phi_min: np.ndarray, gas: GasConstants = AIR) -> np.ndarray:
    """Psi = rho*eps - phi_min * rho^(gamma+1); nonnegative iff phi(U) >= phi_min."""
    rho = U[..., 0]
    return _rho_eps(U) - phi_min * power(rho, gas.gamma + 1.0)


def dpsi_dt(
    U: np.ndarray,
    P: np.ndarray,
    t: np.ndarray,
    phi_min: np.ndarray,
    gas: GasConstants = AIR,
) -> np.ndarray:
    """Closed-form derivative of t -> Psi(U + t P)."""
    V = U + t[..., None] * P
    rho, mom, E = V[..., 0], V[..., 1:-1], V[..., -1]
    rho_p, mom_p, E_p = P[..., 0], P[..., 1:-1], P[..., -1]
    return (
        rho_p * E
        + rho * E_p
        - (mom * mom_p).sum(axis=-1)
        - phi_min * (gas.gamma + 1.0) * power(rho, gas.gamma) * rho_p
    )


def quadratic_newton_step(t_L, t_R, Psi_L, Psi_R, dPsi_L, dPsi_R, sign=PSI_SIGN):
    """One bracketing quadratic Newton update via divided differences.

    Roundoff safeguards: the discriminant is clamped at zero, endpoints with
    a vanishing denominator are left unchanged, and the new bracket is
    clamped into the old one.
    """
    eps = _TINY * (1.0 + t_R)
    with np.errstate(over="ignore", invalid="ignore"):
        scaling = 1.0 / (t_R - t_L + eps)
        d11 = dPsi_L
        d12 = (Psi_R - Psi_L) * scaling
        d22 = dPsi_R
        d112 = (d12 - d11) * scaling
        d122 = (d22 - d12) * scaling
        lam_L = np.maximum(dPsi_L * dPsi_L - 4.0 * Psi_L * d112, 0.0)
        lam_R = np.maximum(dPsi_R * dPsi_R - 4.0 * Psi_R * d122, 0.0)
        den_L = dPsi_L + sign * np.sqrt(lam_L)
        den_R = dPsi_R + sign * np.sqrt(lam_R)
        new_L = np.where(
            np.abs(den_L) > eps, t_L - 2.0 * Psi_L / np.where(den_L, den_L, 1.0), t_L
        )
        new_R = np.where(
            np.abs(den_R) > eps, t_R - 2.0 * Psi_R / np.where(den_R, den_R, 1.0), t_R
        )
    # collapsed brackets can overflow the divided differences; keep such
    # lanes at their old endpoints
    new_L = np.where(np.isfinite(new_L), new_L, t_L)
    new_R = np.where(np.isfinite(new_R), new_R, t_R)
    new_L = np.clip(new_L, t_L, t_R)
    new_R = np.clip(new_R, t_L, t_R)
    # the local quadratic models can cross when Psi is not exactly
    # quadratic; reordering keeps the bracket property
    return np.minimum(new_L, new_R), np.maximum(new_L, new_R)


def limiter_compute(
    U: np.ndarray,
    P: np.ndarray,
    rho_min: np.ndarray,
    rho_max: np.ndarray,
    phi_min: np.ndarray,
    max_newton: int = 2,
    gas: GasConstants = AIR,
) -> np.ndarray:
    """Largest admissible step factor l in [0, 1] for the update U + l P.

    First clamps the right bracket endpoint by the density interval, then
    performs up to max_newton bracketing quadratic Newton iterations on the
    entropy constraint.  Lanes that converge early are masked out; all lanes
    share the control flow.
    """
    rho_u = U[..., 0]
    rho_p = P[..., 0]
    abs_rho_p = np.maximum(np.abs(rho_p), _TINY)

    t_R = np.ones(np.broadcast_shapes(rho_u.shape, rho_p.shape), dtype=U.dtype)
    over = rho_u + t_R * rho_p > rho_max
    t_R = np.where(over, np.abs(rho_max - rho_u) / abs_rho_p, t_R)
    under = rho_u + t_R * rho_p < rho_min
    t_R = np.where(under, np.abs(rho_min - rho_u) / abs_rho_p, t_R)
    t_R = np.clip(t_R, 0.0, 1.0)
    t_L = np.zeros_like(t_R)

    tol = TOL_SCALE * np.abs(_rho_eps(U)) * np.ones_like(t_R)
    active = np.ones(t_R.shape, dtype=bool)
    for _ in range(max_newton):
        Psi_R = psi_entropy(U + t_R[..., None] * P, phi_min, gas)
        closed = active & (Psi_R >= 0.0)
        t_L = np.where(closed, t_R, t_L)
        active = active & ~closed
        Psi_L = psi_entropy(U + t_L[..., None] * P, phi_min, gas)
        active = active & (Psi_L > tol)
        if not active.any():
            break
        dPsi_L = dpsi_dt(U, P, t_L, phi_min, gas)
        dPsi_R = dpsi_dt(U, P, t_R, phi_min, gas)
        new_L, new_R = quadratic_newton_step(t_L, t_R, Psi_L, Psi_R, dPsi_L, dPsi_R)
        t_L = np.where(active, new_L, t_L)
        t_R = np.where(active, new_R, t_R)
    return t_L
