"""Conserved-state algebra and equation of state for a polytropic ideal gas.

States are stored array-of-struct: the last axis holds (rho, m_1..m_d, E),
so a field of N nodes in d space dimensions is an (N, d+2) float64 array.
All functions broadcast over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GasConstants",
    "AIR",
    "AdmissibilityError",
    "power",
    "set_power_function",
    "n_variables",
    "internal_energy",
    "pressure",
    "speed_of_sound",
    "specific_entropy",
    "specific_entropy_phi",
    "harten_entropy",
    "harten_entropy_derivative",
    "flux",
    "is_admissible",
]


@dataclass(frozen=True)
class GasConstants:
    """Ratio of specific heats plus frequently used derived constants."""

    gamma: float = 7.0 / 5.0
    gm1: float = field(init=False)
    gp1_inv: float = field(init=False)
    gm1_over_2g: float = field(init=False)
    two_g_over_gm1: float = field(init=False)

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        object.__setattr__(self, "gm1", self.gamma - 1.0)
        object.__setattr__(self, "gp1_inv", 1.0 / (self.gamma + 1.0))
        object.__setattr__(self, "gm1_over_2g", (self.gamma - 1.0) / (2.0 * self.gamma))
        object.__setattr__(self, "two_g_over_gm1", 2.0 * self.gamma / (self.gamma - 1.0))


AIR = GasConstants()


class AdmissibilityError(ValueError):
    """Raised when a state violates rho > 0 or internal energy > 0."""


# The entropy family leans on pow() heavily; keep it swappable in one place
# so an optimized vector implementation can be dropped in.
_pow = np.power


def power(x, y):
    """Evaluate x**y through the pluggable power implementation."""
    return _pow(x, y)


def set_power_function(fn=None):
    """Replace the power implementation used by the entropy operations.

    Passing None restores numpy's default.
    """
    global _pow
    _pow = np.power if fn is None else fn


def n_variables(dim: int) -> int:
    return dim + 2


def _split(U: np.ndarray):
    return U[..., 0], U[..., 1:-1], U[..., -1]


def internal_energy(U: np.ndarray) -> np.ndarray:
    """epsilon = E - |m|^2 / (2 rho)."""
    rho, m, E = _split(U)
    return E - 0.5 * (m * m).sum(axis=-1) / rho


def pressure(U: np.ndarray, gas: GasConstants = AIR) -> np.ndarray:
    """p = (gamma - 1) * epsilon."""
    return gas.gm1 * internal_energy(U)


def speed_of_sound(U: np.ndarray, gas: GasConstants = AIR) -> np.ndarray:
    """c = sqrt(gamma p / rho); requires rho > 0 and p >= 0."""
    rho = U[..., 0]
    p = pressure(U, gas)
    if np.any(rho <= 0.0) or np.any(p < 0.0):
        raise AdmissibilityError("speed_of_sound requires rho > 0 and p >= 0")
    return np.sqrt(gas.gamma * p / rho)


def specific_entropy(U: np.ndarray, gas: GasConstants = AIR) -> np.ndarray:
    """s = log(e^{1/(gamma-1)} / rho), with the additive offset fixed to 0."""
    rho, _, _ = _split(U)
    if np.any(rho <= 0.0):
        raise AdmissibilityError("specific_entropy requires rho > 0")
    e = internal_energy(U) / rho
    if np.any(e <= 0.0):
        raise AdmissibilityError("specific_entropy requires e > 0")
    return np.log(e) / gas.gm1 - np.log(rho)


def specific_entropy_phi(U: np.ndarray, gas: GasConstants = AIR) -> np.ndarray:
    """Scaled specific entropy phi = epsilon * rho^{-gamma}."""
    rho = U[..., 0]
    if np.any(rho <= 0.0):
        raise AdmissibilityError("specific_entropy_phi requires rho > 0")
    return internal_energy(U) * power(rho, -gas.gamma)


def harten_entropy(U: np.ndarray, gas: GasConstants = AIR) -> np.ndarray:
    """eta = (rho * epsilon)^{1/(gamma+1)}."""
    rho_eps = U[..., 0] * internal_energy(U)
    if np.any(rho_eps <= 0.0):
        raise AdmissibilityError("harten_entropy requires rho*epsilon > 0")
    return power(rho_eps, gas.gp1_inv)


def harten_entropy_derivative(U: np.ndarray, gas: GasConstants = AIR) -> np.ndarray:
    """Gradient of the Harten entropy w.r.t. (rho, m, E).

    Returns (rho eps)^{-gamma/(gamma+1)}/(gamma+1) * (E, -m, rho), ordered to
    match the state layout.
    """
    rho, m, E = _split(U)
    rho_eps = rho * internal_energy(U)
    if np.any(rho_eps <= 0.0):
        raise AdmissibilityError("harten_entropy_derivative requires rho*epsilon > 0")
    scale = power(rho_eps, -gas.gamma * gas.gp1_inv) * gas.gp1_inv
    out = np.empty_like(U)
    out[..., 0] = scale * E
    out[..., 1:-1] = -scale[..., None] * m
    out[..., -1] = scale * rho
    return out


def flux(U: np.ndarray, gas: GasConstants = AIR) -> np.ndarray:
    """Euler flux f(U) = (m, v (x) m + p I, v (E + p)), shape (..., d+2, d)."""
    rho, m, E = _split(U)
    d = m.shape[-1]
    v = m / rho[..., None]
    p = pressure(U, gas)
    out = np.empty(U.shape + (d,), dtype=U.dtype)
    out[..., 0, :] = m
    out[..., 1:-1, :] = v[..., :, None] * m[..., None, :]
    for k in range(d):
        out[..., 1 + k, k] += p
    out[..., -1, :] = v * (E + p)[..., None]
    return out


def is_admissible(U: np.ndarray) -> np.ndarray:
    """Pointwise admissibility: rho > 0 and internal energy > 0."""
    return (U[..., 0] > 0.0) & (internal_energy(U) > 0.0)
