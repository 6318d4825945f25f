"""Eigenbasis of the bouncing particle: gravity + hard floor.

In dimensionless units (lengths in z_g = (hbar^2 / 2 m^2 g)^(1/3), energies
in E_g = m g z_g, times in t_g = hbar / E_g) the stationary equation reads

    -psi'' + z psi = E psi,    psi(0) = 0,  psi(inf) = 0.

The apparent factor 2 of the SI equation is absorbed by the z_g definition
(see README, "Units and conventions").  Eigenfunctions are shifted Airy
functions psi_i(z) = N_i Ai(z - z_i) with N_i = 1/|Ai'(-z_i)| and energies
E_i = z_i, where -z_i are the zeros of Ai.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .airy import airy_ai, airy_ai_prime, airy_zeros
from .quadrature import (GAUSS_SLOTS as _GAUSS_SLOTS, GAUSS_W as _GAUSS_W,
                         KRONROD_W as _KRONROD_W, KRONROD_X as _KRONROD_X,
                         QuadratureError, adaptive_quadrature)

__all__ = ["UnitSystem", "EigenBasis", "BasisProjectionError", "build_basis"]

HBAR = 1.054571817e-34       # J s
NEUTRON_MASS = 1.67492749804e-27  # kg
STANDARD_GRAVITY = 9.80665   # m/s^2
NEUTRON_MOMENT = 9.6623651e-27    # J/T  (|mu_n| = 60.3 neV/T)

# integration window extends this far past the last turning point; the
# eigenfunction tail beyond decays like exp(-2/3 * 15^(3/2)) ~ 1e-17
_TAIL = 15.0


class BasisProjectionError(ValueError):
    """Initial state is not representable in the truncated basis."""


@dataclass(frozen=True)
class UnitSystem:
    """Natural gravitational scales of a bouncing particle."""

    mass: float                      # kg
    gravity: float                   # m/s^2
    magnetic_moment: float | None = None  # J/T
    z_g: float = field(init=False)   # m
    t_g: float = field(init=False)   # s
    E_g: float = field(init=False)   # J

    def __post_init__(self):
        if self.mass <= 0 or self.gravity <= 0:
            raise ValueError("mass and gravity must be positive")
        if self.magnetic_moment is not None and self.magnetic_moment <= 0:
            raise ValueError("magnetic moment must be positive")
        z_g = (HBAR ** 2 / (2.0 * self.mass ** 2 * self.gravity)) ** (1.0 / 3.0)
        E_g = self.mass * self.gravity * z_g
        object.__setattr__(self, "z_g", z_g)
        object.__setattr__(self, "E_g", E_g)
        object.__setattr__(self, "t_g", HBAR / E_g)

    @classmethod
    def neutron(cls) -> "UnitSystem":
        return cls(mass=NEUTRON_MASS, gravity=STANDARD_GRAVITY,
                   magnetic_moment=NEUTRON_MOMENT)

    def kick_amplitude(self, gradient: float) -> float:
        """Dimensionless kick amplitude a_k = |mu| * gradient / (m g)."""
        if self.magnetic_moment is None:
            raise ValueError("unit system has no magnetic moment")
        return self.magnetic_moment * gradient / (self.mass * self.gravity)

    def to_si(self, value, quantity: str):
        """Dimensionless -> SI for quantity in {length, time, energy}."""
        return value * self._scale(quantity)

    def from_si(self, value, quantity: str):
        """SI -> dimensionless."""
        return value / self._scale(quantity)

    def _scale(self, quantity: str) -> float:
        try:
            return {"length": self.z_g, "time": self.t_g, "energy": self.E_g}[quantity]
        except KeyError:
            raise ValueError(f"unknown quantity kind: {quantity!r}") from None


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Truncated eigenbasis: zeros z_i, norms N_i, position matrix Z.

    Immutable after construction; safe to share across workers.  Compared
    by identity (eq=False) so instances can key weak caches.
    """

    m: int
    zeros: np.ndarray   # (m,) Airy-zero magnitudes = dimensionless energies
    norms: np.ndarray   # (m,) N_i = 1/|Ai'(-z_i)|
    z_matrix: np.ndarray  # (m, m) <i|z|j>, symmetric

    def __post_init__(self):
        self.zeros.setflags(write=False)
        self.norms.setflags(write=False)
        self.z_matrix.setflags(write=False)

    @property
    def z_max(self) -> float:
        """Upper edge of the quadrature window used for this basis."""
        return float(self.zeros[-1] + _TAIL)

    def eval_eigenstate(self, i: int, z):
        """psi_i(z) = N_i Ai(z - z_i); 1-based state index, z >= 0."""
        if not 1 <= i <= self.m:
            raise IndexError(f"state index {i} outside 1..{self.m}")
        z = np.asarray(z, dtype=np.float64)
        if np.any(z < 0):
            raise ValueError("height must be non-negative")
        out = self.norms[i - 1] * airy_ai(np.atleast_1d(z) - self.zeros[i - 1])
        return float(out[0]) if z.ndim == 0 else out

    def transition_frequencies(self) -> np.ndarray:
        """z_i - z_1 for i = 2..m (dimensionless angular frequencies)."""
        return self.zeros[1:] - self.zeros[0]

    def project_gaussian(self, mu_z: float, sigma_z: float,
                         quad_tol: float = 1e-12):
        """Expand the displaced Gaussian (2/pi sigma^2)^(1/4) exp[-(z-mu)^2/sigma^2].

        Returns (coefficients renormalized to unit norm, captured norm before
        renormalization).  Warns below 0.999 captured norm, raises below 0.95.
        """
        if mu_z <= 0 or sigma_z <= 0:
            raise ValueError("mu_z and sigma_z must be positive")
        amp = (2.0 / (math.pi * sigma_z ** 2)) ** 0.25

        def packet(z):
            return amp * np.exp(-((z - mu_z) / sigma_z) ** 2)

        coeffs = _overlap_integrals(self.zeros, self.norms, packet,
                                    0.0, self.z_max, tol=quad_tol)
        captured = float(np.sum(coeffs ** 2))
        if captured < 0.95:
            raise BasisProjectionError(
                f"captured norm {captured:.4f} < 0.95: basis too small or "
                "state leaks below floor")
        if captured < 0.999:
            warnings.warn(
                f"captured norm {captured:.6f} < 0.999: basis too small or "
                "state leaks below floor", stacklevel=2)
        return coeffs / math.sqrt(captured), captured


def _overlap_integrals(zeros, norms, func, a, b, tol=1e-12,
                       max_panels: int = 8192) -> np.ndarray:
    """<psi_i | func> for all i at once, shared adaptive panel set."""
    edges = np.linspace(a, b, max(16, 2 * int(b - a)) + 1)
    lo, hi = edges[:-1], edges[1:]

    def panel_integrals(lo, hi):
        x, half, psi = _eval_states_on_panels(zeros, norms, lo, hi)
        fx = func(x)
        k = np.einsum('pk,pki->pi', _KRONROD_W[None, :] * fx * half[:, None], psi)
        g = np.einsum('pk,pki->pi', _GAUSS_W[None, :] * fx[:, _GAUSS_SLOTS] * half[:, None],
                      psi[:, _GAUSS_SLOTS])
        return k, np.abs(k - g)

    vals, errs = panel_integrals(lo, hi)
    while True:
        worst = float(errs.sum(axis=0).max())
        if worst <= tol:
            return vals.sum(axis=0)
        if len(lo) >= max_panels:
            i = int(np.argmax(errs.sum(axis=0)))
            raise QuadratureError(
                f"overlap with state {i + 1} did not converge: "
                f"error {worst:.3e} > tol {tol:.3e}")
        panel_err = errs.max(axis=1)
        split = panel_err >= max(tol / (4.0 * len(lo)), 0.25 * panel_err.max())
        keep = ~split
        mid = 0.5 * (lo[split] + hi[split])
        new_vals, new_errs = panel_integrals(
            np.concatenate([lo[split], mid]), np.concatenate([mid, hi[split]]))
        vals = np.concatenate([vals[keep], new_vals])
        errs = np.concatenate([errs[keep], new_errs])
        lo = np.concatenate([lo[keep], lo[split], mid])
        hi = np.concatenate([hi[keep], mid, hi[split]])


def _eval_states_on_panels(zeros, norms, lo, hi):
    """psi_i at the Kronrod nodes of each panel; shape (panels, 15, m)."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * _KRONROD_X[None, :]
    arg = x[:, :, None] - zeros[None, None, :]
    psi = airy_ai(arg.ravel()).reshape(arg.shape) * norms[None, None, :]
    return x, half, psi


def position_matrix(zeros: np.ndarray, norms: np.ndarray,
                    tol: float = 1e-10, max_panels: int = 8192) -> np.ndarray:
    """<i|z|j> by adaptive Gauss-Kronrod quadrature on [0, z_M + 15].

    All matrix elements share one adaptively refined panel set (the
    eigenfunctions are evaluated once per panel), with the Kronrod/Gauss
    error tracked per element.  Symmetric by construction.
    """
    m = len(zeros)
    upper = float(zeros[-1] + _TAIL)
    edges = np.linspace(0.0, upper, max(16, 2 * int(upper)) + 1)
    lo, hi = edges[:-1], edges[1:]

    def panel_integrals(lo, hi):
        x, half, psi = _eval_states_on_panels(zeros, norms, lo, hi)
        wz_k = _KRONROD_W[None, :] * x * half[:, None]
        k = np.einsum('pk,pki,pkj->pij', wz_k, psi, psi, optimize=True)
        xg = x[:, _GAUSS_SLOTS]
        wz_g = _GAUSS_W[None, :] * xg * half[:, None]
        g = np.einsum('pk,pki,pkj->pij', wz_g, psi[:, _GAUSS_SLOTS], psi[:, _GAUSS_SLOTS],
                      optimize=True)
        return k, np.abs(k - g)

    vals, errs = panel_integrals(lo, hi)
    while True:
        per_element = errs.sum(axis=0)
        worst = float(per_element.max())
        if worst <= tol:
            break
        if len(lo) >= max_panels:
            i, j = np.unravel_index(np.argmax(per_element), per_element.shape)
            raise QuadratureError(
                f"position matrix element ({i + 1}, {j + 1}) did not converge: "
                f"error {worst:.3e} > tol {tol:.3e} with {len(lo)} panels")
        panel_err = errs.max(axis=(1, 2))
        split = panel_err >= max(tol / (4.0 * len(lo)), 0.25 * panel_err.max())
        keep = ~split
        mid = 0.5 * (lo[split] + hi[split])
        new_vals, new_errs = panel_integrals(
            np.concatenate([lo[split], mid]), np.concatenate([mid, hi[split]]))
        vals = np.concatenate([vals[keep], new_vals])
        errs = np.concatenate([errs[keep], new_errs])
        lo = np.concatenate([lo[keep], lo[split], mid])
        hi = np.concatenate([hi[keep], mid, hi[split]])

    z_mat = vals.sum(axis=0)
    return 0.5 * (z_mat + z_mat.T)


def build_basis(m: int, quad_tol: float = 1e-10) -> EigenBasis:
    """Construct the truncated eigenbasis with M = ``m`` states."""
    zeros = airy_zeros(m)
    norms = 1.0 / np.abs(airy_ai_prime(-zeros))
    z_mat = position_matrix(zeros, norms, tol=quad_tol)
    return EigenBasis(m=m, zeros=zeros, norms=norms, z_matrix=z_mat)


def diagonal_position_closed_form(zeros: np.ndarray) -> np.ndarray:
    """Closed form <i|z|i> = 2 z_i / 3 (test oracle)."""
    return 2.0 * np.asarray(zeros) / 3.0


def offdiagonal_position_magnitude(z_i: float, z_j: float) -> float:
    """Closed-form |<i|z|j>| = 2/(z_i - z_j)^2 for i != j (test oracle)."""
    return 2.0 / (z_i - z_j) ** 2
