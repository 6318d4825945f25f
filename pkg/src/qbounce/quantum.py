"""Wave-packet propagation in the truncated eigenbasis.

Free flight multiplies each coefficient by exp(-i z_i dt).  During a pulse
the Hamiltonian is diag(z_i) + f(t) * Z with a scalar forcing f(t):

* magnetic gradient: f(t) = -s * beta(t)    (potential -s beta(t) z)
* surface shake:     f(t) = h''(t) / 2      (comoving frame, see README)

The default pulse stepper is a Strang splitting between the diagonal part
and the Z part (Z is diagonalized once), which is exactly unitary at every
step; a classical RK4 stepper with per-step renormalization is available
as a cross-check.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np

from .basis import EigenBasis
from .pulses import KickPulse, merged_windows

__all__ = ["StateVector", "ground_state", "free_evolve", "evolve_pulsed",
           "impulsive_kick", "impulsive_kick_matrix", "pulse_propagator",
           "expectation_z", "shake_potential_coefficient", "mean_height_trace",
           "forcing"]

DEFAULT_STEPS_PER_SIGMA = 500


class NormDriftError(RuntimeError):
    """Pulse integration lost more norm than the stepper tolerance allows."""


@dataclass(frozen=True)
class StateVector:
    """Complex coefficients in the eigenbasis, tagged with their time."""

    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=np.complex128))
        self.coeffs.setflags(write=False)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def population(self, i: int) -> float:
        """|c_i|^2, 1-based index."""
        return float(np.abs(self.coeffs[i - 1]) ** 2)


def ground_state(basis: EigenBasis, time: float = 0.0) -> StateVector:
    c = np.zeros(basis.m, dtype=np.complex128)
    c[0] = 1.0
    return StateVector(c, time)


def free_evolve(state: StateVector, basis: EigenBasis, dt: float) -> StateVector:
    """c_i <- c_i exp(-i z_i dt); exactly norm preserving."""
    return StateVector(state.coeffs * np.exp(-1j * basis.zeros * dt),
                       state.time + dt)


def forcing(pulses, spin: int, t):
    """Scalar coefficient f(t) multiplying the position matrix."""
    t = np.asarray(t, dtype=np.float64)
    f = np.zeros_like(t)
    for p in pulses:
        if p.kind == "magnetic":
            f = f - spin * p.envelope(t)
        else:
            f = f + 0.5 * p.envelope_second_derivative(t)
    return f


def shake_potential_coefficient(pulses, t):
    """Effective dimensionless gravity g_eff(t) = 1 + h''(t)/2 under a shake."""
    t = np.asarray(t, dtype=np.float64)
    g = np.ones_like(t)
    for p in pulses:
        if p.kind != "shake":
            raise ValueError("shake coefficient requested for non-shake pulse")
        g = g + 0.5 * p.envelope_second_derivative(t)
    return g if g.ndim else float(g)


class _ZDecomposition:
    """Cached eigendecomposition of the symmetric position matrix."""

    def __init__(self, basis: EigenBasis):
        self.eigvals, self.eigvecs = np.linalg.eigh(basis.z_matrix)

    def expm(self, factor: complex) -> np.ndarray:
        """exp(factor * Z)."""
        v = self.eigvecs
        return (v * np.exp(factor * self.eigvals)) @ v.conj().T

    def apply_expm(self, factor: complex, c: np.ndarray) -> np.ndarray:
        v = self.eigvecs
        return v @ (np.exp(factor * self.eigvals) * (v.conj().T @ c))


# weak keys: cache entries die with their basis (an id() key could be
# recycled by a new object at the same address)
_zdecomp_cache: "weakref.WeakKeyDictionary[EigenBasis, _ZDecomposition]" = \
    weakref.WeakKeyDictionary()


def _zdecomp(basis: EigenBasis) -> _ZDecomposition:
    dec = _zdecomp_cache.get(basis)
    if dec is None:
        dec = _zdecomp_cache[basis] = _ZDecomposition(basis)
    return dec


def impulsive_kick_matrix(basis: EigenBasis, alpha: float, spin: int = 1,
                          kind: str = "magnetic") -> np.ndarray:
    """P = exp[-i alpha V(z)] in the eigenbasis.

    V(z) = -s z for magnetic-gradient kicks (P = exp(+i alpha s Z)) and
    V(z) = +z for a generic linear jolt (P = exp(-i alpha Z)).  Unitary by
    construction via the eigendecomposition of Z.
    """
    dec = _zdecomp(basis)
    factor = 1j * alpha * spin if kind == "magnetic" else -1j * alpha
    return dec.expm(factor)


def impulsive_kick(state: StateVector, basis: EigenBasis, alpha: float,
                   spin: int = 1, kind: str = "magnetic") -> StateVector:
    """Apply the impulsive kick operator to the state (zero duration)."""
    dec = _zdecomp(basis)
    factor = 1j * alpha * spin if kind == "magnetic" else -1j * alpha
    return StateVector(dec.apply_expm(factor, state.coeffs), state.time)


def _dmul(d, c):
    """diag(d) @ c for c a vector or a matrix of stacked columns."""
    return d[:, None] * c if c.ndim == 2 else d * c


def _strang_steps(c, t0, n, h, basis, dec, pulses, spin):
    """n Strang steps of size h starting at t0; exactly unitary."""
    half_phase = np.exp(-0.5j * basis.zeros * h)
    v = dec.eigvecs
    vt = v.T  # Z is real symmetric, eigenvectors are real
    t_mid = t0 + (np.arange(n) + 0.5) * h
    f_mid = forcing(pulses, spin, t_mid)
    for k in range(n):
        c = _dmul(half_phase, c)
        c = v @ _dmul(np.exp(-1j * f_mid[k] * h * dec.eigvals), vt @ c)
        c = _dmul(half_phase, c)
    return c


def _rk4_steps(c, t0, n, h, basis, dec, pulses, spin):
    """n RK4 steps with post-step renormalization."""
    d = basis.zeros

    def rhs(t, c):
        f = float(forcing(pulses, spin, t))
        return -1j * (_dmul(d, c) +
                      f * (dec.eigvecs @ _dmul(dec.eigvals, dec.eigvecs.T @ c)))

    t = t0
    for _ in range(n):
        k1 = rhs(t, c)
        k2 = rhs(t + 0.5 * h, c + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, c + 0.5 * h * k2)
        k4 = rhs(t + h, c + h * k3)
        c = c + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        nrm = np.linalg.norm(c, axis=0)
        if np.any(np.abs(nrm - 1.0) > 1e-6):
            raise NormDriftError(f"norm drifted to {np.max(nrm):.6e} in one "
                                 "RK4 step; reduce the step size")
        c = c / nrm
        t += h
    return c


_STEPPERS = {"strang": _strang_steps, "rk4": _rk4_steps}


def evolve_pulsed(state: StateVector, basis: EigenBasis, pulses, spin: int,
                  t_to: float, steps_per_sigma: int = DEFAULT_STEPS_PER_SIGMA,
                  method: str = "strang") -> StateVector:
    """Evolve from ``state.time`` to ``t_to`` through any pulse windows.

    Outside every pulse window (|t - t_k| > 6 sigma_k) the evolution is the
    exact free flight; inside, the chosen stepper integrates
    i dc/dt = (diag(z_i) + f(t) Z) c with step sigma_k / ``steps_per_sigma``.
    """
    if isinstance(pulses, KickPulse):
        pulses = [pulses]
    if t_to < state.time:
        raise ValueError("t_to must not precede the state time")
    stepper = _STEPPERS[method]
    dec = _zdecomp(basis)

    windows = merged_windows(pulses, state.time, t_to)
    c, t = state.coeffs.copy(), state.time
    for lo, hi, active in windows:
        if lo > t:
            c = c * np.exp(-1j * basis.zeros * (lo - t))
            t = lo
        dt = min(p.width for p in active) / steps_per_sigma
        n = max(1, math.ceil((hi - t) / dt))
        c = stepper(c, t, n, (hi - t) / n, basis, dec, active, spin)
        t = hi
    if t_to > t:
        c = c * np.exp(-1j * basis.zeros * (t_to - t))
    return StateVector(c, t_to)


_propagator_cache: "weakref.WeakKeyDictionary[EigenBasis, dict]" = \
    weakref.WeakKeyDictionary()


def pulse_propagator(basis: EigenBasis, pulse: KickPulse, spin: int = 1,
                     steps_per_sigma: int = DEFAULT_STEPS_PER_SIGMA,
                     method: str = "strang") -> np.ndarray:
    """Full propagator matrix across one pulse window.

    The Hamiltonian depends on time only through t - t_k, so the matrix is
    independent of the pulse center and can be reused across a delay scan
    (results are memoized on the pulse shape).
    """
    key = (pulse.amplitude, pulse.width, pulse.kind, spin,
           steps_per_sigma, method)
    per_basis = _propagator_cache.setdefault(basis, {})
    cached = per_basis.get(key)
    if cached is not None:
        return cached
    centered = KickPulse(pulse.amplitude, pulse.width, 0.0, pulse.kind)
    lo, hi = centered.window
    stepper = _STEPPERS[method]
    dec = _zdecomp(basis)
    dt = pulse.width / steps_per_sigma
    n = max(1, math.ceil((hi - lo) / dt))
    w = np.eye(basis.m, dtype=np.complex128)
    w = stepper(w, lo, n, (hi - lo) / n, basis, dec, [centered], spin)
    per_basis[key] = w
    return w


def expectation_z(state: StateVector, basis: EigenBasis) -> float:
    """<z> = c^dag Z c; the imaginary residual must be at rounding level."""
    val = np.vdot(state.coeffs, basis.z_matrix @ state.coeffs)
    if abs(val.imag) > 1e-12:
        raise ArithmeticError(f"<z> has imaginary residual {val.imag:.3e}; "
                              "Hermitian invariant broken")
    return float(val.real)


def _expectation_z_free(basis, c0, t0, times):
    """Vectorized <z>(t) under free evolution from (c0, t0)."""
    phases = np.exp(-1j * np.outer(times - t0, basis.zeros))
    ct = phases * c0[None, :]
    return np.einsum('ti,ij,tj->t', ct.conj(), basis.z_matrix, ct,
                     optimize=True).real


def mean_height_trace(basis: EigenBasis, state: StateVector, pulses, spin: int,
                      times: np.ndarray,
                      steps_per_sigma: int = DEFAULT_STEPS_PER_SIGMA,
                      method: str = "strang"):
    """<z> sampled on ``times`` (ascending, >= state.time).

    Returns (heights, final_state).  Free stretches are sampled analytically;
    samples inside pulse windows are hit exactly by the stepper.
    """
    times = np.asarray(times, dtype=np.float64)
    if np.any(np.diff(times) <= 0) or times[0] < state.time:
        raise ValueError("sample times must be ascending and start at or "
                         "after the state time")
    out = np.empty_like(times)
    windows = merged_windows(pulses, state.time, float(times[-1]))
    cur = state
    idx = 0
    for lo, hi, _ in windows:
        free_sel = slice(idx, idx + int(np.searchsorted(times[idx:], lo, side="right")))
        if free_sel.stop > free_sel.start:
            out[free_sel] = _expectation_z_free(basis, cur.coeffs, cur.time,
                                                times[free_sel])
            idx = free_sel.stop
        # step through the window, landing on each interior sample time
        while idx < len(times) and times[idx] <= hi:
            cur = evolve_pulsed(cur, basis, pulses, spin, float(times[idx]),
                                steps_per_sigma, method)
            out[idx] = expectation_z(cur, basis)
            idx += 1
        if cur.time < hi:
            cur = evolve_pulsed(cur, basis, pulses, spin, hi,
                                steps_per_sigma, method)
    if idx < len(times):
        out[idx:] = _expectation_z_free(basis, cur.coeffs, cur.time, times[idx:])
        cur = free_evolve(cur, basis, float(times[-1]) - cur.time)
    return out, cur
