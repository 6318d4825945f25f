"""Classical ensemble of bouncing particles with pulsed kicks.

Dimensionless Newton equation matching the quantum unit system:
z'' = -2 + 2 s beta(t) (the same scales that make the quantum equation
-psi'' + z psi = E psi give the classical particle acceleration -2; the
algebra is in the README).  Between pulses the flight is integrated
exactly, bounce by bounce; inside a pulse window a velocity-Verlet stepper
takes over.  Reflection off the floor is specular and lossless.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .pulses import KickPulse, merged_windows

__all__ = ["ClassicalEnsemble", "sample_initial", "ballistic_flight",
           "propagate", "mean_height_series", "particle_energy"]

DEFAULT_STEPS_PER_SIGMA = 200
_REST_SPEED = 1e-12  # below this a particle on the floor is considered at rest


@dataclass(frozen=True)
class ClassicalEnsemble:
    """Particle heights and velocities for one spin branch."""

    z: np.ndarray
    v: np.ndarray
    spin: int = 1
    seed: int | None = None
    time: float = 0.0

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if z.shape != v.shape or z.ndim != 1 or len(z) < 1:
            raise ValueError("z and v must be equal-length 1-d arrays")
        if np.any(z < 0):
            raise ValueError("particle heights must be non-negative")
        if self.spin not in (-1, 1):
            raise ValueError("spin branch must be +1 or -1")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "v", v)
        z.setflags(write=False)
        v.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def mean_height(self) -> float:
        return float(self.z.mean())


def particle_energy(z, v):
    """Conserved flight energy e = v^2/2 + 2z (constant while beta = 0)."""
    return 0.5 * np.asarray(v) ** 2 + 2.0 * np.asarray(z)


def sample_initial(n: int, mu_z: float, mu_v: float, sigma_z: float,
                   sigma_v: float, seed: int, spin: int = 1) -> ClassicalEnsemble:
    """Gaussian phase-space sample; draws with z < 0 are redrawn.

    Deterministic for a fixed seed.  Raises if the requested Gaussian puts
    more than 25% of its weight below the floor: redrawing that much mass
    would no longer resemble a Gaussian centered at mu_z.
    """
    if n < 1:
        raise ValueError("need at least one particle")
    if sigma_z < 0 or sigma_v < 0 or mu_z <= 0:
        raise ValueError("widths must be non-negative and mu_z positive")
    if sigma_z > 0:
        p_below = 0.5 * math.erfc(mu_z / (sigma_z * math.sqrt(2.0)))
        if p_below > 0.25:
            raise ValueError(
                f"{100 * p_below:.0f}% of the requested Gaussian lies below "
                f"the floor (mu_z={mu_z}, sigma_z={sigma_z})")
    rng = np.random.default_rng(seed)
    z = mu_z + sigma_z * rng.standard_normal(n)
    v = mu_v + sigma_v * rng.standard_normal(n)
    for _ in range(200):
        bad = z < 0
        n_bad = int(bad.sum())
        if n_bad == 0:
            break
        z[bad] = mu_z + sigma_z * rng.standard_normal(n_bad)
    else:  # pragma: no cover - geometric decay makes this unreachable
        raise RuntimeError("floor rejection sampling failed to converge")
    return ClassicalEnsemble(z, v, spin=spin, seed=seed)


def ballistic_flight(z, v, dt: float):
    """Exact flight under z'' = -2 with specular floor bounces.

    Works on arrays; returns (z, v) after time dt.  Bounce times are the
    positive roots of z + v t - t^2 = 0, resolved particle by particle
    until the interval is exhausted.
    """
    z = np.array(z, dtype=np.float64)
    v = np.array(v, dtype=np.float64)
    rem = np.full_like(z, float(dt))
    active = rem > 0
    while active.any():
        idx = np.nonzero(active)[0]
        zi, vi, ri = z[idx], v[idx], rem[idx]
        t_hit = 0.5 * (vi + np.sqrt(np.maximum(vi * vi + 4.0 * zi, 0.0)))
        resting = (zi <= 0) & (np.abs(vi) <= _REST_SPEED)
        bounce = (t_hit < ri) & ~resting
        fly = ~bounce & ~resting

        t_f = ri[fly]
        z[idx[fly]] = zi[fly] + vi[fly] * t_f - t_f * t_f
        v[idx[fly]] -= 2.0 * t_f
        rem[idx[fly]] = 0.0

        t_b = t_hit[bounce]
        z[idx[bounce]] = 0.0
        v[idx[bounce]] = 2.0 * t_b - vi[bounce]  # reflect the impact velocity
        rem[idx[bounce]] = ri[bounce] - t_b

        rem[idx[resting]] = 0.0
        v[idx[resting]] = 0.0
        active = rem > 0
    np.clip(z, 0.0, None, out=z)
    return z, v


def _verlet(z, v, t0, t1, pulses, spin, dt):
    """Velocity-Verlet with z'' = -2 + 2 s beta(t); bounces off the floor.

    A step that would end below the floor is split at the crossing time
    (exact for the step's constant acceleration): fly to the floor, reflect
    the impact velocity, finish the remainder of the step.  With beta = 0
    this reproduces the exact ballistic flight to rounding accuracy.
    """

    def accel(t):
        a = -2.0
        for p in pulses:
            if p.kind != "magnetic":
                raise ValueError("classical propagation supports magnetic kicks only")
            a = a + 2.0 * spin * float(p.envelope(t))
        return a

    n = max(1, math.ceil((t1 - t0) / dt))
    h = (t1 - t0) / n
    t = t0
    a = accel(t)
    for _ in range(n):
        a_next = accel(t + h)
        z_new = z + v * h + 0.5 * a * h * h
        v_new = v + 0.5 * (a + a_next) * h
        below = z_new < 0
        if below.any():
            zb, vb = z[below], v[below]
            # smallest positive root of z + v tau + a tau^2 / 2 = 0
            disc = np.sqrt(np.maximum(vb * vb - 2.0 * a * zb, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                q = -0.5 * (vb + np.where(vb >= 0, disc, -disc))
                r1 = np.where(a != 0.0, q / (0.5 * a), np.inf)
                r2 = np.where(q != 0.0, zb / q, np.inf)
            tau = np.where((r1 > 0) & ((r1 <= r2) | (r2 <= 0)), r1, r2)
            tau = np.clip(tau, 0.0, h)
            rem = h - tau
            v_hit = vb + a * tau
            z_ref = -v_hit * rem + 0.5 * a * rem * rem
            v_ref = -v_hit + 0.5 * (a + a_next) * rem
            settle = z_ref < 0  # no energy left to leave the floor this step
            z_ref[settle] = 0.0
            v_ref[settle] = 0.0
            z_new[below] = z_ref
            v_new[below] = v_ref
        z, v = z_new, v_new
        a = a_next
        t += h
    return z, v


def propagate(ens: ClassicalEnsemble, t_to: float, pulses=(),
              steps_per_sigma: int = DEFAULT_STEPS_PER_SIGMA,
              z_cap: float | None = None) -> ClassicalEnsemble:
    """Advance the ensemble to ``t_to`` through any pulse windows.

    Exact ballistic flight outside the windows (|t - t_k| > 6 sigma_k),
    velocity-Verlet with step sigma_k / ``steps_per_sigma`` inside.
    Particles ending above ``z_cap`` trigger a warning (escape flag).
    """
    if isinstance(pulses, KickPulse):
        pulses = [pulses]
    if t_to < ens.time:
        raise ValueError("t_to must not precede the ensemble time")
    z, v = np.array(ens.z), np.array(ens.v)
    t = ens.time
    for lo, hi, active in merged_windows(pulses, t, t_to):
        if lo > t:
            z, v = ballistic_flight(z, v, lo - t)
            t = lo
        dt = min(p.width for p in active) / steps_per_sigma
        z, v = _verlet(z, v, t, hi, active, ens.spin, dt)
        t = hi
    if t_to > t:
        z, v = ballistic_flight(z, v, t_to - t)
    if z_cap is not None and np.any(z > z_cap):
        warnings.warn(f"{int((z > z_cap).sum())} particle(s) above z_cap={z_cap}",
                      stacklevel=2)
    return replace(ens, z=z, v=v, time=t_to)


def mean_height_series(n: int, mu_z: float, mu_v: float, sigma_z: float,
                       sigma_v: float, seed: int, pulses, times: np.ndarray,
                       spins=(1, -1),
                       steps_per_sigma: int = DEFAULT_STEPS_PER_SIGMA):
    """<z>(t) per spin branch on the sample grid ``times``.

    Every branch starts from the identical seeded sample (the branches
    differ only in the sign of the kick force).  Returns a dict mapping
    spin -> height series; average the values for the spin-averaged trace.
    """
    times = np.asarray(times, dtype=np.float64)
    if np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("sample times must be ascending and non-negative")
    series = {}
    for s in spins:
        ens = sample_initial(n, mu_z, mu_v, sigma_z, sigma_v, seed, spin=s)
        out = np.empty_like(times)
        for k, t in enumerate(times):
            ens = propagate(ens, float(t), pulses,
                            steps_per_sigma=steps_per_sigma,
                            z_cap=10.0 * mu_z)
            out[k] = ens.mean_height
        series[s] = out
    return series
