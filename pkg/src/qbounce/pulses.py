"""Gaussian kick pulses shared by the classical and quantum propagators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["KickPulse", "WINDOW_SIGMAS", "merged_windows"]

# a pulse acts on |t - t_k| <= 6 sigma; the Gaussian tail beyond is < 1e-15
WINDOW_SIGMAS = 6.0


@dataclass(frozen=True)
class KickPulse:
    """One Gaussian pulse: amplitude * exp[-(t - center)^2 / width^2].

    ``kind`` selects the coupling: "magnetic" is the gradient potential
    -s * beta(t) * z; "shake" is a surface displacement h(t) of this shape.
    ``spin`` is the branch s = +/-1 (ignored for shakes).
    """

    amplitude: float
    width: float
    center: float = 0.0
    kind: str = "magnetic"

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("pulse width must be positive")
        if self.kind not in ("magnetic", "shake"):
            raise ValueError(f"unknown pulse kind: {self.kind!r}")

    @property
    def area(self) -> float:
        """Time integral of the envelope: a_k * sigma_k * sqrt(pi)."""
        return self.amplitude * self.width * math.sqrt(math.pi)

    @property
    def window(self) -> tuple[float, float]:
        half = WINDOW_SIGMAS * self.width
        return (self.center - half, self.center + half)

    def envelope(self, t):
        """beta(t) for magnetic pulses, h(t) for shakes."""
        t = np.asarray(t, dtype=np.float64)
        return self.amplitude * np.exp(-((t - self.center) / self.width) ** 2)

    def envelope_second_derivative(self, t):
        """d^2/dt^2 of the envelope (drives the comoving-frame shake force)."""
        t = np.asarray(t, dtype=np.float64)
        u = (t - self.center) / self.width
        return self.amplitude / self.width ** 2 * (4.0 * u ** 2 - 2.0) * np.exp(-u ** 2)


def merged_windows(pulses, t_from, t_to):
    """Pulse windows clipped to [t_from, t_to]; overlapping windows merged.

    Returns a list of (lo, hi, [pulses active in the window]).
    """
    spans = []
    for p in pulses:
        lo, hi = p.window
        lo, hi = max(lo, t_from), min(hi, t_to)
        if hi > lo:
            spans.append((lo, hi, p))
    spans.sort(key=lambda s: s[0])
    merged = []
    for lo, hi, p in spans:
        if merged and lo <= merged[-1][1]:
            mlo, mhi, ps = merged[-1]
            merged[-1] = (mlo, max(mhi, hi), ps + [p])
        else:
            merged.append((lo, hi, [p]))
    return merged
