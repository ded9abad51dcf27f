"""Polynomial smoothing pair used to regularise the interface term.

The sharp energy charges ``|{u > 1}|`` through an indicator; the smoothed
energy replaces it by ``G((u - 1) / alpha)`` where G ramps from 0 to 1 over
(0, 1) with derivative g.  The quintic pair used here is

    g(t) = 30 t^2 (1 - t)^2   on (0, 1),  0 elsewhere,
    G(t) = 10 t^3 - 15 t^4 + 6 t^5   on (0, 1),  0 for t <= 0,  1 for t >= 1.

g is C^1 with range [0, 15/8] subset [0, 2] and unit mass; G is its exact
antiderivative, monotone, C^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SmootherSpec", "g_eval", "G_eval", "g_prime_eval", "check_normalization"]

_KINDS = ("quintic",)


@dataclass(frozen=True)
class SmootherSpec:
    """Selects the smoothing pair; only the quintic pair is implemented."""

    kind: str = "quintic"

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown smoother kind {self.kind!r}; choose from {_KINDS}")


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    return arr, np.isscalar(t) or arr.ndim == 0


def g_eval(spec: SmootherSpec, t):
    """Bump g(t); vectorised over array input."""
    arr, scalar = _as_array(t)
    inside = (arr > 0.0) & (arr < 1.0)
    ts = np.where(inside, arr, 0.5)  # dummy arg outside support
    out = np.where(inside, 30.0 * ts * ts * (1.0 - ts) ** 2, 0.0)
    return float(out) if scalar else out


def G_eval(spec: SmootherSpec, t):
    """Ramp G(t) = integral of g from 0 to t; vectorised over array input."""
    arr, scalar = _as_array(t)
    ts = np.clip(arr, 0.0, 1.0)
    out = ts * ts * ts * (10.0 + ts * (-15.0 + 6.0 * ts))
    return float(out) if scalar else out


def g_prime_eval(spec: SmootherSpec, t):
    """Derivative g'(t) = 60 t (1 - t)(1 - 2t) on (0, 1), 0 elsewhere."""
    arr, scalar = _as_array(t)
    inside = (arr > 0.0) & (arr < 1.0)
    ts = np.where(inside, arr, 0.5)
    out = np.where(inside, 60.0 * ts * (1.0 - ts) * (1.0 - 2.0 * ts), 0.0)
    return float(out) if scalar else out


def check_normalization(spec: SmootherSpec, n: int) -> float:
    """Composite midpoint estimate of the mass of g over [0, 1] with n cells."""
    if n < 1:
        raise ValueError("need at least one quadrature cell")
    ts = (np.arange(n) + 0.5) / n
    return float(np.mean(g_eval(spec, ts)))
