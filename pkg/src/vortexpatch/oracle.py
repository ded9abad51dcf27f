"""Sharp 1D slab oracle: shooting solver and 2D midline comparison.

In the slab reduction on (0, 1) the sharp problem splits into an inner
region u > 1 obeying -(|u'|^{p-2}u')' = lam*(u-1)^{q-1}, an outer region
where u is exactly linear (1D p-harmonic), and the slope relation
s_plus^p - s_minus^p = p/(p-1) at the crossing u = 1.  Symmetric
shooting closes the whole problem with one scalar unknown, the
centreline value: integrate outward from u(1/2) = umax, u'(1/2) = 0
until u = 1, read the inner slope there, impose the slope relation to
get the outer slope s_minus, and require the linear tail to hit zero
exactly at the boundary, i.e. s_minus * x_f = 1.  The closure defect is
bisected in umax; bisection is slower than a Newton shoot but survives
fold points of the lam-umax response curve.

The solver here is deliberately independent of the 2D machinery: no
grids, no smoothing, no shared assembly.  Its output doubles as ground
truth for slab-symmetric 2D runs and as a fixture generator for the
jump diagnostics (the returned slope pair satisfies the slope relation
by construction).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .domain import ScalarField
from .energy import ProblemParams

__all__ = [
    "SlabSolution",
    "OracleComparison",
    "shoot_slab",
    "compare_to_oracle",
    "save_slab_csv",
]


@dataclass(frozen=True)
class SlabSolution:
    """Sharp slab critical point on (0, 1), symmetric about 1/2."""

    umax: float
    interface: float  # x_f in (0, 1/2); the mirror crossing sits at 1 - x_f
    slope_plus: float
    slope_minus: float
    xs: np.ndarray  # dense sample locations on [0, 1]
    us: np.ndarray  # profile values at xs
    lam: float

    def value(self, x) -> np.ndarray:
        """Profile interpolated at x (clipped to [0, 1])."""
        xq = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return np.interp(xq, self.xs, self.us)


class OracleComparison(NamedTuple):
    """Midline-vs-oracle error summary."""

    sup_error: float
    l2_error: float
    interface_offset: float


def _shoot_once(p: float, q: float, lam: float, umax: float, rtol: float):
    """Integrate outward from the centre until u = 1.

    Returns (t_f, s_plus, ivp solution) with t the distance from the
    centre, or None if u never reaches 1 within the half-slab.
    """
    pexp = 1.0 / (p - 1.0)

    def rhs(t, z):
        u, w = z
        # w is the flux |u'|^{p-2} u'; overshoot below 1 is clamped
        du = -np.sign(w) * np.abs(w) ** pexp if w != 0.0 else 0.0
        return (du, lam * max(u - 1.0, 0.0) ** (q - 1.0))

    def crossing(t, z):
        return z[0] - 1.0

    crossing.terminal = True
    crossing.direction = -1.0

    sol = solve_ivp(rhs, (0.0, 0.5), (umax, 0.0), rtol=rtol, atol=rtol * 1e-2,
                    events=crossing, dense_output=True)
    if sol.t_events[0].size == 0:
        return None
    t_f = float(sol.t_events[0][0])
    w_f = float(sol.y_events[0][0][1])
    return t_f, np.abs(w_f) ** pexp, sol


def _closure_defect(p: float, q: float, lam: float, umax: float, rtol: float):
    """s_minus * x_f - 1 for one trial umax; -1 when the shot cannot close."""
    shot = _shoot_once(p, q, lam, umax, rtol)
    if shot is None:
        return -1.0, None
    t_f, s_plus, sol = shot
    x_f = 0.5 - t_f
    if x_f <= 0.0:
        return -1.0, None
    gap = s_plus ** p - p / (p - 1.0)
    if gap <= 0.0:
        # inner slope too shallow for the jump: infeasible at this umax
        return -1.0, None
    s_minus = gap ** (1.0 / p)
    return s_minus * x_f - 1.0, (t_f, s_plus, s_minus, sol)


def shoot_slab(prm: ProblemParams, umax_bracket=(1.05, 6.0),
               tol: float = 1e-10) -> SlabSolution | None:
    """Solve the sharp slab problem by bisection on the centreline value.

    ``prm`` supplies p, q and the load; its smoothing width and
    regularisation are ignored (this is the sharp problem).  Returns
    None when the closure defect has no sign change over the bracket,
    which is the oracle's way of reporting "no solution at this load"
    (zero load included: constant slope can never satisfy the slope
    relation).  Bracket endpoints must exceed 1.

    The returned solution carries a dense profile on [0, 1] and the
    one-sided slopes at the interface; those satisfy
    slope_plus^p - slope_minus^p = p/(p-1) exactly by construction.
    """
    a, b = float(umax_bracket[0]), float(umax_bracket[1])
    if not (a > 1.0 and b > 1.0 and a < b):
        raise ValueError(f"umax bracket must satisfy 1 < a < b, got ({a}, {b})")
    if prm.lam < 0.0:
        raise ValueError("load must be nonnegative")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    p, q, lam = prm.p, prm.q, prm.lam
    if lam == 0.0:
        return None
    rtol = max(min(tol, 1e-10), 1e-13)

    fa, _ = _closure_defect(p, q, lam, a, rtol)
    fb, _ = _closure_defect(p, q, lam, b, rtol)
    if fa == 0.0:
        lo = hi = a
    elif fb == 0.0:
        lo = hi = b
    elif fa * fb > 0.0:
        return None
    else:
        lo, hi = (a, b) if fa < 0.0 else (b, a)  # defect(lo) < 0 < defect(hi)
        width_goal = max(tol / 8.0, 4e-16 * max(abs(a), abs(b)))
        for _ in range(200):
            if abs(hi - lo) <= width_goal:
                break
            mid = 0.5 * (lo + hi)
            fm, _ = _closure_defect(p, q, lam, mid, rtol)
            if fm == 0.0:
                lo = hi = mid
                break
            if fm < 0.0:
                lo = mid
            else:
                hi = mid

    umax = 0.5 * (lo + hi)
    defect, data = _closure_defect(p, q, lam, umax, rtol)
    if data is None:
        return None
    t_f, s_plus, s_minus, ivp = data

    x_f = 0.5 - t_f
    n = 4097
    xs = np.linspace(0.0, 1.0, n)
    r = np.minimum(xs, 1.0 - xs)  # distance to the nearer boundary
    us = np.where(r < x_f, s_minus * r, 0.0)
    inner = r >= x_f
    us[inner] = ivp.sol(0.5 - r[inner])[0]
    us[0] = us[-1] = 0.0

    return SlabSolution(umax=umax, interface=x_f, slope_plus=s_plus,
                        slope_minus=s_minus, xs=xs, us=us, lam=lam)


def _crossings(xs: np.ndarray, vals: np.ndarray, level: float) -> list[float]:
    """Linear-interpolated crossing locations of vals through level."""
    out: list[float] = []
    d = vals - level
    for i in range(len(d) - 1):
        if d[i] == 0.0:
            out.append(float(xs[i]))
        elif d[i] * d[i + 1] < 0.0:
            t = d[i] / (d[i] - d[i + 1])
            out.append(float(xs[i] + t * (xs[i + 1] - xs[i])))
    if d[-1] == 0.0:
        out.append(float(xs[-1]))
    return out


def compare_to_oracle(u: ScalarField, sol: SlabSolution,
                      axis: str = "x") -> OracleComparison:
    """Compare a 2D field's midline against the slab profile.

    ``axis="x"`` reads the row nearest the horizontal midline as a
    function of x and requires lx == 1 (the oracle's domain); ``"y"``
    reads the middle column and requires ly == 1.  The interface offset
    is the worst discrepancy between the midline's outermost crossings
    of 1 and the oracle's pair (x_f, 1 - x_f); it is +inf when the
    midline never reaches 1.
    """
    grid = u.grid
    if axis == "x":
        if abs(grid.lx - 1.0) > 1e-12:
            raise ValueError(f"axis 'x' needs lx == 1, got lx = {grid.lx}")
        line = u.values[grid.ny // 2, :]
        xs = np.linspace(0.0, grid.lx, grid.nx)
    elif axis == "y":
        if abs(grid.ly - 1.0) > 1e-12:
            raise ValueError(f"axis 'y' needs ly == 1, got ly = {grid.ly}")
        line = u.values[:, grid.nx // 2]
        xs = np.linspace(0.0, grid.ly, grid.ny)
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")

    ref = sol.value(xs)
    diff = line - ref
    sup = float(np.abs(diff).max())
    l2 = float(np.sqrt(np.trapezoid(diff * diff, xs)))

    cr = _crossings(xs, line, 1.0)
    if not cr:
        return OracleComparison(sup, l2, float("inf"))
    off = max(abs(min(cr) - sol.interface),
              abs(max(cr) - (1.0 - sol.interface)))
    return OracleComparison(sup, l2, float(off))


def save_slab_csv(sol: SlabSolution, path: str | Path) -> None:
    """Export the profile in the field-file layout, degenerate in y."""
    lines = [f"{sol.xs.size},1,1.0,0.0"]
    lines.extend(f"{v:.17g}" for v in sol.us)
    Path(path).write_text("\n".join(lines) + "\n")
