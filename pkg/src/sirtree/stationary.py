"""Stationary cumulative profiles by monotone time marching.

The cumulative equation is marched from the constant supersolution ``rho``
(nonincreasing in time) and/or from zero (nondecreasing in time) until the
sup-norm of its right-hand side drops below ``tol``.  The march from zero is the
solution of the actual initial-value problem, so it is the default.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import check_scalar
from .dynamics import (DEFAULT_MARGIN, InitialCondition, RadialGrid, _check_grid, dt_max,
                       exchange, rk4_step)
from .exceptions import ClassificationError, ConvergenceError, MonotonicityError, StabilityError
from .model import EpidemicParams, _f, bisect, critical_lambda, endemic_equilibrium

DEFAULT_TOL = 1e-8
DEFAULT_T_MAX = 1e4
TAIL_WINDOW = 20
MONOTONE_SLACK = 1e-9
SAFETY_FACTOR = 1.5
NO_PLATEAU_THRESHOLD = 1e-4


class Tail(str, enum.Enum):
    TO_ZERO = "ToZero"
    TO_ISTAR = "ToIstar"


class Start(str, enum.Enum):
    ABOVE = "above"
    BELOW = "below"
    BOTH = "both"


@dataclass(frozen=True, eq=False)
class StationaryProfile:
    values: np.ndarray
    residual: float
    tail: Tail
    tail_rate: Optional[float]
    converged_from: Start
    grid: RadialGrid = field(repr=False)
    forcing: np.ndarray = field(repr=False)
    at_threshold: bool = False
    march_time: float = 0.0
    gap: Optional[float] = None

    def site_values(self, site):
        return self.values[self.grid.index_of(site)]


def supersolution_level(ic: InitialCondition, p: EpidemicParams, grid: RadialGrid = None) -> float:
    """Constant level ``rho`` whose defect ``f(rho) + max forcing`` is negative."""
    peak = max(ic.infected_support.values())
    istar = endemic_equilibrium(p)
    lo = 0.0 if istar is None else istar
    hi = (p.s0 + peak) / p.eta + 1.0  # f(v) <= s0 - eta v
    root = bisect(lambda v: float(_f(v, p)) + peak, lo, hi)
    return SAFETY_FACTOR * root


def _march(y0, p, grid, forcing, tol, direction, t_max, dt):
    lam = p.lam

    def fun(y):
        return _f(y, p) + forcing + lam * exchange(y, grid)

    y = np.array(y0, dtype=float)
    t = 0.0
    residual = math.inf
    while t < t_max:
        k1 = fun(y)
        residual = float(np.abs(k1).max())
        if residual < tol:
            return y, residual, t
        y_new = rk4_step(fun, y, dt, k1)
        step = (y_new - y) * direction
        if step.min() < -MONOTONE_SLACK:
            raise MonotonicityError(
                f"march from {'above' if direction < 0 else 'below'} moved the wrong way "
                f"by {-step.min():.3g} at t={t:.6g}")
        y = y_new
        t += dt
    raise ConvergenceError(f"no convergence by t={t_max:g}; residual {residual:.3g}", residual)


def tail_window(grid: RadialGrid, margin: int = DEFAULT_MARGIN, window: int = TAIL_WINDOW):
    """Array positions of the ``window`` outermost sites that keep ``margin`` from the boundary."""
    end = grid.size - margin
    start = end - window
    if start < 0:
        raise ClassificationError("grid too small for the tail window")
    return np.arange(start, end)


def classify_tail(values, p: EpidemicParams, grid: RadialGrid, margin: int = DEFAULT_MARGIN,
                  window: int = TAIL_WINDOW):
    """Decide whether a stationary profile tends to the plateau or to zero.

    Returns ``(tail, rate)``; ``rate`` is the least-squares decay rate of
    ``ln values`` per site over the window for zero tails, ``None`` otherwise.
    """
    idx = tail_window(grid, margin, window)
    vals = np.asarray(values, dtype=float)[idx]
    med = float(np.median(vals))
    istar = endemic_equilibrium(p)
    if istar is None:
        if med > NO_PLATEAU_THRESHOLD:
            return Tail.TO_ISTAR, None
    else:
        if med > 0.5 * istar:
            return Tail.TO_ISTAR, None
        if med >= 0.25 * istar:
            raise ClassificationError(
                f"tail median {med:.4g} is between I*/4 and I*/2; enlarge the grid")
    positive = vals > 0
    if positive.sum() < 2:
        return Tail.TO_ZERO, None
    sites = grid.sites[idx][positive].astype(float)
    slope = np.polyfit(sites, np.log(vals[positive]), 1)[0]
    return Tail.TO_ZERO, float(-slope)


def _at_threshold(p):
    lc = critical_lambda(p)
    return lc is not None and math.isclose(p.lam, lc, rel_tol=1e-9)


def _run_marches(ic, p, grid, tol, start, t_max, dt, margin):
    _check_grid(p, grid)
    tol = check_scalar(tol, "tol", lower=0.0)
    start = Start(start)
    forcing = ic.forcing(grid, margin)
    limit = dt_max(p)
    if dt is None:
        dt = limit
    if dt > limit * (1 + 1e-12):
        raise StabilityError(f"dt={dt:.6g} exceeds the stability bound dt_max={limit:.6g}")
    runs = {}
    if start in (Start.ABOVE, Start.BOTH):
        rho = supersolution_level(ic, p)
        runs[Start.ABOVE] = _march(np.full(grid.size, rho), p, grid, forcing, tol, -1.0,
                                   t_max, dt)
    if start in (Start.BELOW, Start.BOTH):
        runs[Start.BELOW] = _march(np.zeros(grid.size), p, grid, forcing, tol, 1.0, t_max, dt)
    return runs, forcing


def _valid_gap(a, b, grid, margin):
    dist = np.array([grid.distance_to_boundary(s) for s in grid.sites])
    keep = dist >= margin
    return float(np.abs(a[keep] - b[keep]).max())


def solve_stationary(ic: InitialCondition, p: EpidemicParams, grid: RadialGrid,
                     tol: float = DEFAULT_TOL, start="below", t_max: float = DEFAULT_T_MAX,
                     dt: Optional[float] = None, margin: int = DEFAULT_MARGIN,
                     window: int = TAIL_WINDOW) -> StationaryProfile:
    """March the cumulative equation to its stationary profile and classify the tail.

    With ``start="both"`` the two marches must agree within ``10 * tol`` on
    sites at least ``margin`` from the boundary; otherwise
    :class:`ConvergenceError` is raised.
    """
    runs, forcing = _run_marches(ic, p, grid, tol, start, t_max, dt, margin)
    start = Start(start)
    gap = None
    if start is Start.BOTH:
        gap = _valid_gap(runs[Start.ABOVE][0], runs[Start.BELOW][0], grid, margin)
        if gap > 10 * tol:
            raise ConvergenceError(
                f"marches from above and below stopped {gap:.3g} apart", gap)
        values, residual, t = runs[Start.BELOW]
        residual = max(residual, runs[Start.ABOVE][1])
        t = max(t, runs[Start.ABOVE][2])
    else:
        values, residual, t = runs[start]
    tail, rate = classify_tail(values, p, grid, margin, window)
    return StationaryProfile(values=values, residual=residual, tail=tail, tail_rate=rate,
                             converged_from=start, grid=grid, forcing=forcing,
                             at_threshold=_at_threshold(p), march_time=t, gap=gap)


def sandwich_check(ic: InitialCondition, p: EpidemicParams, grid: RadialGrid,
                   tol: float = DEFAULT_TOL, t_max: float = DEFAULT_T_MAX,
                   dt: Optional[float] = None, margin: int = DEFAULT_MARGIN) -> bool:
    """True iff the marches from ``rho`` and from 0 stop within ``10 * tol`` of each other."""
    runs, _ = _run_marches(ic, p, grid, tol, Start.BOTH, t_max, dt, margin)
    return _valid_gap(runs[Start.ABOVE][0], runs[Start.BELOW][0], grid, margin) <= 10 * tol


def stationary_defect(values, forcing, p: EpidemicParams, grid: RadialGrid) -> np.ndarray:
    """Pointwise defect of the stationary equation."""
    return _f(values, p) + forcing + p.lam * exchange(np.asarray(values, dtype=float), grid)
