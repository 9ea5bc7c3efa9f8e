"""Spreading speeds: the linear (dispersion-quotient) speed and front tracking.

The analytic speed is ``min_{gamma > 0} D(gamma) / gamma`` with ``D`` from
:func:`sirtree.model.dispersion`.  The empirical speed is the least-squares slope
of the front ``max{n : cum_n(t) >= theta}`` over the late part of a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, check_X_y

from ._validation import check_scalar
from .dynamics import DEFAULT_MARGIN, Trajectory, margin_violation
from .exceptions import InvalidRunError, MarginError, ParameterError
from .model import (EpidemicParams, _exchange_symbol, critical_lambda, endemic_equilibrium,
                    wave_back_susceptibles)

GAMMA_XTOL = 1e-10
GAMMA_START = 1e-3
MIN_SNAPSHOTS = 20
INV_E = math.exp(-1.0)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

ANALYTIC = "analytic"
EMPIRICAL = "empirical"
SMALL_LAMBDA = "small"
LARGE_LAMBDA = "large"


@dataclass(frozen=True)
class SpeedResult:
    c_star: float
    gamma_star: float
    method: str = ANALYTIC
    metadata: dict = field(default_factory=dict)


def golden_section(fun, a: float, b: float, xtol: float = GAMMA_XTOL, maxiter: int = 500):
    """Minimise a unimodal ``fun`` on ``[a, b]``; returns ``(x, fun(x), iterations)``."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    it = 0
    while b - a > xtol and it < maxiter:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
        it += 1
    x = 0.5 * (a + b)
    return x, fun(x), it


def speed_quotient(gamma, p: EpidemicParams):
    """``D(gamma) / gamma``; the analytic speed is its minimum over ``gamma > 0``."""
    g = np.asarray(gamma, dtype=float)
    return (p.growth_rate + p.lam * _exchange_symbol(g, p.k)) / g


def _bracket(q, start=GAMMA_START):
    """Double ``gamma`` until the quotient turns up; returns a bracket around the minimum."""
    prev, cur = 0.0, start
    qcur = q(cur)
    for _ in range(200):
        nxt = 2.0 * cur
        qnxt = q(nxt)
        if qnxt > qcur:
            return prev, nxt
        prev, cur, qcur = cur, nxt, qnxt
    raise RuntimeError("could not bracket the minimum of the speed quotient")


def analytic_speed(p: EpidemicParams) -> Optional[SpeedResult]:
    """Linear spreading speed and the decay rate of the mode that realises it.

    ``None`` when ``R0 <= 1``, or on a tree with ``lam > lambda_c``, where no
    spreading speed is defined.  At ``lam == lambda_c`` the speed is 0 and the
    rate is ``ln sqrt(k)``.
    """
    if p.r0 <= 1.0:
        return None
    if p.k >= 2:
        lc = critical_lambda(p)
        if math.isclose(p.lam, lc, rel_tol=1e-12):
            return SpeedResult(0.0, 0.5 * math.log(p.k), ANALYTIC, {"at_lambda_c": True})
        if p.lam > lc:
            return None

    def q(g):
        return float(speed_quotient(g, p))

    lo, hi = _bracket(q)
    gamma, c, iterations = golden_section(q, lo, hi)
    gamma = _polish(gamma, p, lo, hi)
    return SpeedResult(q(gamma), gamma, ANALYTIC, {"bracket": (lo, hi), "iterations": iterations})


def _polish(gamma, p, lo, hi, steps=4):
    # golden section stalls where the quotient is flat to round-off (|dgamma| ~ 1e-8);
    # Newton on gamma D'(gamma) - D(gamma) = 0 recovers full precision
    lam, k, a = p.lam, p.k, p.growth_rate
    for _ in range(steps):
        ep, em = math.exp(gamma), math.exp(-gamma)
        d = a + lam * float(_exchange_symbol(gamma, k))
        d1 = lam * (ep - k * em)
        d2 = lam * (ep + k * em)
        h = gamma * d1 - d
        new = gamma - h / (gamma * d2)
        if not lo < new < hi:
            break
        if new == gamma:
            break
        gamma = new
    return gamma


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function for real ``x >= -1/e``."""
    x = check_scalar(x, "x")
    if x < -INV_E:
        raise ParameterError(f"lambert_w0 is undefined below -1/e, got {x!r}")
    if x == 0.0:
        return 0.0
    if x == -INV_E:
        return -1.0
    if x > 1e100:
        # solve w + ln w = ln x; w e^w would overflow
        lx = math.log(x)
        w = lx - math.log(lx)
        for _ in range(50):
            step = (w + math.log(w) - lx) / (1.0 + 1.0 / w)
            w -= step
            if abs(step) <= 1e-16 * w:
                break
        return w
    if x < -0.32:
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    elif x < 3.0:
        l1 = math.log1p(x)
        w = l1 * (1.0 - math.log1p(l1) / (2.0 + l1))
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    for _ in range(100):
        ew = math.exp(w)
        r = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * r / (2.0 * wp1)
        step = r / denom
        w -= step
        if abs(step) <= 4e-16 * (1.0 + abs(w)):
            break
    return max(w, -1.0)


def speed_asymptote(p: EpidemicParams, regime: str) -> float:
    """Closed-form limits of the lattice speed for weak or strong exchanges.

    ``regime="small"`` gives ``W0(eta (R0 - 1) / lam)``, ``"large"`` gives
    ``2 sqrt(eta (R0 - 1) lam)``.
    """
    if p.k != 1:
        raise ParameterError("speed asymptotes are defined for the lattice (k = 1) only")
    if p.r0 <= 1.0:
        raise ParameterError("speed asymptotes need R0 > 1")
    a = p.growth_rate
    if regime == SMALL_LAMBDA:
        return lambert_w0(a / p.lam)
    if regime == LARGE_LAMBDA:
        return 2.0 * math.sqrt(a * p.lam)
    raise ParameterError(f"unknown regime {regime!r}; use 'small' or 'large'")


@dataclass(frozen=True, eq=False)
class FrontTrace:
    times: np.ndarray
    positions: np.ndarray
    threshold: float
    fitted_speed: float
    fit_rsq: float
    fit_window: tuple
    flag: str = ""

    @property
    def no_spread(self) -> bool:
        return self.flag == "no_spread"


def _front_positions(X, sites, theta):
    hit = X >= theta
    any_hit = hit.any(axis=1)
    last = X.shape[1] - 1 - np.argmax(hit[:, ::-1], axis=1)
    return np.where(any_hit, sites[last].astype(float), np.nan)


class FrontSpeedEstimator(TransformerMixin, BaseEstimator):
    """Fit a constant front speed to snapshots of a monotone field.

    ``fit(X, y)`` takes ``X`` of shape ``(n_snapshots, n_sites)`` and the
    snapshot times ``y``.  The front of each snapshot is the largest site label
    whose value reaches ``threshold``; the first ``1 - fit_fraction`` of the
    snapshots are dropped and a straight line is fitted to the rest.

    Attributes
    ----------
    speed_, intercept_ : float
        Slope and intercept of the fitted line.
    rsq_ : float
        Coefficient of determination of the fit.
    positions_ : ndarray
        Front position of every snapshot (NaN where nothing reaches the threshold).
    fit_window_ : tuple
        First and last time used in the fit.
    """

    def __init__(self, threshold=0.5, fit_fraction=0.5, sites=None):
        self.threshold = threshold
        self.fit_fraction = fit_fraction
        self.sites = sites

    def _sites(self, n):
        if self.sites is None:
            return np.arange(n)
        sites = np.asarray(self.sites)
        if sites.shape != (n,):
            raise ParameterError(f"sites has shape {sites.shape}, expected ({n},)")
        return sites

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        return _front_positions(X, self._sites(X.shape[1]), self.threshold)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        check_scalar(self.fit_fraction, "fit_fraction", lower=0.0, upper=1.0,
                     upper_inclusive=True)
        positions = self.transform(X)
        first = int(math.floor((1.0 - self.fit_fraction) * len(y)))
        t, pos = y[first:], positions[first:]
        if t.size < 2 or np.isnan(pos).any():
            raise InvalidRunError("the front is undefined on part of the fit window")
        slope, intercept = np.polyfit(t, pos, 1)
        self.speed_ = float(slope)
        self.intercept_ = float(intercept)
        self.rsq_ = _rsq(t, pos, slope, intercept)
        self.positions_ = positions
        self.fit_window_ = (float(t[0]), float(t[-1]))
        self.first_used_ = first
        return self

    def score(self, X, y):
        check_is_fitted(self, "speed_")
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        pos = self.transform(X)
        keep = ~np.isnan(pos)
        return _rsq(y[keep], pos[keep], self.speed_, self.intercept_)


def _rsq(t, pos, slope, intercept):
    resid = pos - (slope * t + intercept)
    ss_tot = float(((pos - pos.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 0.0
    return float(min(1.0, max(0.0, 1.0 - float((resid ** 2).sum()) / ss_tot)))


def support_edge(forcing: np.ndarray, grid) -> int:
    """Outermost initially infected site (largest |label|)."""
    labels = grid.sites[np.asarray(forcing) > 0]
    return int(np.abs(labels).max())


def empirical_speed(trajectory: Trajectory, theta: Optional[float] = None,
                    fit_fraction: float = 0.5, margin: int = DEFAULT_MARGIN) -> FrontTrace:
    """Front speed of a simulated run, fitted on the cumulative infected density.

    Raises :class:`MarginError` if the front is within ``margin`` sites of the
    boundary at any snapshot used by the fit.  Runs whose front never gets past
    the initially infected sites are reported with speed 0 and flag
    ``"no_spread"``; so are runs whose front does not move over the fit window
    (with the fitted speed kept).
    """
    if len(trajectory) < MIN_SNAPSHOTS:
        raise ParameterError(f"need at least {MIN_SNAPSHOTS} snapshots, got {len(trajectory)}")
    p, grid = trajectory.params, trajectory.grid
    if theta is None:
        istar = endemic_equilibrium(p)
        if istar is None:
            theta = 1e-4
        else:
            theta = 0.5 * istar
    theta = check_scalar(theta, "theta", lower=0.0)
    cum = trajectory.cumulative()
    times = trajectory.times
    est = FrontSpeedEstimator(threshold=theta, fit_fraction=fit_fraction, sites=grid.sites)
    positions = est.transform(cum)
    edge = support_edge(trajectory.forcing, grid)
    final = positions[-1]
    if np.isnan(final) or final <= edge:
        return FrontTrace(times, positions, theta, 0.0, 0.0,
                          (float(times[0]), float(times[-1])), "no_spread")
    est.fit(cum, times)
    for i in range(est.first_used_, len(times)):
        if margin_violation(cum[i], grid, theta, margin):
            raise MarginError(f"front within {margin} sites of the boundary at t={times[i]:.6g}")
    # a front that stalls over the whole fit window does not spread either
    flag = "no_spread" if positions[-1] <= positions[est.first_used_] else ""
    return FrontTrace(times, positions, theta, est.speed_, est.rsq_, est.fit_window_, flag)


def wave_back_check(trajectory: Trajectory, p: EpidemicParams,
                    margin: int = DEFAULT_MARGIN) -> float:
    """Susceptible density behind the wave at the final snapshot.

    Read at the innermost site that is ``margin`` sites outside the initially
    infected set, where neither the forcing nor the boundary is felt.
    """
    if wave_back_susceptibles(p) is None:
        raise InvalidRunError("no wave: R0 <= 1")
    lc = critical_lambda(p)
    if lc is not None and p.lam >= lc:
        raise InvalidRunError("no wave: lambda >= lambda_c")
    grid = trajectory.grid
    site = support_edge(trajectory.forcing, grid) + margin
    if grid.distance_to_boundary(site) < margin:
        raise MarginError("grid too small to read the wave back")
    cum = trajectory.cumulative()[-1]
    theta = 0.5 * endemic_equilibrium(p)
    pos = _front_positions(cum[None, :], grid.sites, theta)[0]
    if np.isnan(pos) or pos <= site:
        raise InvalidRunError("the front has not passed the read-out site yet")
    return float(p.s0 * math.exp(-p.tau * cum[grid.index_of(site)]))
