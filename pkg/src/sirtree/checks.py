"""Invariant suite behind ``sirtree check``.

Every check yields a :class:`CheckResult` with status ``pass``, ``fail``,
``invalid`` (the run cannot support the measurement, e.g. the front reached the
boundary) or ``error`` (the integrator aborted).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, List, Optional

import numpy as np

from .config import RunConfig
from .dynamics import (InitialCondition, build_grid, check_margin, cumulative_initial_state,
                       front_threshold, integrate, sir_initial_state)
from .exceptions import InvalidRunError, NumericalAbort, SirTreeError
from .model import (EpidemicParams, critical_lambda, endemic_equilibrium, optimal_lambda,
                    wave_back_susceptibles)
from .stationary import Tail, solve_stationary
from .wavespeed import (analytic_speed, empirical_speed, lambert_w0, speed_quotient,
                        wave_back_check)

PASS, FAIL, INVALID, ERROR = "pass", "fail", "invalid", "error"


@dataclass
class CheckResult:
    name: str
    status: str
    value: Optional[float] = None
    tolerance: Optional[float] = None
    detail: str = ""

    def to_dict(self):
        return asdict(self)


def _verdict(name, value, tol, ok=None, detail=""):
    if ok is None:
        ok = value <= tol
    return CheckResult(name, PASS if ok else FAIL, float(value), tol, detail)


def check_closed_forms(p: EpidemicParams):
    istar, s_inf = endemic_equilibrium(p), wave_back_susceptibles(p)
    if istar is None:
        return None
    a = (p.s0 - s_inf) / p.eta
    b = math.log(p.s0 / s_inf) / p.tau
    spread = max(abs(istar - a), abs(istar - b), abs(a - b))
    return _verdict("closed_form_coherence", spread, 1e-9,
                    detail=f"I*={istar:.12g} (s0-s_inf)/eta={a:.12g} ln(s0/s_inf)/tau={b:.12g}")


def check_speed_optimality(p: EpidemicParams):
    res = analytic_speed(p)
    if res is None or res.c_star == 0.0:
        return None
    g = res.gamma_star
    h = 1e-6 * max(1.0, g)

    def q(x):
        return float(speed_quotient(x, p))

    slope = (q(g + h) - q(g - h)) / (2 * h)
    curv = q(g + h) - 2 * q(g) + q(g - h)
    return _verdict("speed_optimality", abs(slope), 1e-8, ok=abs(slope) <= 1e-8 and curv > 0,
                    detail=f"gamma*={g:.12g} c*={res.c_star:.12g} second difference={curv:.3g}")


def check_critical_endpoint(p: EpidemicParams):
    lc = critical_lambda(p)
    if lc is None:
        return None
    c = analytic_speed(p.with_(lam=lc)).c_star
    return _verdict("critical_endpoint", abs(c), 1e-10, detail=f"lambda_c={lc:.12g}")


def check_speed_map(p: EpidemicParams, count: int = 50):
    if p.r0 <= 1.0:
        return None
    if p.k == 1:
        lams = np.geomspace(1e-2, 1e2, count)
        c = np.array([analytic_speed(p.with_(lam=float(x))).c_star for x in lams])
        worst = float(np.diff(c).min())
        return _verdict("speed_map_shape", worst, 0.0, ok=worst > 0,
                        detail="lattice speed strictly increasing in lambda")
    lc = critical_lambda(p)
    lam0, _ = optimal_lambda(p)
    lams = np.linspace(0, lc, count + 2)[1:-1]
    cell = lams[1] - lams[0]
    c = np.array([analytic_speed(p.with_(lam=float(x))).c_star for x in lams])
    j = int(np.argmax(c))
    d = np.diff(c)
    unimodal = bool((d[:j] > 0).all() and (d[j:] < 0).all())
    off = abs(lams[j] - lam0) / cell
    return _verdict("speed_map_shape", off, 1.0, ok=unimodal and off <= 1.0,
                    detail=f"argmax {lams[j]:.6g} vs lambda_0 {lam0:.6g}; unimodal={unimodal}")


def check_lambert(n: int = 10_000, seed: int = 0):
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-math.exp(-1.0), 1e6, n)
    worst = 0.0
    for x in xs:
        w = lambert_w0(float(x))
        worst = max(worst, abs(w * math.exp(w) - x) / max(1.0, abs(x)))
    return _verdict("lambert_residual", worst, 1e-14)


def check_comparison(p: EpidemicParams, seed: int = 0):
    """Ordered initial data must stay ordered (cumulative form, small grid)."""
    rng = np.random.default_rng(seed)
    grid = build_grid(p.k, 32)
    sites = [s for s in grid.sites if grid.distance_to_boundary(s) >= 10][:5]
    low = {int(s): float(v) for s, v in zip(sites, rng.uniform(0.0, 0.5, len(sites)))}
    high = {s: v + float(rng.uniform(0.0, 0.49)) for s, v in low.items()}
    a = integrate(cumulative_initial_state(InitialCondition(p.s0, low), grid), p, 10.0)
    b = integrate(cumulative_initial_state(InitialCondition(p.s0, high), grid), p, 10.0)
    gap = float((a.fields["cum"] - b.fields["cum"]).max())
    return _verdict("comparison_principle", max(gap, 0.0), 1e-12,
                    detail="max over snapshots and sites of (low - high)")


def _simulation_checks(cfg: RunConfig, p: EpidemicParams) -> List[CheckResult]:
    grid = cfg.grid()
    ic = cfg.initial(grid)
    names = ["positivity", "susceptible_monotone", "cumulative_monotone",
             "population_conservation", "margin_validity"]
    spreading = p.r0 > 1 and (critical_lambda(p) is None or p.lam < critical_lambda(p))
    names += ["empirical_speed", "wave_back"] if spreading else ["no_spread"]
    try:
        traj = integrate(sir_initial_state(ic, grid, cfg.margin), p, cfg.t_end, dt=cfg.dt,
                         snapshot_every=cfg.snapshot_every)
    except NumericalAbort as exc:
        return [CheckResult(n, ERROR, detail=f"integrator error: {exc}") for n in names]

    S, I, R = traj.fields["S"], traj.fields["I"], traj.fields["R"]
    out = [
        _verdict("positivity", max(0.0, -float(min(S.min(), I.min(), R.min()))), 1e-12),
        _verdict("susceptible_monotone", max(0.0, float(np.diff(S, axis=0).max())), 1e-12),
        _verdict("cumulative_monotone", max(0.0, -float(np.diff(R, axis=0).min())), 1e-12),
    ]
    theta = front_threshold(p) if cfg.theta is None else cfg.theta
    cum = traj.cumulative()
    try:
        for i, t in enumerate(traj.times):
            check_margin(cum[i], grid, theta, cfg.margin, t)
        valid, why = True, ""
    except InvalidRunError as exc:
        valid, why = False, str(exc)
    tot = S + I + R
    drift = np.abs((tot - tot[0]) @ grid.weights) / float(tot[0] @ grid.weights)
    if valid:
        out.append(_verdict("population_conservation", float(drift.max()), 1e-8))
        out.append(CheckResult("margin_validity", PASS, detail="front kept its margin"))
    else:
        out.append(CheckResult("population_conservation", INVALID, float(drift.max()), 1e-8,
                               f"invalid run: {why}"))
        out.append(CheckResult("margin_validity", INVALID, detail=why))

    if spreading:
        if not valid:
            out += [CheckResult(n, INVALID, detail=f"invalid run: {why}")
                    for n in ("empirical_speed", "wave_back")]
            return out
        c = analytic_speed(p).c_star
        try:
            trace = empirical_speed(traj, cfg.theta, cfg.fit_fraction, cfg.margin)
            rel = abs(trace.fitted_speed - c) / c
            out.append(_verdict("empirical_speed", rel, 0.05,
                                detail=f"fitted {trace.fitted_speed:.6g} vs analytic {c:.6g}, "
                                       f"R^2={trace.fit_rsq:.6f}, flag={trace.flag or 'none'}"))
        except SirTreeError as exc:
            out.append(CheckResult("empirical_speed", INVALID, detail=str(exc)))
        try:
            s = wave_back_check(traj, p, cfg.margin)
            s_inf = wave_back_susceptibles(p)
            out.append(_verdict("wave_back", abs(s - s_inf), 1e-2,
                                detail=f"S behind the wave {s:.6g} vs s_inf {s_inf:.6g}"))
        except SirTreeError as exc:
            out.append(CheckResult("wave_back", INVALID, detail=str(exc)))
    else:
        try:
            trace = empirical_speed(traj, cfg.theta, cfg.fit_fraction, cfg.margin)
            out.append(CheckResult("no_spread", PASS if trace.no_spread else FAIL,
                                   trace.fitted_speed, None, f"flag={trace.flag or 'none'}"))
        except SirTreeError as exc:
            out.append(CheckResult("no_spread", INVALID, detail=str(exc)))
    return out


def check_stationary(cfg: RunConfig, p: EpidemicParams):
    grid = cfg.grid()
    try:
        prof = solve_stationary(cfg.initial(grid), p, grid, tol=cfg.tol, start=cfg.start,
                                t_max=cfg.t_max, dt=cfg.dt, margin=cfg.margin)
    except NumericalAbort as exc:
        return CheckResult("stationary_tail", ERROR, detail=f"integrator error: {exc}")
    except SirTreeError as exc:
        return CheckResult("stationary_tail", INVALID, detail=str(exc))
    lc = critical_lambda(p)
    expect = Tail.TO_ISTAR if p.r0 > 1 and (lc is None or p.lam < lc) else Tail.TO_ZERO
    return CheckResult("stationary_tail", PASS if prof.tail is expect else FAIL,
                       prof.residual, cfg.tol,
                       f"tail {prof.tail.value}, expected {expect.value}")


def run_checks(cfg: RunConfig) -> List[CheckResult]:
    p = cfg.params()
    quick: List[Callable[[], Optional[CheckResult]]] = [
        lambda: check_closed_forms(p),
        lambda: check_speed_optimality(p),
        lambda: check_critical_endpoint(p),
        lambda: check_speed_map(p),
        check_lambert,
    ]
    results = [r for r in (f() for f in quick) if r is not None]
    try:
        results.append(check_comparison(p))
    except NumericalAbort as exc:
        results.append(CheckResult("comparison_principle", ERROR, detail=str(exc)))
    results += _simulation_checks(cfg, p)
    results.append(check_stationary(cfg, p))
    return results


def exit_status(results) -> int:
    """3 if any integrator error, 1 if any failure or invalid run, else 0."""
    statuses = {r.status for r in results}
    if ERROR in statuses:
        return 3
    if statuses & {FAIL, INVALID}:
        return 1
    return 0
