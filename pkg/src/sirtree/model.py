"""Model constants, the KPP nonlinearity and closed-form derived quantities.

All functions here are pure.  Quantities that only exist in some parameter
regimes (the endemic root, the tree thresholds, ...) are returned as ``None``
outside that regime instead of a sentinel number.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, Optional

import numpy as np

from ._validation import check_scalar
from .exceptions import ConvergenceError, ParameterError

ROOT_XTOL = 1e-12
ROOT_MAXITER = 200


@dataclass(frozen=True)
class EpidemicParams:
    """The five homogeneous model constants.

    Parameters
    ----------
    tau : float
        Contact rate between susceptible and infected individuals.
    eta : float
        Removal rate (inverse mean infectious period).
    lam : float
        Strength of the exchanges of infected individuals along edges.
    s0 : float
        Initial, spatially uniform susceptible density, in (0, 1).
    k : int
        Degree of the homogeneous tree; ``k = 1`` is the integer lattice.
    """

    tau: float
    eta: float
    lam: float
    s0: float
    k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tau", check_scalar(self.tau, "tau", lower=0.0))
        object.__setattr__(self, "eta", check_scalar(self.eta, "eta", lower=0.0))
        object.__setattr__(self, "lam", check_scalar(self.lam, "lambda", lower=0.0))
        object.__setattr__(self, "s0", check_scalar(self.s0, "s0", lower=0.0, upper=1.0))
        object.__setattr__(self, "k", check_scalar(self.k, "k", lower=1, lower_inclusive=True,
                                                   integer=True))

    @property
    def r0(self) -> float:
        return self.s0 * self.tau / self.eta

    @property
    def growth_rate(self) -> float:
        """Linear growth rate ``eta (R0 - 1)`` of the nonlinearity at 0."""
        return self.s0 * self.tau - self.eta

    def with_(self, **changes) -> "EpidemicParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


def bisect(fun: Callable[[float], float], lo: float, hi: float, *,
           xtol: float = ROOT_XTOL, maxiter: int = ROOT_MAXITER,
           expand: Optional[Callable[[float, float], tuple]] = None) -> float:
    """Bisection for a sign change of ``fun`` on ``[lo, hi]``.

    ``expand(lo, hi)`` is called (up to 200 times) while the bracket does not
    change sign and must return a wider bracket.
    """
    flo, fhi = fun(lo), fun(hi)
    tries = 0
    while flo * fhi > 0:
        if expand is None or tries >= 200:
            raise ConvergenceError(f"no sign change on [{lo}, {hi}]")
        lo, hi = expand(lo, hi)
        flo, fhi = fun(lo), fun(hi)
        tries += 1
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid in (lo, hi):
            return mid
        fmid = fun(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _f(v, p: EpidemicParams):
    # no domain check; used inside solvers
    return -p.s0 * np.expm1(-p.tau * v) - p.eta * v


def _scalarize(x):
    return float(x) if np.ndim(x) == 0 else x


def nonlinearity(v, p: EpidemicParams):
    """KPP reaction term ``f(v) = s0 (1 - exp(-tau v)) - eta v`` for ``v >= 0``."""
    arr = np.asarray(v, dtype=float)
    if np.isnan(arr).any() or (arr < 0).any():
        raise ParameterError("nonlinearity is defined for v >= 0 only")
    return _scalarize(_f(arr, p))


def nonlinearity_slope_at_zero(p: EpidemicParams) -> float:
    return p.growth_rate


def endemic_equilibrium(p: EpidemicParams) -> Optional[float]:
    """Unique positive zero of the nonlinearity, or ``None`` when ``R0 <= 1``."""
    if p.r0 <= 1.0:
        return None
    # f increases up to its maximiser and is positive there when R0 > 1
    lo = math.log(p.r0) / p.tau
    hi = p.s0 * p.tau / p.eta + 1.0
    return bisect(lambda v: float(_f(v, p)), lo, hi,
                  expand=lambda a, b: (a, 2.0 * b))


def critical_lambda(p: EpidemicParams) -> Optional[float]:
    """Exchange strength above which the epidemic cannot spread on the tree."""
    if p.k < 2 or p.r0 <= 1.0:
        return None
    return p.growth_rate / (p.k + 1 - 2.0 * math.sqrt(p.k))


def optimal_lambda(p: EpidemicParams) -> Optional[tuple]:
    """``(lambda_0, speed)``: the exchange strength maximising the tree speed and that speed."""
    if p.k < 2 or p.r0 <= 1.0:
        return None
    logk = math.log(p.k)
    return p.growth_rate / ((p.k - 1) * logk), p.growth_rate / logk


def psi(v, p: EpidemicParams):
    """First integral ``v - (eta / tau) ln v`` linking s0 and the wave-back density."""
    arr = np.asarray(v, dtype=float)
    if np.isnan(arr).any() or (arr <= 0).any():
        raise ParameterError("psi is defined for v > 0 only")
    return _scalarize(arr - (p.eta / p.tau) * np.log(arr))


def wave_back_susceptibles(p: EpidemicParams) -> Optional[float]:
    """Susceptible density left behind the epidemic wave.

    The root of ``psi(s) = psi(s0)`` below ``eta / tau``; ``None`` if ``R0 <= 1``.
    """
    if p.r0 <= 1.0:
        return None
    ratio = p.eta / p.tau
    target = p.s0 - ratio * math.log(p.s0)

    # bisect in u = ln s so that tiny roots (large R0) stay resolved
    def g(u):
        return math.exp(u) - ratio * u - target

    hi = math.log(ratio)
    lo = hi - 1.0
    u = bisect(g, lo, hi, xtol=1e-14, expand=lambda a, b: (a - 2.0 * (b - a), b))
    return math.exp(u)


def total_infected_limit(iinf, p: EpidemicParams):
    """Final density of individuals ever infected at a site with cumulative limit ``iinf``."""
    arr = np.asarray(iinf, dtype=float)
    if np.isnan(arr).any() or (arr < 0).any():
        raise ParameterError("total_infected_limit needs iinf >= 0")
    return _scalarize(-p.s0 * np.expm1(-p.tau * arr))


def dispersion(gamma, p: EpidemicParams):
    """Growth rate of the linear mode ``exp(-gamma n)`` around the disease-free state.

    The lattice (``k = 1``) uses the symmetric stencil; trees use
    ``e^gamma - (k + 1) + k e^-gamma``, which agrees with it at ``k = 1``.
    """
    g = np.asarray(gamma, dtype=float)
    if np.isnan(g).any() or (g <= 0).any():
        raise ParameterError("dispersion is defined for gamma > 0 only")
    return _scalarize(p.growth_rate + p.lam * _exchange_symbol(g, p.k))


def _exchange_symbol(g, k):
    if k == 1:
        return np.expm1(-g) + np.expm1(g)
    return np.exp(g) - (k + 1) + k * np.exp(-g)


@dataclass(frozen=True)
class DerivedQuantities:
    r0: float
    istar: Optional[float]
    lambda_c: Optional[float]
    lambda_0: Optional[float]
    max_speed_at_lambda0: Optional[float]
    s_inf: Optional[float]

    def to_dict(self) -> dict:
        return asdict(self)


def derive(p: EpidemicParams) -> DerivedQuantities:
    opt = optimal_lambda(p)
    return DerivedQuantities(
        r0=p.r0,
        istar=endemic_equilibrium(p),
        lambda_c=critical_lambda(p),
        lambda_0=None if opt is None else opt[0],
        max_speed_at_lambda0=None if opt is None else opt[1],
        s_inf=wave_back_susceptibles(p),
    )
