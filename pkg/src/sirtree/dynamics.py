"""Right-hand sides and time integration on truncated lattices and trees.

Sites are stored in flat float arrays.  On the lattice (``k = 1``) the array
holds sites ``-N..N``; on a tree it holds the shells ``1..N`` of the radial
reduction, where shell ``n`` stands for every vertex at distance ``n - 1``
from the root.  Past the last site the ghost value equals the last value, so
nothing flows through the truncation boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from ._validation import check_length, check_scalar
from .exceptions import DimensionError, MarginError, ParameterError, StabilityError
from .model import EpidemicParams, _f, endemic_equilibrium

LATTICE = "lattice"
TREE = "tree"

DEFAULT_MARGIN = 10
MIN_SHELLS = 8
BLOWUP_LEVEL = 10.0


def shell_weights(k: int, n: int) -> np.ndarray:
    """Number of tree vertices represented by each of the shells ``1..n``."""
    k = check_scalar(k, "k", lower=1, lower_inclusive=True, integer=True)
    n = check_scalar(n, "n", lower=1, lower_inclusive=True, integer=True)
    w = np.empty(n)
    w[0] = 1.0
    if n > 1:
        with np.errstate(over="ignore"):
            w[1:] = (k + 1) * np.power(float(k), np.arange(n - 1, dtype=float))
    if not np.isfinite(w).all():
        raise ParameterError(f"shell multiplicities overflow float64 for k={k}, n={n}")
    return w


@dataclass(frozen=True, eq=False)
class RadialGrid:
    k: int
    n_shells: int
    geometry: str
    weights: np.ndarray = field(repr=False)
    sites: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.sites.size

    @property
    def is_lattice(self) -> bool:
        return self.geometry == LATTICE

    def index_of(self, site: int) -> int:
        """Array position of a site label."""
        first = int(self.sites[0])
        pos = int(site) - first
        if not 0 <= pos < self.size:
            raise ParameterError(f"site {site} is outside the grid")
        return pos

    def distance_to_boundary(self, site: int) -> int:
        if self.is_lattice:
            return self.n_shells - abs(int(site))
        return self.n_shells - int(site)


def build_grid(k: int, n_shells: int, geometry: Optional[str] = None) -> RadialGrid:
    """Truncated domain: the two-sided lattice for ``k = 1``, radial shells otherwise.

    ``geometry="tree"`` with ``k = 1`` gives the one-sided radial form of the
    lattice (a half line whose root couples to both neighbours).
    """
    k = check_scalar(k, "k", lower=1, lower_inclusive=True, integer=True)
    n_shells = check_scalar(n_shells, "n_shells", lower=MIN_SHELLS, lower_inclusive=True,
                            integer=True)
    if geometry is None:
        geometry = LATTICE if k == 1 else TREE
    if geometry == LATTICE:
        if k != 1:
            raise ParameterError("the lattice geometry requires k = 1")
        sites = np.arange(-n_shells, n_shells + 1)
        weights = np.ones(sites.size)
    elif geometry == TREE:
        sites = np.arange(1, n_shells + 1)
        weights = shell_weights(k, n_shells)
    else:
        raise ParameterError(f"unknown geometry {geometry!r}")
    sites.setflags(write=False)
    weights.setflags(write=False)
    return RadialGrid(k=k, n_shells=n_shells, geometry=geometry, weights=weights, sites=sites)


@dataclass(frozen=True)
class InitialCondition:
    """Uniform susceptibles plus finitely many infected sites."""

    s0: float
    infected_support: Mapping[int, float]

    def __post_init__(self):
        check_scalar(self.s0, "s0", lower=0.0, upper=1.0)
        if not self.infected_support:
            raise ParameterError("the infected support must be non-empty")
        for site, value in self.infected_support.items():
            check_scalar(value, f"initial infected density at site {site}", lower=0.0, upper=1.0)

    @classmethod
    def block(cls, s0, i0, half_width=10):
        """Constant density ``i0`` on lattice sites ``-half_width..half_width``."""
        return cls(s0, {j: i0 for j in range(-half_width, half_width + 1)})

    @classmethod
    def root(cls, s0, i0):
        return cls(s0, {1: i0})

    @classmethod
    def default_for(cls, grid: RadialGrid, s0, i0):
        return cls.block(s0, i0) if grid.is_lattice else cls.root(s0, i0)

    @property
    def support_edge(self) -> int:
        """Outermost infected site (largest |site| on the lattice)."""
        return max(abs(int(s)) for s in self.infected_support)

    def forcing(self, grid: RadialGrid, margin: int = DEFAULT_MARGIN) -> np.ndarray:
        out = np.zeros(grid.size)
        for site, value in self.infected_support.items():
            if grid.distance_to_boundary(site) < margin:
                raise ParameterError(
                    f"infected site {site} lies within {margin} sites of the boundary")
            out[grid.index_of(site)] = value
        return out


@dataclass(frozen=True, eq=False)
class SirState:
    t: float
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        for name in ("S", "I", "R"):
            arr = np.asarray(getattr(self, name), dtype=float)
            check_length(arr, self.grid.size, name)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True, eq=False)
class CumulativeState:
    t: float
    cum: np.ndarray
    forcing: np.ndarray
    grid: RadialGrid

    def __post_init__(self):
        for name in ("cum", "forcing"):
            arr = np.asarray(getattr(self, name), dtype=float)
            check_length(arr, self.grid.size, name)
            object.__setattr__(self, name, arr)


def sir_initial_state(ic: InitialCondition, grid: RadialGrid, margin=DEFAULT_MARGIN) -> SirState:
    infected = ic.forcing(grid, margin)
    n = grid.size
    return SirState(0.0, np.full(n, ic.s0), infected, np.zeros(n), grid)


def cumulative_initial_state(ic: InitialCondition, grid: RadialGrid,
                             margin=DEFAULT_MARGIN) -> CumulativeState:
    return CumulativeState(0.0, np.zeros(grid.size), ic.forcing(grid, margin), grid)


def exchange(u: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Graph Laplacian of ``u`` with the copy ghost past the last site."""
    out = np.empty_like(u)
    if grid.is_lattice:
        out[1:-1] = u[:-2] - 2.0 * u[1:-1] + u[2:]
        out[0] = u[1] - u[0]
    else:
        k = grid.k
        out[0] = (k + 1) * (u[1] - u[0])
        out[1:-1] = u[:-2] - (k + 1) * u[1:-1] + k * u[2:]
    out[-1] = u[-2] - u[-1]
    return out


def _check_grid(p: EpidemicParams, grid: RadialGrid):
    if p.k != grid.k:
        raise DimensionError(f"params have k={p.k} but the grid has k={grid.k}")


def sir_rhs(state: SirState, p: EpidemicParams):
    """Time derivatives ``(dS, dI, dR)`` of an SIR state."""
    _check_grid(p, state.grid)
    infection = p.tau * state.S * state.I
    dI = infection - p.eta * state.I + p.lam * exchange(state.I, state.grid)
    return -infection, dI, p.eta * state.I


def kpp_rhs(state: CumulativeState, p: EpidemicParams) -> np.ndarray:
    """Time derivative of the cumulative infected density."""
    _check_grid(p, state.grid)
    return _f(state.cum, p) + state.forcing + p.lam * exchange(state.cum, state.grid)


def dt_max(p: EpidemicParams) -> float:
    """Largest step accepted by :func:`integrate`."""
    return 0.2 / (p.eta * max(p.r0, 1.0) + 2.0 * p.lam * (p.k + 1))


def rk4_step(fun: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float, k1=None):
    if k1 is None:
        k1 = fun(y)
    k2 = fun(y + 0.5 * h * k1)
    k3 = fun(y + 0.5 * h * k2)
    k4 = fun(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def snapshot_times(t0: float, t_end: float, every: Optional[float]) -> np.ndarray:
    if every is None or every <= 0:
        return np.array([t0, t_end])
    count = int(math.floor((t_end - t0) / every + 1e-9))
    times = t0 + every * np.arange(count + 1)
    if t_end - times[-1] > 1e-9 * max(1.0, abs(t_end)):
        times = np.append(times, t_end)
    else:
        times[-1] = t_end
    return times


def rk4_integrate(fun, y0, t0, t_end, dt, snapshot_every=None, guard=None):
    """Fixed-step classical RK4 on a flat vector.

    Each step has size ``dt`` except the last one before every snapshot time,
    which is shortened to land on it.  ``guard(t, y, dydt)`` is called before
    each step and may raise to abort.  Returns ``(times, ys)`` at snapshots.
    """
    times = snapshot_times(t0, t_end, snapshot_every)
    ys = np.empty((times.size, np.size(y0)))
    y = np.array(y0, dtype=float)
    ys[0] = y
    t = t0
    for i, target in enumerate(times[1:], start=1):
        while t < target:
            h = min(dt, target - t)
            if target - (t + h) < 1e-12 * dt:
                h = target - t
            k1 = fun(y)
            if guard is not None:
                guard(t, y, k1)
            y = rk4_step(fun, y, h, k1)
            t = target if h == target - t else t + h
        ys[i] = y
    if guard is not None:
        guard(t, y, fun(y))
    return times, ys


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots of one run; ``fields`` maps names to ``(n_snapshots, n_sites)`` arrays."""

    kind: str
    times: np.ndarray
    fields: dict
    grid: RadialGrid
    params: EpidemicParams
    forcing: np.ndarray

    def __len__(self):
        return self.times.size

    def cumulative(self) -> np.ndarray:
        """Cumulative infected density per snapshot (``R / eta`` for SIR runs)."""
        if self.kind == "kpp":
            return self.fields["cum"]
        return self.fields["R"] / self.params.eta

    def state(self, i: int):
        t = float(self.times[i])
        if self.kind == "kpp":
            return CumulativeState(t, self.fields["cum"][i], self.forcing, self.grid)
        return SirState(t, self.fields["S"][i], self.fields["I"][i], self.fields["R"][i],
                        self.grid)

    @property
    def final(self):
        return self.state(len(self) - 1)


def integrate(state, p: EpidemicParams, t_end: float, dt: Optional[float] = None,
              snapshot_every: Optional[float] = None) -> Trajectory:
    """Integrate an SIR or cumulative state up to ``t_end`` with fixed-step RK4.

    Raises
    ------
    StabilityError
        If ``dt`` exceeds :func:`dt_max`, or if a field becomes non-finite or an
        infected density exceeds 10 in magnitude.
    """
    grid = state.grid
    _check_grid(p, grid)
    limit = dt_max(p)
    if dt is None:
        dt = limit
    dt = check_scalar(dt, "dt", lower=0.0)
    if dt > limit * (1 + 1e-12):
        raise StabilityError(f"dt={dt:.6g} exceeds the stability bound dt_max={limit:.6g}")
    if not t_end > state.t:
        raise ParameterError("t_end must be later than the state time")
    n = grid.size
    lam, tau, eta = p.lam, p.tau, p.eta

    if isinstance(state, SirState):
        kind = "sir"
        y0 = np.concatenate([state.S, state.I, state.R])
        forcing = state.I.copy()

        def fun(y):
            S, I = y[:n], y[n:2 * n]
            inf = tau * S * I
            return np.concatenate([-inf, inf - eta * I + lam * exchange(I, grid), eta * I])

        def infected(y, dydt):
            return y[n:2 * n]
    elif isinstance(state, CumulativeState):
        kind = "kpp"
        y0 = state.cum
        forcing = state.forcing

        def fun(y):
            return _f(y, p) + forcing + lam * exchange(y, grid)

        def infected(y, dydt):
            return dydt
    else:
        raise TypeError(f"cannot integrate {type(state).__name__}")

    def guard(t, y, dydt):
        if not (np.isfinite(y).all() and np.isfinite(dydt).all()):
            raise StabilityError(f"non-finite values at t={t:.6g}")
        peak = np.abs(infected(y, dydt)).max()
        if peak > BLOWUP_LEVEL:
            raise StabilityError(f"infected density {peak:.3g} > {BLOWUP_LEVEL} at t={t:.6g}")

    times, ys = rk4_integrate(fun, y0, state.t, t_end, dt, snapshot_every, guard)
    if kind == "sir":
        fields = {"S": ys[:, :n], "I": ys[:, n:2 * n], "R": ys[:, 2 * n:]}
    else:
        fields = {"cum": ys}
    return Trajectory(kind, times, fields, grid, p, np.asarray(forcing, dtype=float))


def recover_susceptibles(cumstate: CumulativeState, p: EpidemicParams) -> np.ndarray:
    return p.s0 * np.exp(-p.tau * cumstate.cum)


def weighted_population(state: SirState) -> float:
    """Total population ``sum_n w_n (S_n + I_n + R_n)`` over the truncated domain."""
    return float(np.dot(state.grid.weights, state.S + state.I + state.R))


def front_position(values: np.ndarray, grid: RadialGrid, theta: float) -> Optional[int]:
    """Largest site label whose value is at least ``theta`` (``None`` if there is none)."""
    hits = np.flatnonzero(np.asarray(values) >= theta)
    if hits.size == 0:
        return None
    return int(grid.sites[hits[-1]])


def margin_violation(values: np.ndarray, grid: RadialGrid, theta: float,
                     margin: int = DEFAULT_MARGIN) -> bool:
    """Whether the ``theta`` level set lies within ``margin`` sites of the boundary."""
    hits = np.flatnonzero(np.asarray(values) >= theta)
    if hits.size == 0:
        return False
    gap = grid.distance_to_boundary(grid.sites[hits[-1]])
    if grid.is_lattice:
        gap = min(gap, grid.distance_to_boundary(grid.sites[hits[0]]))
    return gap < margin


def check_margin(values, grid, theta, margin=DEFAULT_MARGIN, t=None):
    if margin_violation(values, grid, theta, margin):
        when = "" if t is None else f" at t={t:.6g}"
        raise MarginError(f"front within {margin} sites of the boundary{when}")


def front_threshold(p: EpidemicParams) -> float:
    """Level used to locate fronts: half the endemic plateau, or 1e-4 without one."""
    istar = endemic_equilibrium(p)
    return 1e-4 if istar is None else 0.5 * istar
