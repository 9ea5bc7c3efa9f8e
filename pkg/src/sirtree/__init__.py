"""SIR epidemics on the integer lattice and on homogeneous trees.

Closed-form thresholds and speeds live in :mod:`sirtree.model` and
:mod:`sirtree.wavespeed`; simulations in :mod:`sirtree.dynamics`; stationary
cumulative profiles in :mod:`sirtree.stationary`.
"""

from .dynamics import (CumulativeState, InitialCondition, RadialGrid, SirState, Trajectory,
                       build_grid, cumulative_initial_state, dt_max, integrate, kpp_rhs,
                       recover_susceptibles, sir_initial_state, sir_rhs, weighted_population)
from .model import (DerivedQuantities, EpidemicParams, critical_lambda, derive, dispersion,
                    endemic_equilibrium, nonlinearity, nonlinearity_slope_at_zero,
                    optimal_lambda, psi, total_infected_limit, wave_back_susceptibles)
from .stationary import (StationaryProfile, Tail, classify_tail, sandwich_check,
                         solve_stationary, supersolution_level)
from .wavespeed import (FrontSpeedEstimator, FrontTrace, SpeedResult, analytic_speed,
                        empirical_speed, lambert_w0, speed_asymptote, wave_back_check)

__version__ = "0.1.0"
